// Copyright 2026 The vista-cpp Authors
//
// Licensed under the Apache License, Version 2.0 (the "License");
// you may not use this file except in compliance with the License.
// You may obtain a copy of the License at
//
//     http://www.apache.org/licenses/LICENSE-2.0
//
// Unless required by applicable law or agreed to in writing, software
// distributed under the License is distributed on an "AS IS" BASIS,
// WITHOUT WARRANTIES OR CONDITIONS OF ANY KIND, either express or implied.
// See the License for the specific language governing permissions and
// limitations under the License.

#ifndef VISTA__TRAINING__OPTIM_HPP_
#define VISTA__TRAINING__OPTIM_HPP_

#include <cmath>
#include <cstdint>
#include <limits>
#include <string>
#include <vector>

#include "vista/common/error.hpp"
#include "vista/numerics/param_store.hpp"

namespace vista::training
{

using nn::ParamStore;

struct AdamConfig
{
  double beta1 = 0.9;
  double beta2 = 0.999;
  double eps = 1e-8;
};

/// Adam with bias correction, reading gradients from the store's grad slots.
class Adam
{
public:
  Adam() = default;
  Adam(const ParamStore & store, AdamConfig cfg) : cfg_(cfg)
  {
    if (!(cfg.beta1 >= 0.0 && cfg.beta1 < 1.0 && cfg.beta2 >= 0.0 && cfg.beta2 < 1.0 && cfg.eps > 0.0)) {
      throw ConfigError("adam: betas must lie in [0, 1) and eps must be positive");
    }
    for (const auto & e : store.entries()) {
      m_.emplace_back(e.value.shape(), 0.0);
      v_.emplace_back(e.value.shape(), 0.0);
    }
  }

  void step(ParamStore & store, double lr)
  {
    if (store.size() != m_.size()) throw ShapeError("adam: parameter count changed");
    ++t_;
    const double c1 = 1.0 - std::pow(cfg_.beta1, static_cast<double>(t_));
    const double c2 = 1.0 - std::pow(cfg_.beta2, static_cast<double>(t_));
    for (std::size_t k = 0; k < m_.size(); ++k) {
      auto & e = store.entries()[k];
      auto & m = m_[k].vec();
      auto & v = v_[k].vec();
      auto & x = e.value.vec();
      const auto & g = e.grad.vec();
      for (std::size_t i = 0; i < x.size(); ++i) {
        m[i] = cfg_.beta1 * m[i] + (1.0 - cfg_.beta1) * g[i];
        v[i] = cfg_.beta2 * v[i] + (1.0 - cfg_.beta2) * g[i] * g[i];
        x[i] -= lr * (m[i] / c1) / (std::sqrt(v[i] / c2) + cfg_.eps);
      }
    }
  }

  std::uint64_t steps() const noexcept { return t_; }
  const std::vector<nn::Tensor<double>> & first_moment() const noexcept { return m_; }
  const std::vector<nn::Tensor<double>> & second_moment() const noexcept { return v_; }

  /// Restores state saved from a run on an identically laid out store.
  void restore(std::vector<nn::Tensor<double>> m, std::vector<nn::Tensor<double>> v, std::uint64_t t)
  {
    if (m.size() != m_.size() || v.size() != v_.size()) throw CheckpointError("adam: state size mismatch");
    for (std::size_t k = 0; k < m.size(); ++k) {
      if (m[k].shape() != m_[k].shape() || v[k].shape() != v_[k].shape()) {
        throw CheckpointError("adam: state shape mismatch at entry " + std::to_string(k));
      }
    }
    m_ = std::move(m);
    v_ = std::move(v);
    t_ = t;
  }

private:
  AdamConfig cfg_;
  std::vector<nn::Tensor<double>> m_, v_;
  std::uint64_t t_ = 0;
};

/**
 * @brief Halves the learning rate after `patience` epochs without improvement.
 *
 * Epochs are 1-based. The first observation always improves. A halving resets
 * the count, so the next one needs another `patience` non-improving epochs.
 */
class PlateauScheduler
{
public:
  PlateauScheduler() = default;
  PlateauScheduler(double lr, std::size_t patience, double factor = 0.5)
  : lr_(lr), patience_(patience), factor_(factor)
  {
    if (!(lr > 0.0)) throw ConfigError("scheduler: lr must be positive");
    if (patience == 0) throw ConfigError("scheduler: patience must be positive");
  }

  /// Records the validation value of `epoch`; true when the rate was just cut.
  bool observe(std::size_t epoch, double value)
  {
    if (value < best_) {
      best_ = value;
      anchor_ = epoch;
      return false;
    }
    if (epoch - anchor_ >= patience_) {
      lr_ *= factor_;
      anchor_ = epoch;
      return true;
    }
    return false;
  }

  double lr() const noexcept { return lr_; }
  double best() const noexcept { return best_; }
  std::size_t anchor() const noexcept { return anchor_; }
  void restore(double lr, double best, std::size_t anchor)
  {
    lr_ = lr;
    best_ = best;
    anchor_ = anchor;
  }

private:
  double lr_ = 1e-3;
  std::size_t patience_ = 30;
  double factor_ = 0.5;
  double best_ = std::numeric_limits<double>::infinity();
  std::size_t anchor_ = 0;
};

/// Signals a stop `patience` epochs after the best validation value.
class EarlyStopper
{
public:
  EarlyStopper() = default;
  explicit EarlyStopper(std::size_t patience) : patience_(patience)
  {
    if (patience == 0) throw ConfigError("early stopping: patience must be positive");
  }

  /// Returns true when `epoch` improved on the best value so far.
  bool observe(std::size_t epoch, double value)
  {
    if (value < best_) {
      best_ = value;
      best_epoch_ = epoch;
      return true;
    }
    return false;
  }

  bool should_stop(std::size_t epoch) const { return best_epoch_ > 0 && epoch - best_epoch_ >= patience_; }

  double best() const noexcept { return best_; }
  std::size_t best_epoch() const noexcept { return best_epoch_; }
  void restore(double best, std::size_t best_epoch)
  {
    best_ = best;
    best_epoch_ = best_epoch;
  }

private:
  std::size_t patience_ = 75;
  double best_ = std::numeric_limits<double>::infinity();
  std::size_t best_epoch_ = 0;
};

}  // namespace vista::training

#endif  // VISTA__TRAINING__OPTIM_HPP_

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

#ifndef VISTA__TRAINING__TRAINER_HPP_
#define VISTA__TRAINING__TRAINER_HPP_

#include <cmath>
#include <cstdint>
#include <filesystem>
#include <functional>
#include <limits>
#include <numeric>
#include <sstream>
#include <string>
#include <vector>

#include "vista/common/error.hpp"
#include "vista/common/io.hpp"
#include "vista/common/parallel.hpp"
#include "vista/common/rng.hpp"
#include "vista/metrics/metrics.hpp"
#include "vista/numerics/param_store.hpp"
#include "vista/tpm/predict.hpp"
#include "vista/training/loss.hpp"
#include "vista/training/optim.hpp"

namespace vista::training
{

struct TrainConfig
{
  double lr = 1e-3;
  LossWeights weights;
  std::size_t max_epochs = 500;
  std::size_t plateau_patience = 30;
  std::size_t early_stop_patience = 75;
  std::size_t batch_size = 1;
  std::uint64_t seed = 0;
  AdamConfig adam;
  /// Validate every `val_interval` epochs (and always at epoch 1).
  std::size_t val_interval = 1;
  std::size_t val_k = 20;

  void validate() const
  {
    if (!(lr > 0.0) || !std::isfinite(lr)) throw ConfigError("train: lr must be positive");
    if (!(weights.goal >= 0.0) || !(weights.traj >= 0.0)) {
      throw ConfigError("train: loss weights must be >= 0");
    }
    if (max_epochs == 0 || plateau_patience == 0 || early_stop_patience == 0 || batch_size == 0 ||
        val_interval == 0 || val_k == 0) {
      throw ConfigError("train: epoch, patience, batch and validation counts must be positive");
    }
    AdamConfig a = adam;
    if (!(a.beta1 >= 0.0 && a.beta1 < 1.0 && a.beta2 >= 0.0 && a.beta2 < 1.0 && a.eps > 0.0)) {
      throw ConfigError("train: adam betas must lie in [0, 1) and eps must be positive");
    }
  }
};

struct EpochRecord
{
  std::size_t epoch = 0;
  double goal_loss = 0.0;
  double traj_loss = 0.0;
  double total = 0.0;
  /// NaN on epochs without validation.
  double val_ade = std::numeric_limits<double>::quiet_NaN();
  double val_minade = std::numeric_limits<double>::quiet_NaN();
  double lr = 0.0;  ///< rate used for this epoch's updates

  bool validated() const { return !std::isnan(val_ade); }
};

struct TrainReport
{
  std::vector<EpochRecord> epochs;
  std::string stop_reason;
  std::size_t best_epoch = 0;
  double best_val_minade = std::numeric_limits<double>::infinity();

  std::string to_csv() const
  {
    std::string out = "epoch,goal_loss,traj_loss,total,val_ade,val_minade,lr\n";
    auto opt = [](double v) { return std::isnan(v) ? std::string() : format_double(v); };
    for (const auto & e : epochs) {
      out += std::to_string(e.epoch) + "," + format_double(e.goal_loss) + "," +
             format_double(e.traj_loss) + "," + format_double(e.total) + "," + opt(e.val_ade) + "," +
             opt(e.val_minade) + "," + format_double(e.lr) + "\n";
    }
    return out;
  }

  static TrainReport from_csv(const std::string & text)
  {
    TrainReport r;
    std::istringstream in(text);
    std::string line;
    std::getline(in, line);
    while (std::getline(in, line)) {
      if (line.empty()) continue;
      std::vector<std::string> f;
      std::stringstream ss(line);
      std::string cell;
      while (std::getline(ss, cell, ',')) f.push_back(cell);
      while (f.size() < 7) f.emplace_back();
      EpochRecord e;
      std::int64_t epoch = 0;
      auto num = [](const std::string & s, double & v) {
        if (s.empty()) return true;
        return parse_number(std::string_view(s), v);
      };
      if (!parse_integral(f[0], epoch) || !num(f[1], e.goal_loss) || !num(f[2], e.traj_loss) ||
          !num(f[3], e.total) || !num(f[4], e.val_ade) || !num(f[5], e.val_minade) || !num(f[6], e.lr)) {
        throw CheckpointError("train state: malformed report line '" + line + "'");
      }
      e.epoch = static_cast<std::size_t>(epoch);
      r.epochs.push_back(e);
    }
    return r;
  }

  std::string summary() const
  {
    std::ostringstream os;
    os << "epochs: " << epochs.size() << "  stop: " << stop_reason;
    if (!epochs.empty()) {
      const auto & f = epochs.front();
      const auto & l = epochs.back();
      os << "  loss: " << f.total << " -> " << l.total << "  lr: " << l.lr;
    }
    if (best_epoch) os << "  best val minADE " << best_val_minade << " @ epoch " << best_epoch;
    return os.str();
  }
};

struct ValidationScores
{
  double ade = 0.0;
  double min_ade = 0.0;
};

/**
 * @brief Validation ADE (ground-truth-goal rollout, k = 1) and minADE over
 * `k` test-time-sampled goals with a fixed seed.
 */
inline ValidationScores validation_scores(ParamStore & store, const tpm::ModelConfig & cfg,
  const std::vector<Scene> & windows, std::size_t k, std::uint64_t seed)
{
  if (windows.empty()) throw DataError("validation: no windows");
  std::vector<double> ade_sum(windows.size()), min_sum(windows.size());
  std::vector<std::size_t> agents(windows.size());
  const std::size_t kk = cfg.use_goal ? k : 1;
  for (std::size_t w = 0; w < windows.size(); ++w) {
    const Scene & s = windows[w];
    std::vector<Trajectory> gt;
    for (std::size_t i = 0; i < s.n_agents(); ++i) gt.push_back(s.future(i, cfg.t_obs()));
    {
      nn::Tape<double> tape;
      nn::BoundParams<double> p(tape, store, false);
      auto r = tpm::rollout(p, cfg, s, ground_truth_goals(s, cfg), false);
      metrics::EvalInput e;
      e.gt = gt;
      for (auto & t : r.trajectories) e.pred.push_back({std::move(t)});
      ade_sum[w] = metrics::ade(e) * static_cast<double>(gt.size());
    }
    const auto set = tpm::predict_scene<double>(store, cfg, s, kk, seed, false);
    metrics::EvalInput e;
    e.gt = gt;
    e.pred.assign(gt.size(), {});
    for (std::size_t j = 0; j < set.k(); ++j)
      for (std::size_t i = 0; i < gt.size(); ++i) e.pred[i].push_back(set.samples[j][i]);
    min_sum[w] = metrics::min_ade(e) * static_cast<double>(gt.size());
    agents[w] = gt.size();
  }
  const double n = static_cast<double>(std::accumulate(agents.begin(), agents.end(), std::size_t{0}));
  return {std::accumulate(ade_sum.begin(), ade_sum.end(), 0.0) / n,
          std::accumulate(min_sum.begin(), min_sum.end(), 0.0) / n};
}

struct TrainHooks
{
  /// Called after every epoch; returning false stops training.
  std::function<bool(const EpochRecord &, const ParamStore &)> on_epoch;
  /// Replaces the built-in validation when set.
  std::function<ValidationScores(ParamStore &, std::size_t epoch)> validate;
};

/**
 * @brief Joint optimisation of every model parameter with Adam.
 *
 * Deterministic for a given seed: the epoch order comes from a stream derived
 * from (seed, epoch), window gradients of a batch land in separate buffers and
 * are reduced in batch order.
 */
class Trainer
{
public:
  Trainer(tpm::ModelConfig model, TrainConfig cfg, ParamStore init)
  : model_(std::move(model)), cfg_(cfg), params_(std::move(init)), best_(params_),
    adam_(params_, cfg.adam), sched_(cfg.lr, cfg.plateau_patience), stopper_(cfg.early_stop_patience)
  {
    model_.validate();
    cfg_.validate();
  }

  const ParamStore & params() const noexcept { return params_; }
  /// Parameters at the best validation minADE so far (the initial ones before any validation).
  const ParamStore & best() const noexcept { return best_; }
  const TrainReport & report() const noexcept { return report_; }
  std::size_t epoch() const noexcept { return epoch_; }
  double lr() const noexcept { return sched_.lr(); }
  const tpm::ModelConfig & model() const noexcept { return model_; }
  const TrainConfig & config() const noexcept { return cfg_; }

  /// Runs until a stop condition; resumes from the last completed epoch.
  const TrainReport & run(const std::vector<Scene> & train, const std::vector<Scene> & val,
    const TrainHooks & hooks = {})
  {
    if (train.empty()) throw DataError("train: no training windows");
    if (val.empty() && !hooks.validate) throw DataError("train: no validation windows");
    report_.stop_reason.clear();
    while (epoch_ < cfg_.max_epochs) {
      const std::size_t epoch = epoch_ + 1;
      EpochRecord rec;
      rec.epoch = epoch;
      rec.lr = sched_.lr();
      if (!train_epoch(train, epoch, rec)) {
        epoch_ = epoch;
        report_.epochs.push_back(rec);
        report_.stop_reason = "diverged";
        return report_;
      }
      if (epoch == 1 || epoch % cfg_.val_interval == 0) {
        ValidationScores v;
        try {
          v = hooks.validate ? hooks.validate(params_, epoch)
                             : validation_scores(params_, model_, val, cfg_.val_k, validation_seed());
        } catch (const DivergenceError &) {
          v = {std::numeric_limits<double>::quiet_NaN(), std::numeric_limits<double>::quiet_NaN()};
        }
        rec.val_ade = v.ade;
        rec.val_minade = v.min_ade;
        if (!std::isfinite(v.ade) || !std::isfinite(v.min_ade)) {
          epoch_ = epoch;
          report_.epochs.push_back(rec);
          report_.stop_reason = "diverged";
          return report_;
        }
        sched_.observe(epoch, v.ade);
        if (stopper_.observe(epoch, v.min_ade)) {
          best_ = params_;
          report_.best_epoch = epoch;
          report_.best_val_minade = v.min_ade;
        }
      }
      epoch_ = epoch;
      report_.epochs.push_back(rec);
      if (stopper_.should_stop(epoch)) {
        report_.stop_reason = "early_stop";
        return report_;
      }
      if (hooks.on_epoch && !hooks.on_epoch(rec, params_)) {
        report_.stop_reason = "hook";
        return report_;
      }
    }
    report_.stop_reason = "max_epochs";
    return report_;
  }

  /// Mean joint loss of `windows` under the current parameters, without updates.
  JointLoss evaluate_loss(const std::vector<Scene> & windows)
  {
    JointLoss sum;
    for (const auto & s : windows) {
      nn::Tape<double> tape;
      nn::BoundParams<double> p(tape, params_, false);
      const auto l = window_loss(p, model_, s, cfg_.weights).values;
      sum.total += l.total;
      sum.goal += l.goal;
      sum.traj += l.traj;
    }
    const double n = static_cast<double>(windows.size());
    return {sum.total / n, sum.goal / n, sum.traj / n};
  }

  // Train state: one ParamStore holding params, best params and Adam moments
  // under prefixed names, with the scalar state in metadata.

  ParamStore state() const
  {
    ParamStore s;
    s.set_version("vista-train-1");
    for (const auto & e : params_.entries()) s.add("param/" + e.name, e.value);
    for (const auto & e : best_.entries()) s.add("best/" + e.name, e.value);
    for (std::size_t k = 0; k < params_.size(); ++k) {
      s.add("adam.m/" + params_.entries()[k].name, adam_.first_moment()[k]);
      s.add("adam.v/" + params_.entries()[k].name, adam_.second_moment()[k]);
    }
    auto & m = s.meta();
    m = params_.meta();
    m["train.epoch"] = std::to_string(epoch_);
    m["train.adam_steps"] = std::to_string(adam_.steps());
    m["train.lr"] = format_double(sched_.lr());
    m["train.sched_best"] = format_double(sched_.best());
    m["train.sched_anchor"] = std::to_string(sched_.anchor());
    m["train.stop_best"] = format_double(stopper_.best());
    m["train.stop_best_epoch"] = std::to_string(stopper_.best_epoch());
    m["train.report"] = report_.to_csv();
    return s;
  }

  void save_state(const std::filesystem::path & path) const { nn::save_checkpoint(state(), path); }

  /// Rebuilds a trainer from `state()`. The parameter layout must match `model`.
  static Trainer from_state(const ParamStore & s, tpm::ModelConfig model, TrainConfig cfg)
  {
    if (s.version() != "vista-train-1") {
      throw CheckpointError("train state: unexpected version '" + s.version() + "'");
    }
    ParamStore params, best;
    std::vector<nn::Tensor<double>> m, v;
    for (const auto & e : s.entries()) {
      const auto slash = e.name.find('/');
      if (slash == std::string::npos) throw CheckpointError("train state: stray entry '" + e.name + "'");
      const std::string group = e.name.substr(0, slash), name = e.name.substr(slash + 1);
      if (group == "param") params.add(name, e.value);
      else if (group == "best") best.add(name, e.value);
      else if (group == "adam.m") m.push_back(e.value);
      else if (group == "adam.v") v.push_back(e.value);
      else throw CheckpointError("train state: stray entry '" + e.name + "'");
    }
    auto meta = s.meta();
    auto take = [&](const std::string & key) {
      auto it = meta.find(key);
      if (it == meta.end()) throw CheckpointError("train state: missing '" + key + "'");
      std::string value = it->second;
      meta.erase(it);
      return value;
    };
    auto to_u = [](const std::string & t) {
      std::uint64_t x = 0;
      if (!parse_number(std::string_view(t), x)) throw CheckpointError("train state: bad integer '" + t + "'");
      return x;
    };
    auto to_d = [](const std::string & t) {
      double x = 0;
      if (!parse_number(std::string_view(t), x)) throw CheckpointError("train state: bad number '" + t + "'");
      return x;
    };
    const auto epoch = to_u(take("train.epoch"));
    const auto steps = to_u(take("train.adam_steps"));
    const double lr = to_d(take("train.lr"));
    const double sched_best = to_d(take("train.sched_best"));
    const auto anchor = to_u(take("train.sched_anchor"));
    const double stop_best = to_d(take("train.stop_best"));
    const auto best_epoch = to_u(take("train.stop_best_epoch"));
    TrainReport report = TrainReport::from_csv(take("train.report"));
    params.meta() = meta;
    best.meta() = meta;

    Trainer t(std::move(model), cfg, std::move(params));
    t.best_ = std::move(best);
    t.adam_.restore(std::move(m), std::move(v), steps);
    t.sched_.restore(lr, sched_best, anchor);
    t.stopper_.restore(stop_best, best_epoch);
    t.epoch_ = epoch;
    report.best_epoch = best_epoch;
    report.best_val_minade = stop_best;
    t.report_ = std::move(report);
    return t;
  }

  static Trainer load_state(const std::filesystem::path & path, tpm::ModelConfig model, TrainConfig cfg)
  {
    return from_state(nn::load_checkpoint(path), std::move(model), cfg);
  }

private:
  std::uint64_t validation_seed() const { return Rng::derive(cfg_.seed, 0x7661ULL).next_u64(); }

  /// One pass over `train`. False when the loss or a gradient went non-finite.
  bool train_epoch(const std::vector<Scene> & train, std::size_t epoch, EpochRecord & rec)
  {
    std::vector<std::size_t> order(train.size());
    std::iota(order.begin(), order.end(), std::size_t{0});
    Rng rng = Rng::derive(cfg_.seed, epoch);
    rng.shuffle(order);

    double goal = 0.0, traj = 0.0, total = 0.0;
    for (std::size_t b0 = 0; b0 < order.size(); b0 += cfg_.batch_size) {
      const std::size_t B = std::min(cfg_.batch_size, order.size() - b0);
      std::vector<std::vector<nn::Tensor<double>>> grads(B);
      std::vector<JointLoss> losses(B);
      std::vector<char> failed(B, 0);
      parallel_for(B, [&](std::size_t b) {
        auto & g = grads[b];
        g.reserve(params_.size());
        for (const auto & e : params_.entries()) g.emplace_back(e.value.shape(), 0.0);
        try {
          nn::Tape<double> tape;
          nn::BoundParams<double> p(tape, params_, g);
          auto l = window_loss(p, model_, train[order[b0 + b]], cfg_.weights);
          losses[b] = l.values;
          if (!std::isfinite(l.values.total)) {
            failed[b] = 1;
            return;
          }
          tape.backward(l.total);
        } catch (const DivergenceError &) {
          failed[b] = 1;
        }
      });
      params_.zero_grad();
      const double inv = 1.0 / static_cast<double>(B);
      for (std::size_t b = 0; b < B; ++b) {
        goal += losses[b].goal;
        traj += losses[b].traj;
        total += losses[b].total;
        if (failed[b]) {
          rec.goal_loss = rec.traj_loss = rec.total = std::numeric_limits<double>::quiet_NaN();
          return false;
        }
        for (std::size_t k = 0; k < params_.size(); ++k) {
          auto & dst = params_.entries()[k].grad.vec();
          const auto & src = grads[b][k].vec();
          for (std::size_t i = 0; i < dst.size(); ++i) dst[i] += inv * src[i];
        }
      }
      for (const auto & e : params_.entries()) {
        if (!e.grad.all_finite()) {
          rec.goal_loss = rec.traj_loss = rec.total = std::numeric_limits<double>::quiet_NaN();
          return false;
        }
      }
      adam_.step(params_, sched_.lr());
    }
    const double n = static_cast<double>(train.size());
    rec.goal_loss = goal / n;
    rec.traj_loss = traj / n;
    rec.total = total / n;
    return true;
  }

  tpm::ModelConfig model_;
  TrainConfig cfg_;
  ParamStore params_;
  ParamStore best_;
  Adam adam_;
  PlateauScheduler sched_;
  EarlyStopper stopper_;
  std::size_t epoch_ = 0;
  TrainReport report_;
};

}  // namespace vista::training

#endif  // VISTA__TRAINING__TRAINER_HPP_

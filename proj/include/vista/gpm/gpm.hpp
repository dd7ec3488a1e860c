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

#ifndef VISTA__GPM__GPM_HPP_
#define VISTA__GPM__GPM_HPP_

#include <algorithm>
#include <cmath>
#include <optional>
#include <string>
#include <vector>

#include "vista/common/error.hpp"
#include "vista/common/rng.hpp"
#include "vista/data/raster.hpp"
#include "vista/data/types.hpp"
#include "vista/numerics/param_store.hpp"
#include "vista/numerics/tape.hpp"

namespace vista::gpm
{

using nn::BoundParams;
using nn::ParamStore;
using nn::Shape;
using nn::Tape;
using nn::Tensor;
using nn::Var;

struct GpmConfig
{
  GridSpec grid{32, 32, 1.0};
  std::size_t raster_classes = 3;
  std::size_t t_obs = 8;
  std::size_t width1 = 16;         ///< channels at full resolution
  std::size_t width2 = 32;         ///< channels at 1/2 and 1/4 resolution
  double trajectory_sigma = 1.0;   ///< cells, input encoding
  double target_sigma = 1.5;       ///< cells, BCE target
  double temperature = 0.1;        ///< softargmax over logits
  std::size_t n_raw = 2000;
  std::size_t k = 20;

  std::size_t in_channels() const { return raster_classes + t_obs; }

  void validate() const
  {
    if (grid.height % 4 || grid.width % 4 || grid.height == 0 || grid.width == 0) {
      throw ConfigError("gpm: grid " + std::to_string(grid.height) + "x" +
                        std::to_string(grid.width) + " must have both sides divisible by 4");
    }
    if (!(grid.cell_size > 0.0)) throw ConfigError("gpm: cell_size must be positive");
    if (raster_classes == 0 || t_obs == 0 || width1 == 0 || width2 == 0) {
      throw ConfigError("gpm: raster_classes, t_obs and channel widths must be positive");
    }
    if (!(trajectory_sigma > 0.0) || !(target_sigma > 0.0)) {
      throw ConfigError("gpm: sigmas must be positive");
    }
    if (!(temperature > 0.0)) throw ConfigError("gpm: temperature must be positive");
    if (k == 0 || n_raw < k) throw ConfigError("gpm: need n_raw >= k >= 1");
  }
};

/// Registers the encoder-decoder weights under "gpm.".
inline void add_gpm_params(ParamStore & store, const GpmConfig & cfg, Rng & rng)
{
  const std::size_t c0 = cfg.in_channels(), c1 = cfg.width1, c2 = cfg.width2;
  auto conv = [&](const std::string & name, std::size_t out, std::size_t in, std::size_t k) {
    // He-uniform for relu layers.
    store.add_uniform(name + ".w", Shape{out, in, k, k}, in * k * k, 0, rng);
    store.add_zeros(name + ".b", Shape{out});
  };
  conv("gpm.enc1", c1, c0, 3);
  conv("gpm.enc2", c2, c1, 3);
  conv("gpm.mid", c2, c2, 3);
  conv("gpm.dec2", c2, 2 * c2, 3);
  conv("gpm.dec1", c1, c2 + c1, 3);
  store.add_uniform("gpm.head.w", Shape{1, c1, 1, 1}, c1, 1, rng);
  store.add_zeros("gpm.head.b", Shape{1});
}

/**
 * @brief Stacks the raster classes and one peak-normalised Gaussian blob per
 * observed position into a [D + T_obs, H, W] tensor.
 *
 * A missing raster is replaced by a uniform class-0 raster.
 */
template <class Real>
Tensor<Real> encode_input(const GpmConfig & cfg, const Trajectory & obs,
  const std::optional<SceneRaster> & raster)
{
  const std::size_t H = cfg.grid.height, W = cfg.grid.width, D = cfg.raster_classes;
  if (obs.size() != cfg.t_obs) {
    throw ShapeError("gpm: expected " + std::to_string(cfg.t_obs) + " observed positions, got " +
                     std::to_string(obs.size()));
  }
  if (raster && (raster->height != H || raster->width != W)) {
    throw ConfigError("gpm: raster is " + std::to_string(raster->height) + "x" +
                      std::to_string(raster->width) + " but the configured grid is " +
                      std::to_string(H) + "x" + std::to_string(W));
  }
  if (raster && raster->classes != D) {
    throw ConfigError("gpm: raster has " + std::to_string(raster->classes) +
                      " classes, model expects " + std::to_string(D));
  }
  Tensor<Real> x(Shape{D + cfg.t_obs, H, W});
  for (std::size_t r = 0; r < H; ++r)
    for (std::size_t c = 0; c < W; ++c)
      for (std::size_t d = 0; d < D; ++d)
        x[(d * H + r) * W + c] =
          static_cast<Real>(raster ? raster->at(r, c, d) : (d == 0 ? 1.0 : 0.0));
  for (std::size_t t = 0; t < cfg.t_obs; ++t) {
    const Heatmap blob = gaussian_peak_heatmap(cfg.grid.to_grid(obs[t]), H, W, cfg.trajectory_sigma);
    for (std::size_t i = 0; i < H * W; ++i) x[(D + t) * H * W + i] = static_cast<Real>(blob.values[i]);
  }
  return x;
}

/// Encoder-decoder over an encoded input; returns goal logits [H, W].
template <class Real>
Var<Real> gpm_logits(BoundParams<Real> & p, const GpmConfig & cfg, Var<Real> x)
{
  using nn::avg_pool2;
  using nn::concat;
  using nn::conv2d;
  using nn::relu;
  using nn::upsample2;
  auto block = [&](const std::string & name, Var<Real> in) {
    return relu(conv2d(in, p(name + ".w"), p(name + ".b")));
  };
  Var<Real> e1 = block("gpm.enc1", x);
  Var<Real> e2 = block("gpm.enc2", avg_pool2(e1));
  Var<Real> mid = block("gpm.mid", avg_pool2(e2));
  Var<Real> d2 = block("gpm.dec2", concat(std::vector<Var<Real>>{upsample2(mid), e2}, 0));
  Var<Real> d1 = block("gpm.dec1", concat(std::vector<Var<Real>>{upsample2(d2), e1}, 0));
  Var<Real> out = conv2d(d1, p("gpm.head.w"), p("gpm.head.b"));
  return nn::reshape(out, Shape{cfg.grid.height, cfg.grid.width});
}

template <class Real>
Var<Real> gpm_forward(BoundParams<Real> & p, const GpmConfig & cfg, const Trajectory & obs,
  const std::optional<SceneRaster> & raster)
{
  Tape<Real> & tape = p.tape();
  return gpm_logits(p, cfg, tape.constant(encode_input<Real>(cfg, obs, raster)));
}

/// Per-cell goal probability sigmoid(logits).
template <class Real>
Heatmap to_probabilities(const Var<Real> & logits)
{
  Heatmap h(logits.dim(0), logits.dim(1));
  const auto z = logits.value();
  for (std::size_t i = 0; i < h.values.size(); ++i) {
    h.values[i] = nn::detail::sigmoid(static_cast<double>(z[i]));
  }
  return h;
}

/// BCE target: peak-normalised Gaussian around the goal (grid coordinates).
template <class Real>
Tensor<Real> goal_target(const GpmConfig & cfg, const Vec2 & goal_grid)
{
  const Heatmap t =
    gaussian_peak_heatmap(goal_grid, cfg.grid.height, cfg.grid.width, cfg.target_sigma);
  return Tensor<Real>(Shape{cfg.grid.height, cfg.grid.width},
    std::vector<Real>(t.values.begin(), t.values.end()));
}

/// Mean per-cell BCE of goal logits against the Gaussian target of `goal` (scene units).
template <class Real>
Var<Real> goal_loss_logits(const GpmConfig & cfg, Var<Real> logits, const Vec2 & goal)
{
  if (!goal.finite()) throw DataError("goal loss: non-finite goal");
  return nn::bce_with_logits(logits, goal_target<Real>(cfg, cfg.grid.to_grid(goal)));
}

/**
 * @brief Mean per-cell BCE of a probability heatmap against the peak-normalised
 * Gaussian at `goal_grid` (grid coordinates).
 */
inline double goal_loss(const Heatmap & pred, const Vec2 & goal_grid, double sigma)
{
  if (!goal_grid.finite()) throw DataError("goal loss: non-finite goal");
  const Heatmap t = gaussian_peak_heatmap(goal_grid, pred.height, pred.width, sigma);
  double total = 0.0;
  for (std::size_t i = 0; i < t.values.size(); ++i) {
    const double p = std::clamp(pred.values[i], 1e-12, 1.0 - 1e-12);
    total -= t.values[i] * std::log(p) + (1.0 - t.values[i]) * std::log(1.0 - p);
  }
  return total / static_cast<double>(t.values.size());
}

}  // namespace vista::gpm

#endif  // VISTA__GPM__GPM_HPP_

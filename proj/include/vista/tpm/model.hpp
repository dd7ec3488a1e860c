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

#ifndef VISTA__TPM__MODEL_HPP_
#define VISTA__TPM__MODEL_HPP_

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <limits>
#include <numeric>
#include <string>
#include <vector>

#include "vista/common/error.hpp"
#include "vista/data/types.hpp"
#include "vista/numerics/attention.hpp"
#include "vista/numerics/tape.hpp"
#include "vista/tpm/config.hpp"

namespace vista::tpm
{

/// Interleaved table: row t holds sin(t w_i), cos(t w_i) at columns 2i, 2i+1, w_i = 10000^(-2i/d).
inline Tensor<double> sinusoidal_table(std::size_t rows, std::size_t d)
{
  if (d % 2) throw ConfigError("sinusoidal table: width must be even, got " + std::to_string(d));
  Tensor<double> t(Shape{rows, d});
  for (std::size_t r = 0; r < rows; ++r) {
    for (std::size_t i = 0; i < d / 2; ++i) {
      const double w = std::pow(10000.0, -2.0 * static_cast<double>(i) / static_cast<double>(d));
      t[r * d + 2 * i] = std::sin(static_cast<double>(r) * w);
      t[r * d + 2 * i + 1] = std::cos(static_cast<double>(r) * w);
    }
  }
  return t;
}

/// Scene <-> model coordinates: model = (scene - origin) / scale.
struct Frame
{
  Vec2 origin;
  double scale = 1.0;

  Vec2 to_model(const Vec2 & p) const { return {(p.x - origin.x) / scale, (p.y - origin.y) / scale}; }
  Vec2 to_scene(const Vec2 & m) const { return {m.x * scale + origin.x, m.y * scale + origin.y}; }

  /// Origin at the bounding-box centre of the agents' last observed positions.
  static Frame fit(const std::vector<Trajectory> & obs, double scale)
  {
    Vec2 lo{std::numeric_limits<double>::infinity(), std::numeric_limits<double>::infinity()};
    Vec2 hi{-lo.x, -lo.y};
    for (const auto & t : obs) {
      lo = {std::min(lo.x, t.back().x), std::min(lo.y, t.back().y)};
      hi = {std::max(hi.x, t.back().x), std::max(hi.y, t.back().y)};
    }
    return {{0.5 * (lo.x + hi.x), 0.5 * (lo.y + hi.y)}, scale};
  }
};

template <class Real>
struct FusionOutput
{
  Var<Real> feature;          ///< [1, d], h
  Var<Real> temporal_last;    ///< [1, d], last row of the temporal block
  Tensor<Real> temporal_weights;  ///< head-averaged, [1, L]
  Tensor<Real> cross_weights;     ///< head-averaged, [1, 1]; empty when goals are off
};

template <class Real>
struct SocialOutput
{
  Var<Real> features;     ///< [N, d]
  Tensor<Real> weights;   ///< head-averaged [N, N] of the last layer; empty when social is off
};

/// Building blocks of the trajectory module bound to one tape.
template <class Real>
class Tpm
{
public:
  Tpm(BoundParams<Real> & p, const ModelConfig & cfg)
  : p_(p), cfg_(cfg)
  {
    const auto t = sinusoidal_table(cfg.pe_rows(), cfg.d_model);
    table_ = Tensor<Real>(t.shape(), std::vector<Real>(t.vec().begin(), t.vec().end()));
  }

  const ModelConfig & config() const { return cfg_; }
  Tape<Real> & tape() { return p_.tape(); }

  /// phi: [L, 2] model coordinates -> [L, d].
  Var<Real> embed(Var<Real> xy)
  {
    Var<Real> e = nn::matmul(xy, p_("tpm.embed.w"));
    return cfg_.embed_bias ? nn::add_bias(e, p_("tpm.embed.b")) : e;
  }

  /// Adds the fixed and learnable rows first_index .. first_index + L - 1.
  Var<Real> encode(Var<Real> tokens, std::size_t first_index)
  {
    const std::size_t L = tokens.dim(0), d = cfg_.d_model;
    if (tokens.shape().size() != 2 || tokens.dim(1) != d) {
      throw ShapeError("positional encoding: expected [L, " + std::to_string(d) + "] tokens, got " +
                       nn::to_string(tokens.shape()));
    }
    if (first_index + L > cfg_.pe_rows()) {
      throw ShapeError("positional encoding: indices " + std::to_string(first_index) + ".." +
                       std::to_string(first_index + L - 1) + " exceed the table of " +
                       std::to_string(cfg_.pe_rows()) + " rows");
    }
    Var<Real> out = tokens;
    if (cfg_.use_fixed_pe) {
      std::vector<Real> rows(table_.vec().begin() + static_cast<std::ptrdiff_t>(first_index * d),
        table_.vec().begin() + static_cast<std::ptrdiff_t>((first_index + L) * d));
      out = nn::add(out, tape().constant(Shape{L, d}, std::move(rows)));
    }
    if (cfg_.use_learned_pe) {
      out = nn::add(out, nn::slice(p_("tpm.pe.learn"), 0, first_index, first_index + L));
    }
    return out;
  }

  /// Goal token: phi(goal) encoded at the reserved index T_total.
  Var<Real> goal_token(Var<Real> goal_xy) { return encode(embed(goal_xy), cfg_.t_total()); }

  /**
   * @brief Temporal self-attention over the encoded history, cross-attention of
   * its last row against the goal token, then h = LN(Z) * gamma + beta + T_last.
   *
   * Only the last query row of the final temporal layer is computed since
   * nothing else is read.
   */
  FusionOutput<Real> fuse(Var<Real> history, Var<Real> goal)
  {
    const std::size_t L = history.dim(0);
    if (L == 0) throw ShapeError("fusion: empty history");
    Var<Real> x = history;
    for (std::size_t l = 0; l + 1 < cfg_.temporal_layers; ++l) {
      auto w = nn::AttentionWeights<Real>::bind(p_, layer_name("temporal", l));
      x = nn::multi_head_attention(x, x, x, cfg_.n_heads, w).output;
    }
    auto wt = nn::AttentionWeights<Real>::bind(p_, layer_name("temporal", cfg_.temporal_layers - 1));
    auto temporal = nn::multi_head_attention(nn::row(x, L - 1), x, x, cfg_.n_heads, wt);
    FusionOutput<Real> out;
    out.temporal_last = temporal.output;
    out.temporal_weights = temporal.mean_weights();
    if (!cfg_.use_goal) {
      out.feature = temporal.output;
      return out;
    }
    auto wc = nn::AttentionWeights<Real>::bind(p_, layer_name("cross", 0));
    auto cross = nn::multi_head_attention(temporal.output, goal, goal, cfg_.n_heads, wc);
    out.cross_weights = cross.mean_weights();
    Var<Real> z = nn::layer_norm(cross.output);
    z = nn::add_bias(nn::mul_bias(z, p_("tpm.fusion.norm.gamma")), p_("tpm.fusion.norm.beta"));
    out.feature = nn::add(z, temporal.output);
    return out;
  }

  /// Self-attention across agent rows; identity pass-through when social attention is off.
  SocialOutput<Real> social(Var<Real> features)
  {
    SocialOutput<Real> out{features, {}};
    if (!cfg_.use_social) return out;
    for (std::size_t l = 0; l < cfg_.social_layers; ++l) {
      auto w = nn::AttentionWeights<Real>::bind(p_, layer_name("social", l));
      auto att = nn::multi_head_attention(out.features, out.features, out.features, cfg_.n_heads, w);
      out.features = att.output;
      out.weights = att.mean_weights();
    }
    return out;
  }

  /// last_pos [N, 2] + MLP(features [N, d]), MLP = d -> d (relu) -> 2.
  Var<Real> decode_step(Var<Real> features, Var<Real> last_pos)
  {
    Var<Real> hidden = nn::relu(
      nn::add_bias(nn::matmul(features, p_("tpm.decoder.w1")), p_("tpm.decoder.b1")));
    Var<Real> delta = nn::add_bias(nn::matmul(hidden, p_("tpm.decoder.w2")), p_("tpm.decoder.b2"));
    return nn::add(last_pos, delta);
  }

private:
  BoundParams<Real> & p_;
  const ModelConfig & cfg_;
  Tensor<Real> table_;
};

/// Head-averaged social attention per prediction step, rows and columns in `agent_ids` order.
struct AttentionTrace
{
  std::vector<std::int64_t> agent_ids;
  std::vector<std::size_t> steps;               ///< 1-based time index t of each matrix
  std::vector<std::vector<double>> matrices;    ///< N x N row-major

  std::size_t n() const { return agent_ids.size(); }
  double at(std::size_t step, std::size_t i, std::size_t j) const
  {
    return matrices.at(step).at(i * n() + j);
  }
};

template <class Real>
struct Rollout
{
  std::vector<Var<Real>> positions;      ///< per agent (scene order), [T_fut, 2] scene units
  std::vector<Trajectory> trajectories;  ///< values of `positions`
  AttentionTrace trace;
  /// Per agent (scene order), the model-unit sequence embedded at the final step.
  std::vector<Trajectory> last_inputs;
  Frame frame;
};

namespace detail
{

inline std::vector<std::size_t> id_order(const Scene & scene)
{
  std::vector<std::size_t> order(scene.n_agents());
  std::iota(order.begin(), order.end(), std::size_t{0});
  std::stable_sort(order.begin(), order.end(), [&](std::size_t a, std::size_t b) {
    return scene.tracks[a].agent_id < scene.tracks[b].agent_id;
  });
  return order;
}

template <class Real>
Trajectory rows_of(const Var<Real> & v)
{
  const auto x = v.value();
  Trajectory t(v.dim(0));
  for (std::size_t i = 0; i < t.size(); ++i) {
    t[i] = {static_cast<double>(x[2 * i]), static_cast<double>(x[2 * i + 1])};
  }
  return t;
}

}  // namespace detail

/**
 * @brief Recursive decoding of T_fut steps for every agent of `scene`.
 *
 * `goals` are in scene units, one per agent in scene order; they are ignored
 * when the configuration has no goal conditioning. Agents are processed in
 * ascending agent_id order internally, so any permutation of the input yields
 * bit-identically permuted outputs.
 */
template <class Real>
Rollout<Real> rollout(BoundParams<Real> & p, const ModelConfig & cfg, const Scene & scene,
  const std::vector<Vec2> & goals, bool capture_trace)
{
  const std::size_t N = scene.n_agents(), t_obs = cfg.t_obs(), T = cfg.t_fut;
  if (N == 0) throw DataError("rollout: scene '" + scene.scene_id + "' has no agents");
  if (scene.length() < t_obs) {
    throw ShapeError("rollout: scene '" + scene.scene_id + "' has " +
                     std::to_string(scene.length()) + " frames, need " + std::to_string(t_obs));
  }
  if (cfg.use_goal && goals.size() != N) {
    throw ShapeError("rollout: " + std::to_string(goals.size()) + " goals for " +
                     std::to_string(N) + " agents");
  }
  if (capture_trace && !cfg.use_social) {
    throw ConfigError("rollout: attention trace requested but social attention is disabled");
  }
  Tpm<Real> tpm(p, cfg);
  Tape<Real> & tape = tpm.tape();
  const auto order = detail::id_order(scene);

  std::vector<Trajectory> obs(N);
  for (std::size_t i = 0; i < N; ++i) obs[i] = scene.observed(order[i], t_obs);
  const Frame frame = Frame::fit(obs, cfg.scale());

  auto const_rows = [&](const Trajectory & pts) {
    std::vector<Real> v;
    v.reserve(2 * pts.size());
    for (const auto & q : pts) {
      const Vec2 m = frame.to_model(q);
      v.push_back(static_cast<Real>(m.x));
      v.push_back(static_cast<Real>(m.y));
    }
    return tape.constant(Shape{pts.size(), 2}, std::move(v));
  };

  std::vector<std::vector<Var<Real>>> pieces(N);
  std::vector<Var<Real>> goal_tokens(N);
  Trajectory last_obs(N);
  for (std::size_t i = 0; i < N; ++i) {
    pieces[i].push_back(const_rows(obs[i]));
    last_obs[i] = obs[i].back();
    if (cfg.use_goal) {
      const Vec2 & g = goals[order[i]];
      if (!g.finite()) {
        throw DataError("rollout: non-finite goal for agent " +
                        std::to_string(scene.tracks[order[i]].agent_id));
      }
      goal_tokens[i] = tpm.goal_token(const_rows({g}));
    }
  }
  Var<Real> last = const_rows(last_obs);

  Rollout<Real> out;
  out.frame = frame;
  if (capture_trace) {
    for (const auto & t : scene.tracks) out.trace.agent_ids.push_back(t.agent_id);
  }
  std::vector<Var<Real>> seqs(N);
  for (std::size_t s = 0; s < T; ++s) {
    std::vector<Var<Real>> feats(N);
    for (std::size_t i = 0; i < N; ++i) {
      seqs[i] = pieces[i].size() == 1 ? pieces[i].front() : nn::concat(pieces[i], 0);
      Var<Real> history = tpm.encode(tpm.embed(seqs[i]), 0);
      feats[i] = tpm.fuse(history, goal_tokens[i]).feature;
    }
    auto social = tpm.social(N == 1 ? feats.front() : nn::concat(feats, 0));
    Var<Real> next = tpm.decode_step(social.features, last);
    for (auto v : next.value()) {
      if (!std::isfinite(static_cast<double>(v))) {
        throw DivergenceError("rollout: non-finite position at step t=" +
                              std::to_string(t_obs + s + 1) + " of scene '" + scene.scene_id + "'");
      }
    }
    for (std::size_t i = 0; i < N; ++i) pieces[i].push_back(N == 1 ? next : nn::row(next, i));
    last = next;
    if (capture_trace) {
      const auto & a = social.weights;
      std::vector<double> m(N * N);
      for (std::size_t r = 0; r < N; ++r) {
        for (std::size_t c = 0; c < N; ++c) {
          m[order[r] * N + order[c]] = static_cast<double>(a[r * N + c]);
        }
      }
      out.trace.steps.push_back(t_obs + s + 1);
      out.trace.matrices.push_back(std::move(m));
    }
  }

  out.positions.resize(N);
  out.trajectories.resize(N);
  out.last_inputs.resize(N);
  const Var<Real> origin = tape.constant(
    Shape{2}, {static_cast<Real>(frame.origin.x), static_cast<Real>(frame.origin.y)});
  for (std::size_t i = 0; i < N; ++i) {
    std::vector<Var<Real>> future(pieces[i].begin() + 1, pieces[i].end());
    Var<Real> model = future.size() == 1 ? future.front() : nn::concat(future, 0);
    Var<Real> scene_units = nn::add_bias(nn::scale(model, static_cast<Real>(frame.scale)), origin);
    out.positions[order[i]] = scene_units;
    out.trajectories[order[i]] = detail::rows_of(scene_units);
    out.last_inputs[order[i]] = detail::rows_of(seqs[i]);
  }
  return out;
}

}  // namespace vista::tpm

#endif  // VISTA__TPM__MODEL_HPP_

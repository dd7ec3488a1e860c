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

#ifndef VISTA__TPM__PREDICT_HPP_
#define VISTA__TPM__PREDICT_HPP_

#include <cstdint>
#include <string>
#include <vector>

#include "vista/common/error.hpp"
#include "vista/common/parallel.hpp"
#include "vista/common/rng.hpp"
#include "vista/gpm/gpm.hpp"
#include "vista/gpm/softargmax.hpp"
#include "vista/gpm/ttst.hpp"
#include "vista/tpm/model.hpp"

namespace vista::tpm
{

/// k joint samples for one scene window.
struct PredictionSet
{
  std::string scene_id;
  std::vector<std::int64_t> agent_ids;               ///< scene order
  std::vector<std::int64_t> future_frames;           ///< frame id of every predicted step
  std::vector<std::vector<Trajectory>> samples;      ///< [k][N], T_fut positions each
  std::vector<std::vector<Vec2>> goals;              ///< [k][N], goal used by sample j
  std::vector<AttentionTrace> traces;                ///< one per sample when captured

  std::size_t k() const { return samples.size(); }
  std::size_t n_agents() const { return agent_ids.size(); }
};

/**
 * @brief Per-agent goal candidates in scene units.
 *
 * k = 1 takes the softargmax of the goal logits; k > 1 runs test-time sampling
 * on the sigmoid heatmap with a per-agent stream derived from (seed, agent_id).
 * Without goal conditioning every candidate is the last observed position.
 */
template <class Real = double>
std::vector<gpm::GoalSample> predict_goals(ParamStore & store, const ModelConfig & cfg,
  const Scene & scene, std::size_t k, std::uint64_t seed)
{
  if (k == 0) throw ConfigError("predict: k must be >= 1");
  const std::size_t N = scene.n_agents();
  std::vector<gpm::GoalSample> out(N);
  if (!cfg.use_goal) {
    for (std::size_t i = 0; i < N; ++i) {
      const Vec2 last = scene.observed(i, cfg.t_obs()).back();
      out[i] = {std::vector<Vec2>(k, last), std::vector<double>(k, 1.0 / static_cast<double>(k))};
    }
    return out;
  }
  parallel_for(N, [&](std::size_t i) {
    Tape<Real> tape;
    BoundParams<Real> p(tape, store, false);
    const auto logits = gpm::gpm_forward(p, cfg.gpm, scene.observed(i, cfg.t_obs()), scene.raster);
    gpm::GoalSample s;
    if (k == 1) {
      const auto z = logits.value();
      Heatmap scores(logits.dim(0), logits.dim(1));
      for (std::size_t c = 0; c < scores.values.size(); ++c) scores.values[c] = static_cast<double>(z[c]);
      s = {{gpm::softargmax(scores, cfg.gpm.temperature)}, {1.0}};
    } else {
      const auto salt = static_cast<std::uint64_t>(scene.tracks[i].agent_id);
      s = gpm::ttst_sample(gpm::to_probabilities(logits), cfg.gpm.n_raw, k,
        Rng::derive(seed, salt).next_u64());
    }
    for (auto & g : s.goals) g = cfg.gpm.grid.to_scene(g);
    out[i] = std::move(s);
  });
  return out;
}

/// Sample j rolls out every agent towards its j-th goal; k rollouts in total.
template <class Real = double>
PredictionSet predict_multimodal(ParamStore & store, const ModelConfig & cfg, const Scene & scene,
  const std::vector<gpm::GoalSample> & goals, bool capture_trace)
{
  const std::size_t N = scene.n_agents();
  if (goals.size() != N) {
    throw ShapeError("predict: " + std::to_string(goals.size()) + " goal sets for " +
                     std::to_string(N) + " agents");
  }
  const std::size_t k = N ? goals.front().goals.size() : 0;
  for (const auto & g : goals) {
    if (g.goals.size() != k) {
      throw ConfigError("predict: every agent needs the same number of goals (" +
                        std::to_string(k) + " vs " + std::to_string(g.goals.size()) + ")");
    }
  }
  if (k == 0) throw ConfigError("predict: no goals");
  PredictionSet set;
  set.scene_id = scene.scene_id;
  for (const auto & t : scene.tracks) set.agent_ids.push_back(t.agent_id);
  const auto & frames = scene.tracks.front().frame_ids;
  const std::int64_t step = frames.size() > 1 ? frames[1] - frames[0] : 1;
  for (std::size_t s = 0; s < cfg.t_fut; ++s) {
    set.future_frames.push_back(frames.at(cfg.t_obs() - 1) + step * static_cast<std::int64_t>(s + 1));
  }
  set.samples.resize(k);
  set.goals.resize(k);
  if (capture_trace) set.traces.resize(k);
  parallel_for(k, [&](std::size_t j) {
    std::vector<Vec2> gj(N);
    for (std::size_t i = 0; i < N; ++i) gj[i] = goals[i].goals[j];
    Tape<Real> tape;
    BoundParams<Real> p(tape, store, false);
    auto r = rollout(p, cfg, scene, gj, capture_trace);
    set.samples[j] = std::move(r.trajectories);
    set.goals[j] = std::move(gj);
    if (capture_trace) set.traces[j] = std::move(r.trace);
  });
  return set;
}

/// Goals then rollouts for one scene.
template <class Real = double>
PredictionSet predict_scene(ParamStore & store, const ModelConfig & cfg, const Scene & scene,
  std::size_t k, std::uint64_t seed, bool capture_trace)
{
  return predict_multimodal<Real>(store, cfg, scene, predict_goals<Real>(store, cfg, scene, k, seed),
    capture_trace);
}

}  // namespace vista::tpm

#endif  // VISTA__TPM__PREDICT_HPP_

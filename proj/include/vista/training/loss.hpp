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

#ifndef VISTA__TRAINING__LOSS_HPP_
#define VISTA__TRAINING__LOSS_HPP_

#include <string>
#include <vector>

#include "vista/common/error.hpp"
#include "vista/gpm/gpm.hpp"
#include "vista/tpm/config.hpp"
#include "vista/tpm/model.hpp"

namespace vista::training
{

using nn::BoundParams;
using nn::Tape;
using nn::Tensor;
using nn::Var;

struct LossWeights
{
  double goal = 1e3;
  double traj = 1.0;
};

/// Loss values for one window. goal and traj are per-agent means.
struct JointLoss
{
  double total = 0.0;
  double goal = 0.0;
  double traj = 0.0;
};

/// Mean over steps of the squared l2 error.
inline double trajectory_mse(const Trajectory & pred, const Trajectory & gt)
{
  if (pred.size() != gt.size() || gt.empty()) {
    throw ShapeError("trajectory loss: " + std::to_string(pred.size()) + " predicted steps vs " +
                     std::to_string(gt.size()));
  }
  double s = 0.0;
  for (std::size_t t = 0; t < gt.size(); ++t) {
    const Vec2 d = pred[t] - gt[t];
    s += d.x * d.x + d.y * d.y;
  }
  return s / static_cast<double>(gt.size());
}

/**
 * @brief Plain-value joint loss.
 *
 * total = w.goal * sum_i BCE_i + w.traj * sum_i MSE_i. An empty `heatmaps`
 * drops the goal term (goal-free models). Heatmaps hold probabilities and
 * `goals` are grid coordinates.
 */
inline JointLoss joint_loss(const std::vector<Heatmap> & heatmaps, const std::vector<Vec2> & goals,
  const std::vector<Trajectory> & pred, const std::vector<Trajectory> & gt, double target_sigma,
  const LossWeights & w)
{
  const std::size_t N = gt.size();
  if (pred.size() != N || N == 0) throw ShapeError("joint loss: agent counts differ or are zero");
  if (!heatmaps.empty() && (heatmaps.size() != N || goals.size() != N)) {
    throw ShapeError("joint loss: goal heatmaps do not match the agent count");
  }
  double goal_sum = 0.0, traj_sum = 0.0;
  for (std::size_t i = 0; i < N; ++i) {
    traj_sum += trajectory_mse(pred[i], gt[i]);
    if (!heatmaps.empty()) goal_sum += gpm::goal_loss(heatmaps[i], goals[i], target_sigma);
  }
  const double n = static_cast<double>(N);
  return {w.goal * goal_sum + w.traj * traj_sum, goal_sum / n, traj_sum / n};
}

template <class Real>
struct WindowLoss
{
  Var<Real> total;
  JointLoss values;
  std::vector<Trajectory> predictions;  ///< scene order, scene units
};

/// Ground-truth endpoints of the prediction horizon, scene units, scene order.
inline std::vector<Vec2> ground_truth_goals(const Scene & scene, const tpm::ModelConfig & cfg)
{
  std::vector<Vec2> goals;
  for (std::size_t i = 0; i < scene.n_agents(); ++i) {
    goals.push_back(scene.tracks[i].positions.at(cfg.t_total() - 1));
  }
  return goals;
}

/**
 * @brief Differentiable joint loss of one window.
 *
 * The rollout is conditioned on the ground-truth goals and feeds its own
 * predictions back (no teacher forcing).
 */
template <class Real>
WindowLoss<Real> window_loss(BoundParams<Real> & p, const tpm::ModelConfig & cfg, const Scene & scene,
  const LossWeights & w)
{
  const std::size_t N = scene.n_agents(), T = cfg.t_fut;
  if (scene.length() != cfg.t_total()) {
    throw DataError("train: scene '" + scene.scene_id + "' has " + std::to_string(scene.length()) +
                    " frames, model expects " + std::to_string(cfg.t_total()));
  }
  Tape<Real> & tape = p.tape();
  const auto goals = ground_truth_goals(scene, cfg);

  std::vector<Var<Real>> goal_terms;
  if (cfg.use_goal) {
    for (std::size_t i = 0; i < N; ++i) {
      auto logits = gpm::gpm_forward(p, cfg.gpm, scene.observed(i, cfg.t_obs()), scene.raster);
      goal_terms.push_back(gpm::goal_loss_logits(cfg.gpm, logits, goals[i]));
    }
  }
  auto r = tpm::rollout(p, cfg, scene, goals, false);
  std::vector<Var<Real>> traj_terms;
  for (std::size_t i = 0; i < N; ++i) {
    const Trajectory gt = scene.future(i, cfg.t_obs());
    std::vector<Real> flat;
    for (const auto & q : gt) {
      flat.push_back(static_cast<Real>(q.x));
      flat.push_back(static_cast<Real>(q.y));
    }
    auto d = nn::sub(r.positions[i], tape.constant(nn::Shape{T, 2}, std::move(flat)));
    traj_terms.push_back(nn::scale(nn::sum(nn::mul(d, d)), static_cast<Real>(1.0 / static_cast<double>(T))));
  }
  auto total_of = [](const std::vector<Var<Real>> & terms) {
    Var<Real> s = terms.front();
    for (std::size_t i = 1; i < terms.size(); ++i) s = nn::add(s, terms[i]);
    return s;
  };
  WindowLoss<Real> out;
  const Var<Real> traj_sum = total_of(traj_terms);
  out.total = nn::scale(traj_sum, static_cast<Real>(w.traj));
  const double n = static_cast<double>(N);
  out.values.traj = static_cast<double>(traj_sum.item()) / n;
  if (!goal_terms.empty()) {
    const Var<Real> goal_sum = total_of(goal_terms);
    out.total = nn::add(out.total, nn::scale(goal_sum, static_cast<Real>(w.goal)));
    out.values.goal = static_cast<double>(goal_sum.item()) / n;
  }
  out.values.total = static_cast<double>(out.total.item());
  out.predictions = std::move(r.trajectories);
  return out;
}

}  // namespace vista::training

#endif  // VISTA__TRAINING__LOSS_HPP_

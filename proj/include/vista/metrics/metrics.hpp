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

#ifndef VISTA__METRICS__METRICS_HPP_
#define VISTA__METRICS__METRICS_HPP_

#include <algorithm>
#include <cmath>
#include <limits>
#include <numbers>
#include <string>
#include <vector>

#include "vista/common/error.hpp"
#include "vista/data/types.hpp"

namespace vista::metrics
{

inline constexpr double kEpsilonGuard = 1e-9;
inline constexpr double kBandwidthFloor = 1e-3;
inline constexpr double kDefaultMissThreshold = 2.0;

/// Predictions [N][k][T] against ground truth [N][T] for one scene window.
struct EvalInput
{
  std::vector<std::vector<Trajectory>> pred;
  std::vector<Trajectory> gt;
  std::string unit = "scene";

  std::size_t n_agents() const { return gt.size(); }
  std::size_t k() const { return pred.empty() ? 0 : pred.front().size(); }
  std::size_t steps() const { return gt.empty() ? 0 : gt.front().size(); }

  void validate() const
  {
    if (pred.size() != gt.size()) {
      throw DataError("eval: " + std::to_string(pred.size()) + " predicted agents vs " +
                      std::to_string(gt.size()) + " ground-truth agents");
    }
    const std::size_t T = steps();
    for (std::size_t i = 0; i < gt.size(); ++i) {
      if (gt[i].size() != T || T == 0) throw DataError("eval: ground-truth lengths differ or are empty");
      if (pred[i].size() != k() || k() == 0) throw DataError("eval: every agent needs the same k >= 1");
      for (const auto & s : pred[i]) {
        if (s.size() != T) throw DataError("eval: prediction length differs from ground truth");
        for (const auto & p : s)
          if (!p.finite()) throw DataError("eval: non-finite prediction");
      }
      for (const auto & p : gt[i])
        if (!p.finite()) throw DataError("eval: non-finite ground truth");
    }
  }

  /// Ground truth repeated as a single sample.
  static EvalInput identity(const std::vector<Trajectory> & gt)
  {
    EvalInput e;
    e.gt = gt;
    for (const auto & t : gt) e.pred.push_back({t});
    return e;
  }
};

/// Removes agents whose ground truth has a non-finite entry. Returns how many went.
inline std::size_t drop_missing_gt(EvalInput & e)
{
  std::size_t kept = 0;
  for (std::size_t i = 0; i < e.gt.size(); ++i) {
    const bool ok = std::all_of(e.gt[i].begin(), e.gt[i].end(), [](const Vec2 & p) { return p.finite(); });
    if (!ok) continue;
    if (kept != i) {
      e.gt[kept] = std::move(e.gt[i]);
      if (i < e.pred.size()) e.pred[kept] = std::move(e.pred[i]);
    }
    ++kept;
  }
  const std::size_t dropped = e.gt.size() - kept;
  e.gt.resize(kept);
  if (e.pred.size() >= kept + dropped) e.pred.resize(kept);
  return dropped;
}

/// Mean l2 error over steps of sample j of agent i.
inline double sample_ade(const EvalInput & e, std::size_t i, std::size_t j)
{
  double s = 0.0;
  for (std::size_t t = 0; t < e.steps(); ++t) s += distance(e.pred[i][j][t], e.gt[i][t]);
  return s / static_cast<double>(e.steps());
}

inline double sample_fde(const EvalInput & e, std::size_t i, std::size_t j)
{
  return distance(e.pred[i][j].back(), e.gt[i].back());
}

namespace detail
{
template <class F>
double mean_over_agents(const EvalInput & e, F per_agent)
{
  double s = 0.0;
  for (std::size_t i = 0; i < e.n_agents(); ++i) s += per_agent(i);
  return s / static_cast<double>(e.n_agents());
}
}  // namespace detail

inline double ade(const EvalInput & e)
{
  return detail::mean_over_agents(e, [&](std::size_t i) {
    double s = 0.0;
    for (std::size_t j = 0; j < e.k(); ++j) s += sample_ade(e, i, j);
    return s / static_cast<double>(e.k());
  });
}

inline double fde(const EvalInput & e)
{
  return detail::mean_over_agents(e, [&](std::size_t i) {
    double s = 0.0;
    for (std::size_t j = 0; j < e.k(); ++j) s += sample_fde(e, i, j);
    return s / static_cast<double>(e.k());
  });
}

inline double min_ade(const EvalInput & e)
{
  return detail::mean_over_agents(e, [&](std::size_t i) {
    double best = std::numeric_limits<double>::infinity();
    for (std::size_t j = 0; j < e.k(); ++j) best = std::min(best, sample_ade(e, i, j));
    return best;
  });
}

inline double min_fde(const EvalInput & e)
{
  return detail::mean_over_agents(e, [&](std::size_t i) {
    double best = std::numeric_limits<double>::infinity();
    for (std::size_t j = 0; j < e.k(); ++j) best = std::min(best, sample_fde(e, i, j));
    return best;
  });
}

/**
 * @brief Expected minimum of a uniformly random K-subset of `errors`.
 *
 * With errors sorted ascending e_1 <= ... <= e_k, the j-th smallest is the
 * subset minimum with probability C(k-j, K-1) / C(k, K).
 */
inline double expected_best_of(std::vector<double> errors, std::size_t K)
{
  const std::size_t k = errors.size();
  if (K == 0 || K > k) {
    throw ConfigError("expected_best_of: need 1 <= K <= k (K = " + std::to_string(K) +
                      ", k = " + std::to_string(k) + ")");
  }
  if (K == 1) {
    double s = 0.0;
    for (double x : errors) s += x;
    return s / static_cast<double>(k);
  }
  std::sort(errors.begin(), errors.end());
  if (K == k) return errors.front();
  double w = static_cast<double>(K) / static_cast<double>(k);
  double out = 0.0;
  for (std::size_t j = 1; j <= k - K + 1; ++j) {
    out += w * errors[j - 1];
    // w_{j+1} / w_j = (k - j - K + 1) / (k - j)
    if (j < k) w *= static_cast<double>(k - j - K + 1) / static_cast<double>(k - j);
  }
  return out;
}

struct AucResult
{
  double auc = 0.0;             ///< summed over agents and K
  double auc_mean = 0.0;        ///< auc / N
  std::vector<double> curve;    ///< E_K averaged over agents, K = 1..k
};

inline AucResult auc(const EvalInput & e)
{
  AucResult r;
  const std::size_t k = e.k();
  r.curve.assign(k, 0.0);
  for (std::size_t i = 0; i < e.n_agents(); ++i) {
    std::vector<double> errs(k);
    for (std::size_t j = 0; j < k; ++j) errs[j] = sample_ade(e, i, j);
    for (std::size_t K = 1; K <= k; ++K) {
      const double ek = expected_best_of(errs, K);
      r.auc += ek;
      r.curve[K - 1] += ek;
    }
  }
  for (auto & c : r.curve) c /= static_cast<double>(e.n_agents());
  r.auc_mean = r.auc / static_cast<double>(e.n_agents());
  return r;
}

/**
 * @brief Largest threshold with no ground-truth collision under strict `<`:
 * the minimum co-timestep distance over every agent pair of every group, minus
 * a guard of 1e-9, floored at 0.
 */
inline double calibrate_epsilon(const std::vector<std::vector<Trajectory>> & groups)
{
  double best = std::numeric_limits<double>::infinity();
  bool any = false;
  for (const auto & g : groups) {
    for (std::size_t a = 0; a < g.size(); ++a) {
      for (std::size_t b = a + 1; b < g.size(); ++b) {
        const std::size_t T = std::min(g[a].size(), g[b].size());
        for (std::size_t t = 0; t < T; ++t) {
          best = std::min(best, distance(g[a][t], g[b][t]));
          any = true;
        }
      }
    }
  }
  if (!any) {
    throw DataError("calibrate_epsilon: no two agents are ever present at the same time");
  }
  return std::max(0.0, best - kEpsilonGuard);
}

/// Fraction of ordered agent pairs and steps of sample j closer than epsilon.
inline double sample_collision_rate(const EvalInput & e, std::size_t j, double epsilon)
{
  const std::size_t N = e.n_agents(), T = e.steps();
  if (N < 2) return 0.0;
  std::size_t hits = 0;
  for (std::size_t a = 0; a < N; ++a)
    for (std::size_t b = 0; b < N; ++b) {
      if (a == b) continue;
      for (std::size_t t = 0; t < T; ++t) hits += distance(e.pred[a][j][t], e.pred[b][j][t]) < epsilon;
    }
  return static_cast<double>(hits) / static_cast<double>(N * (N - 1) * T);
}

enum class CollisionMode { PerSampleMean, BestSample };

/**
 * @brief Collision rate over joint samples.
 *
 * PerSampleMean averages the rate over the k samples. BestSample reports the
 * rate of the joint sample with the lowest mean ADE over agents (first on ties).
 * Fewer than two agents gives 0.
 */
inline double collision_rate(const EvalInput & e, double epsilon,
  CollisionMode mode = CollisionMode::PerSampleMean)
{
  if (!(epsilon >= 0.0)) throw ConfigError("collision_rate: epsilon must be >= 0");
  if (e.n_agents() < 2) return 0.0;
  if (mode == CollisionMode::PerSampleMean) {
    double s = 0.0;
    for (std::size_t j = 0; j < e.k(); ++j) s += sample_collision_rate(e, j, epsilon);
    return s / static_cast<double>(e.k());
  }
  std::size_t best = 0;
  double best_err = std::numeric_limits<double>::infinity();
  for (std::size_t j = 0; j < e.k(); ++j) {
    double err = 0.0;
    for (std::size_t i = 0; i < e.n_agents(); ++i) err += sample_ade(e, i, j);
    if (err < best_err) {
      best_err = err;
      best = j;
    }
  }
  return sample_collision_rate(e, best, epsilon);
}

/// Scott-style scalar bandwidth k^(-1/3) * sqrt((var_x + var_y) / 2), floored.
inline double kde_bandwidth(const std::vector<Vec2> & pts)
{
  const double k = static_cast<double>(pts.size());
  Vec2 mean;
  for (const auto & p : pts) mean = mean + p;
  mean = mean * (1.0 / k);
  double vx = 0.0, vy = 0.0;
  for (const auto & p : pts) {
    vx += (p.x - mean.x) * (p.x - mean.x);
    vy += (p.y - mean.y) * (p.y - mean.y);
  }
  const double var = pts.size() > 1 ? (vx + vy) / (2.0 * (k - 1.0)) : 0.0;
  return std::max(std::pow(k, -1.0 / 3.0) * std::sqrt(var), kBandwidthFloor);
}

/// -log of an isotropic Gaussian mixture with equal weights, evaluated at x.
inline double kde_point_nll(const std::vector<Vec2> & pts, const Vec2 & x, double h)
{
  std::vector<double> logs(pts.size());
  double mx = -std::numeric_limits<double>::infinity();
  for (std::size_t j = 0; j < pts.size(); ++j) {
    const Vec2 d = pts[j] - x;
    logs[j] = -(d.x * d.x + d.y * d.y) / (2.0 * h * h);
    mx = std::max(mx, logs[j]);
  }
  double s = 0.0;
  for (double l : logs) s += std::exp(l - mx);
  const double log_density =
    mx + std::log(s) - std::log(static_cast<double>(pts.size())) - std::log(2.0 * std::numbers::pi * h * h);
  return -log_density;
}

inline double kde_nll(const EvalInput & e)
{
  if (e.k() < 2) throw ConfigError("kde_nll: needs k >= 2 samples, got " + std::to_string(e.k()));
  double total = 0.0;
  for (std::size_t i = 0; i < e.n_agents(); ++i) {
    for (std::size_t t = 0; t < e.steps(); ++t) {
      std::vector<Vec2> pts(e.k());
      for (std::size_t j = 0; j < e.k(); ++j) pts[j] = e.pred[i][j][t];
      total += kde_point_nll(pts, e.gt[i][t], kde_bandwidth(pts));
    }
  }
  return total / static_cast<double>(e.n_agents() * e.steps());
}

/// Fraction of agents whose best final displacement exceeds `threshold`.
inline double miss_rate(const EvalInput & e, double threshold = kDefaultMissThreshold)
{
  if (!(threshold > 0.0)) throw ConfigError("miss_rate: threshold must be positive");
  return detail::mean_over_agents(e, [&](std::size_t i) {
    double best = std::numeric_limits<double>::infinity();
    for (std::size_t j = 0; j < e.k(); ++j) best = std::min(best, sample_fde(e, i, j));
    return best > threshold ? 1.0 : 0.0;
  });
}

}  // namespace vista::metrics

#endif  // VISTA__METRICS__METRICS_HPP_

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

#ifndef VISTA__GPM__TTST_HPP_
#define VISTA__GPM__TTST_HPP_

#include <algorithm>
#include <cmath>
#include <limits>
#include <string>
#include <vector>

#include "vista/common/error.hpp"
#include "vista/common/rng.hpp"
#include "vista/data/raster.hpp"
#include "vista/data/types.hpp"

namespace vista::gpm
{

/// k goals with their cluster mass fractions.
struct GoalSample
{
  std::vector<Vec2> goals;
  std::vector<double> weights;
};

inline constexpr std::size_t kKMeansMaxIterations = 50;

/**
 * @brief Draws `n` points from the heatmap viewed as a categorical over cells,
 * each jittered uniformly within its cell. Grid coordinates.
 */
inline std::vector<Vec2> sample_heatmap(const Heatmap & heat, std::size_t n, Rng & rng)
{
  std::vector<double> cdf(heat.values.size());
  double total = 0.0;
  for (std::size_t i = 0; i < cdf.size(); ++i) {
    const double v = heat.values[i];
    if (!(v >= 0.0) || !std::isfinite(v)) {
      throw DataError("ttst: heatmap has a negative or non-finite cell");
    }
    total += v;
    cdf[i] = total;
  }
  if (!(total > 0.0)) {
    throw DataError("ttst: heatmap has no mass to sample from");
  }
  std::vector<Vec2> pts;
  pts.reserve(n);
  for (std::size_t s = 0; s < n; ++s) {
    const double u = rng.uniform() * total;
    auto it = std::upper_bound(cdf.begin(), cdf.end(), u);
    // Skip zero-mass cells that share the cumulative value.
    std::size_t cell = std::min<std::size_t>(static_cast<std::size_t>(it - cdf.begin()), cdf.size() - 1);
    while (heat.values[cell] == 0.0 && cell > 0) --cell;
    const double r = static_cast<double>(cell / heat.width);
    const double c = static_cast<double>(cell % heat.width);
    pts.push_back({c + rng.uniform() - 0.5, r + rng.uniform() - 0.5});
  }
  return pts;
}

namespace detail
{
inline double sq(const Vec2 & a, const Vec2 & b)
{
  const double dx = a.x - b.x, dy = a.y - b.y;
  return dx * dx + dy * dy;
}
}  // namespace detail

/**
 * @brief Lloyd's k-means with k-means++ (D^2) seeding.
 *
 * Ties in assignment go to the lowest centre index. When all remaining points
 * coincide with chosen centres, the lowest-index unchosen point seeds the next
 * centre. An empty cluster keeps its previous centre. Weights are cluster sizes
 * divided by the number of points.
 */
inline GoalSample kmeans(const std::vector<Vec2> & pts, std::size_t k, Rng & rng,
  std::size_t max_iterations = kKMeansMaxIterations)
{
  const std::size_t n = pts.size();
  if (k == 0 || n < k) {
    throw ConfigError("k-means: need points >= k >= 1 (got " + std::to_string(n) + " points, k = " +
                      std::to_string(k) + ")");
  }
  std::vector<Vec2> centers;
  std::vector<char> chosen(n, 0);
  std::vector<double> d2(n, std::numeric_limits<double>::infinity());
  std::size_t first = static_cast<std::size_t>(rng.below(n));
  centers.push_back(pts[first]);
  chosen[first] = 1;
  while (centers.size() < k) {
    double total = 0.0;
    for (std::size_t i = 0; i < n; ++i) {
      d2[i] = std::min(d2[i], detail::sq(pts[i], centers.back()));
      total += d2[i];
    }
    std::size_t pick = n;
    if (total > 0.0) {
      const double u = rng.uniform() * total;
      double acc = 0.0;
      for (std::size_t i = 0; i < n; ++i) {
        acc += d2[i];
        if (d2[i] > 0.0 && u < acc) {
          pick = i;
          break;
        }
      }
      if (pick == n) {
        // u landed on the rounding tail: take the last point with positive mass.
        for (std::size_t i = n; i-- > 0;)
          if (d2[i] > 0.0) {
            pick = i;
            break;
          }
      }
    } else {
      for (std::size_t i = 0; i < n; ++i)
        if (!chosen[i]) {
          pick = i;
          break;
        }
    }
    centers.push_back(pts[pick]);
    chosen[pick] = 1;
  }

  std::vector<std::size_t> assign(n, k);
  std::vector<std::size_t> counts(k, 0);
  for (std::size_t it = 0; it < max_iterations; ++it) {
    bool changed = false;
    for (std::size_t i = 0; i < n; ++i) {
      std::size_t best = 0;
      double best_d = detail::sq(pts[i], centers[0]);
      for (std::size_t j = 1; j < k; ++j) {
        const double d = detail::sq(pts[i], centers[j]);
        if (d < best_d) {
          best_d = d;
          best = j;
        }
      }
      if (assign[i] != best) {
        assign[i] = best;
        changed = true;
      }
    }
    if (!changed) break;
    std::vector<Vec2> sums(k);
    std::fill(counts.begin(), counts.end(), 0);
    for (std::size_t i = 0; i < n; ++i) {
      sums[assign[i]] = sums[assign[i]] + pts[i];
      ++counts[assign[i]];
    }
    for (std::size_t j = 0; j < k; ++j) {
      if (counts[j]) centers[j] = sums[j] * (1.0 / static_cast<double>(counts[j]));
    }
  }
  std::fill(counts.begin(), counts.end(), 0);
  for (std::size_t i = 0; i < n; ++i) ++counts[assign[i]];
  GoalSample out{centers, std::vector<double>(k)};
  for (std::size_t j = 0; j < k; ++j) {
    out.weights[j] = static_cast<double>(counts[j]) / static_cast<double>(n);
  }
  return out;
}

/**
 * @brief Test-time sampling: n_raw categorical draws from the heatmap reduced to
 * k goals by k-means. Goals are returned in grid coordinates.
 */
inline GoalSample ttst_sample(const Heatmap & heat, std::size_t n_raw, std::size_t k,
  std::uint64_t seed)
{
  if (k == 0 || n_raw < k) {
    throw ConfigError("ttst: need n_raw >= k >= 1");
  }
  Rng rng(seed);
  const auto pts = sample_heatmap(heat, n_raw, rng);
  return kmeans(pts, k, rng);
}

}  // namespace vista::gpm

#endif  // VISTA__GPM__TTST_HPP_

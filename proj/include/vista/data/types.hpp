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

#ifndef VISTA__DATA__TYPES_HPP_
#define VISTA__DATA__TYPES_HPP_

#include <cmath>
#include <cstdint>
#include <optional>
#include <set>
#include <string>
#include <vector>

#include "vista/common/error.hpp"

namespace vista
{

struct Vec2
{
  double x = 0.0;
  double y = 0.0;

  Vec2 operator+(const Vec2 & o) const { return {x + o.x, y + o.y}; }
  Vec2 operator-(const Vec2 & o) const { return {x - o.x, y - o.y}; }
  Vec2 operator*(double s) const { return {x * s, y * s}; }
  double norm() const { return std::hypot(x, y); }
  bool finite() const { return std::isfinite(x) && std::isfinite(y); }
  friend bool operator==(const Vec2 &, const Vec2 &) = default;
};

inline double distance(const Vec2 & a, const Vec2 & b) { return (a - b).norm(); }

using Trajectory = std::vector<Vec2>;

/// One agent's positions over consecutive, uniformly spaced frames.
struct AgentTrack
{
  std::int64_t agent_id = 0;
  Trajectory positions;
  std::vector<std::int64_t> frame_ids;
};

/**
 * @brief H x W x D per-cell class scores, row-major with the class index fastest.
 *
 * Cell (r, c) covers grid coordinates x in [c-0.5, c+0.5], y in [r-0.5, r+0.5].
 */
struct SceneRaster
{
  std::size_t height = 0;
  std::size_t width = 0;
  std::size_t classes = 0;
  std::vector<double> scores;

  double at(std::size_t r, std::size_t c, std::size_t d) const
  {
    return scores[(r * width + c) * classes + d];
  }
  double & at(std::size_t r, std::size_t c, std::size_t d)
  {
    return scores[(r * width + c) * classes + d];
  }

  /// Raster with every cell assigned to class `cls`.
  static SceneRaster uniform(std::size_t h, std::size_t w, std::size_t d, std::size_t cls = 0)
  {
    SceneRaster r{h, w, d, std::vector<double>(h * w * d, 0.0)};
    for (std::size_t i = 0; i < h * w; ++i) r.scores[i * d + cls] = 1.0;
    return r;
  }

  void validate() const
  {
    if (height == 0 || width == 0 || classes == 0) {
      throw DataError("raster: zero extent");
    }
    if (scores.size() != height * width * classes) {
      throw DataError("raster: expected " + std::to_string(height * width * classes) +
                      " scores, got " + std::to_string(scores.size()));
    }
    for (std::size_t cell = 0; cell < height * width; ++cell) {
      double total = 0.0;
      for (std::size_t d = 0; d < classes; ++d) {
        const double v = scores[cell * classes + d];
        if (!(v >= 0.0 && v <= 1.0)) {
          throw DataError("raster: score outside [0,1] at cell " + std::to_string(cell));
        }
        total += v;
      }
      if (std::abs(total - 1.0) > 1e-6) {
        throw DataError("raster: class scores of cell " + std::to_string(cell) +
                        " sum to " + std::to_string(total));
      }
    }
  }

  friend bool operator==(const SceneRaster &, const SceneRaster &) = default;
};

/**
 * @brief Maps scene coordinates onto the prediction grid.
 *
 * Grid coordinate = scene coordinate / cell_size; cell (r, c) is centred on
 * grid point (x = c, y = r).
 */
struct GridSpec
{
  std::size_t height = 32;
  std::size_t width = 32;
  double cell_size = 1.0;

  Vec2 to_grid(const Vec2 & p) const { return {p.x / cell_size, p.y / cell_size}; }
  Vec2 to_scene(const Vec2 & g) const { return {g.x * cell_size, g.y * cell_size}; }

  /// Extent between the first and last cell centres, in scene units.
  double span_x() const { return static_cast<double>(width - 1) * cell_size; }
  double span_y() const { return static_cast<double>(height - 1) * cell_size; }
};

/// Co-observed agents on one shared frame window, plus optional scene semantics.
struct Scene
{
  std::string scene_id;
  std::int64_t start_frame = 0;
  std::vector<AgentTrack> tracks;
  std::optional<SceneRaster> raster;
  double unit_scale = 0.0;  ///< scene units per meter, 0 when uncalibrated

  std::size_t n_agents() const noexcept { return tracks.size(); }
  std::size_t length() const { return tracks.empty() ? 0 : tracks.front().positions.size(); }

  Trajectory observed(std::size_t agent, std::size_t t_obs) const
  {
    const auto & p = tracks.at(agent).positions;
    return Trajectory(p.begin(), p.begin() + static_cast<std::ptrdiff_t>(t_obs));
  }

  Trajectory future(std::size_t agent, std::size_t t_obs) const
  {
    const auto & p = tracks.at(agent).positions;
    return Trajectory(p.begin() + static_cast<std::ptrdiff_t>(t_obs), p.end());
  }

  /// Checks the shared-window and unique-id invariants.
  void validate() const
  {
    if (tracks.empty()) {
      throw DataError("scene '" + scene_id + "': no agents");
    }
    std::set<std::int64_t> ids;
    const auto & frames = tracks.front().frame_ids;
    for (const auto & t : tracks) {
      if (!ids.insert(t.agent_id).second) {
        throw DataError("scene '" + scene_id + "': duplicate agent id " +
                        std::to_string(t.agent_id));
      }
      if (t.frame_ids != frames || t.positions.size() != frames.size()) {
        throw DataError("scene '" + scene_id + "': agent " + std::to_string(t.agent_id) +
                        " does not share the frame window");
      }
    }
    for (std::size_t i = 2; i < frames.size(); ++i) {
      if (frames[i] - frames[i - 1] != frames[1] - frames[0] || frames[1] <= frames[0]) {
        throw DataError("scene '" + scene_id + "': frame ids not uniformly spaced");
      }
    }
    if (raster) {
      raster->validate();
    }
  }
};

}  // namespace vista

#endif  // VISTA__DATA__TYPES_HPP_

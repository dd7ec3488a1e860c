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

#ifndef VISTA__DATA__AUGMENT_HPP_
#define VISTA__DATA__AUGMENT_HPP_

#include <string>
#include <utility>

#include "vista/common/error.hpp"
#include "vista/data/raster.hpp"
#include "vista/data/types.hpp"

namespace vista
{

/**
 * @brief Element of the dihedral group of the grid.
 *
 * id = rotations + 4 * flip. The point map is: `rotations` quarter turns
 * (x, y) -> (y, W - 1 - x) on a W-column grid, then, if flipped, (x, y) -> (W' - 1 - x, y)
 * on the rotated grid. Coordinates are in cell units; rotations swap H and W.
 */
struct Dihedral
{
  int rotations = 0;
  bool flip = false;

  static Dihedral from_id(int id)
  {
    if (id < 0 || id > 7) {
      throw ConfigError("dihedral transform id must be in 0..7, got " + std::to_string(id));
    }
    return {id % 4, id >= 4};
  }
  int id() const { return rotations + (flip ? 4 : 0); }

  Dihedral inverse() const { return flip ? *this : Dihedral{(4 - rotations) % 4, false}; }

  /// The transform equal to applying `this` first and then `next`.
  Dihedral then(const Dihedral & next) const
  {
    const int k = flip ? rotations - next.rotations : rotations + next.rotations;
    return {((k % 4) + 4) % 4, flip != next.flip};
  }

  std::pair<std::size_t, std::size_t> dims(std::size_t height, std::size_t width) const
  {
    return rotations % 2 ? std::pair{width, height} : std::pair{height, width};
  }

  /// Maps a grid-coordinate point on an H x W grid.
  Vec2 apply(Vec2 p, std::size_t height, std::size_t width) const
  {
    double w = static_cast<double>(width);
    double h = static_cast<double>(height);
    for (int i = 0; i < rotations; ++i) {
      p = {p.y, w - 1.0 - p.x};
      std::swap(w, h);
    }
    if (flip) p.x = w - 1.0 - p.x;
    return p;
  }
};

inline GridSpec transform_grid(const GridSpec & g, const Dihedral & t)
{
  const auto [h, w] = t.dims(g.height, g.width);
  return {h, w, g.cell_size};
}

/// Moves every cell of `src` to the cell its centre maps to.
inline SceneRaster transform_raster(const SceneRaster & src, const Dihedral & t)
{
  const auto [h, w] = t.dims(src.height, src.width);
  SceneRaster out{h, w, src.classes, std::vector<double>(src.scores.size())};
  for (std::size_t r = 0; r < src.height; ++r) {
    for (std::size_t c = 0; c < src.width; ++c) {
      const Vec2 q = t.apply({static_cast<double>(c), static_cast<double>(r)}, src.height,
        src.width);
      const auto rr = static_cast<std::size_t>(q.y);
      const auto cc = static_cast<std::size_t>(q.x);
      for (std::size_t d = 0; d < src.classes; ++d) out.at(rr, cc, d) = src.at(r, c, d);
    }
  }
  return out;
}

inline Heatmap transform_heatmap(const Heatmap & src, const Dihedral & t)
{
  const auto [h, w] = t.dims(src.height, src.width);
  Heatmap out(h, w);
  for (std::size_t r = 0; r < src.height; ++r) {
    for (std::size_t c = 0; c < src.width; ++c) {
      const Vec2 q = t.apply({static_cast<double>(c), static_cast<double>(r)}, src.height,
        src.width);
      out.at(static_cast<std::size_t>(q.y), static_cast<std::size_t>(q.x)) = src.at(r, c);
    }
  }
  return out;
}

/// Maps a scene-unit point through `t` on `grid`.
inline Vec2 transform_point(const Vec2 & p, const GridSpec & grid, const Dihedral & t)
{
  return grid.to_scene(t.apply(grid.to_grid(p), grid.height, grid.width));
}

/**
 * @brief Applies dihedral transform `transform_id` to positions and raster.
 *
 * Positions are mapped about the centre of `grid`. A raster, when present, must
 * have the grid's dimensions.
 */
inline Scene augment_dihedral(const Scene & scene, int transform_id, const GridSpec & grid)
{
  const Dihedral t = Dihedral::from_id(transform_id);
  if (scene.raster && (scene.raster->height != grid.height || scene.raster->width != grid.width)) {
    throw ConfigError("augment: raster is " + std::to_string(scene.raster->height) + "x" +
                      std::to_string(scene.raster->width) + " but grid is " +
                      std::to_string(grid.height) + "x" + std::to_string(grid.width));
  }
  Scene out = scene;
  for (auto & track : out.tracks)
    for (auto & p : track.positions) p = transform_point(p, grid, t);
  if (out.raster) out.raster = transform_raster(*scene.raster, t);
  return out;
}

}  // namespace vista

#endif  // VISTA__DATA__AUGMENT_HPP_

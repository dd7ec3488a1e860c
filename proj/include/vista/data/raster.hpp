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

#ifndef VISTA__DATA__RASTER_HPP_
#define VISTA__DATA__RASTER_HPP_

#include <algorithm>
#include <cmath>
#include <filesystem>
#include <sstream>
#include <string>
#include <vector>

#include "vista/common/error.hpp"
#include "vista/common/io.hpp"
#include "vista/data/types.hpp"

namespace vista
{

/// Row-major H x W grid of reals.
struct Heatmap
{
  std::size_t height = 0;
  std::size_t width = 0;
  std::vector<double> values;

  Heatmap() = default;
  Heatmap(std::size_t h, std::size_t w, double fill = 0.0) : height(h), width(w), values(h * w, fill)
  {
  }

  double at(std::size_t r, std::size_t c) const { return values[r * width + c]; }
  double & at(std::size_t r, std::size_t c) { return values[r * width + c]; }

  double sum() const
  {
    double s = 0.0;
    for (double v : values) s += v;
    return s;
  }

  friend bool operator==(const Heatmap &, const Heatmap &) = default;
};

namespace detail
{
/// Sum over all integers c of exp(-(c - x)^2 / (2 sigma^2)).
inline double lattice_mass(double x, double sigma)
{
  const auto reach = static_cast<long>(std::ceil(12.0 * sigma)) + 1;
  const auto lo = static_cast<long>(std::floor(x)) - reach;
  const auto hi = static_cast<long>(std::ceil(x)) + reach;
  double s = 0.0;
  for (long c = lo; c <= hi; ++c) {
    const double d = static_cast<double>(c) - x;
    s += std::exp(-d * d / (2.0 * sigma * sigma));
  }
  return s;
}
}  // namespace detail

/**
 * @brief Isotropic Gaussian over cell centres, normalised to unit mass on the
 * unbounded lattice and then clipped to the grid.
 *
 * `center` is in grid coordinates (cell units). Cells far from the centre may
 * underflow to zero.
 */
inline Heatmap rasterize_gaussian(const Vec2 & center, std::size_t height, std::size_t width,
  double sigma)
{
  if (!(sigma > 0.0) || !std::isfinite(sigma)) {
    throw ConfigError("rasterize_gaussian: sigma must be positive");
  }
  if (!center.finite()) {
    throw DataError("rasterize_gaussian: non-finite center");
  }
  const double z = detail::lattice_mass(center.x, sigma) * detail::lattice_mass(center.y, sigma);
  Heatmap h(height, width);
  for (std::size_t r = 0; r < height; ++r) {
    const double dy = static_cast<double>(r) - center.y;
    for (std::size_t c = 0; c < width; ++c) {
      const double dx = static_cast<double>(c) - center.x;
      h.at(r, c) = std::exp(-(dx * dx + dy * dy) / (2.0 * sigma * sigma)) / z;
    }
  }
  return h;
}

/// exp(-d^2 / 2 sigma^2) per cell, so a cell centred on `center` reads exactly 1.
inline Heatmap gaussian_peak_heatmap(const Vec2 & center, std::size_t height, std::size_t width,
  double sigma)
{
  if (!(sigma > 0.0) || !std::isfinite(sigma)) {
    throw ConfigError("gaussian target: sigma must be positive");
  }
  Heatmap h(height, width);
  for (std::size_t r = 0; r < height; ++r) {
    const double dy = static_cast<double>(r) - center.y;
    for (std::size_t c = 0; c < width; ++c) {
      const double dx = static_cast<double>(c) - center.x;
      h.at(r, c) = std::exp(-(dx * dx + dy * dy) / (2.0 * sigma * sigma));
    }
  }
  return h;
}

// ---------------------------------------------------------------------------
// Text format: header `H W D`, then H*W*D reals, row-major with the class fastest.

inline SceneRaster parse_raster(const std::string & text, const std::string & source = "<memory>")
{
  std::istringstream in(text);
  std::string tok;
  auto next = [&](const char * what) {
    if (!(in >> tok)) {
      throw DataError(source + ": raster truncated while reading " + what);
    }
    return tok;
  };
  std::int64_t dims[3];
  const char * names[3] = {"H", "W", "D"};
  for (int i = 0; i < 3; ++i) {
    if (!parse_integral(next(names[i]), dims[i]) || dims[i] <= 0) {
      throw DataError(source + ": invalid raster dimension " + names[i] + " '" + tok + "'");
    }
  }
  SceneRaster r;
  r.height = static_cast<std::size_t>(dims[0]);
  r.width = static_cast<std::size_t>(dims[1]);
  r.classes = static_cast<std::size_t>(dims[2]);
  r.scores.resize(r.height * r.width * r.classes);
  for (std::size_t i = 0; i < r.scores.size(); ++i) {
    if (!parse_number(next("scores"), r.scores[i])) {
      throw DataError(source + ": invalid raster value '" + tok + "' at index " + std::to_string(i));
    }
  }
  if (in >> tok) {
    throw DataError(source + ": trailing data after " + std::to_string(r.scores.size()) +
                    " raster values");
  }
  r.validate();
  return r;
}

inline SceneRaster load_raster(const std::filesystem::path & path)
{
  return parse_raster(read_file(path), path.string());
}

inline std::string format_raster(const SceneRaster & r)
{
  std::string out = std::to_string(r.height) + ' ' + std::to_string(r.width) + ' ' +
                    std::to_string(r.classes) + '\n';
  for (std::size_t cell = 0; cell < r.height * r.width; ++cell) {
    for (std::size_t d = 0; d < r.classes; ++d) {
      if (d) out += ' ';
      out += format_double(r.scores[cell * r.classes + d]);
    }
    out += '\n';
  }
  return out;
}

/// Single-channel raster text for a heatmap.
inline std::string format_heatmap(const Heatmap & h)
{
  std::string out = std::to_string(h.height) + ' ' + std::to_string(h.width) + " 1\n";
  for (std::size_t r = 0; r < h.height; ++r) {
    for (std::size_t c = 0; c < h.width; ++c) {
      if (c) out += ' ';
      out += format_double(h.at(r, c));
    }
    out += '\n';
  }
  return out;
}

/// Plain (P2) grayscale PGM, scaled so the maximum cell is white.
inline std::string format_pgm(const Heatmap & h)
{
  const double peak = *std::max_element(h.values.begin(), h.values.end());
  std::string out =
    "P2\n" + std::to_string(h.width) + ' ' + std::to_string(h.height) + "\n255\n";
  for (std::size_t r = 0; r < h.height; ++r) {
    for (std::size_t c = 0; c < h.width; ++c) {
      const double v = peak > 0.0 ? std::clamp(h.at(r, c) / peak, 0.0, 1.0) : 0.0;
      if (c) out += ' ';
      out += std::to_string(static_cast<int>(std::lround(255.0 * v)));
    }
    out += '\n';
  }
  return out;
}

/// Block-averages class scores by `factor`; trailing rows/columns that do not fill a block are cropped.
inline SceneRaster downsample(const SceneRaster & src, std::size_t factor)
{
  if (factor == 0) {
    throw ConfigError("downsample: factor must be positive");
  }
  if (factor == 1) return src;
  const std::size_t h = src.height / factor;
  const std::size_t w = src.width / factor;
  if (h == 0 || w == 0) {
    throw ConfigError("downsample: factor " + std::to_string(factor) + " exceeds raster size");
  }
  SceneRaster out{h, w, src.classes, std::vector<double>(h * w * src.classes, 0.0)};
  const double inv = 1.0 / static_cast<double>(factor * factor);
  for (std::size_t r = 0; r < h; ++r)
    for (std::size_t c = 0; c < w; ++c)
      for (std::size_t dr = 0; dr < factor; ++dr)
        for (std::size_t dc = 0; dc < factor; ++dc)
          for (std::size_t d = 0; d < src.classes; ++d)
            out.at(r, c, d) += src.at(r * factor + dr, c * factor + dc, d) * inv;
  return out;
}

}  // namespace vista

#endif  // VISTA__DATA__RASTER_HPP_

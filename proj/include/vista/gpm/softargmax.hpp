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

#ifndef VISTA__GPM__SOFTARGMAX_HPP_
#define VISTA__GPM__SOFTARGMAX_HPP_

#include <algorithm>
#include <cmath>
#include <string>
#include <vector>

#include "vista/common/error.hpp"
#include "vista/data/raster.hpp"
#include "vista/data/types.hpp"
#include "vista/numerics/tape.hpp"

namespace vista::gpm
{

inline void check_temperature(double temperature)
{
  if (!(temperature > 0.0) || !std::isfinite(temperature)) {
    throw ConfigError("softargmax: temperature must be positive, got " + std::to_string(temperature));
  }
}

/**
 * @brief Expected cell-centre coordinate under softmax(scores / temperature).
 *
 * Returns grid coordinates (x = column, y = row).
 */
inline Vec2 softargmax(const Heatmap & scores, double temperature)
{
  check_temperature(temperature);
  const double peak = *std::max_element(scores.values.begin(), scores.values.end());
  std::vector<double> w(scores.values.size());
  double z = 0.0;
  for (std::size_t i = 0; i < w.size(); ++i) {
    w[i] = std::exp((scores.values[i] - peak) / temperature);
    z += w[i];
  }
  Vec2 out;
  for (std::size_t r = 0; r < scores.height; ++r) {
    for (std::size_t c = 0; c < scores.width; ++c) {
      const double p = w[r * scores.width + c] / z;
      out.x += p * static_cast<double>(c);
      out.y += p * static_cast<double>(r);
    }
  }
  return out;
}

/// Differentiable variant over a [H, W] score variable; returns [1, 2] grid coordinates (x, y).
template <class Real>
nn::Var<Real> softargmax(nn::Var<Real> scores, double temperature)
{
  check_temperature(temperature);
  const std::size_t H = scores.dim(0), W = scores.dim(1);
  std::vector<Real> coords(H * W * 2);
  for (std::size_t r = 0; r < H; ++r) {
    for (std::size_t c = 0; c < W; ++c) {
      coords[(r * W + c) * 2] = static_cast<Real>(c);
      coords[(r * W + c) * 2 + 1] = static_cast<Real>(r);
    }
  }
  auto & tape = scores.tape();
  nn::Var<Real> flat = nn::reshape(scores, nn::Shape{1, H * W});
  nn::Var<Real> probs = nn::softmax(nn::scale(flat, static_cast<Real>(1.0 / temperature)));
  return nn::matmul(probs, tape.constant(nn::Shape{H * W, 2}, std::move(coords)));
}

}  // namespace vista::gpm

#endif  // VISTA__GPM__SOFTARGMAX_HPP_

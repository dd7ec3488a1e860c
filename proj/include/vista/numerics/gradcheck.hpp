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

#ifndef VISTA__NUMERICS__GRADCHECK_HPP_
#define VISTA__NUMERICS__GRADCHECK_HPP_

#include <algorithm>
#include <cmath>
#include <functional>
#include <string>
#include <vector>

#include "vista/common/error.hpp"
#include "vista/common/rng.hpp"
#include "vista/numerics/param_store.hpp"
#include "vista/numerics/tape.hpp"

namespace vista::nn
{

/// Builds a scalar loss on the given tape from bound parameters.
using LossBuilder = std::function<Var<double>(Tape<double> &, BoundParams<double> &)>;

struct Coordinate
{
  std::string name;
  std::size_t index = 0;
};

struct GradCheckResult
{
  double max_rel_error = 0.0;
  Coordinate worst;
  double worst_analytic = 0.0;
  double worst_numeric = 0.0;
  std::size_t checked = 0;
};

/// Up to `per_entry` random coordinates from every entry whose name starts with `prefix`.
inline std::vector<Coordinate> sample_coordinates(const ParamStore & store, std::size_t per_entry,
  std::uint64_t seed, const std::string & prefix = {})
{
  Rng rng(seed);
  std::vector<Coordinate> out;
  for (const auto & e : store.entries()) {
    if (e.name.rfind(prefix, 0) != 0) continue;
    const std::size_t n = e.value.size();
    if (n <= per_entry) {
      for (std::size_t i = 0; i < n; ++i) out.push_back({e.name, i});
      continue;
    }
    std::vector<std::size_t> idx(n);
    for (std::size_t i = 0; i < n; ++i) idx[i] = i;
    rng.shuffle(idx);
    idx.resize(per_entry);
    std::sort(idx.begin(), idx.end());
    for (auto i : idx) out.push_back({e.name, i});
  }
  return out;
}

inline double evaluate_loss(ParamStore & store, const LossBuilder & loss_fn)
{
  Tape<double> tape;
  BoundParams<double> params(tape, store, false);
  return loss_fn(tape, params).item();
}

/**
 * @brief Compares reverse-mode gradients with central differences.
 *
 * Relative error per coordinate is |analytic - numeric| / max(|analytic|, |numeric|, abs_floor);
 * the maximum over `coords` is returned. The floor keeps coordinates whose true
 * gradient is exactly zero (key biases under softmax, for one) from turning
 * difference round-off into a relative error of 1. Parameter values are restored bit-exactly.
 * The store's gradient slots are overwritten with the analytic gradient.
 */
inline GradCheckResult finite_difference_check(ParamStore & store,
  const std::vector<Coordinate> & coords, const LossBuilder & loss_fn, double epsilon,
  double abs_floor = 1e-6)
{
  if (!(epsilon >= 1e-7 && epsilon <= 1e-3)) {
    throw ConfigError("finite_difference_check: epsilon must lie in [1e-7, 1e-3]");
  }
  store.zero_grad();
  {
    Tape<double> tape;
    BoundParams<double> params(tape, store, true);
    tape.backward(loss_fn(tape, params));
  }
  GradCheckResult result;
  for (const auto & c : coords) {
    auto & entry = store.at(c.name);
    double & slot = entry.value.vec().at(c.index);
    const double original = slot;
    slot = original + epsilon;
    const double up = evaluate_loss(store, loss_fn);
    slot = original - epsilon;
    const double down = evaluate_loss(store, loss_fn);
    slot = original;
    const double numeric = (up - down) / (2.0 * epsilon);
    const double analytic = entry.grad.vec().at(c.index);
    const double denom = std::max({std::abs(analytic), std::abs(numeric), abs_floor});
    const double rel = std::abs(analytic - numeric) / denom;
    ++result.checked;
    if (rel > result.max_rel_error || result.checked == 1) {
      result.max_rel_error = std::max(result.max_rel_error, rel);
      if (rel >= result.max_rel_error) {
        result.worst = c;
        result.worst_analytic = analytic;
        result.worst_numeric = numeric;
      }
    }
  }
  return result;
}

}  // namespace vista::nn

#endif  // VISTA__NUMERICS__GRADCHECK_HPP_

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

#ifndef VISTA__DATA__SPLIT_HPP_
#define VISTA__DATA__SPLIT_HPP_

#include <algorithm>
#include <cmath>
#include <map>
#include <string>
#include <vector>

#include "vista/common/error.hpp"
#include "vista/common/rng.hpp"
#include "vista/data/types.hpp"

namespace vista
{

struct Fold
{
  std::string held_out;  ///< scene id of the test set, empty for ratio splits
  std::vector<Scene> train;
  std::vector<Scene> test;
};

/// Distinct scene ids in order of first appearance.
inline std::vector<std::string> scene_ids(const std::vector<Scene> & scenes)
{
  std::vector<std::string> ids;
  for (const auto & s : scenes) {
    if (std::find(ids.begin(), ids.end(), s.scene_id) == ids.end()) ids.push_back(s.scene_id);
  }
  return ids;
}

/// One fold per scene id, holding out every window of that scene.
inline std::vector<Fold> split_leave_one_out(const std::vector<Scene> & scenes)
{
  const auto ids = scene_ids(scenes);
  if (ids.size() < 2) {
    throw ConfigError("leave-one-out needs at least 2 distinct scene ids, got " +
                      std::to_string(ids.size()) + "; use a ratio split instead");
  }
  std::vector<Fold> folds;
  for (const auto & id : ids) {
    Fold f;
    f.held_out = id;
    for (const auto & s : scenes) (s.scene_id == id ? f.test : f.train).push_back(s);
    folds.push_back(std::move(f));
  }
  return folds;
}

/// Seeded shuffle of windows, the first round(train_fraction * n) going to training.
inline Fold split_ratio(const std::vector<Scene> & scenes, double train_fraction, std::uint64_t seed)
{
  if (!(train_fraction > 0.0 && train_fraction < 1.0)) {
    throw ConfigError("ratio split: train fraction must lie in (0, 1)");
  }
  if (scenes.size() < 2) {
    throw ConfigError("ratio split needs at least 2 windows");
  }
  std::vector<std::size_t> order(scenes.size());
  for (std::size_t i = 0; i < order.size(); ++i) order[i] = i;
  Rng rng(seed);
  rng.shuffle(order);
  auto n_train = static_cast<std::size_t>(std::lround(train_fraction * static_cast<double>(scenes.size())));
  n_train = std::clamp<std::size_t>(n_train, 1, scenes.size() - 1);
  Fold f;
  for (std::size_t i = 0; i < order.size(); ++i) {
    (i < n_train ? f.train : f.test).push_back(scenes[order[i]]);
  }
  return f;
}

}  // namespace vista

#endif  // VISTA__DATA__SPLIT_HPP_

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

#ifndef VISTA__METRICS__REPORT_HPP_
#define VISTA__METRICS__REPORT_HPP_

#include <optional>
#include <string>
#include <vector>

#include <json.hpp>

#include "vista/common/io.hpp"
#include "vista/metrics/metrics.hpp"

namespace vista::metrics
{

/// Aggregate over scene windows. Per-agent metrics are pooled over every agent.
struct MetricReport
{
  double ade = 0.0;
  double fde = 0.0;
  double min_ade = 0.0;
  double min_fde = 0.0;
  double auc = 0.0;        ///< summed over agents
  double auc_mean = 0.0;   ///< averaged over agents
  std::vector<double> auc_curve;
  double cr_mean = 0.0;
  double cr_best = 0.0;
  std::optional<double> kde_nll;  ///< absent when k < 2
  double miss_rate = 0.0;
  double miss_threshold = kDefaultMissThreshold;
  double epsilon = 0.0;
  std::size_t n_agents = 0;
  std::size_t n_scenes = 0;
  std::size_t k = 0;
  std::string unit = "scene";
  std::vector<std::string> warnings;
};

/**
 * @brief Evaluates every window and pools the results.
 *
 * Collision rates are averaged over windows holding at least two agents; a
 * window with one agent adds a warning and is left out of CR.
 */
inline MetricReport evaluate(const std::vector<EvalInput> & windows, double epsilon,
  double miss_threshold = kDefaultMissThreshold)
{
  MetricReport r;
  r.epsilon = epsilon;
  r.miss_threshold = miss_threshold;
  r.n_scenes = windows.size();
  if (windows.empty()) throw DataError("evaluate: nothing to evaluate");
  r.unit = windows.front().unit;
  std::size_t evaluated = 0;
  double kde_sum = 0.0;
  std::size_t kde_count = 0, cr_windows = 0, dropped = 0;
  for (auto w : windows) {
    dropped += drop_missing_gt(w);
    if (w.n_agents() == 0) continue;
    w.validate();
    if (evaluated++ == 0) r.k = w.k();
    if (w.k() != r.k) throw DataError("evaluate: windows disagree on k");
    const double n = static_cast<double>(w.n_agents());
    r.n_agents += w.n_agents();
    r.ade += ade(w) * n;
    r.fde += fde(w) * n;
    r.min_ade += min_ade(w) * n;
    r.min_fde += min_fde(w) * n;
    r.miss_rate += miss_rate(w, miss_threshold) * n;
    const auto a = auc(w);
    r.auc += a.auc;
    if (r.auc_curve.empty()) r.auc_curve.assign(a.curve.size(), 0.0);
    for (std::size_t K = 0; K < a.curve.size(); ++K) r.auc_curve[K] += a.curve[K] * n;
    if (w.n_agents() >= 2) {
      r.cr_mean += collision_rate(w, epsilon, CollisionMode::PerSampleMean);
      r.cr_best += collision_rate(w, epsilon, CollisionMode::BestSample);
      ++cr_windows;
    }
    if (w.k() >= 2) {
      kde_sum += kde_nll(w) * n * static_cast<double>(w.steps());
      kde_count += w.n_agents() * w.steps();
    }
  }
  if (r.n_agents == 0) throw DataError("evaluate: no agent has complete ground truth");
  if (dropped) {
    r.warnings.push_back(std::to_string(dropped) + " agent(s) with missing ground truth excluded");
  }
  const double n = static_cast<double>(r.n_agents);
  r.ade /= n;
  r.fde /= n;
  r.min_ade /= n;
  r.min_fde /= n;
  r.miss_rate /= n;
  r.auc_mean = r.auc / n;
  for (auto & c : r.auc_curve) c /= n;
  if (cr_windows) {
    r.cr_mean /= static_cast<double>(cr_windows);
    r.cr_best /= static_cast<double>(cr_windows);
  }
  if (cr_windows < evaluated) {
    r.warnings.push_back(std::to_string(evaluated - cr_windows) +
                         " window(s) with fewer than two agents excluded from collision rate");
  }
  if (kde_count) {
    r.kde_nll = kde_sum / static_cast<double>(kde_count);
  } else {
    r.warnings.push_back("kde_nll needs k >= 2; omitted");
  }
  return r;
}

inline nlohmann::ordered_json to_json(const MetricReport & r)
{
  nlohmann::ordered_json j;
  j["ade"] = r.ade;
  j["fde"] = r.fde;
  j["min_ade"] = r.min_ade;
  j["min_fde"] = r.min_fde;
  j["auc"] = r.auc;
  j["auc_mean"] = r.auc_mean;
  j["auc_curve"] = r.auc_curve;
  j["cr_mean"] = r.cr_mean;
  j["cr_best"] = r.cr_best;
  j["kde_nll"] = r.kde_nll ? nlohmann::ordered_json(*r.kde_nll) : nlohmann::ordered_json(nullptr);
  j["miss_rate"] = r.miss_rate;
  j["miss_threshold"] = r.miss_threshold;
  j["epsilon"] = r.epsilon;
  j["n_agents"] = r.n_agents;
  j["n_scenes"] = r.n_scenes;
  j["k"] = r.k;
  j["unit"] = r.unit;
  j["warnings"] = r.warnings;
  return j;
}

/// Header line plus one row; the AUC curve is ';'-separated.
inline std::string to_csv(const MetricReport & r)
{
  std::string curve;
  for (std::size_t K = 0; K < r.auc_curve.size(); ++K) {
    if (K) curve += ";";
    curve += format_double(r.auc_curve[K]);
  }
  std::string out =
    "ade,fde,min_ade,min_fde,auc,auc_mean,auc_curve,cr_mean,cr_best,kde_nll,miss_rate,"
    "miss_threshold,epsilon,n_agents,n_scenes,k,unit\n";
  out += format_double(r.ade) + "," + format_double(r.fde) + "," + format_double(r.min_ade) + "," +
         format_double(r.min_fde) + "," + format_double(r.auc) + "," + format_double(r.auc_mean) +
         "," + curve + "," + format_double(r.cr_mean) + "," + format_double(r.cr_best) + "," +
         (r.kde_nll ? format_double(*r.kde_nll) : std::string()) + "," +
         format_double(r.miss_rate) + "," + format_double(r.miss_threshold) + "," +
         format_double(r.epsilon) + "," + std::to_string(r.n_agents) + "," +
         std::to_string(r.n_scenes) + "," + std::to_string(r.k) + "," + r.unit + "\n";
  return out;
}

}  // namespace vista::metrics

#endif  // VISTA__METRICS__REPORT_HPP_

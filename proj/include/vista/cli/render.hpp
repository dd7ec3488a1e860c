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

#ifndef VISTA__CLI__RENDER_HPP_
#define VISTA__CLI__RENDER_HPP_

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <limits>
#include <numeric>
#include <string>
#include <vector>

#include <nlohmann/json.hpp>

#include "vista/common/error.hpp"
#include "vista/common/io.hpp"
#include "vista/data/types.hpp"
#include "vista/tpm/model.hpp"

namespace vista::cli
{

/// One exported attention trace: sample `sample_index` of the window starting at `start_frame`.
struct TraceFile
{
  std::string scene_id;
  std::int64_t start_frame = 0;
  std::size_t sample_index = 0;
  tpm::AttentionTrace trace;
};

inline nlohmann::ordered_json trace_to_json(const TraceFile & f)
{
  nlohmann::ordered_json j;
  j["scene_id"] = f.scene_id;
  j["start_frame"] = f.start_frame;
  j["sample_index"] = f.sample_index;
  j["agent_ids"] = f.trace.agent_ids;
  auto & steps = j["steps"] = nlohmann::ordered_json::array();
  const std::size_t n = f.trace.n();
  for (std::size_t s = 0; s < f.trace.steps.size(); ++s) {
    auto rows = nlohmann::ordered_json::array();
    for (std::size_t i = 0; i < n; ++i) {
      auto row = nlohmann::ordered_json::array();
      for (std::size_t k = 0; k < n; ++k) row.push_back(f.trace.at(s, i, k));
      rows.push_back(std::move(row));
    }
    steps.push_back({{"t", f.trace.steps[s]}, {"matrix", std::move(rows)}});
  }
  return j;
}

inline TraceFile trace_from_json(const std::string & text, const std::string & source = "<memory>")
{
  TraceFile f;
  try {
    const auto j = nlohmann::json::parse(text);
    f.scene_id = j.at("scene_id").get<std::string>();
    f.start_frame = j.value("start_frame", std::int64_t{0});
    f.sample_index = j.at("sample_index").get<std::size_t>();
    f.trace.agent_ids = j.at("agent_ids").get<std::vector<std::int64_t>>();
    const std::size_t n = f.trace.agent_ids.size();
    for (const auto & step : j.at("steps")) {
      f.trace.steps.push_back(step.at("t").get<std::size_t>());
      const auto & rows = step.at("matrix");
      if (rows.size() != n) throw ParseError(source + ": attention matrix is not " + std::to_string(n) + "x" + std::to_string(n));
      std::vector<double> flat;
      for (const auto & row : rows) {
        if (row.size() != n) throw ParseError(source + ": attention matrix row has " + std::to_string(row.size()) + " entries");
        for (const auto & v : row) flat.push_back(v.get<double>());
      }
      f.trace.matrices.push_back(std::move(flat));
    }
  } catch (const nlohmann::json::exception & e) {
    throw ParseError(source + ": " + e.what());
  }
  return f;
}

namespace detail
{

inline std::string fmt_px(double v)
{
  char buf[32];
  std::snprintf(buf, sizeof(buf), "%.2f", v);
  return buf;
}

/// Maps scene coordinates into a square canvas with a margin.
struct Canvas
{
  double x0 = 0.0, y0 = 0.0, scale = 1.0, margin = 20.0, size = 480.0;

  explicit Canvas(const std::vector<Vec2> & pts, double size_px = 480.0) : size(size_px)
  {
    double xmin = std::numeric_limits<double>::infinity(), ymin = xmin;
    double xmax = -xmin, ymax = -xmin;
    for (const auto & p : pts) {
      xmin = std::min(xmin, p.x);
      xmax = std::max(xmax, p.x);
      ymin = std::min(ymin, p.y);
      ymax = std::max(ymax, p.y);
    }
    if (pts.empty()) xmin = ymin = 0.0, xmax = ymax = 1.0;
    const double span = std::max({xmax - xmin, ymax - ymin, 1e-9});
    x0 = xmin;
    y0 = ymin;
    scale = (size - 2.0 * margin) / span;
  }

  std::string point(const Vec2 & p) const
  {
    return fmt_px(margin + (p.x - x0) * scale) + "," + fmt_px(margin + (p.y - y0) * scale);
  }

  std::string polyline(const Trajectory & t, const std::string & cls, const std::string & stroke,
    const std::string & extra = {}) const
  {
    std::string pts;
    for (const auto & p : t) pts += (pts.empty() ? "" : " ") + point(p);
    return "  <polyline class=\"" + cls + "\" points=\"" + pts + "\" fill=\"none\" stroke=\"" + stroke +
           "\" stroke-width=\"2\"" + extra + "/>\n";
  }
};

inline std::string svg_open(double w, double h)
{
  return "<svg xmlns=\"http://www.w3.org/2000/svg\" width=\"" + fmt_px(w) + "\" height=\"" + fmt_px(h) +
         "\" viewBox=\"0 0 " + fmt_px(w) + " " + fmt_px(h) + "\">\n";
}

}  // namespace detail

/**
 * @brief Window figure: observed (solid), ground-truth future (green),
 * predicted samples (red) and goal markers.
 *
 * `pred[i][j]` is sample j of agent i in scene order; `goals[i][j]` may be
 * empty, in which case each sample's final position is marked.
 */
inline std::string render_scene_svg(const Scene & scene, std::size_t t_obs,
  const std::vector<std::vector<Trajectory>> & pred, const std::vector<std::vector<Vec2>> & goals = {})
{
  const std::size_t N = scene.n_agents();
  if (pred.size() != N) throw DataError("render: predictions for " + std::to_string(pred.size()) + " of " + std::to_string(N) + " agents");
  if (!goals.empty() && goals.size() != N) throw DataError("render: goals do not match the agent count");
  std::vector<Vec2> all;
  for (const auto & t : scene.tracks) all.insert(all.end(), t.positions.begin(), t.positions.end());
  for (const auto & a : pred)
    for (const auto & s : a) all.insert(all.end(), s.begin(), s.end());
  for (const auto & a : goals) all.insert(all.end(), a.begin(), a.end());
  const detail::Canvas cv(all);
  std::string out = detail::svg_open(cv.size, cv.size);
  out += "  <title>" + scene.scene_id + " frame " + std::to_string(scene.start_frame) + "</title>\n";
  for (std::size_t i = 0; i < N; ++i) {
    const std::string id = " data-agent=\"" + std::to_string(scene.tracks[i].agent_id) + "\"";
    const Trajectory obs = scene.observed(i, t_obs);
    Trajectory fut = scene.future(i, t_obs);
    fut.insert(fut.begin(), obs.back());
    out += cv.polyline(obs, "observed", "black", id);
    out += cv.polyline(fut, "future", "green", id);
    for (std::size_t j = 0; j < pred[i].size(); ++j) {
      Trajectory p = pred[i][j];
      p.insert(p.begin(), obs.back());
      out += cv.polyline(p, "prediction", "red", id + " data-sample=\"" + std::to_string(j) + "\" stroke-opacity=\"0.6\"");
      const Vec2 g = goals.empty() ? pred[i][j].back() : goals[i].at(j);
      const auto xy = cv.point(g);
      const auto comma = xy.find(',');
      out += "  <circle class=\"goal\" cx=\"" + xy.substr(0, comma) + "\" cy=\"" + xy.substr(comma + 1) +
             "\" r=\"4\" fill=\"red\"" + id + " data-sample=\"" + std::to_string(j) + "\"/>\n";
    }
  }
  out += "</svg>\n";
  return out;
}

/// Gray level of an attention weight: 255 for 0, 0 for 1.
inline int attention_gray(double a)
{
  const double c = std::clamp(a, 0.0, 1.0);
  return 255 - static_cast<int>(std::lround(255.0 * c));
}

/**
 * @brief N x N heat grid of one trace step. Rows and columns follow ascending
 * agent id; darker cells carry more weight.
 */
inline std::string render_attention_svg(const tpm::AttentionTrace & trace, std::size_t step)
{
  const std::size_t n = trace.n();
  if (step >= trace.matrices.size()) throw DataError("render: trace has no step index " + std::to_string(step));
  std::vector<std::size_t> order(n);
  std::iota(order.begin(), order.end(), std::size_t{0});
  std::stable_sort(order.begin(), order.end(),
    [&](std::size_t a, std::size_t b) { return trace.agent_ids[a] < trace.agent_ids[b]; });
  const double cell = 32.0, label = 40.0;
  const double side = label + cell * static_cast<double>(n) + 8.0;
  std::string out = detail::svg_open(side, side);
  out += "  <title>attention t=" + std::to_string(trace.steps.at(step)) + "</title>\n";
  for (std::size_t r = 0; r < n; ++r) {
    const std::string id = std::to_string(trace.agent_ids[order[r]]);
    const double c = label + cell * (static_cast<double>(r) + 0.5);
    out += "  <text class=\"row-label\" x=\"" + detail::fmt_px(label - 4.0) + "\" y=\"" + detail::fmt_px(c + 4.0) +
           "\" text-anchor=\"end\" font-size=\"12\">" + id + "</text>\n";
    out += "  <text class=\"col-label\" x=\"" + detail::fmt_px(c) + "\" y=\"" + detail::fmt_px(label - 6.0) +
           "\" text-anchor=\"middle\" font-size=\"12\">" + id + "</text>\n";
  }
  for (std::size_t r = 0; r < n; ++r) {
    for (std::size_t c = 0; c < n; ++c) {
      const double a = trace.at(step, order[r], order[c]);
      const int g = attention_gray(a);
      out += "  <rect class=\"cell\" x=\"" + detail::fmt_px(label + cell * static_cast<double>(c)) + "\" y=\"" +
             detail::fmt_px(label + cell * static_cast<double>(r)) + "\" width=\"" + detail::fmt_px(cell) +
             "\" height=\"" + detail::fmt_px(cell) + "\" fill=\"rgb(" + std::to_string(g) + "," +
             std::to_string(g) + "," + std::to_string(g) + ")\" data-row=\"" +
             std::to_string(trace.agent_ids[order[r]]) + "\" data-col=\"" +
             std::to_string(trace.agent_ids[order[c]]) + "\" data-value=\"" + format_double(a) + "\"/>\n";
    }
  }
  out += "</svg>\n";
  return out;
}

}  // namespace vista::cli

#endif  // VISTA__CLI__RENDER_HPP_

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

#ifndef VISTA__DATA__SYNTH_HPP_
#define VISTA__DATA__SYNTH_HPP_

#include <algorithm>
#include <cmath>
#include <limits>
#include <numbers>
#include <sstream>
#include <string>
#include <vector>

#include "vista/common/error.hpp"
#include "vista/common/io.hpp"
#include "vista/common/rng.hpp"
#include "vista/data/types.hpp"

namespace vista
{

enum class Scenario { ConstantVelocity, Crossing, Group, Diverge, HeadOnAvoid };

inline const std::vector<std::string> & scenario_names()
{
  static const std::vector<std::string> names{
    "constant-velocity", "crossing", "group", "diverge", "head-on-avoid"};
  return names;
}

inline Scenario scenario_from_name(const std::string & name)
{
  const auto & names = scenario_names();
  for (std::size_t i = 0; i < names.size(); ++i) {
    if (names[i] == name) return static_cast<Scenario>(i);
  }
  std::string known;
  for (const auto & n : names) known += (known.empty() ? "" : ", ") + n;
  throw ConfigError("unknown scenario '" + name + "' (known: " + known + ")");
}

inline std::string scenario_name(Scenario s) { return scenario_names()[static_cast<int>(s)]; }

/**
 * @brief Parameters of one synthetic scene.
 *
 * speed is per frame step, margin the minimum simultaneous pairwise distance
 * guaranteed in the generated ground truth. With randomize = false the layout
 * is canonical: unrotated, unjittered, bounding box at the grid origin.
 */
struct ScenarioSpec
{
  std::string scenario = "constant-velocity";
  std::size_t n_agents = 1;
  std::size_t n_windows = 1;
  double speed = 1.0;
  double margin = 1.0;
  std::uint64_t seed = 0;
  GridSpec grid;
  std::size_t t_obs = 8;
  std::size_t t_fut = 12;
  bool randomize = true;
  bool raster = true;
  std::string scene_id;

  std::size_t total() const { return t_obs + t_fut; }
};

namespace detail
{
inline bool parse_bool(const std::string & v, bool & out)
{
  if (v == "true" || v == "1" || v == "yes" || v == "on") return out = true, true;
  if (v == "false" || v == "0" || v == "no" || v == "off") return out = false, true;
  return false;
}
}  // namespace detail

/// Applies one `key=value` assignment; unknown keys and bad values raise ConfigError.
inline void set_scenario_field(ScenarioSpec & s, const std::string & key, const std::string & value)
{
  auto bad = [&]() { return ConfigError("scenario spec: invalid value '" + value + "' for '" + key + "'"); };
  auto to_size = [&](std::size_t & out) {
    std::int64_t v = 0;
    if (!parse_integral(value, v) || v < 0) throw bad();
    out = static_cast<std::size_t>(v);
  };
  auto to_real = [&](double & out) {
    if (!parse_number(value, out) || !std::isfinite(out)) throw bad();
  };
  if (key == "scenario") {
    scenario_from_name(value);
    s.scenario = value;
  } else if (key == "n_agents") {
    to_size(s.n_agents);
  } else if (key == "n_windows") {
    to_size(s.n_windows);
  } else if (key == "speed") {
    to_real(s.speed);
  } else if (key == "margin") {
    to_real(s.margin);
  } else if (key == "seed") {
    if (!parse_number(value, s.seed)) throw bad();
  } else if (key == "grid") {
    // "H" or "HxW"
    const auto x = value.find('x');
    std::int64_t h = 0, w = 0;
    if (x == std::string::npos) {
      if (!parse_integral(value, h)) throw bad();
      w = h;
    } else if (!parse_integral(value.substr(0, x), h) || !parse_integral(value.substr(x + 1), w)) {
      throw bad();
    }
    if (h <= 0 || w <= 0) throw bad();
    s.grid.height = static_cast<std::size_t>(h);
    s.grid.width = static_cast<std::size_t>(w);
  } else if (key == "cell_size") {
    to_real(s.grid.cell_size);
  } else if (key == "t_obs") {
    to_size(s.t_obs);
  } else if (key == "t_fut") {
    to_size(s.t_fut);
  } else if (key == "randomize") {
    if (!detail::parse_bool(value, s.randomize)) throw bad();
  } else if (key == "raster") {
    if (!detail::parse_bool(value, s.raster)) throw bad();
  } else if (key == "scene_id") {
    s.scene_id = value;
  } else {
    throw ConfigError("scenario spec: unknown key '" + key + "'");
  }
}

/// Parses whitespace, comma or newline separated `key=value` pairs; '#' starts a comment.
inline ScenarioSpec parse_scenario_spec(const std::string & text)
{
  ScenarioSpec s;
  std::istringstream in(text);
  std::string line;
  while (std::getline(in, line)) {
    line = line.substr(0, line.find('#'));
    std::replace(line.begin(), line.end(), ',', ' ');
    for (auto tok : split_fields(line)) {
      const auto eq = tok.find('=');
      if (eq == std::string_view::npos) {
        throw ConfigError("scenario spec: expected key=value, got '" + std::string(tok) + "'");
      }
      set_scenario_field(s, std::string(tok.substr(0, eq)), std::string(tok.substr(eq + 1)));
    }
  }
  return s;
}

inline void validate_scenario_spec(const ScenarioSpec & s)
{
  scenario_from_name(s.scenario);
  if (s.n_agents < 1 || s.n_agents > 32) {
    throw ConfigError("scenario spec: n_agents must be in 1..32");
  }
  if (s.n_windows < 1) throw ConfigError("scenario spec: n_windows must be positive");
  if (!(s.speed > 0.0)) throw ConfigError("scenario spec: speed must be positive");
  if (!(s.margin > 0.0)) throw ConfigError("scenario spec: margin must be positive");
  if (!(s.grid.cell_size > 0.0)) throw ConfigError("scenario spec: cell_size must be positive");
  if (s.grid.height < 2 || s.grid.width < 2) throw ConfigError("scenario spec: grid too small");
  if (s.t_obs < 1 || s.t_fut < 1) throw ConfigError("scenario spec: t_obs and t_fut must be positive");
}

/// Smallest distance between two agents at the same step, +inf for a single agent.
inline double min_simultaneous_distance(const std::vector<Trajectory> & tracks)
{
  double best = std::numeric_limits<double>::infinity();
  for (std::size_t i = 0; i < tracks.size(); ++i)
    for (std::size_t j = i + 1; j < tracks.size(); ++j)
      for (std::size_t t = 0; t < tracks[i].size(); ++t)
        best = std::min(best, distance(tracks[i][t], tracks[j][t]));
  return best;
}

namespace detail
{

struct Layout
{
  std::vector<Trajectory> tracks;
  bool placed = false;  ///< already in scene coordinates
};

inline Vec2 rotate(const Vec2 & p, double angle)
{
  const double c = std::cos(angle), s = std::sin(angle);
  return {c * p.x - s * p.y, s * p.x + c * p.y};
}

inline bool inside(const Trajectory & tr, double xmax, double ymax)
{
  for (const auto & p : tr)
    if (p.x < 0.0 || p.y < 0.0 || p.x > xmax || p.y > ymax) return false;
  return true;
}

/// Agents on parallel lanes `spacing` apart, moving along +x.
inline std::vector<Trajectory> row_formation(std::size_t n, std::size_t steps, double v,
  double spacing)
{
  std::vector<Trajectory> out(n);
  for (std::size_t i = 0; i < n; ++i)
    for (std::size_t t = 0; t < steps; ++t)
      out[i].push_back({v * static_cast<double>(t), spacing * static_cast<double>(i)});
  return out;
}

inline Layout independent_walkers(const ScenarioSpec & s, double v, Rng & rng)
{
  const double xmax = s.grid.span_x(), ymax = s.grid.span_y();
  Layout out{{}, true};
  for (std::size_t i = 0; i < s.n_agents; ++i) {
    bool ok = false;
    for (int attempt = 0; attempt < 200 && !ok; ++attempt) {
      const double heading = rng.uniform(0.0, 2.0 * std::numbers::pi);
      const double vi = v * rng.uniform(0.8, 1.2);
      const Vec2 dir{std::cos(heading), std::sin(heading)};
      const Vec2 travel = dir * (vi * static_cast<double>(s.total() - 1));
      const double x0 = std::max(0.0, -travel.x), x1 = std::min(xmax, xmax - travel.x);
      const double y0 = std::max(0.0, -travel.y), y1 = std::min(ymax, ymax - travel.y);
      if (x0 > x1 || y0 > y1) continue;
      const Vec2 start{rng.uniform(x0, x1), rng.uniform(y0, y1)};
      Trajectory tr;
      for (std::size_t t = 0; t < s.total(); ++t)
        tr.push_back(start + dir * (vi * static_cast<double>(t)));
      auto trial = out.tracks;
      trial.push_back(tr);
      if (min_simultaneous_distance(trial) >= s.margin) {
        out.tracks = std::move(trial);
        ok = true;
      }
    }
    if (!ok) {
      out.tracks.clear();
      return out;
    }
  }
  return out;
}

inline Layout crossing(const ScenarioSpec & s, double v)
{
  const std::size_t nh = (s.n_agents + 1) / 2, nv = s.n_agents / 2;
  const double m = s.margin;
  const double zone = 2.0 * m * static_cast<double>(std::max(nh, nv) - 1);
  const double lag = (zone + 3.0 * m) / v;
  const double tc = static_cast<double>(s.total() - 1) / 2.0;
  const double th = tc - lag / 2.0 - zone / (2.0 * v);
  Layout out;
  out.tracks.resize(s.n_agents);
  for (std::size_t i = 0; i < s.n_agents; ++i) {
    const std::size_t lane = i / 2;
    for (std::size_t t = 0; t < s.total(); ++t) {
      const double tt = static_cast<double>(t);
      if (i % 2 == 0) {
        out.tracks[i].push_back({v * (tt - th), 2.0 * m * static_cast<double>(lane)});
      } else {
        out.tracks[i].push_back({2.0 * m * static_cast<double>(lane), v * (tt - th - lag)});
      }
    }
  }
  return out;
}

inline Layout diverge(const ScenarioSpec & s, double v, Rng * rng)
{
  const double spread = 25.0 * std::numbers::pi / 180.0;
  double split = static_cast<double>(s.t_obs) - 1.0;
  double bias = 0.0;
  if (rng) {
    split += std::floor(rng->uniform(-2.0, 3.0));
    split = std::clamp(split, 1.0, static_cast<double>(s.total()) - 2.0);
    bias = s.n_agents == 1 ? (rng->uniform() < 0.5 ? -spread : spread)
                           : rng->uniform(-spread / 2.0, spread / 2.0);
  }
  Layout out;
  out.tracks.resize(s.n_agents);
  for (std::size_t i = 0; i < s.n_agents; ++i) {
    const double phi =
      bias + (static_cast<double>(i) - static_cast<double>(s.n_agents - 1) / 2.0) * spread;
    const Vec2 turn{std::cos(phi), std::sin(phi)};
    const Vec2 origin{0.0, 2.0 * s.margin * static_cast<double>(i)};
    for (std::size_t t = 0; t < s.total(); ++t) {
      const double tt = static_cast<double>(t);
      const Vec2 p = tt <= split ? origin + Vec2{v * tt, 0.0}
                                 : origin + Vec2{v * split, 0.0} + turn * (v * (tt - split));
      out.tracks[i].push_back(p);
    }
  }
  return out;
}

inline Layout head_on_avoid(const ScenarioSpec & s, double v, Rng * rng)
{
  const double m = s.margin;
  const double amp = 0.75 * m;
  const double width = 1.2 * m / v;
  const double lane = 3.0 * m;
  double tc = static_cast<double>(s.total() - 1) / 2.0;
  if (rng) {
    tc = rng->uniform(static_cast<double>(s.t_obs), static_cast<double>(s.total()) - 3.0);
  }
  Layout out;
  out.tracks.resize(s.n_agents);
  for (std::size_t i = 0; i < s.n_agents; ++i) {
    const double y0 = lane * static_cast<double>(i / 2);
    const bool alone = i + 1 == s.n_agents && s.n_agents % 2 == 1;
    const double dir = (i % 2 == 0) ? 1.0 : -1.0;
    for (std::size_t t = 0; t < s.total(); ++t) {
      const double tau = static_cast<double>(t) - tc;
      const double bump = alone ? 0.0 : amp * std::exp(-tau * tau / (2.0 * width * width));
      out.tracks[i].push_back({dir * v * tau, y0 + dir * bump});
    }
  }
  return out;
}

inline Layout canonical(Scenario kind, const ScenarioSpec & s, double v, Rng * rng)
{
  switch (kind) {
    case Scenario::ConstantVelocity:
    case Scenario::Group:
      return {row_formation(s.n_agents, s.total(), v, 2.0 * s.margin), false};
    case Scenario::Crossing:
      return crossing(s, v);
    case Scenario::Diverge:
      return diverge(s, v, rng);
    case Scenario::HeadOnAvoid:
      return head_on_avoid(s, v, rng);
  }
  return {};
}

/// Rotates (when `rng` is set) and translates a local layout into the grid.
inline bool place(Layout & layout, const ScenarioSpec & s, Rng * rng)
{
  if (layout.placed) return !layout.tracks.empty();
  if (rng) {
    const double angle = rng->uniform(0.0, 2.0 * std::numbers::pi);
    for (auto & tr : layout.tracks)
      for (auto & p : tr) p = rotate(p, angle);
  }
  double lx = std::numeric_limits<double>::infinity(), ly = lx;
  double hx = -lx, hy = -lx;
  for (const auto & tr : layout.tracks) {
    for (const auto & p : tr) {
      lx = std::min(lx, p.x), ly = std::min(ly, p.y);
      hx = std::max(hx, p.x), hy = std::max(hy, p.y);
    }
  }
  const double free_x = s.grid.span_x() - (hx - lx);
  const double free_y = s.grid.span_y() - (hy - ly);
  if (free_x < 0.0 || free_y < 0.0) return false;
  const Vec2 shift{-lx + (rng ? rng->uniform(0.0, free_x) : 0.0),
    -ly + (rng ? rng->uniform(0.0, free_y) : 0.0)};
  for (auto & tr : layout.tracks)
    for (auto & p : tr) p = p + shift;
  layout.placed = true;
  return true;
}

/// Class 1 marks cells within one cell of any sampled position, class 0 elsewhere.
inline SceneRaster walkway_raster(const std::vector<Scene> & windows, const GridSpec & grid)
{
  SceneRaster r = SceneRaster::uniform(grid.height, grid.width, 2, 0);
  for (const auto & w : windows) {
    for (const auto & track : w.tracks) {
      for (const auto & p : track.positions) {
        const Vec2 g = grid.to_grid(p);
        const long cr = std::lround(g.y), cc = std::lround(g.x);
        for (long rr = cr - 1; rr <= cr + 1; ++rr) {
          for (long c = cc - 1; c <= cc + 1; ++c) {
            if (rr < 0 || c < 0 || rr >= static_cast<long>(grid.height) ||
                c >= static_cast<long>(grid.width)) {
              continue;
            }
            r.at(static_cast<std::size_t>(rr), static_cast<std::size_t>(c), 0) = 0.0;
            r.at(static_cast<std::size_t>(rr), static_cast<std::size_t>(c), 1) = 1.0;
          }
        }
      }
    }
  }
  return r;
}

}  // namespace detail

/// Frame gap between consecutive synthetic windows: the window length rounded up to a multiple of t_fut.
inline std::size_t synth_window_gap(const ScenarioSpec & s)
{
  return (s.total() + s.t_fut - 1) / s.t_fut * s.t_fut;
}

/**
 * @brief Generates `n_windows` windows of one scenario.
 *
 * Window w starts at frame w * synth_window_gap(spec) and numbers its agents
 * w * n_agents + i. Every window keeps all agents inside the grid and at least
 * `margin` apart at every step; randomised draws are retried until they do.
 */
inline std::vector<Scene> synth_generate(const ScenarioSpec & spec)
{
  validate_scenario_spec(spec);
  const Scenario kind = scenario_from_name(spec.scenario);
  const std::size_t gap = synth_window_gap(spec);
  std::vector<Scene> out;
  for (std::size_t w = 0; w < spec.n_windows; ++w) {
    Rng rng = Rng::derive(spec.seed, w);
    detail::Layout layout;
    bool ok = false;
    const int attempts = spec.randomize ? 500 : 1;
    for (int a = 0; a < attempts && !ok; ++a) {
      Rng * r = spec.randomize ? &rng : nullptr;
      const double v = spec.randomize ? spec.speed * rng.uniform(0.85, 1.15) : spec.speed;
      if (kind == Scenario::ConstantVelocity && spec.randomize) {
        layout = detail::independent_walkers(spec, v, rng);
      } else {
        layout = detail::canonical(kind, spec, v, r);
      }
      ok = detail::place(layout, spec, r) &&
           min_simultaneous_distance(layout.tracks) >= spec.margin;
      for (const auto & tr : layout.tracks)
        ok = ok && detail::inside(tr, spec.grid.span_x() + 1e-9, spec.grid.span_y() + 1e-9);
    }
    if (!ok) {
      throw ConfigError("scenario '" + spec.scenario + "' with " + std::to_string(spec.n_agents) +
                        " agents does not fit a " + std::to_string(spec.grid.height) + "x" +
                        std::to_string(spec.grid.width) +
                        " grid at this speed and margin; enlarge the grid or lower speed/margin");
    }
    Scene scene;
    scene.scene_id = spec.scene_id.empty() ? spec.scenario : spec.scene_id;
    scene.start_frame = static_cast<std::int64_t>(w * gap);
    scene.unit_scale = 1.0;
    for (std::size_t i = 0; i < spec.n_agents; ++i) {
      AgentTrack t;
      t.agent_id = static_cast<std::int64_t>(w * spec.n_agents + i);
      t.positions = layout.tracks[i];
      for (std::size_t f = 0; f < spec.total(); ++f) {
        t.frame_ids.push_back(scene.start_frame + static_cast<std::int64_t>(f));
      }
      scene.tracks.push_back(std::move(t));
    }
    out.push_back(std::move(scene));
  }
  if (spec.raster) {
    const SceneRaster r = detail::walkway_raster(out, spec.grid);
    for (auto & s : out) s.raster = r;
  }
  return out;
}

}  // namespace vista

#endif  // VISTA__DATA__SYNTH_HPP_

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

#ifndef VISTA__DATA__TRAJECTORY_IO_HPP_
#define VISTA__DATA__TRAJECTORY_IO_HPP_

#include <algorithm>
#include <filesystem>
#include <map>
#include <numeric>
#include <sstream>
#include <string>
#include <tuple>
#include <vector>

#include "vista/common/error.hpp"
#include "vista/common/io.hpp"
#include "vista/common/rng.hpp"
#include "vista/data/types.hpp"

namespace vista
{

struct TrajectoryRecord
{
  std::int64_t frame_id = 0;
  std::int64_t agent_id = 0;
  Vec2 pos;
};

/// Parses `frame_id agent_id x y` lines. Blank lines and '#' comments are skipped.
inline std::vector<TrajectoryRecord> parse_trajectory_records(const std::string & text,
  const std::string & source = "<memory>")
{
  std::vector<TrajectoryRecord> out;
  std::istringstream in(text);
  std::string line;
  std::size_t lineno = 0;
  while (std::getline(in, line)) {
    ++lineno;
    const auto fields = split_fields(line);
    if (fields.empty() || fields.front().front() == '#') {
      continue;
    }
    TrajectoryRecord r;
    if (fields.size() != 4 || !parse_integral(fields[0], r.frame_id) ||
        !parse_integral(fields[1], r.agent_id) || !parse_number(fields[2], r.pos.x) ||
        !parse_number(fields[3], r.pos.y) || !r.pos.finite()) {
      throw ParseError(source + ":" + std::to_string(lineno) +
                         ": expected 'frame_id agent_id x y', got '" + line + "'",
        lineno);
    }
    out.push_back(r);
  }
  return out;
}

struct WindowOptions
{
  std::size_t t_obs = 8;
  std::size_t t_fut = 12;
  std::size_t stride = 0;         ///< 0 means t_fut
  std::size_t jitter_copies = 0;  ///< extra randomly offset windows per base window
  std::uint64_t seed = 0;

  std::size_t total() const { return t_obs + t_fut; }
  std::size_t effective_stride() const { return stride == 0 ? t_fut : stride; }
};

struct LoadReport
{
  std::size_t records = 0;
  std::size_t windows = 0;
  std::vector<std::string> warnings;
};

/**
 * @brief Cuts records of one scene into fixed-length windows.
 *
 * The frame timeline runs from the first to the last frame with the gcd of the
 * observed frame gaps as step. A window keeps only agents present on every one
 * of its frames; windows with no such agent are skipped.
 */
inline std::vector<Scene> window_records(const std::vector<TrajectoryRecord> & records,
  const std::string & scene_id, const WindowOptions & opt, LoadReport * report = nullptr)
{
  std::vector<Scene> scenes;
  if (records.empty()) {
    if (report) report->warnings.push_back("scene '" + scene_id + "': no records");
    return scenes;
  }
  std::map<std::int64_t, std::map<std::int64_t, Vec2>> by_agent;
  std::vector<std::int64_t> frames;
  for (const auto & r : records) {
    if (!by_agent[r.agent_id].emplace(r.frame_id, r.pos).second) {
      throw DataError("scene '" + scene_id + "': duplicate record for agent " +
                      std::to_string(r.agent_id) + " at frame " + std::to_string(r.frame_id));
    }
    frames.push_back(r.frame_id);
  }
  std::sort(frames.begin(), frames.end());
  frames.erase(std::unique(frames.begin(), frames.end()), frames.end());
  std::int64_t step = 0;
  for (std::size_t i = 1; i < frames.size(); ++i) step = std::gcd(step, frames[i] - frames[i - 1]);
  if (step == 0) step = 1;
  const auto timeline = static_cast<std::size_t>((frames.back() - frames.front()) / step) + 1;
  const std::size_t total = opt.total();
  const std::size_t stride = opt.effective_stride();

  std::vector<std::size_t> starts;
  Rng rng = Rng::derive(opt.seed, std::hash<std::string>{}(scene_id) & 0xFFFFFFFF);
  for (std::size_t s = 0; s + total <= timeline; s += stride) {
    starts.push_back(s);
    for (std::size_t j = 0; j < opt.jitter_copies; ++j) {
      const auto half = static_cast<std::int64_t>(stride / 2);
      const std::int64_t off = static_cast<std::int64_t>(rng.below(2 * half + 1)) - half;
      const std::int64_t js = std::clamp<std::int64_t>(static_cast<std::int64_t>(s) + off, 0,
        static_cast<std::int64_t>(timeline - total));
      starts.push_back(static_cast<std::size_t>(js));
    }
  }

  for (std::size_t s : starts) {
    Scene scene;
    scene.scene_id = scene_id;
    scene.start_frame = frames.front() + static_cast<std::int64_t>(s) * step;
    std::vector<std::int64_t> window_frames(total);
    for (std::size_t t = 0; t < total; ++t) {
      window_frames[t] = scene.start_frame + static_cast<std::int64_t>(t) * step;
    }
    for (const auto & [agent, track] : by_agent) {
      AgentTrack at{agent, {}, window_frames};
      bool complete = true;
      for (auto f : window_frames) {
        auto it = track.find(f);
        if (it == track.end()) {
          complete = false;
          break;
        }
        at.positions.push_back(it->second);
      }
      if (complete) scene.tracks.push_back(std::move(at));
    }
    if (!scene.tracks.empty()) scenes.push_back(std::move(scene));
  }
  if (report) {
    report->records += records.size();
    report->windows += scenes.size();
    if (scenes.empty()) {
      report->warnings.push_back("scene '" + scene_id + "': no complete window of " +
                                 std::to_string(total) + " frames");
    }
  }
  return scenes;
}

/// Loads one trajectory file; the scene id is the file stem.
inline std::vector<Scene> load_trajectories(const std::filesystem::path & path,
  const WindowOptions & opt = {}, LoadReport * report = nullptr)
{
  const auto records = parse_trajectory_records(read_file(path), path.string());
  return window_records(records, path.stem().string(), opt, report);
}

/// Serialises complete tracks as `frame_id agent_id x y`, ordered by frame then agent.
inline std::string format_trajectories(const std::vector<Scene> & scenes)
{
  std::vector<TrajectoryRecord> recs;
  for (const auto & s : scenes)
    for (const auto & t : s.tracks)
      for (std::size_t i = 0; i < t.positions.size(); ++i)
        recs.push_back({t.frame_ids[i], t.agent_id, t.positions[i]});
  std::stable_sort(recs.begin(), recs.end(), [](const auto & a, const auto & b) {
    return std::tie(a.frame_id, a.agent_id) < std::tie(b.frame_id, b.agent_id);
  });
  std::string out;
  for (const auto & r : recs) {
    out += std::to_string(r.frame_id) + ' ' + std::to_string(r.agent_id) + ' ' +
           format_double(r.pos.x) + ' ' + format_double(r.pos.y) + '\n';
  }
  return out;
}

// ---------------------------------------------------------------------------
// Prediction files: `sample_id frame_id agent_id x y`.

struct PredictionRecord
{
  std::int64_t sample_id = 0;
  std::int64_t frame_id = 0;
  std::int64_t agent_id = 0;
  Vec2 pos;
};

inline std::string format_predictions(const std::vector<PredictionRecord> & recs)
{
  std::string out;
  for (const auto & r : recs) {
    out += std::to_string(r.sample_id) + ' ' + std::to_string(r.frame_id) + ' ' +
           std::to_string(r.agent_id) + ' ' + format_double(r.pos.x) + ' ' +
           format_double(r.pos.y) + '\n';
  }
  return out;
}

inline std::vector<PredictionRecord> parse_predictions(const std::string & text,
  const std::string & source = "<memory>")
{
  std::vector<PredictionRecord> out;
  std::istringstream in(text);
  std::string line;
  std::size_t lineno = 0;
  while (std::getline(in, line)) {
    ++lineno;
    const auto f = split_fields(line);
    if (f.empty() || f.front().front() == '#') continue;
    PredictionRecord r;
    if (f.size() != 5 || !parse_integral(f[0], r.sample_id) || !parse_integral(f[1], r.frame_id) ||
        !parse_integral(f[2], r.agent_id) || !parse_number(f[3], r.pos.x) ||
        !parse_number(f[4], r.pos.y) || !r.pos.finite()) {
      throw ParseError(source + ":" + std::to_string(lineno) +
                         ": expected 'sample_id frame_id agent_id x y', got '" + line + "'",
        lineno);
    }
    out.push_back(r);
  }
  return out;
}

}  // namespace vista

#endif  // VISTA__DATA__TRAJECTORY_IO_HPP_

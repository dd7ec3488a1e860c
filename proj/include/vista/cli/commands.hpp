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

#ifndef VISTA__CLI__COMMANDS_HPP_
#define VISTA__CLI__COMMANDS_HPP_

#include <algorithm>
#include <cstdint>
#include <filesystem>
#include <map>
#include <optional>
#include <set>
#include <sstream>
#include <string>
#include <tuple>
#include <utility>
#include <vector>

#include <nlohmann/json.hpp>

#include "vista/cli/config.hpp"
#include "vista/cli/manifest.hpp"
#include "vista/cli/render.hpp"
#include "vista/common/error.hpp"
#include "vista/common/io.hpp"
#include "vista/common/rng.hpp"
#include "vista/data/augment.hpp"
#include "vista/data/raster.hpp"
#include "vista/data/split.hpp"
#include "vista/data/synth.hpp"
#include "vista/data/trajectory_io.hpp"
#include "vista/metrics/report.hpp"
#include "vista/tpm/predict.hpp"
#include "vista/training/trainer.hpp"

namespace vista::cli
{

namespace fs = std::filesystem;

inline constexpr const char * kPredSuffix = ".pred.txt";
inline constexpr const char * kGoalSuffix = ".goals.txt";

/// Output of a command: a human summary for stdout and the manifest already written.
struct CommandResult
{
  std::string summary;
  RunManifest manifest;
};

// ---------------------------------------------------------------------------
// File discovery and loading.

inline bool ends_with(const std::string & s, const std::string & suffix)
{
  return s.size() >= suffix.size() && s.compare(s.size() - suffix.size(), suffix.size(), suffix) == 0;
}

/// `path` itself, or the sorted trajectory files (*.txt minus prediction and goal files) in it.
inline std::vector<fs::path> trajectory_files(const fs::path & path)
{
  if (!fs::exists(path)) throw DataError("no such file or directory: " + path.string());
  if (!fs::is_directory(path)) return {path};
  std::vector<fs::path> out;
  for (const auto & e : fs::directory_iterator(path)) {
    const std::string name = e.path().filename().string();
    if (!e.is_regular_file() || e.path().extension() != ".txt") continue;
    if (ends_with(name, kPredSuffix) || ends_with(name, kGoalSuffix)) continue;
    out.push_back(e.path());
  }
  std::sort(out.begin(), out.end());
  if (out.empty()) throw DataError("no trajectory files (*.txt) in " + path.string());
  return out;
}

/// `path` itself, or the sorted *.pred.txt files in it.
inline std::vector<fs::path> prediction_files(const fs::path & path)
{
  if (!fs::exists(path)) throw DataError("no such file or directory: " + path.string());
  if (!fs::is_directory(path)) return {path};
  std::vector<fs::path> out;
  for (const auto & e : fs::directory_iterator(path)) {
    if (e.is_regular_file() && ends_with(e.path().filename().string(), kPredSuffix)) out.push_back(e.path());
  }
  std::sort(out.begin(), out.end());
  if (out.empty()) throw DataError("no prediction files (*" + std::string(kPredSuffix) + ") in " + path.string());
  return out;
}

/// Scene id of a trajectory, prediction or goal file.
inline std::string scene_id_of(const fs::path & p)
{
  const std::string name = p.filename().string();
  for (const std::string suffix : {kPredSuffix, kGoalSuffix}) {
    if (ends_with(name, suffix)) return name.substr(0, name.size() - suffix.size());
  }
  return p.stem().string();
}

/// Raw records of one scene file plus its optional raster.
struct SceneSource
{
  std::string scene_id;
  std::vector<TrajectoryRecord> records;
  std::optional<SceneRaster> raster;
};

inline std::vector<SceneSource> load_sources(const fs::path & data, const std::string & raster_dir,
  RunManifest * manifest)
{
  std::vector<SceneSource> out;
  std::set<std::string> seen;
  for (const auto & f : trajectory_files(data)) {
    SceneSource s;
    s.scene_id = scene_id_of(f);
    if (!seen.insert(s.scene_id).second) throw DataError("duplicate scene id '" + s.scene_id + "'");
    s.records = parse_trajectory_records(read_file(f), f.string());
    if (manifest) manifest->add_input(f);
    if (!raster_dir.empty()) {
      const fs::path r = fs::path(raster_dir) / (s.scene_id + ".raster");
      if (fs::exists(r)) {
        s.raster = load_raster(r);
        if (manifest) manifest->add_input(r);
      }
    }
    out.push_back(std::move(s));
  }
  return out;
}

inline std::vector<Scene> windows_of(const SceneSource & src, const WindowOptions & opt, LoadReport * report)
{
  auto ws = window_records(src.records, src.scene_id, opt, report);
  for (auto & w : ws) w.raster = src.raster;
  return ws;
}

/// Windows used for prediction and scoring: no jitter, futures never overlap.
inline WindowOptions scoring_windows(const RunConfig & cfg)
{
  WindowOptions w = cfg.windows();
  w.jitter_copies = 0;
  w.stride = std::max(w.effective_stride(), w.t_fut);
  return w;
}

inline std::uint64_t hash_string(const std::string & s)
{
  std::uint64_t h = 1469598103934665603ULL;
  for (unsigned char c : s) h = (h ^ c) * 1099511628211ULL;
  return h;
}

/// Prediction seed of one window, independent of processing order.
inline std::uint64_t window_seed(std::uint64_t seed, const std::string & scene_id, std::int64_t start_frame)
{
  return Rng::derive(Rng::derive(seed, hash_string(scene_id)).next_u64(),
    static_cast<std::uint64_t>(start_frame)).next_u64();
}

/// Fresh parameter layout for a config; used to initialise and to check checkpoints.
inline nn::ParamStore init_params(const RunConfig & cfg, std::uint64_t seed)
{
  nn::ParamStore store(kCheckpointVersion);
  Rng rng(seed);
  tpm::add_model_params(store, cfg.model, rng);
  write_config_meta(store, cfg);
  return store;
}

inline void check_layout(const nn::ParamStore & ckpt, const RunConfig & cfg)
{
  const auto ref = init_params(cfg, 0);
  if (ref.size() != ckpt.size()) {
    throw CheckpointError("checkpoint: " + std::to_string(ckpt.size()) + " tensors, config expects " +
                          std::to_string(ref.size()));
  }
  for (std::size_t i = 0; i < ref.size(); ++i) {
    const auto & a = ref.entries()[i];
    const auto & b = ckpt.entries()[i];
    if (a.name != b.name || a.value.shape() != b.value.shape()) {
      throw CheckpointError("checkpoint: tensor '" + b.name + "' does not match the stored config");
    }
  }
}

// ---------------------------------------------------------------------------
// Alignment of prediction records with ground-truth windows.

/// Per window, [agent][sample] trajectories in scene order.
using AlignedPredictions = std::vector<std::vector<std::vector<Trajectory>>>;

inline std::string key_text(const std::string & scene, std::int64_t agent, std::int64_t frame)
{
  return "(scene '" + scene + "', agent " + std::to_string(agent) + ", frame " + std::to_string(frame) + ")";
}

/**
 * @brief Matches records of one scene to the future frames of its windows.
 *
 * Every (agent, future frame) needs one record per sample id, and every record
 * must land on a window. The first mismatch raises DataError naming its key.
 */
inline AlignedPredictions align_predictions(const std::vector<Scene> & windows, std::size_t t_obs,
  const std::string & scene_id, const std::vector<PredictionRecord> & recs)
{
  std::map<std::pair<std::int64_t, std::int64_t>, std::map<std::int64_t, Vec2>> index;  // (agent, frame)
  std::set<std::int64_t> sample_ids;
  for (const auto & r : recs) {
    if (!index[{r.agent_id, r.frame_id}].emplace(r.sample_id, r.pos).second) {
      throw DataError("evaluate: duplicate prediction for sample " + std::to_string(r.sample_id) + " at " +
                      key_text(scene_id, r.agent_id, r.frame_id));
    }
    sample_ids.insert(r.sample_id);
  }
  std::set<std::pair<std::int64_t, std::int64_t>> used;
  AlignedPredictions out;
  for (const auto & w : windows) {
    std::vector<std::vector<Trajectory>> agents;
    for (const auto & tr : w.tracks) {
      std::vector<Trajectory> samples(sample_ids.size());
      for (std::size_t t = t_obs; t < tr.frame_ids.size(); ++t) {
        const std::pair<std::int64_t, std::int64_t> key{tr.agent_id, tr.frame_ids[t]};
        auto it = index.find(key);
        if (it == index.end()) {
          throw DataError("evaluate: no prediction for " + key_text(scene_id, key.first, key.second));
        }
        if (!used.insert(key).second) {
          throw DataError("evaluate: " + key_text(scene_id, key.first, key.second) + " falls in two windows");
        }
        std::size_t j = 0;
        for (auto sid : sample_ids) {
          auto p = it->second.find(sid);
          if (p == it->second.end()) {
            throw DataError("evaluate: sample " + std::to_string(sid) + " missing at " +
                            key_text(scene_id, key.first, key.second));
          }
          samples[j++].push_back(p->second);
        }
      }
      agents.push_back(std::move(samples));
    }
    out.push_back(std::move(agents));
  }
  for (const auto & [key, _] : index) {
    if (!used.count(key)) {
      throw DataError("evaluate: prediction " + key_text(scene_id, key.first, key.second) +
                      " matches no ground-truth window");
    }
  }
  return out;
}

inline metrics::EvalInput eval_input(const Scene & w, std::size_t t_obs, std::vector<std::vector<Trajectory>> pred)
{
  metrics::EvalInput e;
  for (std::size_t i = 0; i < w.n_agents(); ++i) e.gt.push_back(w.future(i, t_obs));
  e.pred = std::move(pred);
  return e;
}

/// "auto" calibrates on the ground-truth futures of multi-agent windows; 0 when there are none.
inline double resolve_epsilon(const std::string & spec, const std::vector<metrics::EvalInput> & inputs,
  std::vector<std::string> & warnings)
{
  if (spec != "auto") {
    double v = 0.0;
    if (!parse_number(spec, v) || !(v > 0.0) || !std::isfinite(v)) {
      throw ConfigError("evaluate: --epsilon must be 'auto' or a positive number, got '" + spec + "'");
    }
    return v;
  }
  std::vector<std::vector<Trajectory>> groups;
  for (const auto & e : inputs)
    if (e.n_agents() >= 2) groups.push_back(e.gt);
  if (groups.empty()) {
    warnings.push_back("epsilon auto: no window with two or more agents, using 0");
    return 0.0;
  }
  return metrics::calibrate_epsilon(groups);
}

inline metrics::MetricReport score(const std::vector<metrics::EvalInput> & inputs, const std::string & epsilon,
  double miss_threshold)
{
  std::vector<std::string> warnings;
  const double eps = resolve_epsilon(epsilon, inputs, warnings);
  auto r = metrics::evaluate(inputs, eps, miss_threshold);
  r.warnings.insert(r.warnings.begin(), warnings.begin(), warnings.end());
  return r;
}

/// k samples per window, flattened to [agent][sample].
inline std::vector<std::vector<Trajectory>> by_agent(const tpm::PredictionSet & set)
{
  std::vector<std::vector<Trajectory>> out(set.n_agents());
  for (std::size_t j = 0; j < set.k(); ++j)
    for (std::size_t i = 0; i < set.n_agents(); ++i) out[i].push_back(set.samples[j][i]);
  return out;
}

// ---------------------------------------------------------------------------
// synth

struct SynthOptions
{
  std::string scenario = "constant-velocity";
  std::size_t n_agents = 1;
  std::uint64_t seed = 0;
  std::string out;
  std::vector<std::string> set;  ///< extra key=value scenario fields
  std::vector<std::string> argv;
};

inline CommandResult cmd_synth(const SynthOptions & o)
{
  Stopwatch clock;
  ScenarioSpec spec;
  set_scenario_field(spec, "scenario", o.scenario);
  spec.n_agents = o.n_agents;
  spec.seed = o.seed;
  for (const auto & kv : o.set) {
    const auto eq = kv.find('=');
    if (eq == std::string::npos) throw ConfigError("synth: expected key=value, got '" + kv + "'");
    set_scenario_field(spec, kv.substr(0, eq), kv.substr(eq + 1));
  }
  validate_scenario_spec(spec);
  const auto scenes = synth_generate(spec);
  const std::string id = scenes.front().scene_id;
  const fs::path dir(o.out);
  CommandResult res;
  auto & m = res.manifest;
  m.command = "synth";
  m.argv = o.argv;
  m.seed = o.seed;
  std::ostringstream cfg;
  cfg << "scenario = " << spec.scenario << "\nn_agents = " << spec.n_agents << "\nn_windows = " << spec.n_windows
      << "\nspeed = " << format_double(spec.speed) << "\nmargin = " << format_double(spec.margin)
      << "\nseed = " << spec.seed << "\ngrid = " << spec.grid.height << "x" << spec.grid.width
      << "\ncell_size = " << format_double(spec.grid.cell_size) << "\nt_obs = " << spec.t_obs
      << "\nt_fut = " << spec.t_fut << "\nrandomize = " << (spec.randomize ? "true" : "false")
      << "\nraster = " << (spec.raster ? "true" : "false") << "\nscene_id = " << id << "\n";
  m.config = cfg.str();
  const fs::path traj = dir / (id + ".txt");
  write_file_atomic(traj, format_trajectories(scenes));
  m.add_output(traj);
  if (spec.raster && scenes.front().raster) {
    const fs::path r = dir / (id + ".raster");
    write_file_atomic(r, format_raster(*scenes.front().raster));
    m.add_output(r);
  }
  m.timings.emplace_back("total", clock.seconds());
  m.write(dir / (id + ".manifest.json"));
  std::size_t agents = 0;
  for (const auto & s : scenes) agents += s.n_agents();
  res.summary = "synth: " + std::to_string(scenes.size()) + " windows, " + std::to_string(agents) +
                " agent tracks -> " + traj.string();
  return res;
}

// ---------------------------------------------------------------------------
// train

struct TrainOptions
{
  std::string data;
  std::string raster_dir;
  std::string config;
  std::vector<std::string> set;
  std::string out;
  std::string fold = "all";  ///< index, all, ratio or none
  std::optional<std::uint64_t> seed;
  std::vector<std::string> argv;
};

inline RunConfig resolve_config(const std::string & path, const std::vector<std::string> & overrides,
  std::optional<std::uint64_t> seed)
{
  RunConfig cfg = path.empty() ? RunConfig{} : load_config(path);
  for (const auto & o : overrides) apply_override(cfg, o);
  if (seed) cfg.train.seed = *seed;
  cfg.validate();
  return cfg;
}

struct FoldPlan
{
  std::string name;
  std::string held_out;
  std::vector<Scene> train;
  std::vector<Scene> test;
};

inline std::vector<FoldPlan> plan_folds(const std::vector<SceneSource> & sources, const RunConfig & cfg,
  const std::string & fold, LoadReport & report)
{
  const WindowOptions train_opt = cfg.windows();
  const WindowOptions test_opt = scoring_windows(cfg);
  std::vector<FoldPlan> plans;
  if (fold == "ratio" || fold == "none") {
    if (cfg.jitter_copies) report.warnings.push_back("jitter copies are only used with leave-one-out folds");
    std::vector<Scene> all;
    for (const auto & s : sources) {
      auto ws = windows_of(s, test_opt, &report);
      all.insert(all.end(), ws.begin(), ws.end());
    }
    FoldPlan p;
    p.name = fold;
    if (fold == "ratio") {
      auto f = split_ratio(all, cfg.train_ratio, cfg.train.seed);
      p.train = std::move(f.train);
      p.test = std::move(f.test);
    } else {
      p.train = std::move(all);
    }
    plans.push_back(std::move(p));
    return plans;
  }
  if (sources.size() < 2) {
    throw ConfigError("train: leave-one-out folds need at least 2 scene files, got " +
                      std::to_string(sources.size()) + "; use --fold ratio or --fold none");
  }
  std::vector<std::size_t> which;
  if (fold == "all") {
    for (std::size_t i = 0; i < sources.size(); ++i) which.push_back(i);
  } else {
    std::int64_t idx = -1;
    if (!parse_integral(fold, idx) || idx < 0 || static_cast<std::size_t>(idx) >= sources.size()) {
      throw ConfigError("train: --fold must be all, ratio, none or an index below " +
                        std::to_string(sources.size()) + ", got '" + fold + "'");
    }
    which.push_back(static_cast<std::size_t>(idx));
  }
  for (auto f : which) {
    FoldPlan p;
    p.name = "fold" + std::to_string(f);
    p.held_out = sources[f].scene_id;
    for (std::size_t i = 0; i < sources.size(); ++i) {
      auto ws = windows_of(sources[i], i == f ? test_opt : train_opt, &report);
      auto & dst = i == f ? p.test : p.train;
      dst.insert(dst.end(), ws.begin(), ws.end());
    }
    plans.push_back(std::move(p));
  }
  return plans;
}

/// Dihedral copies of every window: all 8 on square grids, the 4 shape-preserving ones otherwise.
inline std::vector<Scene> augment_windows(const std::vector<Scene> & windows, const GridSpec & grid)
{
  std::vector<int> ids;
  for (int t = 0; t < 8; ++t) {
    if (grid.height == grid.width || Dihedral::from_id(t).rotations % 2 == 0) ids.push_back(t);
  }
  std::vector<Scene> out;
  for (const auto & w : windows)
    for (int t : ids) out.push_back(t == 0 ? w : augment_dihedral(w, t, grid));
  return out;
}

inline nlohmann::ordered_json metric_summary(const metrics::MetricReport & r)
{
  return {{"ade", r.ade}, {"fde", r.fde}, {"min_ade", r.min_ade}, {"min_fde", r.min_fde},
          {"cr_mean", r.cr_mean}, {"n_agents", r.n_agents}};
}

inline CommandResult cmd_train(const TrainOptions & o)
{
  Stopwatch clock;
  const RunConfig cfg = resolve_config(o.config, o.set, o.seed);
  CommandResult res;
  auto & m = res.manifest;
  m.command = "train";
  m.argv = o.argv;
  m.seed = cfg.train.seed;
  m.config = format_config(cfg);
  if (!o.config.empty()) m.add_input(o.config);
  const auto sources = load_sources(o.data, o.raster_dir, &m);
  LoadReport load;
  auto plans = plan_folds(sources, cfg, o.fold, load);
  m.timings.emplace_back("load", clock.seconds());

  const fs::path dir(o.out);
  nlohmann::ordered_json summary;
  summary["fold_mode"] = o.fold;
  summary["seed"] = cfg.train.seed;
  auto & folds = summary["folds"] = nlohmann::ordered_json::array();
  std::ostringstream human;
  double ade_sum = 0.0, min_ade_sum = 0.0;
  std::size_t scored = 0;
  bool diverged = false;
  for (auto & plan : plans) {
    Stopwatch fold_clock;
    if (plan.train.empty()) throw DataError("train: " + plan.name + " has no training windows");
    std::vector<Scene> train = plan.train, val;
    if (cfg.val_fraction > 0.0 && train.size() >= 2) {
      auto split = split_ratio(train, 1.0 - cfg.val_fraction, Rng::derive(cfg.train.seed, 0x76616cULL).next_u64());
      train = std::move(split.train);
      val = std::move(split.test);
    } else {
      val = train;
      load.warnings.push_back(plan.name + ": validating on the training windows");
    }
    if (cfg.augment) train = augment_windows(train, cfg.model.gpm.grid);

    training::Trainer trainer(cfg.model, cfg.train, init_params(cfg, cfg.train.seed));
    const auto & report = trainer.run(train, val);
    nn::ParamStore best = trainer.report().best_epoch ? trainer.best() : trainer.params();
    best.set_version(kCheckpointVersion);
    write_config_meta(best, cfg);
    best.meta()["train.best_epoch"] = std::to_string(report.best_epoch);
    best.meta()["train.stop_reason"] = report.stop_reason;
    const fs::path fdir = dir / plan.name;
    fs::create_directories(fdir);
    nn::save_checkpoint(best, fdir / "model.ckpt");
    write_file_atomic(fdir / "report.csv", report.to_csv());
    m.add_output(fdir / "model.ckpt");
    m.add_output(fdir / "report.csv");

    nlohmann::ordered_json f;
    f["name"] = plan.name;
    f["held_out"] = plan.held_out;
    f["n_train"] = train.size();
    f["n_val"] = val.size();
    f["n_test"] = plan.test.size();
    f["epochs"] = report.epochs.size();
    f["stop_reason"] = report.stop_reason;
    f["best_epoch"] = report.best_epoch;
    f["best_val_minade"] = report.best_val_minade;
    human << plan.name << ": " << report.summary() << "\n";
    if (report.stop_reason == "diverged") diverged = true;
    if (!plan.test.empty() && !diverged) {
      std::vector<metrics::EvalInput> inputs;
      for (const auto & w : plan.test) {
        auto set = tpm::predict_scene<double>(best, cfg.model, w,
          cfg.model.use_goal ? cfg.model.gpm.k : 1, window_seed(cfg.train.seed, w.scene_id, w.start_frame), false);
        inputs.push_back(eval_input(w, cfg.model.t_obs(), by_agent(set)));
      }
      const auto mr = score(inputs, "auto", cfg.miss_threshold);
      write_file_atomic(fdir / "test_metrics.json", metrics::to_json(mr).dump(2) + "\n");
      m.add_output(fdir / "test_metrics.json");
      f["test"] = metric_summary(mr);
      ade_sum += mr.ade;
      min_ade_sum += mr.min_ade;
      ++scored;
      human << plan.name << ": test ADE " << mr.ade << "  minADE " << mr.min_ade << "\n";
    }
    folds.push_back(std::move(f));
    m.timings.emplace_back(plan.name, fold_clock.seconds());
    if (diverged) break;
  }
  if (scored) {
    summary["mean_test_ade"] = ade_sum / static_cast<double>(scored);
    summary["mean_test_min_ade"] = min_ade_sum / static_cast<double>(scored);
  }
  summary["warnings"] = load.warnings;
  write_file_atomic(dir / "summary.json", summary.dump(2) + "\n");
  m.add_output(dir / "summary.json");
  m.timings.emplace_back("total", clock.seconds());
  m.write(dir / "manifest.json");
  if (diverged) throw DivergenceError("train: non-finite loss or gradient; partial report in " + dir.string());
  res.summary = human.str() + "train: " + std::to_string(plans.size()) + " fold(s) -> " + dir.string();
  return res;
}

// ---------------------------------------------------------------------------
// predict

struct PredictOptions
{
  std::string checkpoint;
  std::string data;
  std::string raster_dir;
  std::size_t k = 20;
  std::uint64_t seed = 0;
  bool trace = false;
  std::string out;
  std::vector<std::string> argv;
};

/// Loads a checkpoint and the config stored in it; version or layout mismatch raises CheckpointError.
inline std::pair<nn::ParamStore, RunConfig> load_model(const std::string & path)
{
  auto store = nn::load_checkpoint(path, kCheckpointVersion);
  RunConfig cfg = read_config_meta(store);
  check_layout(store, cfg);
  return {std::move(store), std::move(cfg)};
}

inline CommandResult cmd_predict(const PredictOptions & o)
{
  Stopwatch clock;
  auto [store, cfg] = load_model(o.checkpoint);
  if (o.k == 0) throw ConfigError("predict: --k must be >= 1");
  cfg.model.gpm.k = o.k;
  if (cfg.model.gpm.n_raw < o.k) cfg.model.gpm.n_raw = o.k;
  cfg.validate();
  if (o.trace && !cfg.model.use_social) throw ConfigError("predict: --trace needs a model with social attention");
  CommandResult res;
  auto & m = res.manifest;
  m.command = "predict";
  m.argv = o.argv;
  m.seed = o.seed;
  m.config = format_config(cfg);
  m.add_input(o.checkpoint);
  const auto sources = load_sources(o.data, o.raster_dir, &m);
  const fs::path dir(o.out);
  const auto opt = scoring_windows(cfg);
  std::size_t n_windows = 0, n_agents = 0, n_traces = 0;
  for (const auto & src : sources) {
    LoadReport load;
    const auto windows = windows_of(src, opt, &load);
    std::vector<PredictionRecord> preds, goals;
    for (const auto & w : windows) {
      const auto set = tpm::predict_scene<double>(store, cfg.model, w, o.k,
        window_seed(o.seed, w.scene_id, w.start_frame), o.trace);
      for (std::size_t j = 0; j < set.k(); ++j) {
        for (std::size_t t = 0; t < set.future_frames.size(); ++t)
          for (std::size_t i = 0; i < set.n_agents(); ++i)
            preds.push_back({static_cast<std::int64_t>(j), set.future_frames[t], set.agent_ids[i], set.samples[j][i][t]});
        for (std::size_t i = 0; i < set.n_agents(); ++i)
          goals.push_back({static_cast<std::int64_t>(j), set.future_frames.back(), set.agent_ids[i], set.goals[j][i]});
        if (o.trace) {
          TraceFile tf{w.scene_id, w.start_frame, j, set.traces[j]};
          const fs::path p = dir / "traces" /
            (w.scene_id + ".f" + std::to_string(w.start_frame) + ".s" + std::to_string(j) + ".json");
          write_file_atomic(p, trace_to_json(tf).dump(1) + "\n");
          m.add_output(p);
          ++n_traces;
        }
      }
      ++n_windows;
      n_agents += w.n_agents();
    }
    const fs::path pp = dir / (src.scene_id + kPredSuffix);
    const fs::path gp = dir / (src.scene_id + kGoalSuffix);
    write_file_atomic(pp, format_predictions(preds));
    write_file_atomic(gp, format_predictions(goals));
    m.add_output(pp);
    m.add_output(gp);
  }
  m.timings.emplace_back("total", clock.seconds());
  m.write(dir / "manifest.json");
  res.summary = "predict: " + std::to_string(n_windows) + " windows, " + std::to_string(n_agents) +
                " agents, k=" + std::to_string(o.k) + (o.trace ? ", " + std::to_string(n_traces) + " traces" : "") +
                " -> " + dir.string();
  return res;
}

// ---------------------------------------------------------------------------
// evaluate

struct EvaluateOptions
{
  std::string pred;
  std::string gt;
  std::string config;
  std::vector<std::string> set;
  std::string epsilon = "auto";
  std::optional<double> miss_threshold;
  std::uint64_t seed = 0;
  std::string out;
  std::vector<std::string> argv;
};

inline CommandResult cmd_evaluate(const EvaluateOptions & o)
{
  Stopwatch clock;
  RunConfig cfg = resolve_config(o.config, o.set, std::nullopt);
  if (o.miss_threshold) {
    if (!(*o.miss_threshold > 0.0)) throw ConfigError("evaluate: --miss-threshold must be positive");
    cfg.miss_threshold = *o.miss_threshold;
  }
  CommandResult res;
  auto & m = res.manifest;
  m.command = "evaluate";
  m.argv = o.argv;
  m.seed = o.seed;
  m.config = format_config(cfg);
  if (!o.config.empty()) m.add_input(o.config);

  std::map<std::string, std::vector<PredictionRecord>> preds;
  for (const auto & f : prediction_files(o.pred)) {
    preds[scene_id_of(f)] = parse_predictions(read_file(f), f.string());
    m.add_input(f);
  }
  const auto sources = load_sources(o.gt, "", &m);
  std::set<std::string> gt_ids;
  for (const auto & s : sources) gt_ids.insert(s.scene_id);
  for (const auto & [id, _] : preds) {
    if (!gt_ids.count(id)) throw DataError("evaluate: predictions for scene '" + id + "' have no ground truth");
  }
  const auto opt = scoring_windows(cfg);
  // Ground-truth scenes without a prediction file are skipped; a predicted scene must align completely.
  std::vector<metrics::EvalInput> inputs;
  std::vector<std::string> skipped;
  for (const auto & src : sources) {
    auto it = preds.find(src.scene_id);
    if (it == preds.end()) {
      skipped.push_back(src.scene_id);
      continue;
    }
    LoadReport load;
    const auto windows = windows_of(src, opt, &load);
    auto aligned = align_predictions(windows, opt.t_obs, src.scene_id, it->second);
    for (std::size_t w = 0; w < windows.size(); ++w) {
      inputs.push_back(eval_input(windows[w], opt.t_obs, std::move(aligned[w])));
    }
  }
  if (inputs.empty()) throw DataError("evaluate: no predicted ground-truth windows");
  auto report = score(inputs, o.epsilon, cfg.miss_threshold);
  for (const auto & id : skipped) report.warnings.push_back("scene '" + id + "' has no predictions; not scored");
  const fs::path dir(o.out);
  write_file_atomic(dir / "metrics.json", metrics::to_json(report).dump(2) + "\n");
  write_file_atomic(dir / "metrics.csv", metrics::to_csv(report));
  m.add_output(dir / "metrics.json");
  m.add_output(dir / "metrics.csv");
  m.timings.emplace_back("total", clock.seconds());
  m.write(dir / "manifest.json");
  std::ostringstream os;
  os << "evaluate: " << report.n_scenes << " windows, " << report.n_agents << " agents, k=" << report.k
     << "\n  ADE " << report.ade << "  FDE " << report.fde << "  minADE " << report.min_ade << "  minFDE "
     << report.min_fde << "\n  CR " << report.cr_mean << " (epsilon " << report.epsilon << ")  miss rate "
     << report.miss_rate;
  if (report.kde_nll) os << "  KDE NLL " << *report.kde_nll;
  for (const auto & w : report.warnings) os << "\n  warning: " << w;
  res.summary = os.str();
  return res;
}

// ---------------------------------------------------------------------------
// render

struct RenderOptions
{
  std::string scene;
  std::string pred;
  std::string goals;
  std::vector<std::string> traces;
  std::vector<std::size_t> steps;  ///< t values to draw; empty draws every step
  std::string config;
  std::vector<std::string> set;
  std::uint64_t seed = 0;
  std::string out_svg;
  std::vector<std::string> argv;
};

inline CommandResult cmd_render(const RenderOptions & o)
{
  Stopwatch clock;
  const RunConfig cfg = resolve_config(o.config, o.set, std::nullopt);
  CommandResult res;
  auto & m = res.manifest;
  m.command = "render";
  m.argv = o.argv;
  m.seed = o.seed;
  m.config = format_config(cfg);
  const fs::path dir(o.out_svg);
  std::size_t figures = 0, grids = 0;
  if (!o.scene.empty()) {
    const fs::path sp(o.scene);
    const std::string id = scene_id_of(sp);
    const auto records = parse_trajectory_records(read_file(sp), sp.string());
    m.add_input(sp);
    const auto opt = scoring_windows(cfg);
    const auto windows = window_records(records, id, opt);
    AlignedPredictions aligned(windows.size());
    if (!o.pred.empty()) {
      aligned = align_predictions(windows, opt.t_obs, id, parse_predictions(read_file(o.pred), o.pred));
      m.add_input(o.pred);
    } else {
      for (std::size_t w = 0; w < windows.size(); ++w) aligned[w].resize(windows[w].n_agents());
    }
    std::map<std::pair<std::int64_t, std::int64_t>, std::map<std::int64_t, Vec2>> goal_index;
    if (!o.goals.empty()) {
      for (const auto & r : parse_predictions(read_file(o.goals), o.goals))
        goal_index[{r.agent_id, r.frame_id}][r.sample_id] = r.pos;
      m.add_input(o.goals);
    }
    for (std::size_t w = 0; w < windows.size(); ++w) {
      const Scene & s = windows[w];
      std::vector<std::vector<Vec2>> goals;
      if (!goal_index.empty()) {
        for (const auto & tr : s.tracks) {
          std::vector<Vec2> g;
          auto it = goal_index.find({tr.agent_id, tr.frame_ids.back()});
          if (it != goal_index.end())
            for (const auto & [_, p] : it->second) g.push_back(p);
          goals.push_back(std::move(g));
        }
        bool complete = true;
        for (std::size_t i = 0; i < goals.size(); ++i) complete &= goals[i].size() == aligned[w][i].size();
        if (!complete) goals.clear();
      }
      const fs::path p = dir / (id + ".f" + std::to_string(s.start_frame) + ".svg");
      write_file_atomic(p, render_scene_svg(s, opt.t_obs, aligned[w], goals));
      m.add_output(p);
      ++figures;
    }
  }
  for (const auto & tp : o.traces) {
    const TraceFile tf = trace_from_json(read_file(tp), tp);
    m.add_input(tp);
    for (std::size_t s = 0; s < tf.trace.steps.size(); ++s) {
      const std::size_t t = tf.trace.steps[s];
      if (!o.steps.empty() && std::find(o.steps.begin(), o.steps.end(), t) == o.steps.end()) continue;
      const fs::path p = dir / (tf.scene_id + ".f" + std::to_string(tf.start_frame) + ".s" +
                                std::to_string(tf.sample_index) + ".t" + std::to_string(t) + ".attention.svg");
      write_file_atomic(p, render_attention_svg(tf.trace, s));
      m.add_output(p);
      ++grids;
    }
  }
  m.timings.emplace_back("total", clock.seconds());
  fs::create_directories(dir);
  m.write(dir / "manifest.json");
  res.summary = "render: " + std::to_string(figures) + " scene figures, " + std::to_string(grids) +
                " attention grids -> " + dir.string();
  return res;
}

// ---------------------------------------------------------------------------
// attention

/// Plain-text dump of a trace, rows and columns in ascending agent id.
inline std::string format_trace_text(const TraceFile & tf)
{
  const auto & tr = tf.trace;
  std::vector<std::size_t> order(tr.n());
  std::iota(order.begin(), order.end(), std::size_t{0});
  std::stable_sort(order.begin(), order.end(),
    [&](std::size_t a, std::size_t b) { return tr.agent_ids[a] < tr.agent_ids[b]; });
  std::ostringstream os;
  os << "scene " << tf.scene_id << "  start frame " << tf.start_frame << "  sample " << tf.sample_index << "\n";
  char buf[32];
  for (std::size_t s = 0; s < tr.steps.size(); ++s) {
    os << "t=" << tr.steps[s] << "\n     ";
    for (auto c : order) {
      std::snprintf(buf, sizeof(buf), "%7lld", static_cast<long long>(tr.agent_ids[c]));
      os << buf;
    }
    os << "\n";
    for (auto r : order) {
      std::snprintf(buf, sizeof(buf), "%5lld", static_cast<long long>(tr.agent_ids[r]));
      os << buf;
      for (auto c : order) {
        std::snprintf(buf, sizeof(buf), "%7.3f", tr.at(s, r, c));
        os << buf;
      }
      os << "\n";
    }
  }
  return os.str();
}

}  // namespace vista::cli

#endif  // VISTA__CLI__COMMANDS_HPP_

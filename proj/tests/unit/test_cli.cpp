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

#include <gtest/gtest.h>

#include <sys/wait.h>

#include <cstdio>
#include <filesystem>
#include <fstream>
#include <regex>
#include <string>

#include "vista/cli/commands.hpp"

namespace fs = std::filesystem;
using namespace vista;
using namespace vista::cli;

namespace
{

fs::path scratch(const std::string & name)
{
  const fs::path p = fs::temp_directory_path() / ("vista_cli_" + name);
  fs::remove_all(p);
  fs::create_directories(p);
  return p;
}

std::size_t count(const std::string & text, const std::string & needle)
{
  std::size_t n = 0;
  for (auto pos = text.find(needle); pos != std::string::npos; pos = text.find(needle, pos + 1)) ++n;
  return n;
}

RunConfig tiny_config()
{
  RunConfig c;
  c.model.gpm.grid = {8, 8, 1.0};
  c.model.gpm.raster_classes = 2;
  c.model.gpm.t_obs = 4;
  c.model.t_fut = 4;
  c.model.gpm.width1 = 2;
  c.model.gpm.width2 = 3;
  c.model.gpm.n_raw = 50;
  c.model.gpm.k = 3;
  c.model.d_model = 8;
  c.model.n_heads = 2;
  c.train.max_epochs = 1;
  c.train.val_k = 2;
  return c;
}

fs::path write_config(const fs::path & dir, const RunConfig & c)
{
  const fs::path p = dir / "run.cfg";
  write_file_atomic(p, format_config(c));
  return p;
}

/// Two agents on parallel horizontal tracks one unit apart.
std::string parallel_tracks(std::size_t frames)
{
  std::string s;
  for (std::size_t f = 0; f < frames; ++f) {
    s += std::to_string(f) + " 1 " + std::to_string(f) + " 0\n";
    s += std::to_string(f) + " 2 " + std::to_string(f) + " 1\n";
  }
  return s;
}

/// Predictions equal to the ground truth of every window, repeated k times.
std::string copy_gt_as_predictions(const std::vector<Scene> & windows, std::size_t t_obs, std::size_t k)
{
  std::vector<PredictionRecord> recs;
  for (std::size_t j = 0; j < k; ++j)
    for (const auto & w : windows)
      for (const auto & tr : w.tracks)
        for (std::size_t t = t_obs; t < tr.positions.size(); ++t)
          recs.push_back({static_cast<std::int64_t>(j), tr.frame_ids[t], tr.agent_id, tr.positions[t]});
  return format_predictions(recs);
}

int run_cli(const std::string & args, std::string * err = nullptr)
{
  const std::string errfile = (fs::temp_directory_path() / "vista_cli_stderr.txt").string();
  const int status = std::system((std::string(VISTA_CLI_PATH) + " " + args + " >/dev/null 2>" + errfile).c_str());
  if (err) *err = read_file(errfile);
  return WIFEXITED(status) ? WEXITSTATUS(status) : -1;
}

}  // namespace

TEST(Config, FormatParseRoundTrip)
{
  RunConfig c = tiny_config();
  c.train.lr = 3.5e-4;
  c.model.use_social = false;
  c.train.seed = 12345678901234ULL;
  const std::string text = format_config(c);
  EXPECT_EQ(format_config(parse_config(text)), text);
  EXPECT_NE(text.find("[gpm]\nheight = 8\n"), std::string::npos);
}

TEST(Config, UnknownKeyIsNamed)
{
  try {
    parse_config("[train]\nlearning_rate = 0.1\n");
    FAIL();
  } catch (const ConfigError & e) {
    EXPECT_NE(std::string(e.what()).find("'train.learning_rate'"), std::string::npos);
    EXPECT_EQ(e.exit_code(), ExitCode::Config);
  }
  EXPECT_THROW(parse_config("[train]\nlr = fast\n"), ConfigError);
  EXPECT_THROW(parse_config("[model]\nt_obs = -1\n"), ConfigError);
  EXPECT_THROW(parse_config("lr 0.1\n"), ConfigError);
}

TEST(Config, SectionsCommentsAndOverrides)
{
  RunConfig c = parse_config("# comment\ntrain.lr = 0.5 ; trailing\n[gpm]\nk = 7\n");
  EXPECT_EQ(c.train.lr, 0.5);
  EXPECT_EQ(c.model.gpm.k, 7u);
  apply_override(c, "model.social=off");
  EXPECT_FALSE(c.model.use_social);
  EXPECT_THROW(apply_override(c, "model.social"), ConfigError);
}

TEST(Config, DefaultsMatchLibraryDefaults)
{
  const RunConfig c = parse_config(format_config(RunConfig{}));
  EXPECT_EQ(c.model.gpm.k, 20u);
  EXPECT_EQ(c.model.gpm.t_obs, 8u);
  EXPECT_EQ(c.model.t_fut, 12u);
  EXPECT_EQ(c.train.lr, 1e-3);
  EXPECT_EQ(c.train.weights.goal, 1e3);
}

TEST(Render, OneAgentOneSampleElementCount)
{
  Scene s;
  s.scene_id = "solo";
  AgentTrack tr;
  tr.agent_id = 4;
  for (int t = 0; t < 6; ++t) {
    tr.frame_ids.push_back(t);
    tr.positions.push_back({static_cast<double>(t), 0.5 * t});
  }
  s.tracks.push_back(tr);
  const std::vector<std::vector<Trajectory>> pred{{{{4.1, 2.0}, {5.2, 2.4}}}};
  const std::string svg = render_scene_svg(s, 4, pred);
  EXPECT_EQ(count(svg, "<polyline"), 3u);
  EXPECT_EQ(count(svg, "<circle"), 1u);
  EXPECT_EQ(count(svg, "stroke=\"green\""), 1u);
  EXPECT_EQ(count(svg, "stroke=\"red\""), 1u);
}

TEST(Render, AttentionGridShapeOrderAndShade)
{
  tpm::AttentionTrace tr;
  tr.agent_ids = {7, 3, 9, 1};
  tr.steps = {5};
  Rng rng(4);
  std::vector<double> m(16);
  for (std::size_t i = 0; i < 4; ++i) {
    double sum = 0.0;
    for (std::size_t j = 0; j < 4; ++j) sum += m[i * 4 + j] = rng.uniform() + 0.01;
    for (std::size_t j = 0; j < 4; ++j) m[i * 4 + j] /= sum;
  }
  tr.matrices = {m};
  // Round trip through the exported JSON, then recompute every cell.
  const TraceFile tf = trace_from_json(trace_to_json({"s", 0, 0, tr}).dump());
  const std::string svg = render_attention_svg(tf.trace, 0);
  EXPECT_EQ(count(svg, "class=\"cell\""), 16u);
  const std::regex cell(
    "fill=\"rgb\\((\\d+),\\d+,\\d+\\)\" data-row=\"(-?\\d+)\" data-col=\"(-?\\d+)\"");
  std::vector<std::int64_t> rows;
  std::size_t seen = 0;
  auto index_of = [&](std::int64_t id) {
    return static_cast<std::size_t>(std::find(tr.agent_ids.begin(), tr.agent_ids.end(), id) - tr.agent_ids.begin());
  };
  for (std::sregex_iterator it(svg.begin(), svg.end(), cell), end; it != end; ++it, ++seen) {
    const int gray = std::stoi((*it)[1]);
    const std::int64_t r = std::stoll((*it)[2]), c = std::stoll((*it)[3]);
    if (rows.empty() || rows.back() != r) rows.push_back(r);
    const double a = tr.at(0, index_of(r), index_of(c));
    EXPECT_LE(std::abs((255.0 - gray) / 255.0 - a), 0.5 / 255.0 + 1e-12);
  }
  EXPECT_EQ(seen, 16u);
  EXPECT_EQ(rows, (std::vector<std::int64_t>{1, 3, 7, 9}));
}

TEST(Render, TraceJsonRejectsRaggedMatrix)
{
  EXPECT_THROW(trace_from_json(R"({"scene_id":"a","sample_index":0,"agent_ids":[1,2],"steps":[{"t":1,"matrix":[[1,0]]}]})"),
    ParseError);
  EXPECT_THROW(trace_from_json("not json"), ParseError);
}

TEST(Align, MissingAndExtraKeysAreNamed)
{
  const auto recs = parse_trajectory_records(parallel_tracks(12));
  WindowOptions opt;
  opt.t_obs = 4;
  opt.t_fut = 4;
  const auto windows = window_records(recs, "par", opt);
  ASSERT_EQ(windows.size(), 2u);
  auto preds = parse_predictions(copy_gt_as_predictions(windows, 4, 2));
  EXPECT_EQ(align_predictions(windows, 4, "par", preds).size(), 2u);

  auto missing = preds;
  missing.erase(std::remove_if(missing.begin(), missing.end(),
                  [](const auto & r) { return r.agent_id == 2 && r.frame_id == 6; }),
    missing.end());
  try {
    align_predictions(windows, 4, "par", missing);
    FAIL();
  } catch (const DataError & e) {
    EXPECT_NE(std::string(e.what()).find("(scene 'par', agent 2, frame 6)"), std::string::npos);
  }
  auto extra = preds;
  extra.push_back({0, 99, 1, {0, 0}});
  EXPECT_THROW(align_predictions(windows, 4, "par", extra), DataError);
}

TEST(Evaluate, GroundTruthCopiesScoreZeroAndAutoEpsilon)
{
  const fs::path dir = scratch("eval_zero");
  RunConfig c = tiny_config();
  write_file_atomic(dir / "gt" / "par.txt", parallel_tracks(16));
  const auto windows = load_trajectories(dir / "gt" / "par.txt", scoring_windows(c));
  write_file_atomic(dir / "pred" / "par.pred.txt", copy_gt_as_predictions(windows, 4, 3));
  EvaluateOptions o;
  o.pred = (dir / "pred").string();
  o.gt = (dir / "gt").string();
  o.config = write_config(dir, c).string();
  o.out = (dir / "out").string();
  cmd_evaluate(o);
  const auto j = nlohmann::json::parse(read_file(dir / "out" / "metrics.json"));
  EXPECT_EQ(j["ade"].get<double>(), 0.0);
  EXPECT_EQ(j["fde"].get<double>(), 0.0);
  EXPECT_EQ(j["min_ade"].get<double>(), 0.0);
  EXPECT_EQ(j["min_fde"].get<double>(), 0.0);
  EXPECT_EQ(j["k"].get<int>(), 3);
  // Parallel tracks one unit apart: the smallest GT distance minus the guard.
  EXPECT_DOUBLE_EQ(j["epsilon"].get<double>(), 1.0 - 1e-9);
  EXPECT_EQ(j["cr_mean"].get<double>(), 0.0);
  EXPECT_TRUE(fs::exists(dir / "out" / "metrics.csv"));
  EXPECT_TRUE(fs::exists(dir / "out" / "manifest.json"));

  o.epsilon = "0.25";
  o.miss_threshold = 0.5;
  cmd_evaluate(o);
  const auto k = nlohmann::json::parse(read_file(dir / "out" / "metrics.json"));
  EXPECT_EQ(k["epsilon"].get<double>(), 0.25);
  EXPECT_EQ(k["miss_threshold"].get<double>(), 0.5);
  o.epsilon = "-1";
  EXPECT_THROW(cmd_evaluate(o), ConfigError);
}

TEST(Evaluate, UnpredictedGroundTruthSceneIsSkippedWithWarning)
{
  const fs::path dir = scratch("eval_skip");
  RunConfig c = tiny_config();
  write_file_atomic(dir / "gt" / "par.txt", parallel_tracks(16));
  write_file_atomic(dir / "gt" / "other.txt", parallel_tracks(16));
  const auto windows = load_trajectories(dir / "gt" / "par.txt", scoring_windows(c));
  write_file_atomic(dir / "pred" / "par.pred.txt", copy_gt_as_predictions(windows, 4, 2));
  EvaluateOptions o;
  o.pred = (dir / "pred").string();
  o.gt = (dir / "gt").string();
  o.config = write_config(dir, c).string();
  o.out = (dir / "out").string();
  cmd_evaluate(o);
  const auto j = nlohmann::json::parse(read_file(dir / "out" / "metrics.json"));
  EXPECT_EQ(j["n_scenes"].get<std::size_t>(), windows.size());
  ASSERT_EQ(j["warnings"].size(), 1u);
  EXPECT_NE(j["warnings"][0].get<std::string>().find("'other'"), std::string::npos);

  o.pred = (dir / "none").string();
  fs::create_directories(dir / "none");
  EXPECT_THROW(cmd_evaluate(o), DataError);
}

TEST(Synth, WritesTrajectoryRasterAndManifest)
{
  const fs::path dir = scratch("synth");
  SynthOptions o;
  o.scenario = "crossing";
  o.n_agents = 2;
  o.seed = 9;
  o.out = dir.string();
  o.set = {"grid=16", "n_windows=2"};
  cmd_synth(o);
  const auto scenes = load_trajectories(dir / "crossing.txt");
  ASSERT_EQ(scenes.size(), 2u);
  EXPECT_EQ(scenes[0].n_agents(), 2u);
  const auto raster = load_raster(dir / "crossing.raster");
  EXPECT_EQ(raster.height, 16u);
  const auto m = nlohmann::json::parse(read_file(dir / "crossing.manifest.json"));
  EXPECT_EQ(m["seed"].get<int>(), 9);
  EXPECT_EQ(m["outputs"].size(), 2u);
  o.scenario = "teleport";
  EXPECT_THROW(cmd_synth(o), ConfigError);
}

TEST(Manifest, Sha256KnownVector)
{
  EXPECT_EQ(sha256_hex("abc"), "ba7816bf8f01cfea414140de5dae2223b00361a396177a9cb410ff61f20015ad");
  EXPECT_EQ(sha256_hex(""), "e3b0c44298fc1c149afbf4c8996fb92427ae41e4649b934ca495991b7852b855");
}

class Pipeline : public ::testing::Test
{
protected:
  static void SetUpTestSuite()
  {
    dir_ = scratch("pipeline");
    for (int i = 0; i < 9; ++i) {
      SynthOptions s;
      s.scenario = vista::scenario_names()[static_cast<std::size_t>(i) % 5];
      s.n_agents = 2;
      s.seed = static_cast<std::uint64_t>(i);
      s.out = (dir_ / "data").string();
      s.set = {"grid=8", "t_obs=4", "t_fut=4", "speed=0.3", "margin=0.5", "scene_id=s" + std::to_string(i)};
      cmd_synth(s);
    }
    cfg_ = write_config(dir_, tiny_config());
  }
  static fs::path dir_, cfg_;
};
fs::path Pipeline::dir_, Pipeline::cfg_;

TEST_F(Pipeline, FoldAllGivesOneCheckpointPerScene)
{
  TrainOptions o;
  o.data = (dir_ / "data").string();
  o.raster_dir = o.data;
  o.config = cfg_.string();
  o.out = (dir_ / "all").string();
  cmd_train(o);
  for (int i = 0; i < 9; ++i) EXPECT_TRUE(fs::exists(dir_ / "all" / ("fold" + std::to_string(i)) / "model.ckpt"));
  EXPECT_FALSE(fs::exists(dir_ / "all" / "fold9"));
  const auto summary = nlohmann::json::parse(read_file(dir_ / "all" / "summary.json"));
  EXPECT_EQ(summary["folds"].size(), 9u);
  EXPECT_EQ(summary["folds"][3]["held_out"], "s3");
}

TEST_F(Pipeline, SingleFoldAndPredictContracts)
{
  TrainOptions o;
  o.data = (dir_ / "data").string();
  o.raster_dir = o.data;
  o.config = cfg_.string();
  o.out = (dir_ / "one").string();
  o.fold = "0";
  cmd_train(o);
  EXPECT_TRUE(fs::exists(dir_ / "one" / "fold0" / "model.ckpt"));
  EXPECT_FALSE(fs::exists(dir_ / "one" / "fold1"));
  EXPECT_EQ(read_file(dir_ / "one" / "fold0" / "report.csv").substr(0, 6), "epoch,");

  PredictOptions p;
  p.checkpoint = (dir_ / "one" / "fold0" / "model.ckpt").string();
  p.data = (dir_ / "data" / "s1.txt").string();
  p.raster_dir = (dir_ / "data").string();
  p.k = 1;
  p.out = (dir_ / "k1").string();
  cmd_predict(p);
  const auto recs = parse_predictions(read_file(dir_ / "k1" / "s1.pred.txt"));
  const auto windows = load_trajectories(dir_ / "data" / "s1.txt", scoring_windows(tiny_config()));
  std::size_t agents = 0;
  for (const auto & w : windows) agents += w.n_agents();
  EXPECT_EQ(recs.size(), agents * 4);
  for (const auto & r : recs) EXPECT_EQ(r.sample_id, 0);
  EXPECT_FALSE(fs::exists(dir_ / "k1" / "traces"));

  p.k = 4;
  p.seed = 21;
  p.trace = true;
  p.out = (dir_ / "a").string();
  cmd_predict(p);
  p.out = (dir_ / "b").string();
  cmd_predict(p);
  EXPECT_EQ(read_file(dir_ / "a" / "s1.pred.txt"), read_file(dir_ / "b" / "s1.pred.txt"));
  EXPECT_EQ(read_file(dir_ / "a" / "s1.goals.txt"), read_file(dir_ / "b" / "s1.goals.txt"));
  std::size_t traces = 0;
  for (const auto & e : fs::directory_iterator(dir_ / "a" / "traces")) {
    ++traces;
    const auto rel = e.path().filename();
    EXPECT_EQ(read_file(e.path()), read_file(dir_ / "b" / "traces" / rel));
  }
  EXPECT_EQ(traces, windows.size() * 4);
  const auto tf = trace_from_json(read_file(dir_ / "a" / "traces" / "s1.f0.s0.json"));
  EXPECT_EQ(tf.trace.steps.size(), 4u);
  EXPECT_EQ(tf.trace.n(), windows.front().n_agents());
}

TEST_F(Pipeline, BinaryExitCodes)
{
  std::string err;
  const std::string data = (dir_ / "data").string();
  EXPECT_EQ(run_cli("train --data " + data + " --out " + (dir_ / "x").string() + " --set train.nope=1", &err), 2);
  EXPECT_NE(err.find("train.nope"), std::string::npos);
  EXPECT_NE(err.find("\"exit_code\":2"), std::string::npos);

  const fs::path cfg = dir_ / "bad.cfg";
  write_file_atomic(cfg, "[gpm]\nwidth3 = 4\n");
  EXPECT_EQ(run_cli("train --data " + data + " --config " + cfg.string() + " --out " + (dir_ / "x").string(), &err), 2);
  EXPECT_NE(err.find("gpm.width3"), std::string::npos);

  nn::ParamStore old("vista-0");
  old.add_zeros("w", nn::Shape{1});
  nn::save_checkpoint(old, dir_ / "old.ckpt");
  EXPECT_EQ(run_cli("predict --checkpoint " + (dir_ / "old.ckpt").string() + " --data " + data + " --out " +
                      (dir_ / "x").string(), &err), 3);
  EXPECT_NE(err.find("\"error\":\"checkpoint\""), std::string::npos);

  write_file_atomic(dir_ / "badpred" / "s0.pred.txt", "0 999 0 1 1\n");
  EXPECT_EQ(run_cli("evaluate --pred " + (dir_ / "badpred").string() + " --gt " + (dir_ / "data" / "s0.txt").string() +
                      " --config " + cfg_.string() + " --out " + (dir_ / "x").string(), &err), 4);
  EXPECT_NE(err.find("(scene 's0', agent"), std::string::npos);

  EXPECT_EQ(run_cli("synth --scenario nowhere --out " + (dir_ / "x").string(), &err), 2);
  EXPECT_EQ(run_cli("frobnicate", &err), 2);
  EXPECT_EQ(run_cli("--print-config"), 0);
}

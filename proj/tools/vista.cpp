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

// vista: synth, train, predict, evaluate, render and attention subcommands.
// Human summaries go to stdout, errors to stderr as one JSON object.

#include <CLI11.hpp>

#include <cstdint>
#include <iostream>
#include <string>
#include <vector>

#include <nlohmann/json.hpp>

#include "vista/cli/commands.hpp"

namespace
{

int report_error(const std::string & kind, const std::string & message, int code)
{
  nlohmann::ordered_json j;
  j["error"] = kind;
  j["message"] = message;
  j["exit_code"] = code;
  std::cerr << j.dump() << std::endl;
  return code;
}

void require(const std::string & value, const std::string & flag)
{
  if (value.empty()) throw vista::ConfigError("missing required option " + flag);
}

}  // namespace

int main(int argc, char ** argv)
{
  using namespace vista::cli;
  const std::vector<std::string> args(argv, argv + argc);

  CLI::App app{"Goal-conditioned multi-agent trajectory forecasting"};
  app.require_subcommand(0, 1);
  bool print_defaults = false;
  app.add_flag("--print-config", print_defaults, "Print the default config and exit");

  SynthOptions synth;
  auto * s = app.add_subcommand("synth", "Generate a synthetic scene (trajectories + raster)");
  s->add_option("--scenario", synth.scenario, "Scenario name")->required();
  s->add_option("--n", synth.n_agents, "Agents per window");
  s->add_option("--seed", synth.seed, "Generator seed");
  s->add_option("--out", synth.out, "Output directory")->required();
  s->add_option("--set", synth.set, "Extra scenario field key=value (repeatable)");

  TrainOptions train;
  bool train_print = false;
  auto * t = app.add_subcommand("train", "Train one model per fold");
  t->add_option("--data", train.data, "Trajectory file or directory");
  t->add_option("--raster-dir", train.raster_dir, "Directory of <scene_id>.raster files");
  t->add_option("--config", train.config, "key=value config file");
  t->add_option("--set", train.set, "Config override section.key=value (repeatable)");
  t->add_option("--out", train.out, "Output directory");
  t->add_option("--fold", train.fold, "Fold index, all, ratio or none");
  t->add_option("--seed", train.seed, "Overrides train.seed");
  t->add_flag("--print-config", train_print, "Print the effective config and exit");

  PredictOptions predict;
  bool predict_print = false;
  auto * p = app.add_subcommand("predict", "Sample k joint futures per window");
  p->add_option("--checkpoint", predict.checkpoint, "Model checkpoint")->required();
  p->add_option("--data", predict.data, "Trajectory file or directory");
  p->add_option("--raster-dir", predict.raster_dir, "Directory of <scene_id>.raster files");
  p->add_option("--k", predict.k, "Samples per agent");
  p->add_option("--seed", predict.seed, "Sampling seed");
  p->add_flag("--trace", predict.trace, "Export social attention traces");
  p->add_option("--out", predict.out, "Output directory");
  p->add_flag("--print-config", predict_print, "Print the checkpoint config and exit");

  EvaluateOptions evaluate;
  bool evaluate_print = false;
  double miss = 0.0;
  auto * e = app.add_subcommand("evaluate", "Score predictions against ground truth");
  e->add_option("--pred", evaluate.pred, "Prediction file or directory");
  e->add_option("--gt", evaluate.gt, "Ground-truth trajectory file or directory");
  e->add_option("--config", evaluate.config, "Config with the window layout");
  e->add_option("--set", evaluate.set, "Config override section.key=value (repeatable)");
  e->add_option("--epsilon", evaluate.epsilon, "Collision threshold: auto or a value");
  auto * miss_opt = e->add_option("--miss-threshold", miss, "Final displacement counted as a miss");
  e->add_option("--seed", evaluate.seed, "Recorded in the manifest");
  e->add_option("--out", evaluate.out, "Output directory");
  e->add_flag("--print-config", evaluate_print, "Print the effective config and exit");

  RenderOptions render;
  auto * r = app.add_subcommand("render", "Draw SVG figures of windows and attention traces");
  r->add_option("--scene", render.scene, "Ground-truth trajectory file");
  r->add_option("--pred", render.pred, "Prediction file of the same scene");
  r->add_option("--goals", render.goals, "Goal file written by predict");
  r->add_option("--trace", render.traces, "Trace JSON (repeatable)");
  r->add_option("--steps", render.steps, "Trace steps t to draw (default all)");
  r->add_option("--config", render.config, "Config with the window layout");
  r->add_option("--set", render.set, "Config override section.key=value (repeatable)");
  r->add_option("--seed", render.seed, "Recorded in the manifest");
  r->add_option("--out-svg", render.out_svg, "Output directory")->required();

  std::string trace_path;
  auto * a = app.add_subcommand("attention", "Print an attention trace as text");
  a->add_option("--trace", trace_path, "Trace JSON")->required();

  try {
    app.parse(argc, argv);
  } catch (const CLI::CallForHelp & err) {
    return app.exit(err);
  } catch (const CLI::CallForAllHelp & err) {
    return app.exit(err);
  } catch (const CLI::ParseError & err) {
    return report_error("usage", err.what(), static_cast<int>(vista::ExitCode::Config));
  }

  try {
    if (print_defaults) {
      std::cout << format_config(RunConfig{});
      return 0;
    }
    CommandResult res;
    if (*s) {
      synth.argv = args;
      res = cmd_synth(synth);
    } else if (*t) {
      if (train_print) {
        std::cout << format_config(resolve_config(train.config, train.set, train.seed));
        return 0;
      }
      require(train.data, "--data");
      require(train.out, "--out");
      train.argv = args;
      res = cmd_train(train);
    } else if (*p) {
      if (predict_print) {
        std::cout << format_config(load_model(predict.checkpoint).second);
        return 0;
      }
      require(predict.data, "--data");
      require(predict.out, "--out");
      predict.argv = args;
      res = cmd_predict(predict);
    } else if (*e) {
      if (*miss_opt) evaluate.miss_threshold = miss;
      if (evaluate_print) {
        std::cout << format_config(resolve_config(evaluate.config, evaluate.set, std::nullopt));
        return 0;
      }
      require(evaluate.pred, "--pred");
      require(evaluate.gt, "--gt");
      require(evaluate.out, "--out");
      evaluate.argv = args;
      res = cmd_evaluate(evaluate);
    } else if (*r) {
      render.argv = args;
      res = cmd_render(render);
    } else if (*a) {
      std::cout << format_trace_text(trace_from_json(vista::read_file(trace_path), trace_path));
      return 0;
    } else {
      return report_error("usage", "a subcommand is required; see --help", static_cast<int>(vista::ExitCode::Config));
    }
    std::cout << res.summary << std::endl;
    return 0;
  } catch (const vista::Error & err) {
    return report_error(err.kind(), err.what(), static_cast<int>(err.exit_code()));
  } catch (const std::filesystem::filesystem_error & err) {
    return report_error("io", err.what(), static_cast<int>(vista::ExitCode::Generic));
  } catch (const std::exception & err) {
    return report_error("internal", err.what(), static_cast<int>(vista::ExitCode::Generic));
  }
}

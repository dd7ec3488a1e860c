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

// Library walkthrough: generate crossing scenes, train briefly, sample 20
// joint futures per window and print the metric report.

#include <iostream>
#include <vector>

#include "vista/data/synth.hpp"
#include "vista/metrics/report.hpp"
#include "vista/tpm/predict.hpp"
#include "vista/training/trainer.hpp"

int main()
{
  using namespace vista;

  tpm::ModelConfig cfg;
  cfg.gpm.grid = {16, 16, 0.5};
  cfg.gpm.raster_classes = 2;
  cfg.gpm.width1 = 8;
  cfg.gpm.width2 = 16;
  cfg.gpm.target_sigma = 1.0;
  cfg.gpm.n_raw = 500;
  cfg.d_model = 32;

  ScenarioSpec spec;
  spec.scenario = "crossing";
  spec.n_agents = 3;
  spec.n_windows = 24;
  spec.speed = 0.2;
  spec.margin = 0.3;
  spec.grid = cfg.gpm.grid;
  const auto scenes = synth_generate(spec);
  const std::vector<Scene> train(scenes.begin(), scenes.begin() + 16), test(scenes.begin() + 16, scenes.end());

  nn::ParamStore params;
  Rng rng(1);
  tpm::add_model_params(params, cfg, rng);
  training::TrainConfig tc;
  tc.max_epochs = 40;
  tc.val_interval = 10;
  training::Trainer trainer(cfg, tc, params);
  training::TrainHooks hooks;
  hooks.on_epoch = [](const training::EpochRecord & rec, const nn::ParamStore &) {
    if (rec.epoch % 10 == 0) std::cout << "epoch " << rec.epoch << "  loss " << rec.total << '\n';
    return true;
  };
  trainer.run(train, test, hooks);

  nn::ParamStore best = trainer.best();
  std::vector<metrics::EvalInput> inputs;
  std::vector<std::vector<Trajectory>> futures;
  for (const auto & s : test) {
    const auto set = tpm::predict_scene<double>(best, cfg, s, 20, 5, false);
    metrics::EvalInput e;
    for (std::size_t i = 0; i < s.n_agents(); ++i) {
      e.gt.push_back(s.future(i, cfg.t_obs()));
      std::vector<Trajectory> samples;
      for (std::size_t j = 0; j < set.k(); ++j) samples.push_back(set.samples[j][i]);
      e.pred.push_back(std::move(samples));
    }
    futures.push_back(e.gt);
    inputs.push_back(std::move(e));
  }
  const auto report = metrics::evaluate(inputs, metrics::calibrate_epsilon(futures));
  std::cout << metrics::to_json(report).dump(2) << '\n';
  return 0;
}

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

#include <cmath>
#include <limits>
#include <vector>

#include "vista/numerics/gradcheck.hpp"
#include "vista/training/loss.hpp"
#include "vista/training/optim.hpp"
#include "vista/training/trainer.hpp"

namespace
{

using namespace vista;
using namespace vista::training;
using vista::tpm::ModelConfig;

ModelConfig small_config()
{
  ModelConfig cfg;
  cfg.gpm.grid = {8, 8, 1.0};
  cfg.gpm.raster_classes = 2;
  cfg.gpm.t_obs = 4;
  cfg.gpm.width1 = 2;
  cfg.gpm.width2 = 3;
  cfg.gpm.n_raw = 50;
  cfg.gpm.target_sigma = 1.0;
  cfg.t_fut = 5;
  cfg.d_model = 8;
  cfg.n_heads = 2;
  return cfg;
}

ParamStore make_store(const ModelConfig & cfg, std::uint64_t seed)
{
  ParamStore store;
  Rng rng(seed);
  tpm::add_model_params(store, cfg, rng);
  for (auto & e : store.entries()) {
    if (e.name == "tpm.pe.learn" || e.name.find(".b") != std::string::npos) {
      for (auto & v : e.value.vec()) v += rng.uniform(-0.1, 0.1);
    }
  }
  return store;
}

Scene random_scene(std::size_t n, std::size_t length, std::uint64_t seed)
{
  Rng rng(seed);
  Scene s;
  s.scene_id = "w" + std::to_string(seed);
  for (std::size_t i = 0; i < n; ++i) {
    AgentTrack t;
    t.agent_id = static_cast<std::int64_t>(i + 1);
    Vec2 p{rng.uniform(1.5, 5.5), rng.uniform(1.5, 5.5)};
    const Vec2 v{rng.uniform(-0.3, 0.3), rng.uniform(-0.3, 0.3)};
    for (std::size_t f = 0; f < length; ++f) {
      t.frame_ids.push_back(static_cast<std::int64_t>(f));
      t.positions.push_back(p);
      p = p + v;
    }
    s.tracks.push_back(t);
  }
  return s;
}

std::vector<Scene> windows(std::size_t count, std::size_t n, const ModelConfig & cfg, std::uint64_t seed)
{
  std::vector<Scene> out;
  for (std::size_t w = 0; w < count; ++w) out.push_back(random_scene(n, cfg.t_total(), seed * 100 + w));
  return out;
}

std::vector<double> gradient(ParamStore & store, const ModelConfig & cfg, const Scene & s, LossWeights w)
{
  store.zero_grad();
  nn::Tape<double> tape;
  nn::BoundParams<double> p(tape, store, true);
  tape.backward(window_loss(p, cfg, s, w).total);
  std::vector<double> g;
  for (const auto & e : store.entries()) g.insert(g.end(), e.grad.vec().begin(), e.grad.vec().end());
  return g;
}

}  // namespace

TEST(JointLoss, PerfectTrajectoriesHaveZeroTrajLoss)
{
  const Trajectory t = {{0, 0}, {1, 1}, {2, 2}};
  const auto l = joint_loss({}, {}, {t, t}, {t, t}, 1.0, {});
  EXPECT_EQ(l.traj, 0.0);
  EXPECT_EQ(l.total, 0.0);
}

TEST(JointLoss, ConstantOffsetGivesTwentyFive)
{
  const Trajectory gt = {{0, 0}, {1, 0}, {2, 0}, {3, 0}};
  Trajectory pred;
  for (const auto & p : gt) pred.push_back(p + Vec2{3, 4});
  EXPECT_DOUBLE_EQ(trajectory_mse(pred, gt), 25.0);
  const auto l = joint_loss({}, {}, {pred, pred}, {gt, gt}, 1.0, {0.0, 2.0});
  EXPECT_DOUBLE_EQ(l.traj, 25.0);
  EXPECT_DOUBLE_EQ(l.total, 100.0);
}

TEST(JointLoss, ZeroGoalWeightIsPureTrajectoryTerm)
{
  Heatmap h(4, 4);
  for (auto & v : h.values) v = 0.3;
  const Trajectory gt = {{0, 0}, {1, 0}};
  const Trajectory pred = {{0, 1}, {1, 2}};
  const auto with = joint_loss({h}, {{1, 1}}, {pred}, {gt}, 1.0, {5.0, 0.5});
  const auto without = joint_loss({h}, {{1, 1}}, {pred}, {gt}, 1.0, {0.0, 0.5});
  EXPECT_EQ(without.total, 0.5 * trajectory_mse(pred, gt));
  EXPECT_NEAR(with.total - without.total, 5.0 * with.goal, 1e-12);
  EXPECT_GT(with.goal, 0.0);
}

TEST(JointLoss, TapeMatchesValueVersion)
{
  const auto cfg = small_config();
  auto store = make_store(cfg, 3);
  const auto s = random_scene(3, cfg.t_total(), 5);
  const LossWeights w{10.0, 2.0};
  nn::Tape<double> tape;
  nn::BoundParams<double> p(tape, store, false);
  const auto l = window_loss(p, cfg, s, w);

  std::vector<Heatmap> heat;
  std::vector<Vec2> goals;
  std::vector<Trajectory> gt;
  for (std::size_t i = 0; i < s.n_agents(); ++i) {
    nn::Tape<double> t2;
    nn::BoundParams<double> p2(t2, store, false);
    heat.push_back(gpm::to_probabilities(gpm::gpm_forward(p2, cfg.gpm, s.observed(i, cfg.t_obs()), s.raster)));
    goals.push_back(cfg.gpm.grid.to_grid(s.tracks[i].positions.back()));
    gt.push_back(s.future(i, cfg.t_obs()));
  }
  const auto v = joint_loss(heat, goals, l.predictions, gt, cfg.gpm.target_sigma, w);
  EXPECT_NEAR(l.values.total, v.total, 1e-9 * v.total);
  EXPECT_NEAR(l.values.goal, v.goal, 1e-10);
  EXPECT_NEAR(l.values.traj, v.traj, 1e-12);
}

TEST(JointLoss, WrongWindowLengthIsDataError)
{
  const auto cfg = small_config();
  auto store = make_store(cfg, 1);
  nn::Tape<double> tape;
  nn::BoundParams<double> p(tape, store, false);
  EXPECT_THROW(window_loss(p, cfg, random_scene(2, cfg.t_total() + 1, 1), {}), DataError);
}

TEST(TrainingGradients, TotalIsWeightedSumOfParts)
{
  const auto cfg = small_config();
  auto store = make_store(cfg, 4);
  const auto s = random_scene(3, cfg.t_total(), 8);
  const auto g_goal = gradient(store, cfg, s, {1.0, 0.0});
  const auto g_traj = gradient(store, cfg, s, {0.0, 1.0});
  const auto g_total = gradient(store, cfg, s, {1e3, 2.5});
  for (std::size_t i = 0; i < g_total.size(); ++i) {
    EXPECT_NEAR(g_total[i], 1e3 * g_goal[i] + 2.5 * g_traj[i], 1e-10) << i;
  }
}

TEST(TrainingGradients, AdamStepIsolatesLossComponents)
{
  const auto cfg = small_config();
  const auto data = windows(1, 3, cfg, 2);
  for (int variant = 0; variant < 2; ++variant) {
    TrainConfig tc;
    tc.max_epochs = 1;
    tc.weights = variant == 0 ? LossWeights{1e3, 0.0} : LossWeights{0.0, 1.0};
    const auto init = make_store(cfg, 6);
    Trainer t(cfg, tc, init);
    TrainHooks hooks;
    hooks.validate = [](ParamStore &, std::size_t) { return ValidationScores{1.0, 1.0}; };
    t.run(data, {}, hooks);
    std::size_t moved = 0;
    for (std::size_t k = 0; k < init.size(); ++k) {
      const auto & name = init.entries()[k].name;
      const bool changed = !(t.params().entries()[k].value == init.entries()[k].value);
      const bool goal_side = name.rfind("gpm.", 0) == 0;
      if (changed) {
        ++moved;
        EXPECT_EQ(goal_side, variant == 0) << name;
      }
    }
    EXPECT_GT(moved, 3u);
  }
}

TEST(TrainingGradients, FullModelFiniteDifferences)
{
  const auto cfg = small_config();
  auto store = make_store(cfg, 9);
  const auto s = random_scene(2, cfg.t_total(), 12);
  const LossWeights w{1.0, 1.0};
  nn::LossBuilder loss = [&](nn::Tape<double> &, nn::BoundParams<double> & p) {
    return window_loss(p, cfg, s, w).total;
  };
  const auto coords = nn::sample_coordinates(store, 3, 17);
  const auto r = nn::finite_difference_check(store, coords, loss, 1e-5);
  EXPECT_LT(r.max_rel_error, 1e-4) << r.worst.name << "[" << r.worst.index << "]";
  EXPECT_GT(r.checked, 40u);
}

TEST(Adam, FirstStepMovesBySignTimesLr)
{
  ParamStore store;
  store.add("x", nn::Tensor<double>(nn::Shape{3}, std::vector<double>{1.0, -2.0, 0.5}));
  store.at("x").grad = nn::Tensor<double>(nn::Shape{3}, std::vector<double>{0.3, -4.0, 0.0});
  Adam adam(store, {});
  adam.step(store, 0.01);
  const auto & x = store.at("x").value.vec();
  EXPECT_NEAR(x[0], 1.0 - 0.01 * 0.3 / (0.3 + 1e-8), 1e-15);
  EXPECT_NEAR(x[1], -2.0 + 0.01 * 4.0 / (4.0 + 1e-8), 1e-15);
  EXPECT_EQ(x[2], 0.5);
  EXPECT_EQ(adam.steps(), 1u);
}

TEST(Adam, SecondStepFollowsMomentRecurrences)
{
  ParamStore store;
  store.add("x", nn::Tensor<double>(nn::Shape{1}, std::vector<double>{0.0}));
  Adam adam(store, {});
  store.at("x").grad.vec()[0] = 1.0;
  adam.step(store, 0.1);
  store.at("x").grad.vec()[0] = -2.0;
  adam.step(store, 0.1);
  const double m = 0.9 * 0.1 * 1.0 + 0.1 * -2.0;
  const double v = 0.999 * 0.001 * 1.0 + 0.001 * 4.0;
  const double step2 = 0.1 * (m / (1 - 0.81)) / (std::sqrt(v / (1 - 0.999 * 0.999)) + 1e-8);
  const double step1 = 0.1 * 1.0 / (1.0 + 1e-8);
  EXPECT_NEAR(store.at("x").value.vec()[0], -step1 - step2, 1e-14);
}

TEST(Schedule, PlateauHalvesAtPatiencePlusOne)
{
  PlateauScheduler s(1e-3, 30);
  std::vector<std::size_t> cuts;
  for (std::size_t e = 1; e <= 100; ++e) {
    if (s.observe(e, 2.0)) cuts.push_back(e);
  }
  EXPECT_EQ(cuts, (std::vector<std::size_t>{31, 61, 91}));
  EXPECT_DOUBLE_EQ(s.lr(), 1e-3 / 8.0);
}

TEST(Schedule, ImprovementResetsPlateauCount)
{
  PlateauScheduler s(1.0, 30);
  std::size_t cut = 0;
  for (std::size_t e = 1; e <= 80; ++e) {
    const double v = e <= 20 ? 10.0 - 0.1 * static_cast<double>(e) : 8.5;
    if (s.observe(e, v) && cut == 0) cut = e;
  }
  EXPECT_EQ(cut, 50u);
}

TEST(Schedule, EarlyStopExactlyPatienceAfterBest)
{
  EarlyStopper stop(75);
  std::size_t stopped = 0;
  for (std::size_t e = 1; e <= 300 && !stopped; ++e) {
    stop.observe(e, e <= 12 ? 1.0 / static_cast<double>(e) : 5.0);
    if (stop.should_stop(e)) stopped = e;
  }
  EXPECT_EQ(stop.best_epoch(), 12u);
  EXPECT_EQ(stopped, 87u);
}

TEST(Schedule, BadConfigurationsThrow)
{
  EXPECT_THROW(PlateauScheduler(0.0, 30), ConfigError);
  EXPECT_THROW(PlateauScheduler(1e-3, 0), ConfigError);
  EXPECT_THROW(EarlyStopper(0), ConfigError);
  TrainConfig tc;
  tc.lr = -1;
  EXPECT_THROW(tc.validate(), ConfigError);
  tc = {};
  tc.batch_size = 0;
  EXPECT_THROW(tc.validate(), ConfigError);
  tc = {};
  tc.adam.beta2 = 1.0;
  EXPECT_THROW(tc.validate(), ConfigError);
}

TEST(Trainer, FrozenValidationHalvesLrThenStops)
{
  const auto cfg = small_config();
  const auto data = windows(1, 2, cfg, 3);
  TrainConfig tc;
  tc.max_epochs = 500;
  Trainer t(cfg, tc, make_store(cfg, 2));
  TrainHooks hooks;
  hooks.validate = [](ParamStore &, std::size_t) { return ValidationScores{0.7, 0.9}; };
  const auto & r = t.run(data, {}, hooks);
  EXPECT_EQ(r.stop_reason, "early_stop");
  ASSERT_EQ(r.epochs.size(), 76u);
  EXPECT_EQ(r.best_epoch, 1u);
  for (const auto & e : r.epochs) {
    const double want = e.epoch <= 31 ? 1e-3 : e.epoch <= 61 ? 5e-4 : 2.5e-4;
    EXPECT_DOUBLE_EQ(e.lr, want) << e.epoch;
  }
  EXPECT_DOUBLE_EQ(t.lr(), 2.5e-4);
}

TEST(Trainer, SparseValidationKeepsEpochSchedule)
{
  const auto cfg = small_config();
  const auto data = windows(1, 2, cfg, 3);
  TrainConfig tc;
  tc.val_interval = 10;
  tc.early_stop_patience = 25;
  Trainer t(cfg, tc, make_store(cfg, 2));
  std::vector<std::size_t> validated;
  TrainHooks hooks;
  hooks.validate = [&](ParamStore &, std::size_t e) {
    validated.push_back(e);
    return ValidationScores{1.0, 1.0};
  };
  const auto & r = t.run(data, {}, hooks);
  EXPECT_EQ(validated, (std::vector<std::size_t>{1, 10, 20}));
  EXPECT_EQ(r.epochs.size(), 26u);
  EXPECT_TRUE(r.epochs[0].validated());
  EXPECT_FALSE(r.epochs[1].validated());
}

TEST(Trainer, DeterministicAndResumable)
{
  const auto cfg = small_config();
  const auto train = windows(4, 2, cfg, 5);
  const auto val = windows(2, 2, cfg, 6);
  TrainConfig tc;
  tc.seed = 11;
  tc.val_k = 3;
  tc.batch_size = 2;
  tc.max_epochs = 5;
  const auto init = make_store(cfg, 8);

  Trainer a(cfg, tc, init);
  a.run(train, val);
  Trainer b(cfg, tc, init);
  b.run(train, val);
  EXPECT_TRUE(a.params() == b.params());
  EXPECT_EQ(a.report().to_csv(), b.report().to_csv());

  TrainConfig short_tc = tc;
  short_tc.max_epochs = 3;
  Trainer c(cfg, short_tc, init);
  c.run(train, val);
  const auto image = nn::serialize(c.state());
  Trainer d = Trainer::from_state(nn::deserialize(image), cfg, tc);
  EXPECT_EQ(d.epoch(), 3u);
  d.run(train, val);
  EXPECT_TRUE(d.params() == a.params());
  EXPECT_TRUE(d.best() == a.best());
  EXPECT_EQ(d.report().to_csv(), a.report().to_csv());
  EXPECT_EQ(d.report().best_epoch, a.report().best_epoch);
}

TEST(Trainer, LossDecreasesOnTinySet)
{
  const auto cfg = small_config();
  const auto train = windows(2, 2, cfg, 7);
  TrainConfig tc;
  tc.lr = 3e-3;
  tc.max_epochs = 40;
  tc.val_interval = 40;
  tc.val_k = 2;
  Trainer t(cfg, tc, make_store(cfg, 1));
  const auto & r = t.run(train, train);
  EXPECT_EQ(r.stop_reason, "max_epochs");
  EXPECT_LT(r.epochs.back().total, r.epochs.front().total);
  EXPECT_LT(r.epochs.back().goal_loss, r.epochs.front().goal_loss);
  EXPECT_LT(r.epochs.back().traj_loss, 0.25 * r.epochs.front().traj_loss);
}

TEST(Trainer, NonFiniteParametersDiverge)
{
  const auto cfg = small_config();
  auto store = make_store(cfg, 1);
  store.at("tpm.decoder.b2").value.vec()[0] = std::numeric_limits<double>::infinity();
  TrainConfig tc;
  Trainer t(cfg, tc, store);
  TrainHooks hooks;
  hooks.validate = [](ParamStore &, std::size_t) { return ValidationScores{1.0, 1.0}; };
  const auto & r = t.run(windows(1, 2, cfg, 1), {}, hooks);
  EXPECT_EQ(r.stop_reason, "diverged");
  EXPECT_EQ(r.epochs.size(), 1u);
  EXPECT_TRUE(std::isnan(r.epochs.back().total));
}

TEST(Trainer, HookCanStopAndEmptyDataThrows)
{
  const auto cfg = small_config();
  TrainConfig tc;
  Trainer t(cfg, tc, make_store(cfg, 1));
  TrainHooks hooks;
  hooks.validate = [](ParamStore &, std::size_t) { return ValidationScores{1.0, 1.0}; };
  hooks.on_epoch = [](const EpochRecord & e, const ParamStore &) { return e.epoch < 3; };
  EXPECT_EQ(t.run(windows(1, 2, cfg, 1), {}, hooks).stop_reason, "hook");
  EXPECT_EQ(t.epoch(), 3u);
  EXPECT_THROW(t.run({}, {}, hooks), DataError);
  EXPECT_THROW(t.run(windows(1, 2, cfg, 1), {}), DataError);
}

TEST(TrainReport, CsvRoundTrip)
{
  TrainReport r;
  r.epochs.push_back({1, 0.5, 0.25, 500.25, 0.1, 0.05, 1e-3});
  r.epochs.push_back({2, 0.4, 0.2, 400.2, std::numeric_limits<double>::quiet_NaN(),
                      std::numeric_limits<double>::quiet_NaN(), 1e-3});
  const auto back = TrainReport::from_csv(r.to_csv());
  EXPECT_EQ(back.to_csv(), r.to_csv());
  EXPECT_FALSE(back.epochs[1].validated());
  EXPECT_THROW(TrainReport::from_csv("h\n1,x\n"), CheckpointError);
}

TEST(TrainState, WrongVersionAndTruncationAreRejected)
{
  const auto cfg = small_config();
  Trainer t(cfg, {}, make_store(cfg, 1));
  auto s = t.state();
  s.set_version("vista-1");
  EXPECT_THROW(Trainer::from_state(s, cfg, {}), CheckpointError);
  auto image = nn::serialize(t.state());
  image.resize(image.size() - 5);
  EXPECT_THROW(nn::deserialize(image), CheckpointError);
}

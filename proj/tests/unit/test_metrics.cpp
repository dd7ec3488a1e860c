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
#include <numbers>
#include <vector>

#include "vista/common/rng.hpp"
#include "vista/data/augment.hpp"
#include "vista/data/synth.hpp"
#include "vista/metrics/metrics.hpp"
#include "vista/metrics/report.hpp"

namespace
{

using namespace vista;
using namespace vista::metrics;

Trajectory line(Vec2 start, Vec2 step, std::size_t T)
{
  Trajectory t;
  for (std::size_t s = 0; s < T; ++s) t.push_back(start + step * static_cast<double>(s));
  return t;
}

Trajectory shifted(const Trajectory & t, Vec2 d)
{
  Trajectory out;
  for (const auto & p : t) out.push_back(p + d);
  return out;
}

/// Mean of the subset minimum over every K-subset, by bitmask enumeration.
double brute_expected_best(const std::vector<double> & e, std::size_t K)
{
  double sum = 0.0;
  std::size_t count = 0;
  for (std::uint32_t mask = 0; mask < (1u << e.size()); ++mask) {
    if (static_cast<std::size_t>(__builtin_popcount(mask)) != K) continue;
    double m = std::numeric_limits<double>::infinity();
    for (std::size_t j = 0; j < e.size(); ++j)
      if (mask & (1u << j)) m = std::min(m, e[j]);
    sum += m;
    ++count;
  }
  return sum / static_cast<double>(count);
}

EvalInput random_eval(std::size_t N, std::size_t k, std::size_t T, std::uint64_t seed)
{
  Rng rng(seed);
  EvalInput e;
  for (std::size_t i = 0; i < N; ++i) {
    e.gt.push_back(line({rng.uniform(2, 8), rng.uniform(2, 8)}, {rng.uniform(-0.3, 0.3), 0.2}, T));
    std::vector<Trajectory> samples;
    for (std::size_t j = 0; j < k; ++j) {
      Trajectory s;
      for (const auto & p : e.gt.back()) s.push_back(p + Vec2{rng.normal() * 0.5, rng.normal() * 0.5});
      samples.push_back(s);
    }
    e.pred.push_back(samples);
  }
  return e;
}

}  // namespace

TEST(Metrics, PerfectPredictionIsZero)
{
  const auto e = EvalInput::identity({line({0, 0}, {1, 0}, 12), line({3, 3}, {0, 1}, 12)});
  EXPECT_EQ(ade(e), 0.0);
  EXPECT_EQ(fde(e), 0.0);
  EXPECT_EQ(min_ade(e), 0.0);
  EXPECT_EQ(min_fde(e), 0.0);
  EXPECT_EQ(miss_rate(e), 0.0);
}

TEST(Metrics, ConstantOffsetGivesOffset)
{
  const auto gt = line({1, 1}, {0.5, 0.25}, 12);
  EvalInput e;
  e.gt = {gt};
  e.pred = {{shifted(gt, {0, 2})}};
  EXPECT_DOUBLE_EQ(ade(e), 2.0);
  EXPECT_DOUBLE_EQ(fde(e), 2.0);
}

TEST(Metrics, AdeAveragesOverSamples)
{
  const auto gt = line({0, 0}, {1, 0}, 5);
  EvalInput e;
  e.gt = {gt};
  e.pred = {{shifted(gt, {1, 0}), shifted(gt, {0, -3})}};
  EXPECT_DOUBLE_EQ(ade(e), 2.0);
  EXPECT_DOUBLE_EQ(min_ade(e), 1.0);
}

TEST(Metrics, MinAdeHandCase)
{
  const auto g0 = line({0, 0}, {1, 0}, 4);
  const auto g1 = line({10, 0}, {0, 1}, 4);
  EvalInput e;
  e.gt = {g0, g1};
  e.pred = {{shifted(g0, {2, 0}), shifted(g0, {0, 5})}, {shifted(g1, {-7, 0}), shifted(g1, {0, 3})}};
  EXPECT_DOUBLE_EQ(min_ade(e), 2.5);
}

TEST(Metrics, MinFdeCanPickADifferentSample)
{
  const auto gt = line({0, 0}, {1, 0}, 3);
  Trajectory a = gt, b = gt;
  a[0].y += 1.0;
  a[1].y += 1.0;
  a[2].y += 1.0;  // ADE 1, FDE 1
  b[0].y += 2.0;  // ADE 2/3, FDE 0
  EvalInput e;
  e.gt = {gt};
  e.pred = {{a, b}};
  EXPECT_NEAR(min_ade(e), 2.0 / 3.0, 1e-15);
  EXPECT_EQ(min_fde(e), 0.0);
}

TEST(Metrics, KOneMinEqualsMean)
{
  const auto e = random_eval(3, 1, 12, 4);
  EXPECT_EQ(min_ade(e), ade(e));
  EXPECT_EQ(min_fde(e), fde(e));
}

TEST(Metrics, OrderingMinBelowMean)
{
  for (std::uint64_t seed = 0; seed < 20; ++seed) {
    const auto e = random_eval(3, 6, 12, seed);
    EXPECT_LE(min_ade(e), ade(e));
    EXPECT_LE(min_fde(e), fde(e));
  }
}

TEST(Auc, ThreeSampleHandCase)
{
  EXPECT_NEAR(expected_best_of({3, 1, 2}, 2), 4.0 / 3.0, 1e-15);
  EXPECT_NEAR(brute_expected_best({3, 1, 2}, 2), 4.0 / 3.0, 1e-15);
}

TEST(Auc, LimitsAreExact)
{
  Rng rng(7);
  for (std::size_t k = 2; k <= 8; ++k) {
    std::vector<double> e(k);
    for (auto & x : e) x = rng.uniform(0.0, 5.0);
    double mean = 0.0;
    for (double x : e) mean += x;
    mean /= static_cast<double>(k);
    EXPECT_EQ(expected_best_of(e, 1), mean);
    EXPECT_EQ(expected_best_of(e, k), *std::min_element(e.begin(), e.end()));
  }
}

TEST(Auc, MatchesBruteForceEnumeration)
{
  Rng rng(11);
  for (int rep = 0; rep < 25; ++rep) {
    for (std::size_t k = 2; k <= 8; ++k) {
      std::vector<double> e(k);
      for (auto & x : e) x = rng.uniform(0.0, 5.0);
      if (rep % 5 == 0) e[1] = e[0];  // ties
      for (std::size_t K = 1; K <= k; ++K) {
        EXPECT_NEAR(expected_best_of(e, K), brute_expected_best(e, K), 1e-12) << "k=" << k << " K=" << K;
      }
    }
  }
}

TEST(Auc, CurveIsNonIncreasing)
{
  const auto e = random_eval(2, 8, 12, 3);
  const auto r = auc(e);
  ASSERT_EQ(r.curve.size(), 8u);
  for (std::size_t K = 1; K < r.curve.size(); ++K) EXPECT_LE(r.curve[K], r.curve[K - 1] + 1e-12);
  EXPECT_NEAR(r.curve.front(), ade(e), 1e-12);
  EXPECT_NEAR(r.curve.back(), min_ade(e), 1e-12);
  double s = 0.0;
  for (double c : r.curve) s += c;
  EXPECT_NEAR(r.auc, 2.0 * s, 1e-12);
  EXPECT_NEAR(r.auc_mean, s, 1e-12);
}

TEST(Auc, RejectsBadK)
{
  EXPECT_THROW(expected_best_of({1, 2}, 0), ConfigError);
  EXPECT_THROW(expected_best_of({1, 2}, 3), ConfigError);
}

TEST(Epsilon, ParallelTracks)
{
  const std::vector<std::vector<Trajectory>> groups = {
    {line({0, 0}, {0.3, 0}, 12), line({0, 1}, {0.3, 0}, 12)}};
  EXPECT_EQ(calibrate_epsilon(groups), 1.0 - 1e-9);
}

TEST(Epsilon, ThreeTracksHandMinimum)
{
  // Pair (a, c) reaches 0.4 at step 2 only; every other co-timestep distance is larger.
  Trajectory a = {{0, 0}, {1, 0}, {2, 0}, {3, 0}};
  Trajectory b = {{0, 3}, {1, 3}, {2, 3}, {3, 3}};
  Trajectory c = {{0, 1}, {1, 0.7}, {2, 0.4}, {3, 0.9}};
  const std::vector<std::vector<Trajectory>> groups = {{a, b, c}};
  EXPECT_EQ(calibrate_epsilon(groups), 0.4 - 1e-9);
}

TEST(Epsilon, MinimumOverGroups)
{
  const std::vector<std::vector<Trajectory>> groups = {
    {line({0, 0}, {1, 0}, 3), line({0, 2}, {1, 0}, 3)},
    {line({5, 5}, {0, 1}, 3)},
    {line({0, 0}, {1, 0}, 3), line({0, 1.5}, {1, 0}, 3)}};
  EXPECT_EQ(calibrate_epsilon(groups), 1.5 - 1e-9);
}

TEST(Epsilon, SingleAgentIsAnError)
{
  EXPECT_THROW(calibrate_epsilon({{line({0, 0}, {1, 0}, 4)}}), DataError);
  EXPECT_THROW(calibrate_epsilon({}), DataError);
}

TEST(Epsilon, GroundTruthHasNoCollisionsOnEveryScenario)
{
  for (const auto & name : scenario_names()) {
    ScenarioSpec spec;
    spec.scenario = name;
    spec.n_agents = 4;
    spec.n_windows = 5;
    spec.speed = 0.2;
    spec.margin = 0.3;
    spec.grid = {16, 16, 0.5};
    spec.seed = 9;
    const auto scenes = synth_generate(spec);
    std::vector<std::vector<Trajectory>> groups;
    std::vector<EvalInput> evals;
    for (const auto & s : scenes) {
      std::vector<Trajectory> g;
      for (const auto & t : s.tracks) g.push_back(t.positions);
      groups.push_back(g);
      evals.push_back(EvalInput::identity(g));
    }
    const double eps = calibrate_epsilon(groups);
    for (const auto & e : evals) {
      EXPECT_EQ(collision_rate(e, eps), 0.0) << name;
      EXPECT_EQ(collision_rate(e, eps, CollisionMode::BestSample), 0.0) << name;
    }
  }
}

TEST(Collision, OneOverlapInTwelveSteps)
{
  const auto a = line({0, 0}, {0.5, 0}, 12);
  auto b = line({0, 2}, {0.5, 0}, 12);
  b[6] = a[6] + Vec2{0.0, 0.1};
  EvalInput e;
  e.gt = {a, b};
  e.pred = {{a}, {b}};
  EXPECT_DOUBLE_EQ(collision_rate(e, 0.5), 1.0 / 12.0);
}

TEST(Collision, BoundaryIsNotACollision)
{
  const auto a = line({0, 0}, {0.5, 0}, 12);
  const auto b = line({0, 0.75}, {0.5, 0}, 12);
  EvalInput e;
  e.gt = {a, b};
  e.pred = {{a}, {b}};
  EXPECT_EQ(collision_rate(e, 0.75), 0.0);
  EXPECT_EQ(collision_rate(e, std::nextafter(0.75, 1.0)), 1.0);
}

TEST(Collision, StaticFarApartIsZero)
{
  const auto a = line({0, 0}, {0, 0}, 12);
  const auto b = line({3, 0}, {0, 0}, 12);
  const auto c = line({0, 3}, {0, 0}, 12);
  const auto e = EvalInput::identity({a, b, c});
  EXPECT_EQ(collision_rate(e, 2.0), 0.0);
}

TEST(Collision, SampleAggregationModes)
{
  const auto a = line({0, 0}, {0.5, 0}, 4);
  const auto b = line({0, 2}, {0.5, 0}, 4);
  EvalInput e;
  e.gt = {a, b};
  // Sample 0 is exact; sample 1 puts b on top of a for every step.
  e.pred = {{a, a}, {b, shifted(a, {0, 0.1})}};
  EXPECT_DOUBLE_EQ(collision_rate(e, 0.5, CollisionMode::PerSampleMean), 0.5);
  EXPECT_EQ(collision_rate(e, 0.5, CollisionMode::BestSample), 0.0);
}

TEST(Collision, SingleAgentIsZeroAndNegativeEpsilonThrows)
{
  const auto e = EvalInput::identity({line({0, 0}, {1, 0}, 4)});
  EXPECT_EQ(collision_rate(e, 1.0), 0.0);
  EXPECT_THROW(collision_rate(e, -1.0), ConfigError);
}

TEST(Kde, CloudCentreBeatsFarPoint)
{
  EvalInput near, far;
  near.gt = {{{0, 0}}};
  near.pred = {{{{-1, 0}}, {{1, 0}}}};
  far = near;
  far.gt = {{{6, 6}}};
  EXPECT_LT(kde_nll(near), kde_nll(far));
}

TEST(Kde, DegenerateCloudUsesFlooredBandwidth)
{
  EvalInput e;
  e.gt = {{{2, 3}}};
  e.pred = {{{{2, 3}}, {{2, 3}}, {{2, 3}}}};
  const double h = kBandwidthFloor;
  EXPECT_NEAR(kde_nll(e), std::log(2.0 * std::numbers::pi * h * h), 1e-9);
  EXPECT_TRUE(std::isfinite(kde_nll(e)));
}

TEST(Kde, TwoSampleClosedForm)
{
  const Vec2 p1{0, 0}, p2{2, 0}, x{0.5, 0.5};
  EvalInput e;
  e.gt = {{x}};
  e.pred = {{{p1}, {p2}}};
  // Unbiased variance per axis: x -> 2, y -> 0; pooled 1. h = 2^(-1/3).
  const double h = std::pow(2.0, -1.0 / 3.0);
  auto g = [&](Vec2 m) {
    const double d2 = (x.x - m.x) * (x.x - m.x) + (x.y - m.y) * (x.y - m.y);
    return std::exp(-d2 / (2 * h * h)) / (2 * std::numbers::pi * h * h);
  };
  EXPECT_NEAR(kde_nll(e), -std::log(0.5 * g(p1) + 0.5 * g(p2)), 1e-12);
}

TEST(Kde, NeedsTwoSamples)
{
  const auto e = EvalInput::identity({line({0, 0}, {1, 0}, 3)});
  EXPECT_THROW(kde_nll(e), ConfigError);
}

TEST(MissRate, HandCases)
{
  const auto g0 = line({0, 0}, {1, 0}, 6);
  const auto g1 = line({0, 5}, {1, 0}, 6);
  EvalInput hit;
  hit.gt = {g0, g1};
  hit.pred = {{g0, shifted(g0, {0, 9})}, {shifted(g1, {9, 0}), g1}};
  EXPECT_EQ(miss_rate(hit, 2.0), 0.0);

  EvalInput all = hit;
  all.pred = {{shifted(g0, {0, 4})}, {shifted(g1, {-4, 0})}};
  EXPECT_EQ(miss_rate(all, 2.0), 1.0);

  EvalInput half = hit;
  half.pred = {{g0}, {shifted(g1, {0, 4})}};
  EXPECT_EQ(miss_rate(half, 2.0), 0.5);
  EXPECT_THROW(miss_rate(half, 0.0), ConfigError);
}

TEST(Metrics, DihedralInvariance)
{
  const GridSpec grid{16, 16, 0.5};
  const auto e = random_eval(3, 6, 12, 21);
  for (int id = 0; id < 8; ++id) {
    const auto t = Dihedral::from_id(id);
    EvalInput m = e;
    for (auto & g : m.gt)
      for (auto & p : g) p = transform_point(p, grid, t);
    for (auto & s : m.pred)
      for (auto & tr : s)
        for (auto & p : tr) p = transform_point(p, grid, t);
    EXPECT_NEAR(ade(m), ade(e), 1e-9);
    EXPECT_NEAR(fde(m), fde(e), 1e-9);
    EXPECT_NEAR(min_ade(m), min_ade(e), 1e-9);
    EXPECT_NEAR(min_fde(m), min_fde(e), 1e-9);
    EXPECT_NEAR(auc(m).auc, auc(e).auc, 1e-9);
    EXPECT_NEAR(kde_nll(m), kde_nll(e), 1e-9);
    EXPECT_NEAR(miss_rate(m, 0.5), miss_rate(e, 0.5), 1e-9);
    EXPECT_NEAR(collision_rate(m, 1.0), collision_rate(e, 1.0), 1e-9);
  }
}

TEST(Metrics, ValidationRejectsInconsistentInput)
{
  EvalInput e = EvalInput::identity({line({0, 0}, {1, 0}, 4), line({0, 2}, {1, 0}, 4)});
  e.pred[1].push_back(e.pred[1][0]);
  EXPECT_THROW(e.validate(), DataError);
  e = EvalInput::identity({line({0, 0}, {1, 0}, 4)});
  e.pred[0][0][2].x = std::numeric_limits<double>::quiet_NaN();
  EXPECT_THROW(e.validate(), DataError);
}

TEST(Report, PoolsAgentsAndDropsMissingTruth)
{
  const auto g0 = line({0, 0}, {1, 0}, 4);
  const auto g1 = line({0, 3}, {1, 0}, 4);
  EvalInput a;
  a.gt = {g0, g1};
  a.pred = {{shifted(g0, {0, 1}), g0}, {shifted(g1, {0, 1}), shifted(g1, {0, 3})}};
  EvalInput b;
  b.gt = {g0};
  b.pred = {{shifted(g0, {1, 0}), shifted(g0, {1, 0})}};
  EvalInput c = a;
  c.gt[1][2].y = std::numeric_limits<double>::quiet_NaN();

  const auto r = evaluate({a, b, c}, 0.5);
  EXPECT_EQ(r.n_scenes, 3u);
  EXPECT_EQ(r.n_agents, 4u);
  EXPECT_EQ(r.k, 2u);
  // Agent ADEs (mean over samples): 0.5, 2, 1, 0.5.
  EXPECT_DOUBLE_EQ(r.ade, 1.0);
  // Agent minADEs: 0, 1, 1, 0.
  EXPECT_DOUBLE_EQ(r.min_ade, 0.5);
  EXPECT_NEAR(r.auc, 0.5 + 2 + 1 + 0.5 + 0 + 1 + 1 + 0, 1e-12);
  EXPECT_NEAR(r.auc_mean, r.auc / 4.0, 1e-12);
  ASSERT_TRUE(r.kde_nll.has_value());
  EXPECT_EQ(r.warnings.size(), 2u);

  const auto j = to_json(r);
  for (const char * key : {"ade", "fde", "min_ade", "min_fde", "auc", "auc_curve", "cr_mean", "cr_best",
                           "kde_nll", "miss_rate", "epsilon", "n_agents", "n_scenes"}) {
    EXPECT_TRUE(j.contains(key)) << key;
  }
  const auto csv = to_csv(r);
  EXPECT_EQ(csv.rfind("ade,fde,min_ade", 0), 0u);
  EXPECT_EQ(std::count(csv.begin(), csv.end(), '\n'), 2);
}

TEST(Report, SingleSampleOmitsKde)
{
  const auto r = evaluate({EvalInput::identity({line({0, 0}, {1, 0}, 4), line({0, 2}, {1, 0}, 4)})}, 1.0);
  EXPECT_FALSE(r.kde_nll.has_value());
  EXPECT_TRUE(to_json(r)["kde_nll"].is_null());
  EXPECT_EQ(r.ade, 0.0);
}

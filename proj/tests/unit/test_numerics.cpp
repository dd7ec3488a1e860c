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
#include <filesystem>
#include <functional>
#include <string>
#include <vector>

#include "vista/numerics/attention.hpp"
#include "vista/numerics/gradcheck.hpp"
#include "vista/numerics/graph.hpp"
#include "vista/numerics/param_store.hpp"
#include "vista/numerics/tape.hpp"

namespace
{

using namespace vista::nn;
using T = Tensor<double>;
using V = Var<double>;
using Fn = std::function<V(Tape<double> &, const std::vector<V> &)>;

T random_tensor(Shape shape, vista::Rng & rng, double lo = -1.0, double hi = 1.0)
{
  T t(std::move(shape));
  for (auto & v : t.vec()) v = rng.uniform(lo, hi);
  return t;
}

double evaluate(const Fn & f, const std::vector<T> & xs)
{
  Tape<double> tape;
  std::vector<V> vars;
  for (const auto & x : xs) vars.push_back(tape.input(x, false));
  return f(tape, vars).item();
}

/// Max relative error between reverse-mode and central-difference gradients over every input.
double op_gradient_error(const Fn & f, std::vector<T> xs, double eps = 1e-6)
{
  Tape<double> tape;
  std::vector<V> vars;
  for (const auto & x : xs) vars.push_back(tape.input(x));
  tape.backward(f(tape, vars));
  double worst = 0.0;
  for (std::size_t k = 0; k < xs.size(); ++k) {
    const T g = tape.grad(vars[k]);
    for (std::size_t i = 0; i < xs[k].size(); ++i) {
      const double orig = xs[k][i];
      xs[k][i] = orig + eps;
      const double up = evaluate(f, xs);
      xs[k][i] = orig - eps;
      const double down = evaluate(f, xs);
      xs[k][i] = orig;
      const double num = (up - down) / (2 * eps);
      const double denom = std::max({std::abs(num), std::abs(g[i]), 1e-6});
      worst = std::max(worst, std::abs(num - g[i]) / denom);
    }
  }
  return worst;
}

/// Weighted sum with fixed pseudo-random weights, so every output element matters.
V probe(Tape<double> & tape, V y)
{
  vista::Rng rng(99);
  T w(y.shape());
  for (auto & v : w.vec()) v = rng.uniform(-1.0, 1.0);
  return sum(mul(y, tape.constant(w)));
}

struct OpCase
{
  std::string name;
  std::vector<Shape> shapes;
  Fn fn;
  double lo = -1.0;
  double hi = 1.0;
};

class OpGradient : public ::testing::TestWithParam<OpCase>
{
};

TEST_P(OpGradient, MatchesCentralDifferences)
{
  const auto & c = GetParam();
  vista::Rng rng(7);
  std::vector<T> xs;
  for (const auto & s : c.shapes) xs.push_back(random_tensor(s, rng, c.lo, c.hi));
  EXPECT_LT(op_gradient_error(c.fn, xs), 1e-6) << c.name;
}

std::vector<OpCase> op_cases()
{
  using Vs = const std::vector<V> &;
  using Tp = Tape<double> &;
  return {
    {"add", {{2, 3}, {2, 3}}, [](Tp t, Vs v) { return probe(t, add(v[0], v[1])); }},
    {"sub", {{2, 3}, {2, 3}}, [](Tp t, Vs v) { return probe(t, sub(v[0], v[1])); }},
    {"mul", {{2, 3}, {2, 3}}, [](Tp t, Vs v) { return probe(t, mul(v[0], v[1])); }},
    {"add_bias", {{3, 4}, {4}}, [](Tp t, Vs v) { return probe(t, add_bias(v[0], v[1])); }},
    {"mul_bias", {{3, 4}, {4}}, [](Tp t, Vs v) { return probe(t, mul_bias(v[0], v[1])); }},
    {"scale", {{5}}, [](Tp t, Vs v) { return probe(t, scale(v[0], -2.5)); }},
    {"matmul", {{3, 4}, {4, 2}}, [](Tp t, Vs v) { return probe(t, matmul(v[0], v[1])); }},
    {"transpose", {{3, 4}}, [](Tp t, Vs v) { return probe(t, transpose(v[0])); }},
    {"concat0", {{2, 3}, {1, 3}}, [](Tp t, Vs v) { return probe(t, concat(std::vector<V>{v[0], v[1]}, 0)); }},
    {"concat1", {{2, 3}, {2, 2}}, [](Tp t, Vs v) { return probe(t, concat(std::vector<V>{v[0], v[1]}, 1)); }},
    {"slice", {{4, 5}}, [](Tp t, Vs v) { return probe(t, slice(v[0], 1, 1, 4)); }},
    {"reshape", {{2, 6}}, [](Tp t, Vs v) { return probe(t, reshape(v[0], Shape{3, 4})); }},
    {"softmax", {{3, 5}}, [](Tp t, Vs v) { return probe(t, softmax(v[0])); }},
    {"layer_norm", {{3, 6}}, [](Tp t, Vs v) { return probe(t, layer_norm(v[0])); }},
    {"relu", {{4, 4}}, [](Tp t, Vs v) { return probe(t, relu(v[0])); }},
    {"exp", {{4}}, [](Tp t, Vs v) { return probe(t, exp(v[0])); }},
    {"log", {{4}}, [](Tp t, Vs v) { return probe(t, log(v[0])); }, 0.5, 2.0},
    {"sigmoid", {{4}}, [](Tp t, Vs v) { return probe(t, sigmoid(v[0])); }},
    {"mean", {{3, 3}}, [](Tp, Vs v) { return mean(v[0]); }},
    {"attention_heads", {{3, 8}, {4, 8}, {4, 8}},
      [](Tp t, Vs v) { return probe(t, attention_heads(v[0], v[1], v[2], 4)); }},
    {"attention_one_head", {{2, 4}, {5, 4}, {5, 4}},
      [](Tp t, Vs v) { return probe(t, attention_heads(v[0], v[1], v[2], 1)); }},
    {"conv2d", {{2, 5, 6}, {3, 2, 3, 3}, {3}},
      [](Tp t, Vs v) { return probe(t, conv2d(v[0], v[1], v[2])); }},
    {"conv2d_1x1", {{4, 3, 3}, {2, 4, 1, 1}, {2}},
      [](Tp t, Vs v) { return probe(t, conv2d(v[0], v[1], v[2])); }},
    {"avg_pool2", {{2, 4, 6}}, [](Tp t, Vs v) { return probe(t, avg_pool2(v[0])); }},
    {"upsample2", {{2, 2, 3}}, [](Tp t, Vs v) { return probe(t, upsample2(v[0])); }},
    {"bce_with_logits", {{2, 3}},
      [](Tp, Vs v) {
        return bce_with_logits(v[0], T({2, 3}, std::vector<double>{0.0, 0.2, 1.0, 0.5, 0.9, 0.1}));
      },
      -4.0, 4.0},
    {"bce", {{2, 2}},
      [](Tp, Vs v) { return bce(v[0], T({2, 2}, std::vector<double>{1.0, 0.0, 0.3, 0.7})); }, 0.05,
      0.95},
    {"shared_subexpression", {{3}},
      [](Tp t, Vs v) {
        V y = mul(v[0], v[0]);
        return probe(t, add(y, mul(y, v[0])));
      }},
  };
}

INSTANTIATE_TEST_SUITE_P(AllOps, OpGradient, ::testing::ValuesIn(op_cases()),
  [](const auto & info) { return info.param.name; });

TEST(Tape, ForwardValuesOfSmallCases)
{
  Tape<double> tape;
  V a = tape.constant({2, 2}, {1, 2, 3, 4});
  V b = tape.constant({2, 2}, {5, 6, 7, 8});
  const T c = matmul(a, b).tensor();
  EXPECT_EQ(c.vec(), (std::vector<double>{19, 22, 43, 50}));
  const T s = softmax(tape.constant({1, 2}, {0.0, std::log(3.0)})).tensor();
  EXPECT_NEAR(s[0], 0.25, 1e-15);
  EXPECT_NEAR(s[1], 0.75, 1e-15);
  const T n = layer_norm(tape.constant({1, 2}, {1.0, 3.0})).tensor();
  EXPECT_NEAR(n[0], -1.0 / std::sqrt(1.0 + 1e-5), 1e-12);
  EXPECT_NEAR(bce_with_logits(tape.constant({1}, {0.0}), T({1}, 1.0)).item(), std::log(2.0), 1e-15);
}

TEST(Tape, SoftmaxIsStableForLargeLogits)
{
  Tape<double> tape;
  const T s = softmax(tape.constant({1, 3}, {1000.0, 1000.0, -1000.0})).tensor();
  EXPECT_DOUBLE_EQ(s[0], 0.5);
  EXPECT_DOUBLE_EQ(s[2], 0.0);
}

TEST(Tape, ConvSamePaddingZeroWeightsGiveBias)
{
  Tape<double> tape;
  vista::Rng rng(1);
  V x = tape.constant(random_tensor({2, 4, 4}, rng));
  V w = tape.constant(T({3, 2, 3, 3}, 0.0));
  V b = tape.constant({3}, {0.5, -1.0, 2.0});
  const T y = conv2d(x, w, b).tensor();
  ASSERT_EQ(y.shape(), (Shape{3, 4, 4}));
  EXPECT_EQ(y[0], 0.5);
  EXPECT_EQ(y[16 + 5], -1.0);
}

TEST(Tape, BackwardVisitsNodesInReverseCreationOrder)
{
  Tape<double> tape;
  V x = tape.input(T({2}, 1.0));
  V y = mul(x, x);
  V z = sum(add(y, x));
  tape.backward(z);
  const auto & order = tape.backward_order();
  for (std::size_t i = 1; i < order.size(); ++i) EXPECT_GT(order[i - 1], order[i]);
  EXPECT_EQ(tape.grad(x).vec(), (std::vector<double>{3.0, 3.0}));
}

TEST(Tape, MisuseIsReported)
{
  Tape<double> tape;
  Tape<double> other;
  V x = tape.input(T({2}, 1.0));
  V y = other.input(T({2}, 1.0));
  EXPECT_THROW(add(x, y), vista::UsageError);
  EXPECT_THROW(add(x, tape.input(T({3}, 1.0))), vista::ShapeError);
  EXPECT_THROW(matmul(tape.input(T({2, 3})), tape.input(T({2, 3}))), vista::ShapeError);
  EXPECT_THROW(tape.backward(x), vista::UsageError);
  V s = sum(x);
  tape.backward(s);
  EXPECT_THROW(tape.backward(s), vista::UsageError);
  EXPECT_THROW(add(x, x), vista::UsageError);
  Tape<double> empty;
  EXPECT_THROW(empty.backward(V()), vista::UsageError);
}

TEST(Tape, ZeroExtentTensorIsRejected)
{
  EXPECT_THROW(T(Shape{2, 0}), vista::ShapeError);
  EXPECT_THROW(T(Shape{2}, std::vector<double>{1.0}), vista::ShapeError);
}

TEST(Tape, FloatTapeMatchesDoubleWithinSinglePrecision)
{
  vista::Rng rng(5);
  const T a = random_tensor({4, 8}, rng), b = random_tensor({8, 3}, rng);
  Tape<double> td;
  Tape<float> tf;
  const T yd = softmax(matmul(td.constant(a), td.constant(b))).tensor();
  const auto yf =
    softmax(matmul(tf.constant(a.cast<float>()), tf.constant(b.cast<float>()))).tensor();
  for (std::size_t i = 0; i < yd.size(); ++i) EXPECT_NEAR(yd[i], yf[i], 1e-6);
}

TEST(Graph, ValidatesInputsAndReturnsGradients)
{
  Graph<double> g({{"x", {{2}, true}}, {"w", {{2}, false}}},
    [](Tape<double> &, const Graph<double>::Vars & in) {
      return Graph<double>::Vars{{"y", sum(mul(in.at("x"), in.at("w")))}};
    });
  EXPECT_THROW(g.backward("y", T::scalar(1.0)), vista::UsageError);
  EXPECT_THROW(g.forward({{"x", T({2}, 1.0)}}), vista::ShapeError);
  EXPECT_THROW(g.forward({{"x", T({3}, 1.0)}, {"w", T({2}, 1.0)}}), vista::ShapeError);
  EXPECT_THROW(
    g.forward({{"x", T({2}, 1.0)}, {"w", T({2}, 1.0)}, {"z", T({1}, 1.0)}}), vista::ShapeError);
  const auto out = g.forward({{"x", T({2}, {1.0, 2.0})}, {"w", T({2}, {3.0, 4.0})}});
  EXPECT_EQ(out.at("y")[0], 11.0);
}

// --- parameters and checkpoints ---------------------------------------------

ParamStore random_store(std::uint64_t seed)
{
  vista::Rng rng(seed);
  ParamStore s;
  s.add_uniform("a.w", {3, 4}, 3, 4, rng);
  s.add_uniform("a.b", {4}, 1, 4, rng);
  s.add_uniform("conv", {2, 1, 3, 3}, 9, 18, rng);
  s.meta()["d_model"] = "32";
  return s;
}

TEST(Checkpoint, RoundTripIsBitIdentical)
{
  const auto s = random_store(3);
  const auto bytes = serialize(s);
  const auto back = deserialize(bytes, "vista-1");
  EXPECT_TRUE(back == s);
  EXPECT_EQ(serialize(back), bytes);
  const auto path = std::filesystem::temp_directory_path() / "vista_ckpt_roundtrip.bin";
  save_checkpoint(s, path);
  EXPECT_TRUE(load_checkpoint(path) == s);
  std::filesystem::remove(path);
}

TEST(Checkpoint, TruncationMagicAndVersionErrors)
{
  const auto bytes = serialize(random_store(4));
  for (std::size_t cut : {std::size_t{3}, std::size_t{10}, bytes.size() / 2, bytes.size() - 1}) {
    EXPECT_THROW(deserialize(bytes.substr(0, cut)), vista::CheckpointError) << cut;
  }
  std::string bad = bytes;
  bad[0] = 'X';
  EXPECT_THROW(deserialize(bad), vista::CheckpointError);
  EXPECT_THROW(deserialize(bytes, "vista-2"), vista::CheckpointError);
  try {
    deserialize(bytes, "vista-2");
  } catch (const vista::Error & e) {
    EXPECT_EQ(e.exit_code(), vista::ExitCode::Checkpoint);
  }
}

TEST(ParamStore, DuplicateAndMissingNames)
{
  auto s = random_store(1);
  EXPECT_THROW(s.add_zeros("a.w", {1}), vista::ConfigError);
  EXPECT_THROW(s.at("nope"), vista::ConfigError);
}

// --- attention -------------------------------------------------------------

TEST(Attention, SingleKeyGivesUnitWeight)
{
  vista::Rng rng(2);
  ParamStore store;
  add_attention_params(store, "att", 8, rng);
  Tape<double> tape;
  BoundParams<double> p(tape, store, false);
  const auto w = AttentionWeights<double>::bind(p, "att");
  V q = tape.constant(random_tensor({3, 8}, rng));
  V kv = tape.constant(random_tensor({1, 8}, rng));
  const auto out = multi_head_attention(q, kv, kv, 4, w);
  ASSERT_EQ(out.weights.size(), 4u * 3u);
  for (double v : out.weights) EXPECT_EQ(v, 1.0);
}

TEST(Attention, FusedHeadsMatchComposedPrimitives)
{
  vista::Rng rng(12);
  const T q = random_tensor({3, 8}, rng), k = random_tensor({5, 8}, rng), v = random_tensor({5, 8}, rng);
  Tape<double> tape;
  V qv = tape.constant(q), kv = tape.constant(k), vv = tape.constant(v);
  std::vector<double> weights;
  const auto fused = attention_heads(qv, kv, vv, 4, &weights).tensor();
  std::vector<V> parts;
  for (std::size_t h = 0; h < 4; ++h) {
    V qh = slice(qv, 1, 2 * h, 2 * h + 2), kh = slice(kv, 1, 2 * h, 2 * h + 2);
    V w = softmax(scale(matmul(qh, transpose(kh)), 1.0 / std::sqrt(2.0)));
    for (std::size_t i = 0; i < 15; ++i) EXPECT_NEAR(w.value()[i], weights[h * 15 + i], 1e-15);
    parts.push_back(matmul(w, slice(vv, 1, 2 * h, 2 * h + 2)));
  }
  const auto composed = concat(parts, 1).tensor();
  for (std::size_t i = 0; i < fused.size(); ++i) EXPECT_NEAR(fused[i], composed[i], 1e-14);
}

TEST(Attention, RowsAreStochasticAndHeadsMustDivide)
{
  vista::Rng rng(3);
  ParamStore store;
  add_attention_params(store, "att", 8, rng);
  Tape<double> tape;
  BoundParams<double> p(tape, store, false);
  const auto w = AttentionWeights<double>::bind(p, "att");
  V x = tape.constant(random_tensor({5, 8}, rng, -3, 3));
  const auto a = multi_head_attention(x, x, x, 2, w).mean_weights();
  for (std::size_t r = 0; r < 5; ++r) {
    double s = 0;
    for (std::size_t c = 0; c < 5; ++c) s += a.at(r, c);
    EXPECT_NEAR(s, 1.0, 1e-12);
  }
  EXPECT_THROW(multi_head_attention(x, x, x, 3, w), vista::ConfigError);
}

TEST(Attention, IdenticalTokensAttendUniformly)
{
  vista::Rng rng(4);
  ParamStore store;
  add_attention_params(store, "att", 4, rng);
  Tape<double> tape;
  BoundParams<double> p(tape, store, false);
  const auto w = AttentionWeights<double>::bind(p, "att");
  V x = tape.constant(T({2, 4}, std::vector<double>{0.3, -1, 2, 0.5, 0.3, -1, 2, 0.5}));
  const auto a = multi_head_attention(x, x, x, 2, w).mean_weights();
  for (double v : a.vec()) EXPECT_DOUBLE_EQ(v, 0.5);
}

TEST(GradCheck, AttentionParametersPass)
{
  vista::Rng rng(6);
  ParamStore store;
  add_attention_params(store, "att", 8, rng);
  for (auto & e : store.entries())
    for (auto & v : e.value.vec()) v = rng.uniform(-0.5, 0.5);
  const T xin = random_tensor({4, 8}, rng);
  LossBuilder loss = [&](Tape<double> & tape, BoundParams<double> & p) {
    const auto w = AttentionWeights<double>::bind(p, "att");
    V x = tape.constant(xin);
    return probe(tape, multi_head_attention(x, x, x, 2, w).output);
  };
  const auto coords = sample_coordinates(store, 6, 1);
  const auto r = finite_difference_check(store, coords, loss, 1e-5);
  EXPECT_LT(r.max_rel_error, 1e-4) << r.worst.name << "[" << r.worst.index << "]";
  EXPECT_GT(r.checked, 0u);
}

TEST(GradCheck, EpsilonRangeIsEnforcedAndValuesRestored)
{
  auto store = random_store(8);
  const auto before = serialize(store);
  LossBuilder loss = [](Tape<double> &, BoundParams<double> & p) { return sum(p("a.w")); };
  EXPECT_THROW(finite_difference_check(store, {}, loss, 1e-2), vista::ConfigError);
  EXPECT_THROW(finite_difference_check(store, {}, loss, 1e-9), vista::ConfigError);
  finite_difference_check(store, sample_coordinates(store, 100, 2), loss, 1e-5);
  EXPECT_EQ(serialize(store), before);
}

}  // namespace

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

#ifndef VISTA__NUMERICS__TAPE_HPP_
#define VISTA__NUMERICS__TAPE_HPP_

#include <array>
#include <cmath>
#include <cstdint>
#include <initializer_list>
#include <limits>
#include <span>
#include <string>
#include <type_traits>
#include <utility>
#include <vector>

#include "vista/common/error.hpp"
#include "vista/numerics/tensor.hpp"

namespace vista::nn
{

/// Primitive operations recorded on a tape.
enum class Op : std::uint8_t {
  Leaf,
  Add,
  Sub,
  Mul,
  AddBias,
  MulBias,
  Scale,
  MatMul,
  Transpose,
  Concat,
  Slice,
  Reshape,
  Softmax,
  LayerNorm,
  Relu,
  Exp,
  Log,
  Sigmoid,
  Sum,
  Mean,
  Conv2d,
  AvgPool2,
  Upsample2,
  BceWithLogits,
  Bce,
  Attention,
};

inline const char * op_name(Op op)
{
  switch (op) {
    case Op::Leaf: return "leaf";
    case Op::Add: return "add";
    case Op::Sub: return "sub";
    case Op::Mul: return "mul";
    case Op::AddBias: return "add_bias";
    case Op::MulBias: return "mul_bias";
    case Op::Scale: return "scale";
    case Op::MatMul: return "matmul";
    case Op::Transpose: return "transpose";
    case Op::Concat: return "concat";
    case Op::Slice: return "slice";
    case Op::Reshape: return "reshape";
    case Op::Softmax: return "softmax";
    case Op::LayerNorm: return "layer_norm";
    case Op::Relu: return "relu";
    case Op::Exp: return "exp";
    case Op::Log: return "log";
    case Op::Sigmoid: return "sigmoid";
    case Op::Sum: return "sum";
    case Op::Mean: return "mean";
    case Op::Conv2d: return "conv2d";
    case Op::AvgPool2: return "avg_pool2";
    case Op::Upsample2: return "upsample2";
    case Op::BceWithLogits: return "bce_with_logits";
    case Op::Bce: return "bce";
    case Op::Attention: return "attention";
  }
  return "?";
}

template <class Real>
class Tape;

/// Handle to a node on a tape. Cheap to copy; valid while the tape lives.
template <class Real>
class Var
{
public:
  Var() = default;
  Var(Tape<Real> * tape, std::uint32_t id) : tape_(tape), id_(id) {}

  bool valid() const noexcept { return tape_ != nullptr; }
  Tape<Real> & tape() const { return *tape_; }
  std::uint32_t id() const noexcept { return id_; }

  const Shape & shape() const { return tape_->node(id_).shape; }
  std::size_t dim(std::size_t axis) const { return shape().at(axis); }
  std::size_t size() const { return tape_->node(id_).value.size(); }
  std::span<const Real> value() const { return tape_->node(id_).value; }
  Real item() const { return tape_->node(id_).value.at(0); }
  Tensor<Real> tensor() const { return Tensor<Real>(shape(), tape_->node(id_).value); }
  bool needs_grad() const { return tape_->node(id_).needs_grad; }

private:
  Tape<Real> * tape_ = nullptr;
  std::uint32_t id_ = 0;
};

/**
 * @brief Define-by-run reverse-mode recorder.
 *
 * Every primitive appends one node; node ids are therefore a topological order
 * and backward() walks them strictly in reverse. Parameter leaves forward their
 * gradients into an external accumulation slot (the ParamStore grad tensor).
 */
template <class Real>
class Tape
{
public:
  static_assert(std::is_floating_point_v<Real>);

  struct Node
  {
    Op op = Op::Leaf;
    Shape shape;
    std::vector<Real> value;
    std::vector<Real> grad;
    std::vector<std::uint32_t> inputs;
    std::array<std::size_t, 3> iarg{};
    Real farg{};
    std::vector<Real> saved;
    bool needs_grad = false;
    double * sink = nullptr;
  };

  Tape() = default;
  Tape(const Tape &) = delete;
  Tape & operator=(const Tape &) = delete;

  std::size_t size() const noexcept { return nodes_.size(); }
  const Node & node(std::uint32_t id) const { return nodes_.at(id); }

  Var<Real> constant(const Tensor<Real> & t) { return leaf(t.shape(), t.vec(), false, nullptr); }
  Var<Real> constant(Shape shape, std::vector<Real> data)
  {
    Tensor<Real> t(std::move(shape), std::move(data));
    return leaf(t.shape(), std::move(t.vec()), false, nullptr);
  }

  /// Leaf whose gradient can be read back with grad() after backward().
  Var<Real> input(const Tensor<Real> & t, bool requires_grad = true)
  {
    return leaf(t.shape(), t.vec(), requires_grad, nullptr);
  }

  /**
   * Leaf bound to a trainable parameter. When Real is double and `grad_slot` is
   * non-null, backward() accumulates into it; otherwise the leaf is constant.
   */
  Var<Real> parameter(const Tensor<double> & value, Tensor<double> * grad_slot)
  {
    std::vector<Real> v(value.vec().begin(), value.vec().end());
    double * sink = nullptr;
    if constexpr (std::is_same_v<Real, double>) {
      if (grad_slot != nullptr) {
        if (grad_slot->shape() != value.shape()) {
          throw ShapeError("parameter: gradient slot shape differs from value shape");
        }
        sink = grad_slot->vec().data();
      }
    }
    return leaf(value.shape(), std::move(v), sink != nullptr, sink);
  }

  /// Appends a computed node. Used by the primitive functions below.
  Var<Real> push(
    Op op, Shape shape, std::vector<Real> value, std::initializer_list<Var<Real>> inputs,
    std::array<std::size_t, 3> iarg = {}, Real farg = Real(0), std::vector<Real> saved = {})
  {
    std::vector<std::uint32_t> ids;
    ids.reserve(inputs.size());
    for (const auto & v : inputs) {
      ids.push_back(own(v, op));
    }
    return push_ids(op, std::move(shape), std::move(value), std::move(ids), iarg, farg,
      std::move(saved));
  }

  Var<Real> push_ids(
    Op op, Shape shape, std::vector<Real> value, std::vector<std::uint32_t> ids,
    std::array<std::size_t, 3> iarg = {}, Real farg = Real(0), std::vector<Real> saved = {})
  {
    check_open();
    Node n;
    n.op = op;
    n.shape = std::move(shape);
    n.value = std::move(value);
    for (auto id : ids) {
      n.needs_grad = n.needs_grad || nodes_[id].needs_grad;
    }
    n.inputs = std::move(ids);
    n.iarg = iarg;
    n.farg = farg;
    n.saved = std::move(saved);
    nodes_.push_back(std::move(n));
    return Var<Real>(this, static_cast<std::uint32_t>(nodes_.size() - 1));
  }

  std::uint32_t own(const Var<Real> & v, Op op) const
  {
    if (!v.valid() || &v.tape() != this || v.id() >= nodes_.size()) {
      throw UsageError(std::string(op_name(op)) + ": operand does not belong to this tape");
    }
    return v.id();
  }

  /// Backpropagates from a scalar output with seed 1.
  void backward(const Var<Real> & out)
  {
    const auto & n = nodes_.at(own(out, Op::Leaf));
    if (n.value.size() != 1) {
      throw UsageError("backward: implicit seed requires a scalar output, got " +
                       to_string(n.shape));
    }
    backward(out, Tensor<Real>(n.shape, Real(1)));
  }

  void backward(const Var<Real> & out, const Tensor<Real> & seed)
  {
    if (nodes_.empty() || !out.valid() || &out.tape() != this || out.id() >= nodes_.size()) {
      throw UsageError("backward: no forward pass recorded for this output");
    }
    if (backward_done_) {
      throw UsageError("backward: already run on this tape");
    }
    Node & root = nodes_[out.id()];
    if (seed.shape() != root.shape) {
      throw ShapeError("backward: seed shape " + to_string(seed.shape()) +
                       " does not match output shape " + to_string(root.shape));
    }
    backward_done_ = true;
    ensure_grad(root);
    for (std::size_t i = 0; i < seed.size(); ++i) {
      root.grad[i] += seed[i];
    }
    order_.clear();
    for (std::int64_t id = out.id(); id >= 0; --id) {
      Node & n = nodes_[static_cast<std::size_t>(id)];
      if (!n.needs_grad || n.grad.empty()) {
        continue;
      }
      order_.push_back(static_cast<std::uint32_t>(id));
      backprop(n);
    }
  }

  /// Gradient of the last backward() w.r.t. a node; zeros when unreachable.
  Tensor<Real> grad(const Var<Real> & v) const
  {
    const Node & n = nodes_.at(own(v, Op::Leaf));
    if (n.grad.empty()) {
      return Tensor<Real>(n.shape, Real(0));
    }
    return Tensor<Real>(n.shape, n.grad);
  }

  bool backward_done() const noexcept { return backward_done_; }

  /// Node ids visited by the last backward(), in visiting order.
  const std::vector<std::uint32_t> & backward_order() const noexcept { return order_; }

private:
  Var<Real> leaf(const Shape & shape, std::vector<Real> value, bool needs_grad, double * sink)
  {
    check_open();
    Node n;
    n.shape = shape;
    n.value = std::move(value);
    n.needs_grad = needs_grad;
    n.sink = sink;
    nodes_.push_back(std::move(n));
    return Var<Real>(this, static_cast<std::uint32_t>(nodes_.size() - 1));
  }

  void check_open() const
  {
    if (backward_done_) {
      throw UsageError("tape: cannot record after backward()");
    }
  }

  static void ensure_grad(Node & n)
  {
    if (n.grad.empty()) {
      n.grad.assign(n.value.size(), Real(0));
    }
  }

  Node * grad_target(std::uint32_t id)
  {
    Node & n = nodes_[id];
    if (!n.needs_grad) {
      return nullptr;
    }
    ensure_grad(n);
    return &n;
  }

  void backprop(Node & n);

  std::vector<Node> nodes_;
  std::vector<std::uint32_t> order_;
  bool backward_done_ = false;
};

namespace detail
{

inline void outer_inner(const Shape & s, std::size_t axis, std::size_t & outer, std::size_t & inner)
{
  outer = 1;
  inner = 1;
  for (std::size_t i = 0; i < axis; ++i) {
    outer *= s[i];
  }
  for (std::size_t i = axis + 1; i < s.size(); ++i) {
    inner *= s[i];
  }
}

template <class Real>
inline Real sigmoid(Real z)
{
  if (z >= 0) {
    return Real(1) / (Real(1) + std::exp(-z));
  }
  const Real e = std::exp(z);
  return e / (Real(1) + e);
}

}  // namespace detail

template <class Real>
void Tape<Real>::backprop(Node & n)
{
  const std::vector<Real> & g = n.grad;
  const std::size_t count = g.size();
  auto in = [&](std::size_t k) -> std::uint32_t { return n.inputs[k]; };

  switch (n.op) {
    case Op::Leaf:
      if (n.sink != nullptr) {
        for (std::size_t i = 0; i < count; ++i) {
          n.sink[i] += static_cast<double>(g[i]);
        }
      }
      break;
    case Op::Add:
    case Op::Sub: {
      if (Node * a = grad_target(in(0))) {
        for (std::size_t i = 0; i < count; ++i) a->grad[i] += g[i];
      }
      if (Node * b = grad_target(in(1))) {
        const Real s = n.op == Op::Add ? Real(1) : Real(-1);
        for (std::size_t i = 0; i < count; ++i) b->grad[i] += s * g[i];
      }
      break;
    }
    case Op::Mul: {
      const auto & av = nodes_[in(0)].value;
      const auto & bv = nodes_[in(1)].value;
      if (Node * a = grad_target(in(0))) {
        for (std::size_t i = 0; i < count; ++i) a->grad[i] += g[i] * bv[i];
      }
      if (Node * b = grad_target(in(1))) {
        for (std::size_t i = 0; i < count; ++i) b->grad[i] += g[i] * av[i];
      }
      break;
    }
    case Op::AddBias: {
      const std::size_t cols = nodes_[in(1)].value.size();
      if (Node * a = grad_target(in(0))) {
        for (std::size_t i = 0; i < count; ++i) a->grad[i] += g[i];
      }
      if (Node * b = grad_target(in(1))) {
        for (std::size_t i = 0; i < count; ++i) b->grad[i % cols] += g[i];
      }
      break;
    }
    case Op::MulBias: {
      const auto & av = nodes_[in(0)].value;
      const auto & bv = nodes_[in(1)].value;
      const std::size_t cols = bv.size();
      if (Node * a = grad_target(in(0))) {
        for (std::size_t i = 0; i < count; ++i) a->grad[i] += g[i] * bv[i % cols];
      }
      if (Node * b = grad_target(in(1))) {
        for (std::size_t i = 0; i < count; ++i) b->grad[i % cols] += g[i] * av[i];
      }
      break;
    }
    case Op::Scale:
      if (Node * a = grad_target(in(0))) {
        for (std::size_t i = 0; i < count; ++i) a->grad[i] += n.farg * g[i];
      }
      break;
    case Op::MatMul: {
      const auto & av = nodes_[in(0)].value;
      const auto & bv = nodes_[in(1)].value;
      const std::size_t rows = n.iarg[0], inner = n.iarg[1], cols = n.iarg[2];
      if (Node * a = grad_target(in(0))) {
        for (std::size_t i = 0; i < rows; ++i) {
          const Real * gi = g.data() + i * cols;
          for (std::size_t p = 0; p < inner; ++p) {
            const Real * bp = bv.data() + p * cols;
            Real acc = 0;
            for (std::size_t j = 0; j < cols; ++j) acc += gi[j] * bp[j];
            a->grad[i * inner + p] += acc;
          }
        }
      }
      if (Node * b = grad_target(in(1))) {
        for (std::size_t i = 0; i < rows; ++i) {
          const Real * gi = g.data() + i * cols;
          for (std::size_t p = 0; p < inner; ++p) {
            const Real aip = av[i * inner + p];
            Real * bp = b->grad.data() + p * cols;
            for (std::size_t j = 0; j < cols; ++j) bp[j] += aip * gi[j];
          }
        }
      }
      break;
    }
    case Op::Transpose:
      if (Node * a = grad_target(in(0))) {
        const std::size_t rows = n.shape[0], cols = n.shape[1];
        for (std::size_t i = 0; i < rows; ++i)
          for (std::size_t j = 0; j < cols; ++j) a->grad[j * rows + i] += g[i * cols + j];
      }
      break;
    case Op::Concat: {
      std::size_t outer, inner;
      detail::outer_inner(n.shape, n.iarg[0], outer, inner);
      const std::size_t out_block = n.shape[n.iarg[0]] * inner;
      std::size_t offset = 0;
      for (std::size_t k = 0; k < n.inputs.size(); ++k) {
        const std::size_t block = nodes_[in(k)].shape[n.iarg[0]] * inner;
        if (Node * a = grad_target(in(k))) {
          for (std::size_t o = 0; o < outer; ++o)
            for (std::size_t i = 0; i < block; ++i)
              a->grad[o * block + i] += g[o * out_block + offset + i];
        }
        offset += block;
      }
      break;
    }
    case Op::Slice:
      if (Node * a = grad_target(in(0))) {
        std::size_t outer, inner;
        detail::outer_inner(n.shape, n.iarg[0], outer, inner);
        const std::size_t src_block = a->shape[n.iarg[0]] * inner;
        const std::size_t block = n.shape[n.iarg[0]] * inner;
        const std::size_t start = n.iarg[1] * inner;
        for (std::size_t o = 0; o < outer; ++o)
          for (std::size_t i = 0; i < block; ++i)
            a->grad[o * src_block + start + i] += g[o * block + i];
      }
      break;
    case Op::Reshape:
      if (Node * a = grad_target(in(0))) {
        for (std::size_t i = 0; i < count; ++i) a->grad[i] += g[i];
      }
      break;
    case Op::Softmax:
      if (Node * a = grad_target(in(0))) {
        const std::size_t cols = n.shape.back();
        const std::size_t rows = count / cols;
        for (std::size_t r = 0; r < rows; ++r) {
          const Real * y = n.value.data() + r * cols;
          const Real * gr = g.data() + r * cols;
          Real dot = 0;
          for (std::size_t j = 0; j < cols; ++j) dot += gr[j] * y[j];
          for (std::size_t j = 0; j < cols; ++j) a->grad[r * cols + j] += y[j] * (gr[j] - dot);
        }
      }
      break;
    case Op::LayerNorm:
      if (Node * a = grad_target(in(0))) {
        const std::size_t cols = n.shape.back();
        const std::size_t rows = count / cols;
        const Real inv_n = Real(1) / static_cast<Real>(cols);
        for (std::size_t r = 0; r < rows; ++r) {
          const Real * y = n.value.data() + r * cols;
          const Real * gr = g.data() + r * cols;
          Real sum_g = 0, sum_gy = 0;
          for (std::size_t j = 0; j < cols; ++j) {
            sum_g += gr[j];
            sum_gy += gr[j] * y[j];
          }
          const Real inv_std = n.saved[r];
          for (std::size_t j = 0; j < cols; ++j) {
            a->grad[r * cols + j] += inv_std * (gr[j] - inv_n * sum_g - y[j] * inv_n * sum_gy);
          }
        }
      }
      break;
    case Op::Relu:
      if (Node * a = grad_target(in(0))) {
        const auto & x = nodes_[in(0)].value;
        for (std::size_t i = 0; i < count; ++i) a->grad[i] += x[i] > 0 ? g[i] : Real(0);
      }
      break;
    case Op::Exp:
      if (Node * a = grad_target(in(0))) {
        for (std::size_t i = 0; i < count; ++i) a->grad[i] += g[i] * n.value[i];
      }
      break;
    case Op::Log:
      if (Node * a = grad_target(in(0))) {
        const auto & x = nodes_[in(0)].value;
        for (std::size_t i = 0; i < count; ++i) a->grad[i] += g[i] / x[i];
      }
      break;
    case Op::Sigmoid:
      if (Node * a = grad_target(in(0))) {
        for (std::size_t i = 0; i < count; ++i)
          a->grad[i] += g[i] * n.value[i] * (Real(1) - n.value[i]);
      }
      break;
    case Op::Sum:
    case Op::Mean:
      if (Node * a = grad_target(in(0))) {
        const std::size_t m = a->value.size();
        const Real s = n.op == Op::Sum ? g[0] : g[0] / static_cast<Real>(m);
        for (std::size_t i = 0; i < m; ++i) a->grad[i] += s;
      }
      break;
    case Op::Conv2d: {
      const auto & xs = nodes_[in(0)].shape;
      const auto & ws = nodes_[in(1)].shape;
      const std::size_t C = xs[0], H = xs[1], W = xs[2], O = ws[0], K = ws[2];
      const std::ptrdiff_t pad = static_cast<std::ptrdiff_t>(K / 2);
      const auto & xv = nodes_[in(0)].value;
      const auto & wv = nodes_[in(1)].value;
      Node * gx = grad_target(in(0));
      Node * gw = grad_target(in(1));
      Node * gb = grad_target(in(2));
      for (std::size_t o = 0; o < O; ++o) {
        const Real * go = g.data() + o * H * W;
        if (gb) {
          Real acc = 0;
          for (std::size_t i = 0; i < H * W; ++i) acc += go[i];
          gb->grad[o] += acc;
        }
        for (std::size_t c = 0; c < C; ++c) {
          for (std::size_t ky = 0; ky < K; ++ky) {
            const std::ptrdiff_t dy = static_cast<std::ptrdiff_t>(ky) - pad;
            for (std::size_t kx = 0; kx < K; ++kx) {
              const std::ptrdiff_t dx = static_cast<std::ptrdiff_t>(kx) - pad;
              const std::size_t widx = ((o * C + c) * K + ky) * K + kx;
              const Real wgt = wv[widx];
              const std::size_t y0 = dy < 0 ? static_cast<std::size_t>(-dy) : 0;
              const std::size_t y1 = dy > 0 ? H - static_cast<std::size_t>(dy) : H;
              const std::size_t x0 = dx < 0 ? static_cast<std::size_t>(-dx) : 0;
              const std::size_t x1 = dx > 0 ? W - static_cast<std::size_t>(dx) : W;
              Real wacc = 0;
              for (std::size_t y = y0; y < y1; ++y) {
                const Real * grow = go + y * W;
                const std::size_t src = (c * H + static_cast<std::size_t>(
                  static_cast<std::ptrdiff_t>(y) + dy)) * W;
                const Real * xrow = xv.data() + src;
                if (gx) {
                  Real * gxrow = gx->grad.data() + src;
                  for (std::size_t x = x0; x < x1; ++x) gxrow[x + dx] += wgt * grow[x];
                }
                if (gw) {
                  for (std::size_t x = x0; x < x1; ++x) wacc += grow[x] * xrow[x + dx];
                }
              }
              if (gw) gw->grad[widx] += wacc;
            }
          }
        }
      }
      break;
    }
    case Op::AvgPool2:
      if (Node * a = grad_target(in(0))) {
        const std::size_t C = n.shape[0], H = n.shape[1], W = n.shape[2];
        for (std::size_t c = 0; c < C; ++c)
          for (std::size_t y = 0; y < H; ++y)
            for (std::size_t x = 0; x < W; ++x) {
              const Real v = Real(0.25) * g[(c * H + y) * W + x];
              const std::size_t base = (c * 2 * H + 2 * y) * 2 * W + 2 * x;
              a->grad[base] += v;
              a->grad[base + 1] += v;
              a->grad[base + 2 * W] += v;
              a->grad[base + 2 * W + 1] += v;
            }
      }
      break;
    case Op::Upsample2:
      if (Node * a = grad_target(in(0))) {
        const std::size_t C = n.shape[0], H = n.shape[1], W = n.shape[2];
        for (std::size_t c = 0; c < C; ++c)
          for (std::size_t y = 0; y < H; ++y)
            for (std::size_t x = 0; x < W; ++x)
              a->grad[(c * (H / 2) + y / 2) * (W / 2) + x / 2] += g[(c * H + y) * W + x];
      }
      break;
    case Op::BceWithLogits:
      if (Node * a = grad_target(in(0))) {
        const auto & z = nodes_[in(0)].value;
        const std::size_t m = z.size();
        const Real s = g[0] / static_cast<Real>(m);
        for (std::size_t i = 0; i < m; ++i) a->grad[i] += s * (detail::sigmoid(z[i]) - n.saved[i]);
      }
      break;
    case Op::Bce:
      if (Node * a = grad_target(in(0))) {
        const auto & p = nodes_[in(0)].value;
        const std::size_t m = p.size();
        const Real s = g[0] / static_cast<Real>(m);
        const Real lo = Real(1e-12), hi = Real(1) - Real(1e-12);
        for (std::size_t i = 0; i < m; ++i) {
          if (p[i] <= lo || p[i] >= hi) continue;  // clamped region is flat
          a->grad[i] += s * (p[i] - n.saved[i]) / (p[i] * (Real(1) - p[i]));
        }
      }
      break;
    case Op::Attention: {
      const std::size_t heads = n.iarg[0], Lq = n.iarg[1], Lk = n.iarg[2];
      const std::size_t dim = n.shape[1], hd = dim / heads;
      const auto & qv = nodes_[in(0)].value;
      const auto & kv = nodes_[in(1)].value;
      const auto & vv = nodes_[in(2)].value;
      Node * dq = grad_target(in(0));
      Node * dk = grad_target(in(1));
      Node * dv = grad_target(in(2));
      std::vector<Real> ds(Lk);
      for (std::size_t h = 0; h < heads; ++h) {
        const std::size_t c0 = h * hd;
        for (std::size_t i = 0; i < Lq; ++i) {
          const Real * w = n.saved.data() + (h * Lq + i) * Lk;
          const Real * gi = g.data() + i * dim + c0;
          Real dot = 0;
          for (std::size_t j = 0; j < Lk; ++j) {
            Real dw = 0;
            const Real * vj = vv.data() + j * dim + c0;
            for (std::size_t c = 0; c < hd; ++c) dw += gi[c] * vj[c];
            ds[j] = dw;
            dot += w[j] * dw;
          }
          for (std::size_t j = 0; j < Lk; ++j) ds[j] = w[j] * (ds[j] - dot) * n.farg;
          for (std::size_t j = 0; j < Lk; ++j) {
            if (dv) {
              Real * o = dv->grad.data() + j * dim + c0;
              for (std::size_t c = 0; c < hd; ++c) o[c] += w[j] * gi[c];
            }
            if (dq) {
              const Real * kj = kv.data() + j * dim + c0;
              Real * o = dq->grad.data() + i * dim + c0;
              for (std::size_t c = 0; c < hd; ++c) o[c] += ds[j] * kj[c];
            }
            if (dk) {
              const Real * qi = qv.data() + i * dim + c0;
              Real * o = dk->grad.data() + j * dim + c0;
              for (std::size_t c = 0; c < hd; ++c) o[c] += ds[j] * qi[c];
            }
          }
        }
      }
      break;
    }
  }
}

// ---------------------------------------------------------------------------
// Primitive operations.

namespace detail
{

template <class Real>
void require_same_shape(const Var<Real> & a, const Var<Real> & b, Op op)
{
  if (a.shape() != b.shape()) {
    throw ShapeError(std::string(op_name(op)) + ": shapes " + to_string(a.shape()) + " and " +
                     to_string(b.shape()) + " differ");
  }
}

template <class Real>
void require_rank(const Var<Real> & a, std::size_t rank, Op op)
{
  if (a.shape().size() != rank) {
    throw ShapeError(std::string(op_name(op)) + ": expected rank " + std::to_string(rank) +
                     ", got shape " + to_string(a.shape()));
  }
}

template <class Real, class F>
Var<Real> unary(Var<Real> a, Op op, F f)
{
  const auto x = a.value();
  std::vector<Real> out(x.size());
  for (std::size_t i = 0; i < x.size(); ++i) out[i] = f(x[i]);
  return a.tape().push(op, a.shape(), std::move(out), {a});
}

}  // namespace detail

template <class Real>
Var<Real> add(Var<Real> a, Var<Real> b)
{
  detail::require_same_shape(a, b, Op::Add);
  const auto x = a.value(), y = b.value();
  std::vector<Real> out(x.size());
  for (std::size_t i = 0; i < x.size(); ++i) out[i] = x[i] + y[i];
  return a.tape().push(Op::Add, a.shape(), std::move(out), {a, b});
}

template <class Real>
Var<Real> sub(Var<Real> a, Var<Real> b)
{
  detail::require_same_shape(a, b, Op::Sub);
  const auto x = a.value(), y = b.value();
  std::vector<Real> out(x.size());
  for (std::size_t i = 0; i < x.size(); ++i) out[i] = x[i] - y[i];
  return a.tape().push(Op::Sub, a.shape(), std::move(out), {a, b});
}

template <class Real>
Var<Real> mul(Var<Real> a, Var<Real> b)
{
  detail::require_same_shape(a, b, Op::Mul);
  const auto x = a.value(), y = b.value();
  std::vector<Real> out(x.size());
  for (std::size_t i = 0; i < x.size(); ++i) out[i] = x[i] * y[i];
  return a.tape().push(Op::Mul, a.shape(), std::move(out), {a, b});
}

/// a + b with b a vector broadcast along every row of a's last axis.
template <class Real>
Var<Real> add_bias(Var<Real> a, Var<Real> b)
{
  if (b.size() != a.shape().back()) {
    throw ShapeError("add_bias: bias " + to_string(b.shape()) + " does not match last axis of " +
                     to_string(a.shape()));
  }
  const auto x = a.value(), y = b.value();
  const std::size_t cols = y.size();
  std::vector<Real> out(x.size());
  for (std::size_t i = 0; i < x.size(); ++i) out[i] = x[i] + y[i % cols];
  return a.tape().push(Op::AddBias, a.shape(), std::move(out), {a, b});
}

/// a * b with b broadcast along every row of a's last axis.
template <class Real>
Var<Real> mul_bias(Var<Real> a, Var<Real> b)
{
  if (b.size() != a.shape().back()) {
    throw ShapeError("mul_bias: scale " + to_string(b.shape()) +
                     " does not match last axis of " + to_string(a.shape()));
  }
  const auto x = a.value(), y = b.value();
  const std::size_t cols = y.size();
  std::vector<Real> out(x.size());
  for (std::size_t i = 0; i < x.size(); ++i) out[i] = x[i] * y[i % cols];
  return a.tape().push(Op::MulBias, a.shape(), std::move(out), {a, b});
}

template <class Real>
Var<Real> scale(Var<Real> a, Real s)
{
  const auto x = a.value();
  std::vector<Real> out(x.size());
  for (std::size_t i = 0; i < x.size(); ++i) out[i] = s * x[i];
  return a.tape().push(Op::Scale, a.shape(), std::move(out), {a}, {}, s);
}

template <class Real>
Var<Real> matmul(Var<Real> a, Var<Real> b)
{
  detail::require_rank(a, 2, Op::MatMul);
  detail::require_rank(b, 2, Op::MatMul);
  const std::size_t rows = a.dim(0), inner = a.dim(1), cols = b.dim(1);
  if (b.dim(0) != inner) {
    throw ShapeError("matmul: inner dimensions differ (" + to_string(a.shape()) + " x " +
                     to_string(b.shape()) + ")");
  }
  const auto x = a.value(), y = b.value();
  std::vector<Real> out(rows * cols, Real(0));
  for (std::size_t i = 0; i < rows; ++i) {
    Real * oi = out.data() + i * cols;
    for (std::size_t p = 0; p < inner; ++p) {
      const Real xip = x[i * inner + p];
      const Real * yp = y.data() + p * cols;
      for (std::size_t j = 0; j < cols; ++j) oi[j] += xip * yp[j];
    }
  }
  return a.tape().push(Op::MatMul, Shape{rows, cols}, std::move(out), {a, b}, {rows, inner, cols});
}

template <class Real>
Var<Real> transpose(Var<Real> a)
{
  detail::require_rank(a, 2, Op::Transpose);
  const std::size_t rows = a.dim(0), cols = a.dim(1);
  const auto x = a.value();
  std::vector<Real> out(x.size());
  for (std::size_t i = 0; i < rows; ++i)
    for (std::size_t j = 0; j < cols; ++j) out[j * rows + i] = x[i * cols + j];
  return a.tape().push(Op::Transpose, Shape{cols, rows}, std::move(out), {a});
}

template <class Real>
Var<Real> concat(const std::vector<Var<Real>> & parts, std::size_t axis)
{
  if (parts.empty()) {
    throw ShapeError("concat: no operands");
  }
  Tape<Real> & tape = parts.front().tape();
  Shape shape = parts.front().shape();
  if (axis >= shape.size()) {
    throw ShapeError("concat: axis " + std::to_string(axis) + " out of range for " +
                     to_string(shape));
  }
  std::size_t extent = 0;
  std::vector<std::uint32_t> ids;
  for (const auto & p : parts) {
    Shape s = p.shape();
    if (s.size() != shape.size()) {
      throw ShapeError("concat: rank mismatch " + to_string(s) + " vs " + to_string(shape));
    }
    for (std::size_t d = 0; d < s.size(); ++d) {
      if (d != axis && s[d] != shape[d]) {
        throw ShapeError("concat: shape " + to_string(s) + " incompatible with " +
                         to_string(shape) + " along axis " + std::to_string(axis));
      }
    }
    extent += s[axis];
    ids.push_back(tape.own(p, Op::Concat));
  }
  shape[axis] = extent;
  std::size_t outer, inner;
  detail::outer_inner(shape, axis, outer, inner);
  std::vector<Real> out;
  out.reserve(numel(shape));
  for (std::size_t o = 0; o < outer; ++o) {
    for (const auto & p : parts) {
      const std::size_t block = p.shape()[axis] * inner;
      const auto v = p.value();
      out.insert(out.end(), v.begin() + static_cast<std::ptrdiff_t>(o * block),
        v.begin() + static_cast<std::ptrdiff_t>((o + 1) * block));
    }
  }
  return tape.push_ids(Op::Concat, std::move(shape), std::move(out), std::move(ids), {axis, 0, 0});
}

/// Elements [begin, end) along `axis`.
template <class Real>
Var<Real> slice(Var<Real> a, std::size_t axis, std::size_t begin, std::size_t end)
{
  Shape shape = a.shape();
  if (axis >= shape.size() || begin >= end || end > shape[axis]) {
    throw ShapeError("slice: range [" + std::to_string(begin) + "," + std::to_string(end) +
                     ") on axis " + std::to_string(axis) + " invalid for " + to_string(shape));
  }
  const std::size_t src_extent = shape[axis];
  shape[axis] = end - begin;
  std::size_t outer, inner;
  detail::outer_inner(shape, axis, outer, inner);
  const auto v = a.value();
  std::vector<Real> out;
  out.reserve(numel(shape));
  for (std::size_t o = 0; o < outer; ++o) {
    const auto first = v.begin() + static_cast<std::ptrdiff_t>((o * src_extent + begin) * inner);
    out.insert(out.end(), first, first + static_cast<std::ptrdiff_t>((end - begin) * inner));
  }
  return a.tape().push(Op::Slice, std::move(shape), std::move(out), {a}, {axis, begin, end});
}

template <class Real>
Var<Real> reshape(Var<Real> a, Shape shape)
{
  if (numel(shape) != a.size()) {
    throw ShapeError("reshape: " + to_string(a.shape()) + " -> " + to_string(shape));
  }
  const auto v = a.value();
  return a.tape().push(Op::Reshape, std::move(shape), std::vector<Real>(v.begin(), v.end()), {a});
}

/// Softmax over the last axis.
template <class Real>
Var<Real> softmax(Var<Real> a)
{
  const std::size_t cols = a.shape().back();
  const auto x = a.value();
  const std::size_t rows = x.size() / cols;
  std::vector<Real> out(x.size());
  for (std::size_t r = 0; r < rows; ++r) {
    const Real * xr = x.data() + r * cols;
    Real * yr = out.data() + r * cols;
    Real mx = xr[0];
    for (std::size_t j = 1; j < cols; ++j) mx = std::max(mx, xr[j]);
    Real total = 0;
    for (std::size_t j = 0; j < cols; ++j) {
      yr[j] = std::exp(xr[j] - mx);
      total += yr[j];
    }
    for (std::size_t j = 0; j < cols; ++j) yr[j] /= total;
  }
  return a.tape().push(Op::Softmax, a.shape(), std::move(out), {a});
}

inline constexpr double kLayerNormEps = 1e-5;

/// Normalises each row of the last axis to zero mean / unit variance (no affine part).
template <class Real>
Var<Real> layer_norm(Var<Real> a, Real eps = Real(kLayerNormEps))
{
  const std::size_t cols = a.shape().back();
  const auto x = a.value();
  const std::size_t rows = x.size() / cols;
  std::vector<Real> out(x.size());
  std::vector<Real> inv_std(rows);
  for (std::size_t r = 0; r < rows; ++r) {
    const Real * xr = x.data() + r * cols;
    Real mean = 0;
    for (std::size_t j = 0; j < cols; ++j) mean += xr[j];
    mean /= static_cast<Real>(cols);
    Real var = 0;
    for (std::size_t j = 0; j < cols; ++j) var += (xr[j] - mean) * (xr[j] - mean);
    var /= static_cast<Real>(cols);
    inv_std[r] = Real(1) / std::sqrt(var + eps);
    for (std::size_t j = 0; j < cols; ++j) out[r * cols + j] = (xr[j] - mean) * inv_std[r];
  }
  return a.tape().push(Op::LayerNorm, a.shape(), std::move(out), {a}, {}, eps, std::move(inv_std));
}

template <class Real>
Var<Real> relu(Var<Real> a)
{
  return detail::unary(a, Op::Relu, [](Real v) { return v > 0 ? v : Real(0); });
}

template <class Real>
Var<Real> exp(Var<Real> a)
{
  return detail::unary(a, Op::Exp, [](Real v) { return std::exp(v); });
}

template <class Real>
Var<Real> log(Var<Real> a)
{
  return detail::unary(a, Op::Log, [](Real v) { return std::log(v); });
}

template <class Real>
Var<Real> sigmoid(Var<Real> a)
{
  return detail::unary(a, Op::Sigmoid, [](Real v) { return detail::sigmoid(v); });
}

template <class Real>
Var<Real> sum(Var<Real> a)
{
  Real total = 0;
  for (Real v : a.value()) total += v;
  return a.tape().push(Op::Sum, Shape{1}, std::vector<Real>{total}, {a});
}

template <class Real>
Var<Real> mean(Var<Real> a)
{
  Real total = 0;
  for (Real v : a.value()) total += v;
  return a.tape().push(Op::Mean, Shape{1}, std::vector<Real>{total / static_cast<Real>(a.size())}, {a});
}

/**
 * @brief Same-size 2-D convolution: x [C,H,W], w [O,C,K,K] (K odd), b [O] -> [O,H,W].
 *
 * Zero padding of K/2 on each border.
 */
template <class Real>
Var<Real> conv2d(Var<Real> x, Var<Real> w, Var<Real> b)
{
  detail::require_rank(x, 3, Op::Conv2d);
  detail::require_rank(w, 4, Op::Conv2d);
  const auto & xs = x.shape();
  const auto & ws = w.shape();
  const std::size_t C = xs[0], H = xs[1], W = xs[2], O = ws[0], K = ws[2];
  if (ws[1] != C || ws[3] != K || K % 2 == 0 || b.size() != O) {
    throw ShapeError("conv2d: kernel " + to_string(ws) + " / bias " + to_string(b.shape()) +
                     " incompatible with input " + to_string(xs));
  }
  const std::ptrdiff_t pad = static_cast<std::ptrdiff_t>(K / 2);
  const auto xv = x.value();
  const auto wv = w.value();
  const auto bv = b.value();
  std::vector<Real> out(O * H * W);
  for (std::size_t o = 0; o < O; ++o) {
    Real * oo = out.data() + o * H * W;
    std::fill(oo, oo + H * W, bv[o]);
    for (std::size_t c = 0; c < C; ++c) {
      for (std::size_t ky = 0; ky < K; ++ky) {
        const std::ptrdiff_t dy = static_cast<std::ptrdiff_t>(ky) - pad;
        for (std::size_t kx = 0; kx < K; ++kx) {
          const std::ptrdiff_t dx = static_cast<std::ptrdiff_t>(kx) - pad;
          const Real wgt = wv[((o * C + c) * K + ky) * K + kx];
          const std::size_t y0 = dy < 0 ? static_cast<std::size_t>(-dy) : 0;
          const std::size_t y1 = dy > 0 ? H - static_cast<std::size_t>(dy) : H;
          const std::size_t x0 = dx < 0 ? static_cast<std::size_t>(-dx) : 0;
          const std::size_t x1 = dx > 0 ? W - static_cast<std::size_t>(dx) : W;
          for (std::size_t y = y0; y < y1; ++y) {
            const Real * xrow = xv.data() +
              (c * H + static_cast<std::size_t>(static_cast<std::ptrdiff_t>(y) + dy)) * W;
            Real * orow = oo + y * W;
            for (std::size_t xx = x0; xx < x1; ++xx) orow[xx] += wgt * xrow[xx + dx];
          }
        }
      }
    }
  }
  return x.tape().push(Op::Conv2d, Shape{O, H, W}, std::move(out), {x, w, b});
}

/// 2x2 average pooling of [C,H,W] with even H, W.
template <class Real>
Var<Real> avg_pool2(Var<Real> a)
{
  detail::require_rank(a, 3, Op::AvgPool2);
  const std::size_t C = a.dim(0), H = a.dim(1), W = a.dim(2);
  if (H % 2 || W % 2) {
    throw ShapeError("avg_pool2: odd spatial extent in " + to_string(a.shape()));
  }
  const auto x = a.value();
  const std::size_t h = H / 2, w = W / 2;
  std::vector<Real> out(C * h * w);
  for (std::size_t c = 0; c < C; ++c)
    for (std::size_t y = 0; y < h; ++y)
      for (std::size_t xx = 0; xx < w; ++xx) {
        const std::size_t base = (c * H + 2 * y) * W + 2 * xx;
        out[(c * h + y) * w + xx] =
          Real(0.25) * (x[base] + x[base + 1] + x[base + W] + x[base + W + 1]);
      }
  return a.tape().push(Op::AvgPool2, Shape{C, h, w}, std::move(out), {a});
}

/// Nearest-neighbour 2x upsampling of [C,H,W].
template <class Real>
Var<Real> upsample2(Var<Real> a)
{
  detail::require_rank(a, 3, Op::Upsample2);
  const std::size_t C = a.dim(0), h = a.dim(1), w = a.dim(2);
  const std::size_t H = 2 * h, W = 2 * w;
  const auto x = a.value();
  std::vector<Real> out(C * H * W);
  for (std::size_t c = 0; c < C; ++c)
    for (std::size_t y = 0; y < H; ++y)
      for (std::size_t xx = 0; xx < W; ++xx)
        out[(c * H + y) * W + xx] = x[(c * h + y / 2) * w + xx / 2];
  return a.tape().push(Op::Upsample2, Shape{C, H, W}, std::move(out), {a});
}

/// Mean binary cross-entropy of sigmoid(logits) against targets in [0,1].
template <class Real>
Var<Real> bce_with_logits(Var<Real> logits, const Tensor<Real> & target)
{
  if (logits.shape() != target.shape()) {
    throw ShapeError("bce_with_logits: logits " + to_string(logits.shape()) + " vs target " +
                     to_string(target.shape()));
  }
  const auto z = logits.value();
  Real total = 0;
  for (std::size_t i = 0; i < z.size(); ++i) {
    const Real zi = z[i];
    total += std::max(zi, Real(0)) - zi * target[i] + std::log1p(std::exp(-std::abs(zi)));
  }
  return logits.tape().push(Op::BceWithLogits, Shape{1},
    std::vector<Real>{total / static_cast<Real>(z.size())}, {logits}, {}, Real(0), target.vec());
}

/// Mean binary cross-entropy of probabilities (clamped to [1e-12, 1-1e-12]).
template <class Real>
Var<Real> bce(Var<Real> probs, const Tensor<Real> & target)
{
  if (probs.shape() != target.shape()) {
    throw ShapeError("bce: probabilities " + to_string(probs.shape()) + " vs target " +
                     to_string(target.shape()));
  }
  const auto p = probs.value();
  const Real lo = Real(1e-12), hi = Real(1) - Real(1e-12);
  Real total = 0;
  for (std::size_t i = 0; i < p.size(); ++i) {
    const Real pi = std::clamp(p[i], lo, hi);
    total -= target[i] * std::log(pi) + (Real(1) - target[i]) * std::log(Real(1) - pi);
  }
  return probs.tape().push(Op::Bce, Shape{1},
    std::vector<Real>{total / static_cast<Real>(p.size())}, {probs}, {}, Real(0), target.vec());
}

template <class Real>
Var<Real> operator+(Var<Real> a, Var<Real> b) { return add(a, b); }
template <class Real>
Var<Real> operator-(Var<Real> a, Var<Real> b) { return sub(a, b); }
template <class Real>
Var<Real> operator*(Var<Real> a, Var<Real> b) { return mul(a, b); }

/**
 * @brief Scaled dot-product attention over already projected Q [Lq, d], K and
 * V [Lk, d], split into `heads` column blocks of width d / heads.
 *
 * Returns the concatenated head outputs [Lq, d]. When `weights` is non-null it
 * receives the softmax weights laid out [heads, Lq, Lk].
 */
template <class Real>
Var<Real> attention_heads(Var<Real> q, Var<Real> k, Var<Real> v, std::size_t heads,
  std::vector<Real> * weights = nullptr)
{
  detail::require_rank(q, 2, Op::Attention);
  detail::require_rank(k, 2, Op::Attention);
  detail::require_rank(v, 2, Op::Attention);
  const std::size_t Lq = q.dim(0), Lk = k.dim(0), dim = q.dim(1);
  if (k.dim(1) != dim || v.dim(1) != dim || v.dim(0) != Lk || Lk == 0 || heads == 0 ||
      dim % heads != 0) {
    throw ShapeError("attention: Q " + to_string(q.shape()) + ", K " + to_string(k.shape()) +
                     ", V " + to_string(v.shape()) + " with " + std::to_string(heads) + " heads");
  }
  const std::size_t hd = dim / heads;
  const Real scale = Real(1) / std::sqrt(static_cast<Real>(hd));
  const auto qv = q.value(), kv = k.value(), vv = v.value();
  std::vector<Real> w(heads * Lq * Lk);
  std::vector<Real> out(Lq * dim, Real(0));
  for (std::size_t h = 0; h < heads; ++h) {
    const std::size_t c0 = h * hd;
    for (std::size_t i = 0; i < Lq; ++i) {
      Real * wi = w.data() + (h * Lq + i) * Lk;
      const Real * qi = qv.data() + i * dim + c0;
      for (std::size_t j = 0; j < Lk; ++j) {
        const Real * kj = kv.data() + j * dim + c0;
        Real s = 0;
        for (std::size_t c = 0; c < hd; ++c) s += qi[c] * kj[c];
        wi[j] = s * scale;
      }
      Real mx = wi[0];
      for (std::size_t j = 1; j < Lk; ++j) mx = std::max(mx, wi[j]);
      Real total = 0;
      for (std::size_t j = 0; j < Lk; ++j) {
        wi[j] = std::exp(wi[j] - mx);
        total += wi[j];
      }
      for (std::size_t j = 0; j < Lk; ++j) wi[j] /= total;
      Real * oi = out.data() + i * dim + c0;
      for (std::size_t j = 0; j < Lk; ++j) {
        const Real * vj = vv.data() + j * dim + c0;
        for (std::size_t c = 0; c < hd; ++c) oi[c] += wi[j] * vj[c];
      }
    }
  }
  if (weights != nullptr) *weights = w;
  return q.tape().push(Op::Attention, Shape{Lq, dim}, std::move(out), {q, k, v}, {heads, Lq, Lk},
    scale, std::move(w));
}

/// Row r of a 2-D variable as a [1, cols] variable.
template <class Real>
Var<Real> row(Var<Real> a, std::size_t r)
{
  return slice(a, 0, r, r + 1);
}

}  // namespace vista::nn

#endif  // VISTA__NUMERICS__TAPE_HPP_

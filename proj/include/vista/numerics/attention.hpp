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

#ifndef VISTA__NUMERICS__ATTENTION_HPP_
#define VISTA__NUMERICS__ATTENTION_HPP_

#include <cmath>
#include <string>
#include <vector>

#include "vista/common/error.hpp"
#include "vista/numerics/param_store.hpp"
#include "vista/numerics/tape.hpp"

namespace vista::nn
{

/// Registers the eight projection tensors of one attention block under `prefix`.
inline void add_attention_params(ParamStore & store, const std::string & prefix, std::size_t dim,
  Rng & rng)
{
  for (const char * p : {"q", "k", "v", "o"}) {
    store.add_uniform(prefix + ".w" + p, Shape{dim, dim}, dim, dim, rng);
    store.add_zeros(prefix + ".b" + p, Shape{dim});
  }
}

template <class Real>
struct AttentionWeights
{
  Var<Real> wq, bq, wk, bk, wv, bv, wo, bo;

  static AttentionWeights bind(BoundParams<Real> & params, const std::string & prefix)
  {
    return AttentionWeights{params(prefix + ".wq"), params(prefix + ".bq"), params(prefix + ".wk"),
      params(prefix + ".bk"), params(prefix + ".wv"), params(prefix + ".bv"),
      params(prefix + ".wo"), params(prefix + ".bo")};
  }
};

template <class Real>
struct AttentionOutput
{
  Var<Real> output;          ///< [Lq, d]
  std::size_t n_heads = 0;
  std::size_t lq = 0, lk = 0;
  std::vector<Real> weights;  ///< row-stochastic, laid out [heads, Lq, Lk]

  /// Weights of head h as [Lq, Lk].
  Tensor<Real> head(std::size_t h) const
  {
    const auto first = weights.begin() + static_cast<std::ptrdiff_t>(h * lq * lk);
    return Tensor<Real>(Shape{lq, lk}, std::vector<Real>(first, first + static_cast<std::ptrdiff_t>(lq * lk)));
  }

  /// Attention averaged over heads.
  Tensor<Real> mean_weights() const
  {
    Tensor<Real> avg(Shape{lq, lk}, Real(0));
    for (std::size_t h = 0; h < n_heads; ++h)
      for (std::size_t i = 0; i < lq * lk; ++i) avg[i] += weights[h * lq * lk + i];
    const Real inv = Real(1) / static_cast<Real>(n_heads);
    for (auto & x : avg.vec()) x *= inv;
    return avg;
  }
};

/**
 * @brief Multi-head scaled dot-product attention.
 *
 * Q [Lq, d], K and V [Lk, d]. Per head h with width d/H:
 * softmax((Q Wq)_h (K Wk)_h^T / sqrt(d/H)) (V Wv)_h, heads concatenated and
 * projected by Wo. Every projection carries a bias.
 */
template <class Real>
AttentionOutput<Real> multi_head_attention(Var<Real> q, Var<Real> k, Var<Real> v,
  std::size_t n_heads, const AttentionWeights<Real> & w)
{
  const std::size_t dim = q.shape().back();
  if (n_heads == 0 || dim % n_heads != 0) {
    throw ConfigError("multi_head_attention: model dim " + std::to_string(dim) +
                      " not divisible by " + std::to_string(n_heads) + " heads");
  }
  if (q.shape().size() != 2 || k.shape().size() != 2 || v.shape().size() != 2 ||
      k.dim(0) != v.dim(0) || k.dim(1) != dim || v.dim(1) != dim) {
    throw ShapeError("multi_head_attention: Q " + to_string(q.shape()) + ", K " +
                     to_string(k.shape()) + ", V " + to_string(v.shape()));
  }
  Var<Real> qp = add_bias(matmul(q, w.wq), w.bq);
  Var<Real> kp = add_bias(matmul(k, w.wk), w.bk);
  Var<Real> vp = add_bias(matmul(v, w.wv), w.bv);
  AttentionOutput<Real> out;
  out.n_heads = n_heads;
  out.lq = q.dim(0);
  out.lk = k.dim(0);
  Var<Real> merged = attention_heads(qp, kp, vp, n_heads, &out.weights);
  out.output = add_bias(matmul(merged, w.wo), w.bo);
  return out;
}

}  // namespace vista::nn

#endif  // VISTA__NUMERICS__ATTENTION_HPP_

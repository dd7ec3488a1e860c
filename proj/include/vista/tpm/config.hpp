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

#ifndef VISTA__TPM__CONFIG_HPP_
#define VISTA__TPM__CONFIG_HPP_

#include <algorithm>
#include <string>

#include "vista/common/error.hpp"
#include "vista/common/rng.hpp"
#include "vista/gpm/gpm.hpp"
#include "vista/numerics/attention.hpp"
#include "vista/numerics/param_store.hpp"

namespace vista::tpm
{

using nn::BoundParams;
using nn::ParamStore;
using nn::Shape;
using nn::Tape;
using nn::Tensor;
using nn::Var;

/// Everything needed to rebuild the parameter layout and the forward pass.
struct ModelConfig
{
  gpm::GpmConfig gpm;
  std::size_t t_fut = 12;
  std::size_t d_model = 32;
  std::size_t n_heads = 8;
  std::size_t temporal_layers = 1;
  std::size_t social_layers = 1;
  bool use_fixed_pe = true;
  bool use_learned_pe = true;
  bool use_social = true;
  bool use_goal = true;
  bool embed_bias = true;
  /// Scene units per model unit; 0 picks cell_size * max(H, W) / 4.
  double coord_scale = 0.0;

  std::size_t t_obs() const { return gpm.t_obs; }
  std::size_t t_total() const { return gpm.t_obs + t_fut; }
  /// Rows in the positional tables: every time step plus the reserved goal slot.
  std::size_t pe_rows() const { return t_total() + 1; }

  double scale() const
  {
    if (coord_scale > 0.0) return coord_scale;
    return gpm.grid.cell_size * static_cast<double>(std::max(gpm.grid.height, gpm.grid.width)) / 4.0;
  }

  void validate() const
  {
    gpm.validate();
    if (t_fut == 0) throw ConfigError("model: t_fut must be positive");
    if (d_model == 0 || d_model % 2) {
      throw ConfigError("model: d_model must be positive and even, got " + std::to_string(d_model));
    }
    if (n_heads == 0 || d_model % n_heads) {
      throw ConfigError("model: d_model " + std::to_string(d_model) + " is not divisible by " +
                        std::to_string(n_heads) + " heads");
    }
    if (temporal_layers == 0 || social_layers == 0) {
      throw ConfigError("model: layer counts must be positive");
    }
    if (coord_scale < 0.0) throw ConfigError("model: coord_scale must be >= 0");
  }
};

inline std::string layer_name(const std::string & block, std::size_t l)
{
  return "tpm." + block + ".l" + std::to_string(l);
}

/**
 * @brief Registers every trainable tensor of the model.
 *
 * Goal-free configurations skip the goal module and the fusion block; the
 * social block is skipped when social attention is off.
 */
inline void add_model_params(ParamStore & store, const ModelConfig & cfg, Rng & rng)
{
  cfg.validate();
  const std::size_t d = cfg.d_model;
  if (cfg.use_goal) gpm::add_gpm_params(store, cfg.gpm, rng);
  store.add_uniform("tpm.embed.w", Shape{2, d}, 2, d, rng);
  if (cfg.embed_bias) store.add_zeros("tpm.embed.b", Shape{d});
  if (cfg.use_learned_pe) store.add_zeros("tpm.pe.learn", Shape{cfg.pe_rows(), d});
  for (std::size_t l = 0; l < cfg.temporal_layers; ++l) {
    nn::add_attention_params(store, layer_name("temporal", l), d, rng);
  }
  if (cfg.use_goal) {
    nn::add_attention_params(store, layer_name("cross", 0), d, rng);
    store.add_constant("tpm.fusion.norm.gamma", Shape{d}, 1.0);
    store.add_zeros("tpm.fusion.norm.beta", Shape{d});
  }
  if (cfg.use_social) {
    for (std::size_t l = 0; l < cfg.social_layers; ++l) {
      nn::add_attention_params(store, layer_name("social", l), d, rng);
    }
  }
  store.add_uniform("tpm.decoder.w1", Shape{d, d}, d, 0, rng);
  store.add_zeros("tpm.decoder.b1", Shape{d});
  auto & w2 = store.add_uniform("tpm.decoder.w2", Shape{d, 2}, d, 2, rng);
  // Output layer scaled down by 10.
  for (auto & v : w2.value.vec()) v *= 0.1;
  store.add_zeros("tpm.decoder.b2", Shape{2});
}

}  // namespace vista::tpm

#endif  // VISTA__TPM__CONFIG_HPP_

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

#ifndef VISTA__CLI__CONFIG_HPP_
#define VISTA__CLI__CONFIG_HPP_

#include <cstdint>
#include <functional>
#include <sstream>
#include <string>
#include <vector>

#include "vista/common/error.hpp"
#include "vista/common/io.hpp"
#include "vista/data/trajectory_io.hpp"
#include "vista/metrics/metrics.hpp"
#include "vista/numerics/param_store.hpp"
#include "vista/tpm/config.hpp"
#include "vista/training/trainer.hpp"

namespace vista::cli
{

inline constexpr const char * kCheckpointVersion = "vista-1";
inline constexpr const char * kConfigMetaKey = "config";

/// Everything a run reads from the config file.
struct RunConfig
{
  tpm::ModelConfig model;
  training::TrainConfig train;
  std::size_t stride = 0;
  std::size_t jitter_copies = 0;
  bool augment = false;
  double val_fraction = 0.1;
  double train_ratio = 0.8;
  double miss_threshold = metrics::kDefaultMissThreshold;

  WindowOptions windows() const
  {
    WindowOptions w;
    w.t_obs = model.t_obs();
    w.t_fut = model.t_fut;
    w.stride = stride;
    w.jitter_copies = jitter_copies;
    w.seed = train.seed;
    return w;
  }

  void validate() const
  {
    model.validate();
    train.validate();
    if (!(val_fraction >= 0.0 && val_fraction < 1.0)) {
      throw ConfigError("config: data.val_fraction must lie in [0, 1)");
    }
    if (!(train_ratio > 0.0 && train_ratio < 1.0)) {
      throw ConfigError("config: data.train_ratio must lie in (0, 1)");
    }
    if (!(miss_threshold > 0.0)) throw ConfigError("config: eval.miss_threshold must be positive");
  }
};

namespace detail
{

struct Field
{
  std::string section;
  std::string key;
  std::function<std::string(const RunConfig &)> get;
  std::function<bool(RunConfig &, const std::string &)> set;
};

template <class T, class Ref>
Field make_field(std::string section, std::string key, Ref ref)
{
  Field f;
  f.section = std::move(section);
  f.key = std::move(key);
  f.get = [ref](const RunConfig & c) -> std::string {
    const T & v = ref(const_cast<RunConfig &>(c));
    if constexpr (std::is_same_v<T, bool>) {
      return v ? "true" : "false";
    } else if constexpr (std::is_same_v<T, double>) {
      return format_double(v);
    } else {
      return std::to_string(v);
    }
  };
  f.set = [ref](RunConfig & c, const std::string & s) -> bool {
    T & v = ref(c);
    if constexpr (std::is_same_v<T, bool>) {
      if (s == "true" || s == "1" || s == "yes" || s == "on") return v = true, true;
      if (s == "false" || s == "0" || s == "no" || s == "off") return v = false, true;
      return false;
    } else if constexpr (std::is_same_v<T, double>) {
      double x = 0.0;
      if (!parse_number(s, x) || !std::isfinite(x)) return false;
      v = x;
      return true;
    } else if constexpr (std::is_same_v<T, std::uint64_t>) {
      std::uint64_t x = 0;
      if (!parse_number(s, x)) return false;
      v = x;
      return true;
    } else {
      std::int64_t x = 0;
      if (!parse_integral(s, x) || x < 0) return false;
      v = static_cast<T>(x);
      return true;
    }
  };
  return f;
}

#define VISTA_FIELD(T, section, key, expr) \
  make_field<T>(section, key, [](RunConfig & c) -> T & { return expr; })

inline const std::vector<Field> & fields()
{
  static const std::vector<Field> table = {
    VISTA_FIELD(std::size_t, "model", "t_obs", c.model.gpm.t_obs),
    VISTA_FIELD(std::size_t, "model", "t_fut", c.model.t_fut),
    VISTA_FIELD(std::size_t, "model", "d_model", c.model.d_model),
    VISTA_FIELD(std::size_t, "model", "n_heads", c.model.n_heads),
    VISTA_FIELD(std::size_t, "model", "temporal_layers", c.model.temporal_layers),
    VISTA_FIELD(std::size_t, "model", "social_layers", c.model.social_layers),
    VISTA_FIELD(bool, "model", "fixed_pe", c.model.use_fixed_pe),
    VISTA_FIELD(bool, "model", "learned_pe", c.model.use_learned_pe),
    VISTA_FIELD(bool, "model", "social", c.model.use_social),
    VISTA_FIELD(bool, "model", "goal", c.model.use_goal),
    VISTA_FIELD(bool, "model", "embed_bias", c.model.embed_bias),
    VISTA_FIELD(double, "model", "coord_scale", c.model.coord_scale),
    VISTA_FIELD(std::size_t, "gpm", "height", c.model.gpm.grid.height),
    VISTA_FIELD(std::size_t, "gpm", "width", c.model.gpm.grid.width),
    VISTA_FIELD(double, "gpm", "cell_size", c.model.gpm.grid.cell_size),
    VISTA_FIELD(std::size_t, "gpm", "raster_classes", c.model.gpm.raster_classes),
    VISTA_FIELD(std::size_t, "gpm", "width1", c.model.gpm.width1),
    VISTA_FIELD(std::size_t, "gpm", "width2", c.model.gpm.width2),
    VISTA_FIELD(double, "gpm", "trajectory_sigma", c.model.gpm.trajectory_sigma),
    VISTA_FIELD(double, "gpm", "target_sigma", c.model.gpm.target_sigma),
    VISTA_FIELD(double, "gpm", "temperature", c.model.gpm.temperature),
    VISTA_FIELD(std::size_t, "gpm", "n_raw", c.model.gpm.n_raw),
    VISTA_FIELD(std::size_t, "gpm", "k", c.model.gpm.k),
    VISTA_FIELD(double, "train", "lr", c.train.lr),
    VISTA_FIELD(double, "train", "lambda_goal", c.train.weights.goal),
    VISTA_FIELD(double, "train", "lambda_traj", c.train.weights.traj),
    VISTA_FIELD(std::size_t, "train", "max_epochs", c.train.max_epochs),
    VISTA_FIELD(std::size_t, "train", "plateau_patience", c.train.plateau_patience),
    VISTA_FIELD(std::size_t, "train", "early_stop_patience", c.train.early_stop_patience),
    VISTA_FIELD(std::size_t, "train", "batch_size", c.train.batch_size),
    VISTA_FIELD(std::uint64_t, "train", "seed", c.train.seed),
    VISTA_FIELD(double, "train", "beta1", c.train.adam.beta1),
    VISTA_FIELD(double, "train", "beta2", c.train.adam.beta2),
    VISTA_FIELD(double, "train", "adam_eps", c.train.adam.eps),
    VISTA_FIELD(std::size_t, "train", "val_interval", c.train.val_interval),
    VISTA_FIELD(std::size_t, "train", "val_k", c.train.val_k),
    VISTA_FIELD(std::size_t, "data", "stride", c.stride),
    VISTA_FIELD(std::size_t, "data", "jitter_copies", c.jitter_copies),
    VISTA_FIELD(bool, "data", "augment", c.augment),
    VISTA_FIELD(double, "data", "val_fraction", c.val_fraction),
    VISTA_FIELD(double, "data", "train_ratio", c.train_ratio),
    VISTA_FIELD(double, "eval", "miss_threshold", c.miss_threshold),
  };
  return table;
}

#undef VISTA_FIELD

inline std::string trim(const std::string & s)
{
  const auto b = s.find_first_not_of(" \t\r");
  if (b == std::string::npos) return {};
  const auto e = s.find_last_not_of(" \t\r");
  return s.substr(b, e - b + 1);
}

}  // namespace detail

/// Sets `section.key` from text; unknown keys and bad values raise ConfigError naming the key.
inline void set_config_value(RunConfig & cfg, const std::string & qualified, const std::string & value)
{
  for (const auto & f : detail::fields()) {
    if (f.section + "." + f.key != qualified) continue;
    if (!f.set(cfg, value)) {
      throw ConfigError("config: invalid value '" + value + "' for key '" + qualified + "'");
    }
    return;
  }
  throw ConfigError("config: unknown key '" + qualified + "'");
}

/// Applies a `section.key=value` override.
inline void apply_override(RunConfig & cfg, const std::string & assignment)
{
  const auto eq = assignment.find('=');
  if (eq == std::string::npos) {
    throw ConfigError("config: override '" + assignment + "' is not section.key=value");
  }
  set_config_value(cfg, detail::trim(assignment.substr(0, eq)), detail::trim(assignment.substr(eq + 1)));
}

/**
 * @brief Parses `[section]` headers and `key = value` lines on top of `base`.
 *
 * '#' and ';' start comments. Keys outside a section may be written as
 * `section.key`.
 */
inline RunConfig parse_config(const std::string & text, RunConfig base = {})
{
  std::istringstream in(text);
  std::string line, section;
  std::size_t lineno = 0;
  while (std::getline(in, line)) {
    ++lineno;
    line = detail::trim(line.substr(0, line.find_first_of("#;")));
    if (line.empty()) continue;
    if (line.front() == '[') {
      if (line.back() != ']') {
        throw ConfigError("config: line " + std::to_string(lineno) + ": bad section header '" + line + "'");
      }
      section = detail::trim(line.substr(1, line.size() - 2));
      continue;
    }
    const auto eq = line.find('=');
    if (eq == std::string::npos) {
      throw ConfigError("config: line " + std::to_string(lineno) + ": expected key = value, got '" + line + "'");
    }
    std::string key = detail::trim(line.substr(0, eq));
    if (!section.empty()) key = section + "." + key;
    set_config_value(base, key, detail::trim(line.substr(eq + 1)));
  }
  return base;
}

inline RunConfig load_config(const std::filesystem::path & path, RunConfig base = {})
{
  try {
    return parse_config(read_file(path), std::move(base));
  } catch (const ConfigError & e) {
    throw ConfigError(path.string() + ": " + e.what());
  } catch (const std::exception & e) {
    throw ConfigError(e.what());
  }
}

/// Full config text, every key written; parse_config(format_config(c)) reproduces c.
inline std::string format_config(const RunConfig & cfg)
{
  std::string out, section;
  for (const auto & f : detail::fields()) {
    if (f.section != section) {
      if (!section.empty()) out += '\n';
      section = f.section;
      out += "[" + section + "]\n";
    }
    out += f.key + " = " + f.get(cfg) + '\n';
  }
  return out;
}

/// Stores the config in checkpoint metadata.
inline void write_config_meta(nn::ParamStore & store, const RunConfig & cfg)
{
  store.meta()[kConfigMetaKey] = format_config(cfg);
}

inline RunConfig read_config_meta(const nn::ParamStore & store)
{
  auto it = store.meta().find(kConfigMetaKey);
  if (it == store.meta().end()) throw CheckpointError("checkpoint: no stored config");
  try {
    return parse_config(it->second);
  } catch (const ConfigError & e) {
    throw CheckpointError(std::string("checkpoint: stored config is invalid: ") + e.what());
  }
}

}  // namespace vista::cli

#endif  // VISTA__CLI__CONFIG_HPP_

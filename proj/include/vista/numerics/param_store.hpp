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

#ifndef VISTA__NUMERICS__PARAM_STORE_HPP_
#define VISTA__NUMERICS__PARAM_STORE_HPP_

#include <bit>
#include <cmath>
#include <cstdint>
#include <cstring>
#include <filesystem>
#include <fstream>
#include <iterator>
#include <map>
#include <string>
#include <string_view>
#include <unordered_map>
#include <utility>
#include <vector>

#include "vista/common/error.hpp"
#include "vista/common/rng.hpp"
#include "vista/numerics/tape.hpp"
#include "vista/numerics/tensor.hpp"

namespace vista::nn
{

/**
 * @brief Ordered name -> tensor collection with one gradient slot per entry.
 *
 * Iteration follows insertion order, which is also the on-disk order, so a
 * save/load round trip preserves it. `meta` carries string key/value pairs
 * (version tag, model config) next to the arrays.
 */
class ParamStore
{
public:
  struct Entry
  {
    std::string name;
    Tensor<double> value;
    Tensor<double> grad;
  };

  ParamStore() = default;
  explicit ParamStore(std::string version) : version_(std::move(version)) {}

  const std::string & version() const noexcept { return version_; }
  void set_version(std::string v) { version_ = std::move(v); }

  std::map<std::string, std::string> & meta() noexcept { return meta_; }
  const std::map<std::string, std::string> & meta() const noexcept { return meta_; }

  Entry & add(const std::string & name, Tensor<double> value)
  {
    if (index_.count(name)) {
      throw ConfigError("param store: duplicate entry '" + name + "'");
    }
    Tensor<double> grad(value.shape(), 0.0);
    entries_.push_back(Entry{name, std::move(value), std::move(grad)});
    index_[name] = entries_.size() - 1;
    return entries_.back();
  }

  bool contains(const std::string & name) const { return index_.count(name) != 0; }

  std::size_t index_of(const std::string & name) const
  {
    auto it = index_.find(name);
    if (it == index_.end()) {
      throw ConfigError("param store: no entry '" + name + "'");
    }
    return it->second;
  }

  Entry & at(const std::string & name)
  {
    auto it = index_.find(name);
    if (it == index_.end()) {
      throw ConfigError("param store: no entry '" + name + "'");
    }
    return entries_[it->second];
  }
  const Entry & at(const std::string & name) const
  {
    return const_cast<ParamStore *>(this)->at(name);
  }

  std::vector<Entry> & entries() noexcept { return entries_; }
  const std::vector<Entry> & entries() const noexcept { return entries_; }
  std::size_t size() const noexcept { return entries_.size(); }

  std::size_t total_size() const
  {
    std::size_t n = 0;
    for (const auto & e : entries_) n += e.value.size();
    return n;
  }

  void zero_grad()
  {
    for (auto & e : entries_) e.grad.fill(0.0);
  }

  /// Glorot-uniform in +-sqrt(6 / (fan_in + fan_out)).
  Entry & add_uniform(const std::string & name, Shape shape, std::size_t fan_in,
    std::size_t fan_out, Rng & rng)
  {
    Tensor<double> t(std::move(shape));
    const double limit = std::sqrt(6.0 / static_cast<double>(fan_in + fan_out));
    for (auto & v : t.vec()) v = rng.uniform(-limit, limit);
    return add(name, std::move(t));
  }

  Entry & add_zeros(const std::string & name, Shape shape)
  {
    return add(name, Tensor<double>(std::move(shape), 0.0));
  }

  Entry & add_constant(const std::string & name, Shape shape, double v)
  {
    return add(name, Tensor<double>(std::move(shape), v));
  }

  friend bool operator==(const ParamStore & a, const ParamStore & b)
  {
    if (a.version_ != b.version_ || a.meta_ != b.meta_ || a.entries_.size() != b.entries_.size()) {
      return false;
    }
    for (std::size_t i = 0; i < a.entries_.size(); ++i) {
      if (a.entries_[i].name != b.entries_[i].name ||
          !(a.entries_[i].value == b.entries_[i].value)) {
        return false;
      }
    }
    return true;
  }

private:
  std::string version_ = "vista-1";
  std::map<std::string, std::string> meta_;
  std::vector<Entry> entries_;
  std::unordered_map<std::string, std::size_t> index_;
};

/**
 * @brief Lazily binds ParamStore entries as leaves of one tape.
 *
 * Each entry becomes at most one leaf, so gradients from every use accumulate
 * into the same node before reaching the store.
 */
template <class Real>
class BoundParams
{
public:
  BoundParams(Tape<Real> & tape, ParamStore & store, bool track_grad = true)
  : tape_(tape), store_(store), track_grad_(track_grad)
  {
  }

  /// Gradients go to `grads` (one tensor per store entry, in entry order) instead of the store.
  BoundParams(Tape<Real> & tape, ParamStore & store, std::vector<Tensor<double>> & grads)
  : tape_(tape), store_(store), track_grad_(true), grads_(&grads)
  {
    if (grads.size() != store.size()) {
      throw ShapeError("bound params: " + std::to_string(grads.size()) +
                       " gradient buffers for " + std::to_string(store.size()) + " entries");
    }
  }

  Var<Real> operator()(const std::string & name)
  {
    auto it = cache_.find(name);
    if (it != cache_.end()) {
      return it->second;
    }
    const std::size_t idx = store_.index_of(name);
    auto & e = store_.entries()[idx];
    Tensor<double> * slot = !track_grad_ ? nullptr : grads_ ? &(*grads_)[idx] : &e.grad;
    Var<Real> v = tape_.parameter(e.value, slot);
    cache_.emplace(name, v);
    return v;
  }

  Tape<Real> & tape() noexcept { return tape_; }
  ParamStore & store() noexcept { return store_; }

private:
  Tape<Real> & tape_;
  ParamStore & store_;
  bool track_grad_;
  std::vector<Tensor<double>> * grads_ = nullptr;
  std::unordered_map<std::string, Var<Real>> cache_;
};

// ---------------------------------------------------------------------------
// Checkpoint format: "VISTA1" then, per entry, name length (u64 LE), UTF-8 name,
// rank (u64 LE), extents (u64 LE each), values (f64 LE each). Metadata and the
// version tag are stored as rank-0 entries named "@version=<tag>" and
// "@meta:<key>=<value>" holding a single 0.0.

namespace checkpoint_detail
{

inline constexpr std::string_view kMagic = "VISTA1";

inline void put_u64(std::string & out, std::uint64_t v)
{
  for (int i = 0; i < 8; ++i) out.push_back(static_cast<char>((v >> (8 * i)) & 0xFF));
}

inline void put_f64(std::string & out, double v) { put_u64(out, std::bit_cast<std::uint64_t>(v)); }

struct Reader
{
  const std::string & buf;
  std::size_t pos = 0;

  bool at_end() const { return pos == buf.size(); }

  std::uint64_t u64()
  {
    if (buf.size() - pos < 8) {
      throw CheckpointError("checkpoint: truncated file at byte " + std::to_string(pos));
    }
    std::uint64_t v = 0;
    for (int i = 0; i < 8; ++i) {
      v |= static_cast<std::uint64_t>(static_cast<unsigned char>(buf[pos + i])) << (8 * i);
    }
    pos += 8;
    return v;
  }

  double f64() { return std::bit_cast<double>(u64()); }

  std::string bytes(std::uint64_t n)
  {
    if (buf.size() - pos < n) {
      throw CheckpointError("checkpoint: truncated file at byte " + std::to_string(pos));
    }
    std::string s = buf.substr(pos, n);
    pos += n;
    return s;
  }
};

inline void put_entry(std::string & out, const std::string & name, const Shape & shape,
  std::span<const double> values)
{
  put_u64(out, name.size());
  out += name;
  put_u64(out, shape.size());
  for (auto e : shape) put_u64(out, e);
  for (double v : values) put_f64(out, v);
}

}  // namespace checkpoint_detail

inline std::string serialize(const ParamStore & store)
{
  using namespace checkpoint_detail;
  std::string out(kMagic);
  const double zero = 0.0;
  put_entry(out, "@version=" + store.version(), Shape{}, std::span<const double>(&zero, 1));
  for (const auto & [k, v] : store.meta()) {
    put_entry(out, "@meta:" + k + "=" + v, Shape{}, std::span<const double>(&zero, 1));
  }
  for (const auto & e : store.entries()) {
    put_entry(out, e.name, e.value.shape(), e.value.data());
  }
  return out;
}

/**
 * Parses a checkpoint image. Throws CheckpointError on bad magic, truncation or
 * (when `expected_version` is non-empty) a version tag mismatch. Nothing is
 * returned unless the whole image parsed.
 */
inline ParamStore deserialize(const std::string & bytes, const std::string & expected_version = {})
{
  using namespace checkpoint_detail;
  if (bytes.size() < kMagic.size() || bytes.compare(0, kMagic.size(), kMagic) != 0) {
    throw CheckpointError("checkpoint: bad magic (expected VISTA1)");
  }
  Reader r{bytes, kMagic.size()};
  ParamStore store;
  bool have_version = false;
  while (!r.at_end()) {
    const auto name_len = r.u64();
    if (name_len > bytes.size()) {
      throw CheckpointError("checkpoint: corrupt name length");
    }
    std::string name = r.bytes(name_len);
    const auto rank = r.u64();
    if (rank > 16) {
      throw CheckpointError("checkpoint: corrupt rank for '" + name + "'");
    }
    Shape shape;
    std::uint64_t count = 1;
    for (std::uint64_t i = 0; i < rank; ++i) {
      shape.push_back(r.u64());
      if (shape.back() == 0 || shape.back() > bytes.size()) {
        throw CheckpointError("checkpoint: corrupt extent for '" + name + "'");
      }
      count *= shape.back();
    }
    if (count > (bytes.size() - r.pos) / 8) {
      throw CheckpointError("checkpoint: truncated data for '" + name + "'");
    }
    std::vector<double> values(count);
    for (auto & v : values) v = r.f64();
    if (rank == 0 && name.rfind("@version=", 0) == 0) {
      store.set_version(name.substr(9));
      have_version = true;
    } else if (rank == 0 && name.rfind("@meta:", 0) == 0) {
      const auto eq = name.find('=');
      if (eq == std::string::npos) {
        throw CheckpointError("checkpoint: malformed metadata entry '" + name + "'");
      }
      store.meta()[name.substr(6, eq - 6)] = name.substr(eq + 1);
    } else {
      if (rank == 0) {
        shape = Shape{1};
      }
      store.add(name, Tensor<double>(std::move(shape), std::move(values)));
    }
  }
  if (!have_version) {
    throw CheckpointError("checkpoint: missing version tag");
  }
  if (!expected_version.empty() && store.version() != expected_version) {
    throw CheckpointError("checkpoint: version '" + store.version() + "' does not match '" +
                          expected_version + "'");
  }
  return store;
}

/// Writes atomically (temporary file then rename).
inline void save_checkpoint(const ParamStore & store, const std::filesystem::path & path)
{
  const std::string bytes = serialize(store);
  auto tmp = path;
  tmp += ".tmp";
  {
    std::ofstream out(tmp, std::ios::binary | std::ios::trunc);
    if (!out) {
      throw CheckpointError("checkpoint: cannot write " + tmp.string());
    }
    out.write(bytes.data(), static_cast<std::streamsize>(bytes.size()));
    if (!out) {
      throw CheckpointError("checkpoint: write failed for " + tmp.string());
    }
  }
  std::filesystem::rename(tmp, path);
}

inline ParamStore load_checkpoint(const std::filesystem::path & path,
  const std::string & expected_version = {})
{
  std::ifstream in(path, std::ios::binary);
  if (!in) {
    throw CheckpointError("checkpoint: cannot open " + path.string());
  }
  std::string bytes((std::istreambuf_iterator<char>(in)), std::istreambuf_iterator<char>());
  return deserialize(bytes, expected_version);
}

}  // namespace vista::nn

#endif  // VISTA__NUMERICS__PARAM_STORE_HPP_

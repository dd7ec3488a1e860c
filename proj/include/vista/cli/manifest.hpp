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

#ifndef VISTA__CLI__MANIFEST_HPP_
#define VISTA__CLI__MANIFEST_HPP_

#include <openssl/evp.h>

#include <chrono>
#include <cstdint>
#include <filesystem>
#include <string>
#include <string_view>
#include <utility>
#include <vector>

#include <nlohmann/json.hpp>

#include "vista/common/error.hpp"
#include "vista/common/io.hpp"

namespace vista::cli
{

/// Lowercase hex SHA-256.
inline std::string sha256_hex(std::string_view bytes)
{
  unsigned char md[EVP_MAX_MD_SIZE];
  unsigned int len = 0;
  if (EVP_Digest(bytes.data(), bytes.size(), md, &len, EVP_sha256(), nullptr) != 1) {
    throw Error("io", "sha256: digest failed");
  }
  static constexpr char hex[] = "0123456789abcdef";
  std::string out;
  for (unsigned int i = 0; i < len; ++i) {
    out += hex[md[i] >> 4];
    out += hex[md[i] & 15];
  }
  return out;
}

inline std::string sha256_file(const std::filesystem::path & path) { return sha256_hex(read_file(path)); }

/// Record of one artifact-producing command.
struct RunManifest
{
  std::string command;
  std::vector<std::string> argv;
  std::string config;  ///< full config text, empty for config-free commands
  std::uint64_t seed = 0;
  std::vector<std::pair<std::string, std::string>> inputs;  ///< path, sha256
  std::vector<std::string> outputs;
  std::vector<std::pair<std::string, double>> timings;  ///< phase, seconds

  void add_input(const std::filesystem::path & p) { inputs.emplace_back(p.string(), sha256_file(p)); }
  void add_output(const std::filesystem::path & p) { outputs.push_back(p.string()); }

  nlohmann::ordered_json to_json() const
  {
    nlohmann::ordered_json j;
    j["command"] = command;
    j["argv"] = argv;
    j["seed"] = seed;
    j["config"] = config;
    auto & in = j["inputs"] = nlohmann::ordered_json::array();
    for (const auto & [path, digest] : inputs) in.push_back({{"path", path}, {"sha256", digest}});
    j["outputs"] = outputs;
    auto & t = j["timings"] = nlohmann::ordered_json::object();
    for (const auto & [phase, s] : timings) t[phase] = s;
    return j;
  }

  void write(const std::filesystem::path & path) const { write_file_atomic(path, to_json().dump(2) + "\n"); }
};

/// Wall-clock stopwatch for manifest timings.
class Stopwatch
{
public:
  Stopwatch() : start_(std::chrono::steady_clock::now()) {}
  double seconds() const
  {
    return std::chrono::duration<double>(std::chrono::steady_clock::now() - start_).count();
  }
  void reset() { start_ = std::chrono::steady_clock::now(); }

private:
  std::chrono::steady_clock::time_point start_;
};

}  // namespace vista::cli

#endif  // VISTA__CLI__MANIFEST_HPP_

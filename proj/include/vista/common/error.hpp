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

#ifndef VISTA__COMMON__ERROR_HPP_
#define VISTA__COMMON__ERROR_HPP_

#include <stdexcept>
#include <string>

namespace vista
{

/// Process exit codes used by the command-line tool.
enum class ExitCode : int {
  Ok = 0,
  Generic = 1,
  Config = 2,
  Checkpoint = 3,
  DataAlignment = 4,
  Divergence = 5,
};

/**
 * @brief Base class of every error raised by the library.
 *
 * `kind()` is a short machine-readable tag ("config", "shape", ...) that the CLI
 * copies into its JSON error payload.
 */
class Error : public std::runtime_error
{
public:
  Error(std::string kind, const std::string & what, ExitCode code = ExitCode::Generic)
  : std::runtime_error(what), kind_(std::move(kind)), code_(code)
  {
  }

  const std::string & kind() const noexcept { return kind_; }
  ExitCode exit_code() const noexcept { return code_; }

private:
  std::string kind_;
  ExitCode code_;
};

/// Invalid configuration value, unknown key, or incompatible sizes between config parts.
class ConfigError : public Error
{
public:
  explicit ConfigError(const std::string & what) : Error("config", what, ExitCode::Config) {}
};

/// Operand shapes do not fit an operation. The message names the offending node.
class ShapeError : public Error
{
public:
  explicit ShapeError(const std::string & what) : Error("shape", what) {}
};

/// API misuse such as running backward before forward.
class UsageError : public Error
{
public:
  explicit UsageError(const std::string & what) : Error("usage", what) {}
};

class ParseError : public Error
{
public:
  ParseError(const std::string & what, std::size_t line = 0)
  : Error("parse", what, ExitCode::DataAlignment), line_(line)
  {
  }
  std::size_t line() const noexcept { return line_; }

private:
  std::size_t line_;
};

/// Input files or scenes do not match up (missing keys, too few scenes, ...).
class DataError : public Error
{
public:
  explicit DataError(const std::string & what) : Error("data", what, ExitCode::DataAlignment) {}
};

class CheckpointError : public Error
{
public:
  explicit CheckpointError(const std::string & what)
  : Error("checkpoint", what, ExitCode::Checkpoint)
  {
  }
};

/// A non-finite value appeared during a rollout or training.
class DivergenceError : public Error
{
public:
  explicit DivergenceError(const std::string & what)
  : Error("divergence", what, ExitCode::Divergence)
  {
  }
};

}  // namespace vista

#endif  // VISTA__COMMON__ERROR_HPP_

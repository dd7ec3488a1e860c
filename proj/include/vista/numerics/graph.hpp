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

#ifndef VISTA__NUMERICS__GRAPH_HPP_
#define VISTA__NUMERICS__GRAPH_HPP_

#include <functional>
#include <map>
#include <memory>
#include <string>

#include "vista/common/error.hpp"
#include "vista/numerics/tape.hpp"

namespace vista::nn
{

/**
 * @brief A differentiable function with declared, named inputs.
 *
 * forward() validates names and shapes, records a fresh tape and returns the
 * named outputs; backward() then returns gradients for every input declared
 * with requires_grad.
 */
template <class Real>
class Graph
{
public:
  struct InputSpec
  {
    Shape shape;
    bool requires_grad = true;
  };
  using Vars = std::map<std::string, Var<Real>>;
  using Tensors = std::map<std::string, Tensor<Real>>;
  using Builder = std::function<Vars(Tape<Real> &, const Vars &)>;

  Graph(std::map<std::string, InputSpec> inputs, Builder builder)
  : specs_(std::move(inputs)), builder_(std::move(builder))
  {
  }

  Tensors forward(const Tensors & inputs)
  {
    for (const auto & [name, spec] : specs_) {
      auto it = inputs.find(name);
      if (it == inputs.end()) {
        throw ShapeError("graph: missing input '" + name + "'");
      }
      if (it->second.shape() != spec.shape) {
        throw ShapeError("graph: input '" + name + "' expects shape " + to_string(spec.shape) +
                         ", got " + to_string(it->second.shape()));
      }
    }
    for (const auto & [name, t] : inputs) {
      if (!specs_.count(name)) {
        throw ShapeError("graph: unexpected input '" + name + "'");
      }
    }
    tape_ = std::make_unique<Tape<Real>>();
    input_vars_.clear();
    for (const auto & [name, spec] : specs_) {
      input_vars_[name] = tape_->input(inputs.at(name), spec.requires_grad);
    }
    output_vars_ = builder_(*tape_, input_vars_);
    Tensors out;
    for (const auto & [name, v] : output_vars_) out.emplace(name, v.tensor());
    return out;
  }

  Tensors backward(const std::string & output, const Tensor<Real> & seed)
  {
    if (!tape_) {
      throw UsageError("graph: backward called before forward");
    }
    auto it = output_vars_.find(output);
    if (it == output_vars_.end()) {
      throw UsageError("graph: no output named '" + output + "'");
    }
    tape_->backward(it->second, seed);
    Tensors grads;
    for (const auto & [name, spec] : specs_) {
      if (spec.requires_grad) grads.emplace(name, tape_->grad(input_vars_.at(name)));
    }
    return grads;
  }

private:
  std::map<std::string, InputSpec> specs_;
  Builder builder_;
  std::unique_ptr<Tape<Real>> tape_;
  Vars input_vars_;
  Vars output_vars_;
};

}  // namespace vista::nn

#endif  // VISTA__NUMERICS__GRAPH_HPP_

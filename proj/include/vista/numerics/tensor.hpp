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

#ifndef VISTA__NUMERICS__TENSOR_HPP_
#define VISTA__NUMERICS__TENSOR_HPP_

#include <algorithm>
#include <cmath>
#include <cstddef>
#include <functional>
#include <numeric>
#include <span>
#include <sstream>
#include <string>
#include <utility>
#include <vector>

#include "vista/common/error.hpp"

namespace vista::nn
{

using Shape = std::vector<std::size_t>;

inline std::size_t numel(const Shape & shape)
{
  return std::accumulate(
    shape.begin(), shape.end(), std::size_t{1}, std::multiplies<std::size_t>());
}

inline std::string to_string(const Shape & shape)
{
  std::ostringstream os;
  os << '[';
  for (std::size_t i = 0; i < shape.size(); ++i) {
    os << (i ? "," : "") << shape[i];
  }
  os << ']';
  return os.str();
}

/**
 * @brief Dense row-major array with a shape. Plain value type.
 *
 * Extents are positive; data().size() == numel(shape()) at all times.
 */
template <class Real>
class Tensor
{
public:
  using value_type = Real;

  Tensor() = default;

  explicit Tensor(Shape shape, Real fill = Real(0)) : shape_(std::move(shape))
  {
    check_extents();
    data_.assign(numel(shape_), fill);
  }

  Tensor(Shape shape, std::vector<Real> data) : shape_(std::move(shape)), data_(std::move(data))
  {
    check_extents();
    if (data_.size() != numel(shape_)) {
      throw ShapeError(
        "tensor: data length " + std::to_string(data_.size()) + " does not match shape " +
        to_string(shape_));
    }
  }

  static Tensor scalar(Real v) { return Tensor(Shape{1}, std::vector<Real>{v}); }

  const Shape & shape() const noexcept { return shape_; }
  std::size_t rank() const noexcept { return shape_.size(); }
  std::size_t dim(std::size_t axis) const { return shape_.at(axis); }
  std::size_t size() const noexcept { return data_.size(); }
  bool empty() const noexcept { return data_.empty(); }

  std::span<Real> data() noexcept { return data_; }
  std::span<const Real> data() const noexcept { return data_; }
  std::vector<Real> & vec() noexcept { return data_; }
  const std::vector<Real> & vec() const noexcept { return data_; }

  Real & operator[](std::size_t i) { return data_[i]; }
  Real operator[](std::size_t i) const { return data_[i]; }

  /// 2-D access; the tensor must be rank 2.
  Real & at(std::size_t r, std::size_t c) { return data_[r * shape_[1] + c]; }
  Real at(std::size_t r, std::size_t c) const { return data_[r * shape_[1] + c]; }

  void fill(Real v) { std::fill(data_.begin(), data_.end(), v); }

  bool all_finite() const
  {
    return std::all_of(data_.begin(), data_.end(), [](Real v) { return std::isfinite(v); });
  }

  template <class Other>
  Tensor<Other> cast() const
  {
    std::vector<Other> out(data_.begin(), data_.end());
    return Tensor<Other>(shape_, std::move(out));
  }

  Tensor reshaped(Shape shape) const
  {
    if (numel(shape) != data_.size()) {
      throw ShapeError("reshape: " + to_string(shape_) + " -> " + to_string(shape));
    }
    return Tensor(std::move(shape), data_);
  }

  friend bool operator==(const Tensor & a, const Tensor & b)
  {
    return a.shape_ == b.shape_ && a.data_ == b.data_;
  }

private:
  void check_extents() const
  {
    for (auto e : shape_) {
      if (e == 0) {
        throw ShapeError("tensor: zero extent in shape " + to_string(shape_));
      }
    }
  }

  Shape shape_;
  std::vector<Real> data_;
};

}  // namespace vista::nn

#endif  // VISTA__NUMERICS__TENSOR_HPP_

/* Copyright 2026 The Sliceformer Authors. All Rights Reserved.

Licensed under the Apache License, Version 2.0 (the "License");
you may not use this file except in compliance with the License.
You may obtain a copy of the License at

    http://www.apache.org/licenses/LICENSE-2.0

Unless required by applicable law or agreed to in writing, software
distributed under the License is distributed on an "AS IS" BASIS,
WITHOUT WARRANTIES OR CONDITIONS OF ANY KIND, either express or implied.
See the License for the specific language governing permissions and
limitations under the License.
==============================================================================*/

#ifndef SLICEFORMER_TENSOR_HPP_
#define SLICEFORMER_TENSOR_HPP_

#include <cstddef>
#include <initializer_list>
#include <span>
#include <string>
#include <vector>

#include "sliceformer/alloc_tracker.hpp"

namespace sf {

using Shape = std::vector<std::size_t>;

std::string shape_to_string(const Shape& shape);
std::size_t shape_size(const Shape& shape);

// Dense double-precision array stored row-major: for a rank-2 tensor of
// shape {rows, cols}, element (r, c) lives at data()[r * cols + c]. A
// rank-0 tensor (shape {}) holds exactly one value.
//
// The gradient buffer is optional. It is allocated on first use and is
// always the same shape as the data; backward passes accumulate into it
// and zero_grad() resets it between steps.
class Tensor {
 public:
  Tensor() = default;
  explicit Tensor(Shape shape);
  Tensor(Shape shape, std::span<const double> values);
  Tensor(Shape shape, std::initializer_list<double> values);

  static Tensor zeros(Shape shape) { return Tensor(std::move(shape)); }
  static Tensor scalar(double value);
  static Tensor identity(std::size_t n);

  const Shape& shape() const { return shape_; }
  std::size_t rank() const { return shape_.size(); }
  std::size_t size() const { return data_.size(); }
  bool empty() const { return data_.empty(); }

  // Rank-2 accessors. A rank-1 tensor is viewed as a single row.
  std::size_t rows() const;
  std::size_t cols() const;

  std::span<double> data() { return data_; }
  std::span<const double> data() const { return data_; }
  double& operator[](std::size_t i) { return data_[i]; }
  double operator[](std::size_t i) const { return data_[i]; }
  double& at(std::size_t r, std::size_t c) { return data_[r * cols() + c]; }
  double at(std::size_t r, std::size_t c) const { return data_[r * cols() + c]; }
  double item() const;

  bool has_grad() const { return !grad_.empty() || data_.empty(); }
  std::span<double> grad();
  std::span<const double> grad() const { return grad_; }
  void zero_grad();
  void drop_grad() { Buffer().swap(grad_); }

  std::vector<double> to_vector() const { return {data_.begin(), data_.end()}; }

  // Same shape, copied values, no gradient.
  Tensor detached() const;

 private:
  Shape shape_;
  Buffer data_;
  Buffer grad_;
};

bool same_shape(const Tensor& a, const Tensor& b);

}  // namespace sf

#endif  // SLICEFORMER_TENSOR_HPP_

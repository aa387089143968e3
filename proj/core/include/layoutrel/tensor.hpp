// Copyright 2026 The LayoutRel Authors.
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

#ifndef LAYOUTREL_TENSOR_HPP_
#define LAYOUTREL_TENSOR_HPP_

#include <cstdint>
#include <vector>

#include "layoutrel/errors.hpp"

namespace layoutrel {

// Dense row-major tensor of 64-bit floats. Plain value type: copyable,
// movable, immutable by convention once handed to another component.
class Tensor {
 public:
  Tensor() = default;
  explicit Tensor(std::vector<int> shape);  // zero-filled
  Tensor(std::vector<int> shape, std::vector<double> data);

  static Tensor zeros(std::vector<int> shape) { return Tensor(std::move(shape)); }
  static Tensor full(std::vector<int> shape, double value);
  static Tensor ones(std::vector<int> shape) { return full(std::move(shape), 1.0); }
  static Tensor scalar(double value) { return Tensor({1}, {value}); }

  const std::vector<int>& shape() const { return shape_; }
  int rank() const { return static_cast<int>(shape_.size()); }
  std::int64_t size() const { return static_cast<std::int64_t>(data_.size()); }
  bool same_shape(const Tensor& other) const { return shape_ == other.shape_; }

  // 2-D accessors; ShapeError when the tensor is not a matrix. The rank
  // check is inline with a cold out-of-line throw so at() stays cheap in
  // inner loops.
  int rows() const {
    if (shape_.size() != 2) throw_not_matrix("rows");
    return shape_[0];
  }
  int cols() const {
    if (shape_.size() != 2) throw_not_matrix("cols");
    return shape_[1];
  }
  double& at(int r, int c) { return data_[static_cast<std::size_t>(r) * cols() + c]; }
  double at(int r, int c) const { return data_[static_cast<std::size_t>(r) * cols() + c]; }

  double* data() { return data_.data(); }
  const double* data() const { return data_.data(); }
  std::vector<double>& raw() { return data_; }
  const std::vector<double>& raw() const { return data_; }
  double& operator[](std::int64_t i) { return data_[static_cast<std::size_t>(i)]; }
  double operator[](std::int64_t i) const { return data_[static_cast<std::size_t>(i)]; }

  bool all_finite() const;
  double l2_norm() const;
  double item() const;  // value of a 1-element tensor

  // Same data, new shape; element count must match.
  Tensor reshaped(std::vector<int> shape) const;

  bool operator==(const Tensor& other) const {
    return shape_ == other.shape_ && data_ == other.data_;
  }

 private:
  [[noreturn]] void throw_not_matrix(const char* who) const;

  std::vector<int> shape_;
  std::vector<double> data_;
};

// Plain (non-differentiated) matrix kernels. The autodiff layer builds both
// its forward passes and its backward rules from these.
Tensor matmul(const Tensor& a, const Tensor& b);     // a: m x k, b: k x n
Tensor matmul_tn(const Tensor& a, const Tensor& b);  // a' * b with a: k x m
Tensor matmul_nt(const Tensor& a, const Tensor& b);  // a * b' with b: n x k
Tensor transposed(const Tensor& a);

Tensor add(const Tensor& a, const Tensor& b);
Tensor sub(const Tensor& a, const Tensor& b);
Tensor mul(const Tensor& a, const Tensor& b);
Tensor scale(const Tensor& a, double c);

void accumulate(Tensor& into, const Tensor& delta);  // into += delta

}  // namespace layoutrel

#endif  // LAYOUTREL_TENSOR_HPP_

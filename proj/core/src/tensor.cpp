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

#include "layoutrel/tensor.hpp"

#include <cmath>
#include <numeric>
#include <string>

#ifdef LAYOUTREL_HAVE_EIGEN
#include <Eigen/Dense>
#endif

namespace layoutrel {

namespace {

std::int64_t numel(const std::vector<int>& shape) {
  std::int64_t n = 1;
  for (const int d : shape) {
    if (d <= 0) throw ShapeError("tensor dimension must be positive, got " + std::to_string(d));
    n *= d;
  }
  return n;
}

void require_matrix(const Tensor& t, const char* who) {
  if (t.rank() != 2) {
    throw ShapeError(std::string(who) + ": expected a rank-2 tensor, got rank " +
                     std::to_string(t.rank()));
  }
}

void require_same_shape(const Tensor& a, const Tensor& b, const char* who) {
  if (!a.same_shape(b)) throw ShapeError(std::string(who) + ": shape mismatch");
}

#ifdef LAYOUTREL_HAVE_EIGEN
using MatRM = Eigen::Matrix<double, Eigen::Dynamic, Eigen::Dynamic, Eigen::RowMajor>;
using ConstMap = Eigen::Map<const MatRM>;
using MutMap = Eigen::Map<MatRM>;
#endif

}  // namespace

Tensor::Tensor(std::vector<int> shape)
    : shape_(std::move(shape)), data_(static_cast<std::size_t>(numel(shape_)), 0.0) {}

Tensor::Tensor(std::vector<int> shape, std::vector<double> data)
    : shape_(std::move(shape)), data_(std::move(data)) {
  if (numel(shape_) != static_cast<std::int64_t>(data_.size())) {
    throw ShapeError("tensor data length does not match shape");
  }
}

Tensor Tensor::full(std::vector<int> shape, double value) {
  Tensor t(std::move(shape));
  for (double& x : t.data_) x = value;
  return t;
}

void Tensor::throw_not_matrix(const char* who) const {
  throw ShapeError(std::string(who) + ": expected a rank-2 tensor, got rank " +
                   std::to_string(rank()));
}

bool Tensor::all_finite() const {
  for (const double x : data_) {
    if (!std::isfinite(x)) return false;
  }
  return true;
}

double Tensor::l2_norm() const {
  double s = 0.0;
  for (const double x : data_) s += x * x;
  return std::sqrt(s);
}

double Tensor::item() const {
  if (size() != 1) throw ShapeError("item(): tensor has " + std::to_string(size()) + " elements");
  return data_[0];
}

Tensor Tensor::reshaped(std::vector<int> shape) const {
  if (numel(shape) != size()) throw ShapeError("reshaped(): element count mismatch");
  return Tensor(std::move(shape), data_);
}

Tensor matmul(const Tensor& a, const Tensor& b) {
  require_matrix(a, "matmul");
  require_matrix(b, "matmul");
  if (a.cols() != b.rows()) {
    throw ShapeError("matmul: inner dimensions differ (" + std::to_string(a.cols()) + " vs " +
                     std::to_string(b.rows()) + ")");
  }
  Tensor c({a.rows(), b.cols()});
#ifdef LAYOUTREL_HAVE_EIGEN
  MutMap(c.data(), c.rows(), c.cols()).noalias() =
      ConstMap(a.data(), a.rows(), a.cols()) * ConstMap(b.data(), b.rows(), b.cols());
#else
  const int m = a.rows(), k = a.cols(), n = b.cols();
  for (int i = 0; i < m; ++i) {
    for (int p = 0; p < k; ++p) {
      const double av = a.at(i, p);
      for (int j = 0; j < n; ++j) c.at(i, j) += av * b.at(p, j);
    }
  }
#endif
  return c;
}

Tensor matmul_tn(const Tensor& a, const Tensor& b) {
  require_matrix(a, "matmul_tn");
  require_matrix(b, "matmul_tn");
  if (a.rows() != b.rows()) throw ShapeError("matmul_tn: inner dimensions differ");
  Tensor c({a.cols(), b.cols()});
#ifdef LAYOUTREL_HAVE_EIGEN
  MutMap(c.data(), c.rows(), c.cols()).noalias() =
      ConstMap(a.data(), a.rows(), a.cols()).transpose() * ConstMap(b.data(), b.rows(), b.cols());
#else
  const int k = a.rows(), m = a.cols(), n = b.cols();
  for (int p = 0; p < k; ++p) {
    for (int i = 0; i < m; ++i) {
      const double av = a.at(p, i);
      for (int j = 0; j < n; ++j) c.at(i, j) += av * b.at(p, j);
    }
  }
#endif
  return c;
}

Tensor matmul_nt(const Tensor& a, const Tensor& b) {
  require_matrix(a, "matmul_nt");
  require_matrix(b, "matmul_nt");
  if (a.cols() != b.cols()) throw ShapeError("matmul_nt: inner dimensions differ");
  Tensor c({a.rows(), b.rows()});
#ifdef LAYOUTREL_HAVE_EIGEN
  MutMap(c.data(), c.rows(), c.cols()).noalias() =
      ConstMap(a.data(), a.rows(), a.cols()) * ConstMap(b.data(), b.rows(), b.cols()).transpose();
#else
  const int m = a.rows(), k = a.cols(), n = b.rows();
  for (int i = 0; i < m; ++i) {
    for (int j = 0; j < n; ++j) {
      double s = 0.0;
      for (int p = 0; p < k; ++p) s += a.at(i, p) * b.at(j, p);
      c.at(i, j) = s;
    }
  }
#endif
  return c;
}

Tensor transposed(const Tensor& a) {
  require_matrix(a, "transposed");
  Tensor t({a.cols(), a.rows()});
  for (int i = 0; i < a.rows(); ++i) {
    for (int j = 0; j < a.cols(); ++j) t.at(j, i) = a.at(i, j);
  }
  return t;
}

Tensor add(const Tensor& a, const Tensor& b) {
  require_same_shape(a, b, "add");
  Tensor c = a;
  for (std::int64_t i = 0; i < c.size(); ++i) c[i] += b[i];
  return c;
}

Tensor sub(const Tensor& a, const Tensor& b) {
  require_same_shape(a, b, "sub");
  Tensor c = a;
  for (std::int64_t i = 0; i < c.size(); ++i) c[i] -= b[i];
  return c;
}

Tensor mul(const Tensor& a, const Tensor& b) {
  require_same_shape(a, b, "mul");
  Tensor c = a;
  for (std::int64_t i = 0; i < c.size(); ++i) c[i] *= b[i];
  return c;
}

Tensor scale(const Tensor& a, double c) {
  Tensor r = a;
  for (std::int64_t i = 0; i < r.size(); ++i) r[i] *= c;
  return r;
}

void accumulate(Tensor& into, const Tensor& delta) {
  require_same_shape(into, delta, "accumulate");
  for (std::int64_t i = 0; i < into.size(); ++i) into[i] += delta[i];
}

}  // namespace layoutrel

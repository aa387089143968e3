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
//
// Reverse-mode automatic differentiation over dense double tensors.
//
// A Tape records one forward computation as a flat list of nodes; node ids
// grow monotonically, so walking ids in descending order is a valid reverse
// topological order. backward() may be called several times on the same tape;
// leaf gradients accumulate across calls until zero_grad().

#ifndef LAYOUTREL_AUTODIFF_HPP_
#define LAYOUTREL_AUTODIFF_HPP_

#include <functional>
#include <memory>
#include <vector>

#include "layoutrel/tensor.hpp"

namespace layoutrel {

class Tape;

struct Node {
  Tensor value;
  Tensor grad;
  bool requires_grad = false;
  bool is_leaf = false;
  std::vector<int> parents;
  // Reads this node's grad and accumulates into the parents' grads.
  std::function<void(Node&)> backward;

  explicit Node(Tensor v) : value(std::move(v)), grad(value.shape()) {}
};

// Lightweight handle into a tape. Copyable; valid as long as the tape lives.
class Var {
 public:
  Var() = default;
  Var(Tape* tape, int id) : tape_(tape), id_(id) {}

  const Tensor& value() const;
  const Tensor& grad() const;
  const std::vector<int>& shape() const { return value().shape(); }
  int rows() const { return value().rows(); }
  int cols() const { return value().cols(); }
  int id() const { return id_; }
  Tape* tape() const { return tape_; }
  bool valid() const { return tape_ != nullptr; }

 private:
  Tape* tape_ = nullptr;
  int id_ = -1;
};

class Tape {
 public:
  Tape() = default;
  Tape(const Tape&) = delete;
  Tape& operator=(const Tape&) = delete;

  // Differentiable input node. The tensor is copied onto the tape.
  Var leaf(Tensor value, bool requires_grad = true);
  // Non-differentiable input (targets, masks, precomputed features).
  Var constant(Tensor value) { return leaf(std::move(value), false); }

  // Accumulates d(root)/d(leaf) into every reachable leaf's grad. The root
  // must be a scalar. Intermediate grads are reset per call, leaf grads are
  // not, so successive calls sum the gradients of several losses.
  void backward(const Var& root);

  void zero_grad();
  std::size_t size() const { return nodes_.size(); }

  Node& node(int id) { return *nodes_[static_cast<std::size_t>(id)]; }
  const Node& node(int id) const { return *nodes_[static_cast<std::size_t>(id)]; }

  int emplace(Tensor value, bool requires_grad, std::vector<int> parents,
              std::function<void(Node&)> backward);

 private:
  std::vector<std::unique_ptr<Node>> nodes_;
};

// Elementwise arithmetic. Shapes must match exactly (no broadcasting).
Var add(const Var& a, const Var& b);
Var sub(const Var& a, const Var& b);
Var mul(const Var& a, const Var& b);
Var scale(const Var& a, double c);
inline Var operator+(const Var& a, const Var& b) { return add(a, b); }
inline Var operator-(const Var& a, const Var& b) { return sub(a, b); }
inline Var operator*(const Var& a, const Var& b) { return mul(a, b); }

// Elementwise product with a fixed tensor (masking, constant weighting).
Var mul_const(const Var& a, const Tensor& c);

// Matrix product of two rank-2 vars.
Var matmul(const Var& a, const Var& b);
Var transpose(const Var& a);

// Same data in a new shape; element count must match.
Var reshape(const Var& x, std::vector<int> shape);

// Adds a 1 x d row vector to every row of an n x d matrix.
Var add_rowvec(const Var& a, const Var& v);

Var gelu(const Var& x);
Var sigmoid(const Var& x);

// Row-wise layer normalization with learned gain and bias (1 x d each).
Var layer_norm(const Var& x, const Var& gamma, const Var& beta, double eps = 1e-5);

// Row-wise softmax of x / tau, stabilized by max subtraction.
Var softmax_rows(const Var& x, double tau = 1.0);
// Same, but entries where mask (n x d of 0/1) is zero come out exactly 0 and
// receive no gradient. A row with no valid entry is an error.
Var masked_softmax_rows(const Var& x, const Tensor& mask, double tau = 1.0);

// Identity in the forward pass; registers no parents, so the backward walk
// never enters the subgraph behind x and its leaves get exact zeros.
Var stop_gradient(const Var& x);

// Sum of all entries, as a 1-element tensor.
Var sum(const Var& x);

// Mean squared error over the rows selected by mask (length n, 0/1), averaged
// over selected elements: sum_i mask_i * |pred_i - target_i|^2 / (M * d)
// where M is the number of selected rows. Rank-1 inputs are treated as n x 1.
Var masked_mse(const Var& pred, const Var& target, const Tensor& mask);

// Sum of per-row weighted squared errors: sum_i w_i * |pred_i - target_i|^2.
// With suitable weights this reproduces a mean of several per-block MSEs in
// one call, which keeps padded-batch losses identical to per-item losses.
Var weighted_sse(const Var& pred, const Var& target, const Tensor& row_weights);

// Output row k is x[indices[k]]. Backward scatter-adds into x.
Var gather_rows(const Var& x, const std::vector<int>& indices);

// Columns [c0, c1) of a rank-2 var.
Var slice_cols(const Var& x, int c0, int c1);
// Rows [r0, r1) of a rank-2 var.
Var slice_rows(const Var& x, int r0, int r1);

Var concat_cols(const Var& a, const Var& b);
Var concat_rows(const std::vector<Var>& parts);

// Appends zero rows (or columns) up to the requested total.
Var pad_rows(const Var& x, int total_rows);
Var pad_cols(const Var& x, int total_cols);

// All ordered row pairs of an N x d matrix: output is N^2 x 2d with
// row i*N + j equal to [m_i, m_j].
Var pair_concat(const Var& m);

// Cross entropy of row-wise softmax against integer targets, averaged over
// the rows with nonzero weight. Weights length n; all-zero weights error.
Var softmax_cross_entropy(const Var& logits, const std::vector<int>& targets,
                          const std::vector<double>& row_weights);

// Numerically stable binary cross entropy with logits, elementwise weights,
// normalized by the total weight.
Var bce_with_logits(const Var& logits, const Tensor& targets, const Tensor& weights);

}  // namespace layoutrel

#endif  // LAYOUTREL_AUTODIFF_HPP_

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

#include "layoutrel/autodiff.hpp"

#include <cmath>
#include <vector>

#include "doctest.h"
#include "helpers.hpp"
#include "layoutrel/rng.hpp"

using namespace layoutrel;
using layoutrel::testing::grad_check;
using layoutrel::testing::random_tensor;
using layoutrel::testing::ScalarFn;

namespace {

constexpr double kTol = 1e-4;

void expect_grads_match(const ScalarFn& fn, std::vector<Tensor> inputs) {
  const auto res = grad_check(fn, std::move(inputs));
  INFO("worst entry: ", res.worst);
  CHECK(res.max_rel_err < kTol);
}

}  // namespace

TEST_CASE("gradients: elementwise ops") {
  Rng rng(11);
  expect_grads_match(
      [](Tape&, const std::vector<Var>& v) { return sum(mul(add(v[0], v[1]), sub(v[0], v[1]))); },
      {random_tensor({3, 4}, rng), random_tensor({3, 4}, rng)});
  expect_grads_match(
      [](Tape&, const std::vector<Var>& v) { return sum(scale(mul(v[0], v[0]), 0.5)); },
      {random_tensor({5}, rng)});
}

TEST_CASE("gradients: matmul and transpose") {
  Rng rng(12);
  expect_grads_match(
      [](Tape&, const std::vector<Var>& v) { return sum(matmul(v[0], v[1])); },
      {random_tensor({3, 5}, rng), random_tensor({5, 2}, rng)});
  expect_grads_match(
      [](Tape&, const std::vector<Var>& v) {
        return sum(mul(matmul(transpose(v[0]), v[0]), matmul(transpose(v[0]), v[0])));
      },
      {random_tensor({4, 3}, rng)});
}

TEST_CASE("gradients: bias add, gelu, sigmoid") {
  Rng rng(13);
  expect_grads_match(
      [](Tape&, const std::vector<Var>& v) { return sum(gelu(add_rowvec(v[0], v[1]))); },
      {random_tensor({4, 3}, rng, -2.0, 2.0), random_tensor({3}, rng)});
  expect_grads_match(
      [](Tape&, const std::vector<Var>& v) { return sum(mul(sigmoid(v[0]), sigmoid(v[0]))); },
      {random_tensor({2, 6}, rng, -3.0, 3.0)});
}

TEST_CASE("gradients: layer norm") {
  Rng rng(14);
  expect_grads_match(
      [](Tape&, const std::vector<Var>& v) {
        return sum(mul(layer_norm(v[0], v[1], v[2]), layer_norm(v[0], v[1], v[2])));
      },
      {random_tensor({3, 6}, rng), random_tensor({6}, rng, 0.5, 1.5), random_tensor({6}, rng)});
}

TEST_CASE("gradients: softmax rows, plain and masked") {
  Rng rng(15);
  Tensor weights = random_tensor({3, 5}, rng);
  expect_grads_match(
      [weights](Tape&, const std::vector<Var>& v) {
        return sum(mul_const(softmax_rows(v[0], 0.5), weights));
      },
      {random_tensor({3, 5}, rng)});

  Tensor mask({3, 5});
  for (int i = 0; i < 3; ++i) {
    for (int j = 0; j < 5; ++j) mask.at(i, j) = (i + j) % 2 == 0 || j < 2 ? 1.0 : 0.0;
  }
  expect_grads_match(
      [weights, mask](Tape&, const std::vector<Var>& v) {
        return sum(mul_const(masked_softmax_rows(v[0], mask, 0.7), weights));
      },
      {random_tensor({3, 5}, rng)});
}

TEST_CASE("masked softmax zeroes masked entries exactly") {
  Tape tape;
  Var x = tape.leaf(Tensor({2, 3}, {5.0, -2.0, 100.0, 1.0, 1.0, 1.0}));
  Tensor mask({2, 3}, {1, 1, 0, 0, 1, 1});
  Var s = masked_softmax_rows(x, mask);
  CHECK(s.value().at(0, 2) == 0.0);
  CHECK(s.value().at(1, 0) == 0.0);
  CHECK(s.value().at(0, 0) + s.value().at(0, 1) == doctest::Approx(1.0));
  CHECK(s.value().at(1, 1) == doctest::Approx(0.5));

  Tensor empty_row({1, 2}, {0, 0});
  Var y = tape.leaf(Tensor({1, 2}, {1.0, 2.0}));
  CHECK_THROWS_AS(masked_softmax_rows(y, empty_row), DegenerateInputError);
}

TEST_CASE("gradients: masked mse and weighted sse") {
  Rng rng(16);
  Tensor mask({4}, {1, 0, 1, 1});
  expect_grads_match(
      [mask](Tape&, const std::vector<Var>& v) { return masked_mse(v[0], v[1], mask); },
      {random_tensor({4, 3}, rng), random_tensor({4, 3}, rng)});

  Tensor w({4}, {0.25, 0.0, 1.5, 0.1});
  expect_grads_match(
      [w](Tape&, const std::vector<Var>& v) { return weighted_sse(v[0], v[1], w); },
      {random_tensor({4, 3}, rng), random_tensor({4, 3}, rng)});

  // Rank-1 inputs behave as single-column matrices.
  Tensor m1({3}, {1, 1, 0});
  expect_grads_match(
      [m1](Tape&, const std::vector<Var>& v) { return masked_mse(v[0], v[1], m1); },
      {random_tensor({3}, rng), random_tensor({3}, rng)});

  Tape tape;
  Var a = tape.leaf(Tensor({2, 2}));
  Var b = tape.leaf(Tensor({2, 2}));
  CHECK_THROWS_AS(masked_mse(a, b, Tensor({2})), DegenerateInputError);
}

TEST_CASE("masked mse value matches a scalar reference loop") {
  Rng rng(17);
  Tensor p = random_tensor({5, 4}, rng);
  Tensor q = random_tensor({5, 4}, rng);
  Tensor mask({5}, {1, 0, 1, 0, 1});

  double expected = 0.0;
  int kept = 0;
  for (int i = 0; i < 5; ++i) {
    if (mask[i] == 0.0) continue;
    ++kept;
    for (int j = 0; j < 4; ++j) {
      const double e = p.at(i, j) - q.at(i, j);
      expected += e * e;
    }
  }
  expected /= kept * 4;

  Tape tape;
  Var loss = masked_mse(tape.leaf(p), tape.leaf(q), mask);
  CHECK(loss.value().item() == doctest::Approx(expected).epsilon(1e-12));
}

TEST_CASE("gradients: gather, slice, concat, pad") {
  Rng rng(18);
  std::vector<int> idx{2, 0, 2, 1};  // repeated index exercises scatter-add
  expect_grads_match(
      [idx](Tape&, const std::vector<Var>& v) {
        return sum(mul(gather_rows(v[0], idx), gather_rows(v[0], idx)));
      },
      {random_tensor({3, 4}, rng)});
  expect_grads_match(
      [](Tape&, const std::vector<Var>& v) {
        Var s = slice_cols(v[0], 1, 3);
        return sum(mul(s, s));
      },
      {random_tensor({3, 4}, rng)});
  expect_grads_match(
      [](Tape&, const std::vector<Var>& v) {
        Var s = slice_rows(v[0], 0, 2);
        return sum(mul(s, s));
      },
      {random_tensor({3, 4}, rng)});
  expect_grads_match(
      [](Tape&, const std::vector<Var>& v) {
        Var c = concat_cols(v[0], v[1]);
        return sum(mul(c, c));
      },
      {random_tensor({3, 2}, rng), random_tensor({3, 4}, rng)});
  expect_grads_match(
      [](Tape&, const std::vector<Var>& v) {
        Var c = concat_rows({v[0], v[1], v[0]});
        return sum(mul(c, c));
      },
      {random_tensor({2, 3}, rng), random_tensor({4, 3}, rng)});
  expect_grads_match(
      [](Tape&, const std::vector<Var>& v) {
        Var p = pad_rows(v[0], 5);
        Var q = pad_cols(p, 6);
        return sum(mul(q, q));
      },
      {random_tensor({3, 4}, rng)});
}

TEST_CASE("gradients: pair concat covers all ordered pairs") {
  Rng rng(19);
  Tensor m = random_tensor({3, 2}, rng);
  Tape tape;
  Var v = tape.leaf(m);
  Var pc = pair_concat(v);
  REQUIRE(pc.value().rows() == 9);
  REQUIRE(pc.value().cols() == 4);
  for (int i = 0; i < 3; ++i) {
    for (int j = 0; j < 3; ++j) {
      for (int k = 0; k < 2; ++k) {
        CHECK(pc.value().at(i * 3 + j, k) == m.at(i, k));
        CHECK(pc.value().at(i * 3 + j, 2 + k) == m.at(j, k));
      }
    }
  }
  Tensor w = random_tensor({9, 4}, rng);
  expect_grads_match(
      [w](Tape&, const std::vector<Var>& v2) {
        return sum(mul_const(pair_concat(v2[0]), w));
      },
      {m});
}

TEST_CASE("gradients: softmax cross entropy") {
  Rng rng(20);
  std::vector<int> targets{2, 0, 3, 1};
  std::vector<double> weights{1.0, 0.0, 1.0, 2.0};
  expect_grads_match(
      [targets, weights](Tape&, const std::vector<Var>& v) {
        return softmax_cross_entropy(v[0], targets, weights);
      },
      {random_tensor({4, 5}, rng, -2.0, 2.0)});

  // Uniform logits must give exactly log(num_classes).
  Tape tape;
  Var logits = tape.leaf(Tensor({2, 8}));
  Var ce = softmax_cross_entropy(logits, {0, 5}, {1.0, 1.0});
  CHECK(ce.value().item() == doctest::Approx(std::log(8.0)).epsilon(1e-12));

  CHECK_THROWS_AS(softmax_cross_entropy(logits, {0, 5}, {0.0, 0.0}), DegenerateInputError);
}

TEST_CASE("gradients: binary cross entropy with logits") {
  Rng rng(21);
  Tensor targets({3, 3});
  Tensor weights({3, 3});
  for (std::int64_t i = 0; i < 9; ++i) {
    targets[i] = rng.coin() ? 1.0 : 0.0;
    weights[i] = rng.coin() ? rng.uniform(0.5, 3.0) : 0.0;
  }
  if (weights.l2_norm() == 0.0) weights[0] = 1.0;
  expect_grads_match(
      [targets, weights](Tape&, const std::vector<Var>& v) {
        return bce_with_logits(v[0], targets, weights);
      },
      {random_tensor({3, 3}, rng, -4.0, 4.0)});

  // Large logits must not overflow.
  Tape tape;
  Var big = tape.leaf(Tensor({1, 2}, {700.0, -700.0}));
  Var loss = bce_with_logits(big, Tensor({1, 2}, {1.0, 0.0}), Tensor::ones({1, 2}));
  CHECK(loss.value().item() == doctest::Approx(0.0));
  tape.backward(loss);
  CHECK(big.grad().all_finite());
}

TEST_CASE("stop gradient blocks the backward walk entirely") {
  Rng rng(22);
  Tape tape;
  Var w = tape.leaf(random_tensor({3, 3}, rng));
  Var x = tape.leaf(random_tensor({3, 3}, rng));
  Var frozen = stop_gradient(matmul(w, x));
  Var live = matmul(w, x);
  Var loss = sum(mul(live, frozen));
  tape.backward(loss);

  // The frozen branch contributes values but no gradient paths, so w and x
  // receive exactly the gradient of the live branch only.
  Tape ref;
  Var w2 = ref.leaf(w.value());
  Var x2 = ref.leaf(x.value());
  Var live2 = matmul(w2, x2);
  Var loss2 = sum(mul_const(live2, frozen.value()));
  ref.backward(loss2);
  CHECK(w.grad() == w2.grad());
  CHECK(x.grad() == x2.grad());

  // A loss made only of stopped values reaches no leaf at all.
  Tape t3;
  Var a = t3.leaf(random_tensor({2, 2}, rng));
  Var s = sum(stop_gradient(mul(a, a)));
  t3.backward(s);
  for (std::int64_t i = 0; i < a.grad().size(); ++i) CHECK(a.grad()[i] == 0.0);
}

TEST_CASE("backward accumulates across calls until zero_grad") {
  Tape tape;
  Var x = tape.leaf(Tensor({2}, {3.0, -1.0}));
  Var loss = sum(mul(x, x));
  tape.backward(loss);
  CHECK(x.grad()[0] == doctest::Approx(6.0));
  tape.backward(loss);
  CHECK(x.grad()[0] == doctest::Approx(12.0));
  CHECK(x.grad()[1] == doctest::Approx(-4.0));
  tape.zero_grad();
  CHECK(x.grad()[0] == 0.0);
  tape.backward(loss);
  CHECK(x.grad()[0] == doctest::Approx(6.0));
}

TEST_CASE("backward on two losses sums their gradients") {
  Rng rng(23);
  Tensor xv = random_tensor({3, 3}, rng);
  Tape tape;
  Var x = tape.leaf(xv);
  Var l1 = sum(mul(x, x));
  Var l2 = sum(matmul(x, x));
  tape.backward(l1);
  tape.backward(l2);

  Tape ref;
  Var y = ref.leaf(xv);
  ref.backward(add(sum(mul(y, y)), sum(matmul(y, y))));
  for (std::int64_t i = 0; i < xv.size(); ++i) {
    CHECK(x.grad()[i] == doctest::Approx(y.grad()[i]).epsilon(1e-12));
  }
}

TEST_CASE("composite network gradient check") {
  // A miniature of the real model: affine, layer norm, gelu, affine, softmax,
  // then a weighted squared loss. One finite-difference pass over everything.
  Rng rng(24);
  const int n = 4, d = 5, h = 3;
  Tensor target = random_tensor({n, h}, rng);
  Tensor row_w({n}, {0.5, 0.25, 0.0, 1.0});
  expect_grads_match(
      [target, row_w](Tape& t, const std::vector<Var>& v) {
        Var z = layer_norm(add_rowvec(matmul(v[0], v[1]), v[2]), v[3], v[4]);
        Var hdn = gelu(matmul(z, v[5]));
        Var out = softmax_rows(hdn, 0.5);
        return weighted_sse(out, t.constant(target), row_w);
      },
      {random_tensor({n, d}, rng), random_tensor({d, d}, rng), random_tensor({d}, rng),
       random_tensor({d}, rng, 0.5, 1.5), random_tensor({d}, rng), random_tensor({d, h}, rng)});
}

TEST_CASE("reshape keeps data and routes gradients through unchanged") {
  Rng rng(31);
  Tape tape;
  const Tensor x = random_tensor({2, 6}, rng);
  const Var v = tape.leaf(x);
  const Var r = reshape(v, {3, 4});
  CHECK(r.value().shape() == std::vector<int>{3, 4});
  for (std::int64_t i = 0; i < x.size(); ++i) CHECK(r.value()[i] == x[i]);
  CHECK_THROWS_AS(reshape(v, {5, 2}), ShapeError);

  expect_grads_match(
      [](Tape&, const std::vector<Var>& v) {
        const Var r = reshape(v[0], {4, 3});
        return sum(mul(matmul(r, transpose(r)), matmul(r, transpose(r))));
      },
      {random_tensor({2, 6}, rng)});
}

TEST_CASE("autodiff error handling") {
  Tape a, b;
  Var x = a.leaf(Tensor({2, 2}));
  Var y = b.leaf(Tensor({2, 2}));
  CHECK_THROWS_AS(add(x, y), StateError);
  CHECK_THROWS_AS(matmul(x, a.leaf(Tensor({3, 2}))), ShapeError);
  CHECK_THROWS_AS(a.backward(x), ShapeError);  // non-scalar root
  CHECK_THROWS_AS(softmax_rows(x, 0.0), ParamError);
  CHECK_THROWS_AS(slice_cols(x, 1, 1), ShapeError);
  CHECK_THROWS_AS(gather_rows(x, {5}), ShapeError);
}

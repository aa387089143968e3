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
// Shared test utilities. The finite-difference checker here is the oracle
// for every backward rule: it only exercises forward evaluations, so it is
// independent of the gradient code it is judging.

#ifndef LAYOUTREL_TESTS_HELPERS_HPP_
#define LAYOUTREL_TESTS_HELPERS_HPP_

#include <algorithm>
#include <cmath>
#include <filesystem>
#include <functional>
#include <string>
#include <vector>

#include "layoutrel/autodiff.hpp"
#include "layoutrel/rng.hpp"
#include "layoutrel/tensor.hpp"

namespace layoutrel::testing {

// Builds a scalar loss from leaves created on the given tape, one per input
// tensor, in order. Called many times with perturbed inputs.
using ScalarFn = std::function<Var(Tape&, const std::vector<Var>&)>;

struct GradCheckResult {
  double max_rel_err = 0.0;
  double max_abs_err = 0.0;
  std::string worst;  // "param 2, elem 17" style location of the worst entry
};

inline double eval_scalar(const ScalarFn& fn, const std::vector<Tensor>& inputs) {
  Tape tape;
  std::vector<Var> leaves;
  leaves.reserve(inputs.size());
  for (const Tensor& t : inputs) leaves.push_back(tape.leaf(t, /*requires_grad=*/false));
  return fn(tape, leaves).value().item();
}

// Central finite differences against reverse-mode gradients. Relative error
// uses an absolute floor so near-zero entries are compared absolutely.
inline GradCheckResult grad_check(const ScalarFn& fn, std::vector<Tensor> inputs,
                                  double step = 1e-5, double floor = 1e-8) {
  Tape tape;
  std::vector<Var> leaves;
  leaves.reserve(inputs.size());
  for (const Tensor& t : inputs) leaves.push_back(tape.leaf(t, /*requires_grad=*/true));
  tape.backward(fn(tape, leaves));

  GradCheckResult res;
  for (std::size_t p = 0; p < inputs.size(); ++p) {
    for (std::int64_t i = 0; i < inputs[p].size(); ++i) {
      const double saved = inputs[p][i];
      inputs[p][i] = saved + step;
      const double fp = eval_scalar(fn, inputs);
      inputs[p][i] = saved - step;
      const double fm = eval_scalar(fn, inputs);
      inputs[p][i] = saved;

      const double fd = (fp - fm) / (2.0 * step);
      const double bp = leaves[p].grad()[i];
      const double abs_err = std::abs(fd - bp);
      const double rel = abs_err / std::max({std::abs(fd), std::abs(bp), floor});
      if (rel > res.max_rel_err) {
        res.max_rel_err = rel;
        res.max_abs_err = abs_err;
        res.worst = "param " + std::to_string(p) + ", elem " + std::to_string(i) +
                    " (fd=" + std::to_string(fd) + ", ad=" + std::to_string(bp) + ")";
      }
    }
  }
  return res;
}

inline Tensor random_tensor(std::vector<int> shape, Rng& rng, double lo = -1.0, double hi = 1.0) {
  Tensor t(std::move(shape));
  for (std::int64_t i = 0; i < t.size(); ++i) t[i] = rng.uniform(lo, hi);
  return t;
}

// Scratch file location shared by the I/O tests; unique per name, reused
// across runs.
inline std::string temp_path(const std::string& name) {
  return (std::filesystem::temp_directory_path() / ("layoutrel_test_" + name)).string();
}

}  // namespace layoutrel::testing

#endif  // LAYOUTREL_TESTS_HELPERS_HPP_

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

#include <algorithm>
#include <cmath>
#include <string>

namespace layoutrel {

namespace {

constexpr double kInvSqrt2 = 0.7071067811865475244;
constexpr double kInvSqrt2Pi = 0.3989422804014326779;

Tape* same_tape(const Var& a, const Var& b, const char* who) {
  if (!a.valid() || !b.valid()) throw StateError(std::string(who) + ": unbound var");
  if (a.tape() != b.tape()) throw StateError(std::string(who) + ": operands live on different tapes");
  return a.tape();
}

Tape* own_tape(const Var& a, const char* who) {
  if (!a.valid()) throw StateError(std::string(who) + ": unbound var");
  return a.tape();
}

const Tensor& val(const Var& v) { return v.value(); }

void require_matrix(const Tensor& t, const char* who) {
  if (t.rank() != 2) throw ShapeError(std::string(who) + ": expected a rank-2 tensor");
}

double stable_sigmoid(double z) {
  if (z >= 0.0) return 1.0 / (1.0 + std::exp(-z));
  const double e = std::exp(z);
  return e / (1.0 + e);
}

}  // namespace

const Tensor& Var::value() const { return tape_->node(id_).value; }
const Tensor& Var::grad() const { return tape_->node(id_).grad; }

int Tape::emplace(Tensor value, bool requires_grad, std::vector<int> parents,
                  std::function<void(Node&)> backward) {
  auto n = std::make_unique<Node>(std::move(value));
  n->requires_grad = requires_grad;
  n->is_leaf = parents.empty() && !backward;
  n->parents = std::move(parents);
  n->backward = std::move(backward);
  nodes_.push_back(std::move(n));
  return static_cast<int>(nodes_.size()) - 1;
}

Var Tape::leaf(Tensor value, bool requires_grad) {
  return Var(this, emplace(std::move(value), requires_grad, {}, nullptr));
}

void Tape::backward(const Var& root) {
  if (!root.valid() || root.tape() != this) throw StateError("backward: root not on this tape");
  Node& r = node(root.id());
  if (r.value.size() != 1) throw ShapeError("backward: root must be a scalar");
  if (!r.requires_grad) return;

  // Mark everything the root depends on.
  std::vector<char> reach(nodes_.size(), 0);
  std::vector<int> stack{root.id()};
  reach[static_cast<std::size_t>(root.id())] = 1;
  while (!stack.empty()) {
    const int id = stack.back();
    stack.pop_back();
    for (const int p : node(id).parents) {
      if (!reach[static_cast<std::size_t>(p)]) {
        reach[static_cast<std::size_t>(p)] = 1;
        stack.push_back(p);
      }
    }
  }

  // Intermediate grads are per-call scratch; leaf grads persist across calls.
  for (std::size_t i = 0; i < nodes_.size(); ++i) {
    if (reach[i] && !nodes_[i]->is_leaf) {
      std::fill(nodes_[i]->grad.raw().begin(), nodes_[i]->grad.raw().end(), 0.0);
    }
  }
  r.grad[0] += 1.0;

  for (int id = root.id(); id >= 0; --id) {
    Node& n = node(id);
    if (!reach[static_cast<std::size_t>(id)] || !n.requires_grad || !n.backward) continue;
    n.backward(n);
  }
}

void Tape::zero_grad() {
  for (auto& n : nodes_) std::fill(n->grad.raw().begin(), n->grad.raw().end(), 0.0);
}

Var add(const Var& a, const Var& b) {
  Tape* t = same_tape(a, b, "add");
  Node* pa = &t->node(a.id());
  Node* pb = &t->node(b.id());
  const bool req = pa->requires_grad || pb->requires_grad;
  const int id = t->emplace(layoutrel::add(val(a), val(b)), req, {a.id(), b.id()},
                            req ? std::function<void(Node&)>([pa, pb](Node& out) {
                              if (pa->requires_grad) accumulate(pa->grad, out.grad);
                              if (pb->requires_grad) accumulate(pb->grad, out.grad);
                            })
                                : nullptr);
  return Var(t, id);
}

Var sub(const Var& a, const Var& b) {
  Tape* t = same_tape(a, b, "sub");
  Node* pa = &t->node(a.id());
  Node* pb = &t->node(b.id());
  const bool req = pa->requires_grad || pb->requires_grad;
  const int id = t->emplace(layoutrel::sub(val(a), val(b)), req, {a.id(), b.id()},
                            req ? std::function<void(Node&)>([pa, pb](Node& out) {
                              if (pa->requires_grad) accumulate(pa->grad, out.grad);
                              if (pb->requires_grad) accumulate(pb->grad, scale(out.grad, -1.0));
                            })
                                : nullptr);
  return Var(t, id);
}

Var mul(const Var& a, const Var& b) {
  Tape* t = same_tape(a, b, "mul");
  Node* pa = &t->node(a.id());
  Node* pb = &t->node(b.id());
  const bool req = pa->requires_grad || pb->requires_grad;
  const int id = t->emplace(layoutrel::mul(val(a), val(b)), req, {a.id(), b.id()},
                            req ? std::function<void(Node&)>([pa, pb](Node& out) {
                              if (pa->requires_grad) accumulate(pa->grad, layoutrel::mul(out.grad, pb->value));
                              if (pb->requires_grad) accumulate(pb->grad, layoutrel::mul(out.grad, pa->value));
                            })
                                : nullptr);
  return Var(t, id);
}

Var scale(const Var& a, double c) {
  Tape* t = own_tape(a, "scale");
  Node* pa = &t->node(a.id());
  const bool req = pa->requires_grad;
  const int id = t->emplace(layoutrel::scale(val(a), c), req, {a.id()},
                            req ? std::function<void(Node&)>([pa, c](Node& out) {
                              accumulate(pa->grad, layoutrel::scale(out.grad, c));
                            })
                                : nullptr);
  return Var(t, id);
}

Var mul_const(const Var& a, const Tensor& c) {
  Tape* t = own_tape(a, "mul_const");
  Node* pa = &t->node(a.id());
  const bool req = pa->requires_grad;
  const int id = t->emplace(layoutrel::mul(val(a), c), req, {a.id()},
                            req ? std::function<void(Node&)>([pa, c](Node& out) {
                              accumulate(pa->grad, layoutrel::mul(out.grad, c));
                            })
                                : nullptr);
  return Var(t, id);
}

Var matmul(const Var& a, const Var& b) {
  Tape* t = same_tape(a, b, "matmul");
  Node* pa = &t->node(a.id());
  Node* pb = &t->node(b.id());
  const bool req = pa->requires_grad || pb->requires_grad;
  const int id = t->emplace(layoutrel::matmul(val(a), val(b)), req, {a.id(), b.id()},
                            req ? std::function<void(Node&)>([pa, pb](Node& out) {
                              if (pa->requires_grad) accumulate(pa->grad, matmul_nt(out.grad, pb->value));
                              if (pb->requires_grad) accumulate(pb->grad, matmul_tn(pa->value, out.grad));
                            })
                                : nullptr);
  return Var(t, id);
}

Var transpose(const Var& a) {
  Tape* t = own_tape(a, "transpose");
  Node* pa = &t->node(a.id());
  const bool req = pa->requires_grad;
  const int id = t->emplace(transposed(val(a)), req, {a.id()},
                            req ? std::function<void(Node&)>([pa](Node& out) {
                              accumulate(pa->grad, transposed(out.grad));
                            })
                                : nullptr);
  return Var(t, id);
}

Var reshape(const Var& x, std::vector<int> shape) {
  Tape* t = own_tape(x, "reshape");
  Node* px = &t->node(x.id());
  const bool req = px->requires_grad;
  const int id = t->emplace(val(x).reshaped(std::move(shape)), req, {x.id()},
                            req ? std::function<void(Node&)>([px](Node& out) {
                              for (std::int64_t i = 0; i < px->grad.size(); ++i) {
                                px->grad[i] += out.grad[i];
                              }
                            })
                                : nullptr);
  return Var(t, id);
}

Var add_rowvec(const Var& a, const Var& v) {
  Tape* t = same_tape(a, v, "add_rowvec");
  require_matrix(val(a), "add_rowvec");
  const Tensor& vt = val(v);
  if (static_cast<std::int64_t>(val(a).cols()) != vt.size()) {
    throw ShapeError("add_rowvec: row vector width mismatch");
  }
  Tensor out = val(a);
  const int n = out.rows(), d = out.cols();
  for (int i = 0; i < n; ++i) {
    for (int j = 0; j < d; ++j) out.at(i, j) += vt[j];
  }
  Node* pa = &t->node(a.id());
  Node* pv = &t->node(v.id());
  const bool req = pa->requires_grad || pv->requires_grad;
  const int id = t->emplace(std::move(out), req, {a.id(), v.id()},
                            req ? std::function<void(Node&)>([pa, pv, n, d](Node& o) {
                              if (pa->requires_grad) accumulate(pa->grad, o.grad);
                              if (pv->requires_grad) {
                                for (int i = 0; i < n; ++i) {
                                  for (int j = 0; j < d; ++j) pv->grad[j] += o.grad.at(i, j);
                                }
                              }
                            })
                                : nullptr);
  return Var(t, id);
}

Var gelu(const Var& x) {
  Tape* t = own_tape(x, "gelu");
  const Tensor& xv = val(x);
  Tensor out = xv;
  for (std::int64_t i = 0; i < out.size(); ++i) {
    out[i] = 0.5 * xv[i] * (1.0 + std::erf(xv[i] * kInvSqrt2));
  }
  Node* px = &t->node(x.id());
  const bool req = px->requires_grad;
  const int id = t->emplace(std::move(out), req, {x.id()},
                            req ? std::function<void(Node&)>([px](Node& o) {
                              for (std::int64_t i = 0; i < o.grad.size(); ++i) {
                                const double z = px->value[i];
                                const double d = 0.5 * (1.0 + std::erf(z * kInvSqrt2)) +
                                                 z * kInvSqrt2Pi * std::exp(-0.5 * z * z);
                                px->grad[i] += o.grad[i] * d;
                              }
                            })
                                : nullptr);
  return Var(t, id);
}

Var sigmoid(const Var& x) {
  Tape* t = own_tape(x, "sigmoid");
  const Tensor& xv = val(x);
  Tensor out = xv;
  for (std::int64_t i = 0; i < out.size(); ++i) out[i] = stable_sigmoid(xv[i]);
  Node* px = &t->node(x.id());
  const bool req = px->requires_grad;
  const int id = t->emplace(std::move(out), req, {x.id()},
                            req ? std::function<void(Node&)>([px](Node& o) {
                              for (std::int64_t i = 0; i < o.grad.size(); ++i) {
                                const double s = o.value[i];
                                px->grad[i] += o.grad[i] * s * (1.0 - s);
                              }
                            })
                                : nullptr);
  return Var(t, id);
}

Var layer_norm(const Var& x, const Var& gamma, const Var& beta, double eps) {
  Tape* t = same_tape(x, gamma, "layer_norm");
  same_tape(gamma, beta, "layer_norm");
  require_matrix(val(x), "layer_norm");
  const int n = val(x).rows(), d = val(x).cols();
  if (val(gamma).size() != d || val(beta).size() != d) {
    throw ShapeError("layer_norm: gain/bias width mismatch");
  }

  Tensor out({n, d});
  Tensor xhat({n, d});
  Tensor inv({n});
  for (int i = 0; i < n; ++i) {
    double mu = 0.0;
    for (int j = 0; j < d; ++j) mu += val(x).at(i, j);
    mu /= d;
    double var = 0.0;
    for (int j = 0; j < d; ++j) {
      const double c = val(x).at(i, j) - mu;
      var += c * c;
    }
    var /= d;
    const double iv = 1.0 / std::sqrt(var + eps);
    inv[i] = iv;
    for (int j = 0; j < d; ++j) {
      const double h = (val(x).at(i, j) - mu) * iv;
      xhat.at(i, j) = h;
      out.at(i, j) = val(gamma)[j] * h + val(beta)[j];
    }
  }

  Node* px = &t->node(x.id());
  Node* pg = &t->node(gamma.id());
  Node* pb = &t->node(beta.id());
  const bool req = px->requires_grad || pg->requires_grad || pb->requires_grad;
  const int id = t->emplace(
      std::move(out), req, {x.id(), gamma.id(), beta.id()},
      req ? std::function<void(Node&)>([px, pg, pb, xhat, inv, n, d](Node& o) {
        for (int i = 0; i < n; ++i) {
          double sum_dh = 0.0, sum_dh_h = 0.0;
          for (int j = 0; j < d; ++j) {
            const double g = o.grad.at(i, j);
            const double dh = g * pg->value[j];
            sum_dh += dh;
            sum_dh_h += dh * xhat.at(i, j);
            if (pg->requires_grad) pg->grad[j] += g * xhat.at(i, j);
            if (pb->requires_grad) pb->grad[j] += g;
          }
          if (px->requires_grad) {
            const double iv = inv[i];
            for (int j = 0; j < d; ++j) {
              const double dh = o.grad.at(i, j) * pg->value[j];
              px->grad.at(i, j) += iv * (dh - sum_dh / d - xhat.at(i, j) * sum_dh_h / d);
            }
          }
        }
      })
          : nullptr);
  return Var(t, id);
}

Var softmax_rows(const Var& x, double tau) {
  Tape* t = own_tape(x, "softmax_rows");
  require_matrix(val(x), "softmax_rows");
  if (tau <= 0.0) throw ParamError("softmax_rows: temperature must be positive");
  const int n = val(x).rows(), d = val(x).cols();
  Tensor out({n, d});
  for (int i = 0; i < n; ++i) {
    double m = val(x).at(i, 0);
    for (int j = 1; j < d; ++j) m = std::max(m, val(x).at(i, j));
    double z = 0.0;
    for (int j = 0; j < d; ++j) {
      const double e = std::exp((val(x).at(i, j) - m) / tau);
      out.at(i, j) = e;
      z += e;
    }
    for (int j = 0; j < d; ++j) out.at(i, j) /= z;
  }
  Node* px = &t->node(x.id());
  const bool req = px->requires_grad;
  const int id = t->emplace(std::move(out), req, {x.id()},
                            req ? std::function<void(Node&)>([px, tau, n, d](Node& o) {
                              for (int i = 0; i < n; ++i) {
                                double dot = 0.0;
                                for (int j = 0; j < d; ++j) dot += o.grad.at(i, j) * o.value.at(i, j);
                                for (int j = 0; j < d; ++j) {
                                  px->grad.at(i, j) +=
                                      o.value.at(i, j) * (o.grad.at(i, j) - dot) / tau;
                                }
                              }
                            })
                                : nullptr);
  return Var(t, id);
}

Var masked_softmax_rows(const Var& x, const Tensor& mask, double tau) {
  Tape* t = own_tape(x, "masked_softmax_rows");
  require_matrix(val(x), "masked_softmax_rows");
  if (!val(x).same_shape(mask)) throw ShapeError("masked_softmax_rows: mask shape mismatch");
  if (tau <= 0.0) throw ParamError("masked_softmax_rows: temperature must be positive");
  const int n = val(x).rows(), d = val(x).cols();
  Tensor out({n, d});
  for (int i = 0; i < n; ++i) {
    double m = -1e300;
    bool any = false;
    for (int j = 0; j < d; ++j) {
      if (mask.at(i, j) != 0.0) {
        m = any ? std::max(m, val(x).at(i, j)) : val(x).at(i, j);
        any = true;
      }
    }
    if (!any) {
      throw DegenerateInputError("masked_softmax_rows: row " + std::to_string(i) +
                                 " has no valid entries");
    }
    double z = 0.0;
    for (int j = 0; j < d; ++j) {
      if (mask.at(i, j) != 0.0) {
        const double e = std::exp((val(x).at(i, j) - m) / tau);
        out.at(i, j) = e;
        z += e;
      }
    }
    for (int j = 0; j < d; ++j) {
      if (mask.at(i, j) != 0.0) out.at(i, j) /= z;
    }
  }
  Node* px = &t->node(x.id());
  const bool req = px->requires_grad;
  const int id = t->emplace(std::move(out), req, {x.id()},
                            req ? std::function<void(Node&)>([px, mask, tau, n, d](Node& o) {
                              for (int i = 0; i < n; ++i) {
                                double dot = 0.0;
                                for (int j = 0; j < d; ++j) {
                                  if (mask.at(i, j) != 0.0) dot += o.grad.at(i, j) * o.value.at(i, j);
                                }
                                for (int j = 0; j < d; ++j) {
                                  if (mask.at(i, j) != 0.0) {
                                    px->grad.at(i, j) +=
                                        o.value.at(i, j) * (o.grad.at(i, j) - dot) / tau;
                                  }
                                }
                              }
                            })
                                : nullptr);
  return Var(t, id);
}

Var stop_gradient(const Var& x) {
  Tape* t = own_tape(x, "stop_gradient");
  return Var(t, t->emplace(val(x), false, {}, nullptr));
}

Var sum(const Var& x) {
  Tape* t = own_tape(x, "sum");
  double s = 0.0;
  for (std::int64_t i = 0; i < val(x).size(); ++i) s += val(x)[i];
  Node* px = &t->node(x.id());
  const bool req = px->requires_grad;
  const int id = t->emplace(Tensor::scalar(s), req, {x.id()},
                            req ? std::function<void(Node&)>([px](Node& o) {
                              const double g = o.grad[0];
                              for (std::int64_t i = 0; i < px->grad.size(); ++i) px->grad[i] += g;
                            })
                                : nullptr);
  return Var(t, id);
}

namespace {

// Shared core of masked_mse and weighted_sse: per-row weighted squared error.
Var row_weighted_sq_error(const Var& pred, const Var& target, Tensor weights, const char* who) {
  Tape* t = same_tape(pred, target, who);
  Tensor p = val(pred);
  Tensor q = val(target);
  if (!p.same_shape(q)) throw ShapeError(std::string(who) + ": prediction/target shape mismatch");
  if (p.rank() == 1) {
    p = p.reshaped({static_cast<int>(p.size()), 1});
    q = q.reshaped({static_cast<int>(q.size()), 1});
  }
  require_matrix(p, who);
  const int n = p.rows(), d = p.cols();
  if (weights.size() != n) throw ShapeError(std::string(who) + ": weights length mismatch");

  double loss = 0.0;
  for (int i = 0; i < n; ++i) {
    if (weights[i] == 0.0) continue;
    double row = 0.0;
    for (int j = 0; j < d; ++j) {
      const double e = p.at(i, j) - q.at(i, j);
      row += e * e;
    }
    loss += weights[i] * row;
  }

  Node* pp = &t->node(pred.id());
  Node* pq = &t->node(target.id());
  const bool req = pp->requires_grad || pq->requires_grad;
  const int id = t->emplace(
      Tensor::scalar(loss), req, {pred.id(), target.id()},
      req ? std::function<void(Node&)>([pp, pq, weights, n, d](Node& o) {
        const double g = o.grad[0];
        for (int i = 0; i < n; ++i) {
          const double w = weights[i];
          if (w == 0.0) continue;
          for (int j = 0; j < d; ++j) {
            const std::int64_t k = static_cast<std::int64_t>(i) * d + j;
            const double e = 2.0 * w * g * (pp->value[k] - pq->value[k]);
            if (pp->requires_grad) pp->grad[k] += e;
            if (pq->requires_grad) pq->grad[k] -= e;
          }
        }
      })
          : nullptr);
  return Var(t, id);
}

}  // namespace

Var masked_mse(const Var& pred, const Var& target, const Tensor& mask) {
  const Tensor& p = val(pred);
  const int n = p.rank() == 1 ? static_cast<int>(p.size()) : p.rows();
  const int d = p.rank() == 1 ? 1 : p.cols();
  if (mask.size() != n) throw ShapeError("masked_mse: mask length mismatch");
  int kept = 0;
  for (std::int64_t i = 0; i < mask.size(); ++i) {
    if (mask[i] != 0.0) ++kept;
  }
  if (kept == 0) throw DegenerateInputError("masked_mse: mask selects no rows");
  Tensor weights({n});
  const double w = 1.0 / (static_cast<double>(kept) * d);
  for (int i = 0; i < n; ++i) weights[i] = mask[i] != 0.0 ? w : 0.0;
  return row_weighted_sq_error(pred, target, std::move(weights), "masked_mse");
}

Var weighted_sse(const Var& pred, const Var& target, const Tensor& row_weights) {
  return row_weighted_sq_error(pred, target, row_weights, "weighted_sse");
}

Var gather_rows(const Var& x, const std::vector<int>& indices) {
  Tape* t = own_tape(x, "gather_rows");
  require_matrix(val(x), "gather_rows");
  const int n = val(x).rows(), d = val(x).cols();
  const int m = static_cast<int>(indices.size());
  if (m == 0) throw ShapeError("gather_rows: empty index list");
  Tensor out({m, d});
  for (int k = 0; k < m; ++k) {
    const int i = indices[k];
    if (i < 0 || i >= n) throw ShapeError("gather_rows: index " + std::to_string(i) + " out of range");
    for (int j = 0; j < d; ++j) out.at(k, j) = val(x).at(i, j);
  }
  Node* px = &t->node(x.id());
  const bool req = px->requires_grad;
  const int id = t->emplace(std::move(out), req, {x.id()},
                            req ? std::function<void(Node&)>([px, indices, d](Node& o) {
                              for (int k = 0; k < static_cast<int>(indices.size()); ++k) {
                                for (int j = 0; j < d; ++j) {
                                  px->grad.at(indices[k], j) += o.grad.at(k, j);
                                }
                              }
                            })
                                : nullptr);
  return Var(t, id);
}

Var slice_cols(const Var& x, int c0, int c1) {
  Tape* t = own_tape(x, "slice_cols");
  require_matrix(val(x), "slice_cols");
  const int n = val(x).rows(), d = val(x).cols();
  if (c0 < 0 || c1 > d || c0 >= c1) throw ShapeError("slice_cols: bad column range");
  Tensor out({n, c1 - c0});
  for (int i = 0; i < n; ++i) {
    for (int j = c0; j < c1; ++j) out.at(i, j - c0) = val(x).at(i, j);
  }
  Node* px = &t->node(x.id());
  const bool req = px->requires_grad;
  const int id = t->emplace(std::move(out), req, {x.id()},
                            req ? std::function<void(Node&)>([px, c0, c1, n](Node& o) {
                              for (int i = 0; i < n; ++i) {
                                for (int j = c0; j < c1; ++j) {
                                  px->grad.at(i, j) += o.grad.at(i, j - c0);
                                }
                              }
                            })
                                : nullptr);
  return Var(t, id);
}

Var slice_rows(const Var& x, int r0, int r1) {
  require_matrix(val(x), "slice_rows");
  if (r0 < 0 || r1 > val(x).rows() || r0 >= r1) throw ShapeError("slice_rows: bad row range");
  std::vector<int> idx(static_cast<std::size_t>(r1 - r0));
  for (int i = r0; i < r1; ++i) idx[static_cast<std::size_t>(i - r0)] = i;
  return gather_rows(x, idx);
}

Var concat_cols(const Var& a, const Var& b) {
  Tape* t = same_tape(a, b, "concat_cols");
  require_matrix(val(a), "concat_cols");
  require_matrix(val(b), "concat_cols");
  if (val(a).rows() != val(b).rows()) throw ShapeError("concat_cols: row count mismatch");
  const int n = val(a).rows(), da = val(a).cols(), db = val(b).cols();
  Tensor out({n, da + db});
  for (int i = 0; i < n; ++i) {
    for (int j = 0; j < da; ++j) out.at(i, j) = val(a).at(i, j);
    for (int j = 0; j < db; ++j) out.at(i, da + j) = val(b).at(i, j);
  }
  Node* pa = &t->node(a.id());
  Node* pb = &t->node(b.id());
  const bool req = pa->requires_grad || pb->requires_grad;
  const int id = t->emplace(std::move(out), req, {a.id(), b.id()},
                            req ? std::function<void(Node&)>([pa, pb, n, da, db](Node& o) {
                              for (int i = 0; i < n; ++i) {
                                if (pa->requires_grad) {
                                  for (int j = 0; j < da; ++j) pa->grad.at(i, j) += o.grad.at(i, j);
                                }
                                if (pb->requires_grad) {
                                  for (int j = 0; j < db; ++j) pb->grad.at(i, j) += o.grad.at(i, da + j);
                                }
                              }
                            })
                                : nullptr);
  return Var(t, id);
}

Var concat_rows(const std::vector<Var>& parts) {
  if (parts.empty()) throw ShapeError("concat_rows: no parts");
  Tape* t = own_tape(parts[0], "concat_rows");
  int total = 0;
  const int d = val(parts[0]).cols();
  std::vector<int> parent_ids;
  parent_ids.reserve(parts.size());
  for (const Var& p : parts) {
    same_tape(parts[0], p, "concat_rows");
    require_matrix(val(p), "concat_rows");
    if (val(p).cols() != d) throw ShapeError("concat_rows: column count mismatch");
    total += val(p).rows();
    parent_ids.push_back(p.id());
  }
  Tensor out({total, d});
  int row = 0;
  bool req = false;
  std::vector<Node*> pn;
  pn.reserve(parts.size());
  for (const Var& p : parts) {
    Node* node = &t->node(p.id());
    pn.push_back(node);
    req = req || node->requires_grad;
    for (int i = 0; i < val(p).rows(); ++i, ++row) {
      for (int j = 0; j < d; ++j) out.at(row, j) = val(p).at(i, j);
    }
  }
  const int id = t->emplace(std::move(out), req, std::move(parent_ids),
                            req ? std::function<void(Node&)>([pn, d](Node& o) {
                              int row = 0;
                              for (Node* p : pn) {
                                const int n = p->value.rows();
                                if (p->requires_grad) {
                                  for (int i = 0; i < n; ++i) {
                                    for (int j = 0; j < d; ++j) {
                                      p->grad.at(i, j) += o.grad.at(row + i, j);
                                    }
                                  }
                                }
                                row += n;
                              }
                            })
                                : nullptr);
  return Var(t, id);
}

Var pad_rows(const Var& x, int total_rows) {
  Tape* t = own_tape(x, "pad_rows");
  require_matrix(val(x), "pad_rows");
  const int n = val(x).rows(), d = val(x).cols();
  if (total_rows < n) throw ShapeError("pad_rows: target row count smaller than input");
  if (total_rows == n) return x;
  Tensor out({total_rows, d});
  for (int i = 0; i < n; ++i) {
    for (int j = 0; j < d; ++j) out.at(i, j) = val(x).at(i, j);
  }
  Node* px = &t->node(x.id());
  const bool req = px->requires_grad;
  const int id = t->emplace(std::move(out), req, {x.id()},
                            req ? std::function<void(Node&)>([px, n, d](Node& o) {
                              for (int i = 0; i < n; ++i) {
                                for (int j = 0; j < d; ++j) px->grad.at(i, j) += o.grad.at(i, j);
                              }
                            })
                                : nullptr);
  return Var(t, id);
}

Var pad_cols(const Var& x, int total_cols) {
  Tape* t = own_tape(x, "pad_cols");
  require_matrix(val(x), "pad_cols");
  const int n = val(x).rows(), d = val(x).cols();
  if (total_cols < d) throw ShapeError("pad_cols: target column count smaller than input");
  if (total_cols == d) return x;
  Tensor out({n, total_cols});
  for (int i = 0; i < n; ++i) {
    for (int j = 0; j < d; ++j) out.at(i, j) = val(x).at(i, j);
  }
  Node* px = &t->node(x.id());
  const bool req = px->requires_grad;
  const int id = t->emplace(std::move(out), req, {x.id()},
                            req ? std::function<void(Node&)>([px, n, d](Node& o) {
                              for (int i = 0; i < n; ++i) {
                                for (int j = 0; j < d; ++j) px->grad.at(i, j) += o.grad.at(i, j);
                              }
                            })
                                : nullptr);
  return Var(t, id);
}

Var pair_concat(const Var& m) {
  Tape* t = own_tape(m, "pair_concat");
  require_matrix(val(m), "pair_concat");
  const int n = val(m).rows(), d = val(m).cols();
  Tensor out({n * n, 2 * d});
  for (int i = 0; i < n; ++i) {
    for (int j = 0; j < n; ++j) {
      const int r = i * n + j;
      for (int k = 0; k < d; ++k) {
        out.at(r, k) = val(m).at(i, k);
        out.at(r, d + k) = val(m).at(j, k);
      }
    }
  }
  Node* pm = &t->node(m.id());
  const bool req = pm->requires_grad;
  const int id = t->emplace(std::move(out), req, {m.id()},
                            req ? std::function<void(Node&)>([pm, n, d](Node& o) {
                              for (int i = 0; i < n; ++i) {
                                for (int j = 0; j < n; ++j) {
                                  const int r = i * n + j;
                                  for (int k = 0; k < d; ++k) {
                                    pm->grad.at(i, k) += o.grad.at(r, k);
                                    pm->grad.at(j, k) += o.grad.at(r, d + k);
                                  }
                                }
                              }
                            })
                                : nullptr);
  return Var(t, id);
}

Var softmax_cross_entropy(const Var& logits, const std::vector<int>& targets,
                          const std::vector<double>& row_weights) {
  Tape* t = own_tape(logits, "softmax_cross_entropy");
  require_matrix(val(logits), "softmax_cross_entropy");
  const int n = val(logits).rows(), v = val(logits).cols();
  if (static_cast<int>(targets.size()) != n || static_cast<int>(row_weights.size()) != n) {
    throw ShapeError("softmax_cross_entropy: targets/weights length mismatch");
  }
  double wsum = 0.0;
  for (const double w : row_weights) {
    if (w < 0.0) throw ParamError("softmax_cross_entropy: negative row weight");
    wsum += w;
  }
  if (wsum == 0.0) throw DegenerateInputError("softmax_cross_entropy: all row weights are zero");

  Tensor probs({n, v});
  double loss = 0.0;
  for (int i = 0; i < n; ++i) {
    if (row_weights[static_cast<std::size_t>(i)] == 0.0) continue;
    const int ti = targets[static_cast<std::size_t>(i)];
    if (ti < 0 || ti >= v) throw ShapeError("softmax_cross_entropy: target id out of range");
    double m = val(logits).at(i, 0);
    for (int j = 1; j < v; ++j) m = std::max(m, val(logits).at(i, j));
    double z = 0.0;
    for (int j = 0; j < v; ++j) {
      const double e = std::exp(val(logits).at(i, j) - m);
      probs.at(i, j) = e;
      z += e;
    }
    for (int j = 0; j < v; ++j) probs.at(i, j) /= z;
    loss += row_weights[static_cast<std::size_t>(i)] * (m + std::log(z) - val(logits).at(i, ti));
  }
  loss /= wsum;

  Node* pl = &t->node(logits.id());
  const bool req = pl->requires_grad;
  const int id = t->emplace(
      Tensor::scalar(loss), req, {logits.id()},
      req ? std::function<void(Node&)>([pl, probs, targets, row_weights, wsum, n, v](Node& o) {
        const double g = o.grad[0] / wsum;
        for (int i = 0; i < n; ++i) {
          const double w = row_weights[static_cast<std::size_t>(i)];
          if (w == 0.0) continue;
          const int ti = targets[static_cast<std::size_t>(i)];
          for (int j = 0; j < v; ++j) {
            const double delta = j == ti ? 1.0 : 0.0;
            pl->grad.at(i, j) += g * w * (probs.at(i, j) - delta);
          }
        }
      })
          : nullptr);
  return Var(t, id);
}

Var bce_with_logits(const Var& logits, const Tensor& targets, const Tensor& weights) {
  Tape* t = own_tape(logits, "bce_with_logits");
  const Tensor& z = val(logits);
  if (!z.same_shape(targets) || !z.same_shape(weights)) {
    throw ShapeError("bce_with_logits: shape mismatch");
  }
  double wsum = 0.0;
  for (std::int64_t i = 0; i < weights.size(); ++i) {
    if (weights[i] < 0.0) throw ParamError("bce_with_logits: negative weight");
    wsum += weights[i];
  }
  if (wsum == 0.0) throw DegenerateInputError("bce_with_logits: all weights are zero");

  double loss = 0.0;
  for (std::int64_t i = 0; i < z.size(); ++i) {
    if (weights[i] == 0.0) continue;
    const double zi = z[i], yi = targets[i];
    loss += weights[i] * (std::max(zi, 0.0) - zi * yi + std::log1p(std::exp(-std::abs(zi))));
  }
  loss /= wsum;

  Node* pl = &t->node(logits.id());
  const bool req = pl->requires_grad;
  const int id = t->emplace(Tensor::scalar(loss), req, {logits.id()},
                            req ? std::function<void(Node&)>([pl, targets, weights, wsum](Node& o) {
                              const double g = o.grad[0] / wsum;
                              for (std::int64_t i = 0; i < pl->value.size(); ++i) {
                                if (weights[i] == 0.0) continue;
                                pl->grad[i] += g * weights[i] *
                                               (stable_sigmoid(pl->value[i]) - targets[i]);
                              }
                            })
                                : nullptr);
  return Var(t, id);
}

}  // namespace layoutrel

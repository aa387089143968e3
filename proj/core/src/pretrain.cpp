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

#include "layoutrel/pretrain.hpp"

#include <cmath>
#include <string>
#include <utility>
#include <vector>

namespace layoutrel {

namespace {

const Var& pick(const VarSet& w, const std::string& name) {
  const auto it = w.find(name);
  if (it == w.end()) throw StateError("missing parameter '" + name + "'");
  return it->second;
}

Tensor identity_matrix(int n) {
  Tensor t({n, n});
  for (int i = 0; i < n; ++i) t.at(i, i) = 1.0;
  return t;
}

// The target set tracks the encoder, the aggregator, and the projectors.
// Predictors and the token head belong to the online side alone.
bool is_target_param(const std::string& name) {
  return name.starts_with("embed.") || name.starts_with("layer") ||
         name.starts_with("rel.f.") || name.starts_with("rel.gl.") ||
         name.starts_with("rel.gg.");
}

int checked_width(const Var& m, const Tensor& valid, const char* who) {
  if (!m.valid()) throw StateError(std::string(who) + ": view features missing");
  const int n = m.rows();
  if (valid.size() != n) {
    throw ParamError(std::string(who) + ": validity mask length " +
                     std::to_string(valid.size()) + " does not match " + std::to_string(n) +
                     " entities");
  }
  return n;
}

int count_valid(const Tensor& valid) {
  int n = 0;
  for (std::int64_t i = 0; i < valid.size(); ++i) n += valid[i] != 0.0 ? 1 : 0;
  return n;
}

Var project(const VarSet& w, const Var& x, const char* stem) {
  return add_rowvec(matmul(x, pick(w, std::string(stem) + ".w")),
                    pick(w, std::string(stem) + ".b"));
}

// One view ordering of the local term. The target branch ends in
// stop_gradient, so its parameters get exact zeros even when they are
// grad-enabled leaves.
Var lrcm_direction(const Var& m_on, const Var& m_tg, const VarSet& online,
                   const VarSet& target, const Tensor& pair_weights) {
  const Var pred = project(online, project(online, local_relation_repr(m_on, online), "rel.gl"),
                           "rel.ql");
  const Var targ = stop_gradient(project(target, local_relation_repr(m_tg, target), "rel.gl"));
  return weighted_sse(pred, targ, pair_weights);
}

Var grcm_direction(const Var& m_on, const Var& m_tg, const VarSet& online,
                   const VarSet& target, const Tensor& valid, const Tensor& row_weights,
                   const PretrainConfig& cfg) {
  const Var r_on = pad_cols(global_relation_distribution(m_on, valid, cfg.tau_g), cfg.n_cap);
  const Var pred = project(online, project(online, r_on, "rel.gg"), "rel.qg");
  const Var r_tg = pad_cols(global_relation_distribution(m_tg, valid, cfg.tau_g), cfg.n_cap);
  const Var targ = stop_gradient(project(target, r_tg, "rel.gg"));
  return weighted_sse(pred, targ, row_weights);
}

// Two fresh views of a document. Overly tight geometry falls back to the
// purely visual transform, which cannot fail.
Document make_view(const Document& doc, std::uint64_t seed) {
  try {
    return sample_positive_view(doc, seed).first;
  } catch (const AugmentFailedError&) {
    return augment_visual(doc, seed).first;
  }
}

}  // namespace

void PretrainConfig::validate() const {
  if (d_local <= 0 || d_global <= 0 || n_cap <= 0) {
    throw ParamError("pretrain config: head widths must be positive");
  }
  if (tau_g <= 0.0) throw ParamError("pretrain config: similarity temperature must be positive");
  if (!(tau_ema > 0.0 && tau_ema < 1.0)) {
    throw ParamError("pretrain config: target decay must lie strictly between 0 and 1");
  }
  if (!(mask_rate > 0.0 && mask_rate < 1.0)) {
    throw ParamError("pretrain config: mask rate must lie strictly between 0 and 1");
  }
  if (lr <= 0.0) throw ParamError("pretrain config: learning rate must be positive");
  if (total_steps <= 0) throw ParamError("pretrain config: decay horizon must be positive");
}

void ModelState::validate() const {
  encoder.validate();
  pretrain.validate();
  if (encoder.max_entities > pretrain.n_cap) {
    throw ParamError("model state: entity budget " + std::to_string(encoder.max_entities) +
                     " exceeds the global head width " + std::to_string(pretrain.n_cap));
  }
  for (const auto& [name, value] : target) {
    const auto it = online.find(name);
    if (it == online.end()) {
      throw StateError("model state: target parameter '" + name + "' has no online twin");
    }
    if (!it->second.same_shape(value)) {
      throw StateError("model state: shape mismatch for parameter '" + name + "'");
    }
  }
}

ModelState init_model_state(const EncoderConfig& encoder, const PretrainConfig& pretrain,
                            Rng& rng) {
  ModelState state;
  state.encoder = encoder;
  state.pretrain = pretrain;

  state.online = init_encoder_params(encoder, rng);
  state.online["rel.f.w1"] = glorot_uniform(2 * encoder.d, pretrain.d_local, rng);
  state.online["rel.f.b1"] = Tensor({1, pretrain.d_local});
  state.online["rel.f.w2"] = glorot_uniform(pretrain.d_local, pretrain.d_local, rng);
  state.online["rel.f.b2"] = Tensor({1, pretrain.d_local});
  state.online["rel.gl.w"] = glorot_uniform(pretrain.d_local, pretrain.d_local, rng);
  state.online["rel.gl.b"] = Tensor({1, pretrain.d_local});
  state.online["rel.ql.w"] = identity_matrix(pretrain.d_local);
  state.online["rel.ql.b"] = Tensor({1, pretrain.d_local});
  state.online["rel.gg.w"] = glorot_uniform(pretrain.n_cap, pretrain.d_global, rng);
  state.online["rel.gg.b"] = Tensor({1, pretrain.d_global});
  state.online["rel.qg.w"] = identity_matrix(pretrain.d_global);
  state.online["rel.qg.b"] = Tensor({1, pretrain.d_global});
  // Zero head: every vocabulary item starts equally likely, and the first
  // masked-token loss equals ln(vocab) exactly.
  state.online["mvlm.w"] = Tensor({encoder.d, encoder.vocab});
  state.online["mvlm.b"] = Tensor({1, encoder.vocab});

  for (const auto& [name, value] : state.online) {
    if (is_target_param(name)) state.target.emplace(name, value);
  }
  state.validate();
  return state;
}

Var local_relation_repr(const Var& m, const VarSet& w) {
  const Var pairs = pair_concat(m);
  const Var hidden = gelu(add_rowvec(matmul(pairs, pick(w, "rel.f.w1")),
                                     pick(w, "rel.f.b1")));
  return add_rowvec(matmul(hidden, pick(w, "rel.f.w2")), pick(w, "rel.f.b2"));
}

Var global_relation_distribution(const Var& m, const Tensor& valid, double tau_g) {
  if (tau_g <= 0.0) {
    throw ParamError("global_relation_distribution: temperature must be positive");
  }
  const int n = checked_width(m, valid, "global_relation_distribution");
  if (count_valid(valid) == 0) {
    throw DegenerateInputError("global_relation_distribution: no valid entities");
  }

  // Rows of padded entities get a self-only mask so every softmax row stays
  // well defined, then are multiplied to exact zero. The zero factor also
  // cuts their gradient.
  Tensor mask({n, n});
  Tensor row_keep({n, n});
  for (int i = 0; i < n; ++i) {
    if (valid[i] != 0.0) {
      for (int j = 0; j < n; ++j) {
        if (valid[j] != 0.0) mask.at(i, j) = 1.0;
        row_keep.at(i, j) = 1.0;
      }
    } else {
      mask.at(i, i) = 1.0;
    }
  }
  const Var scores = matmul(m, transpose(m));
  return mul_const(masked_softmax_rows(scores, mask, tau_g), row_keep);
}

Var global_relation_distribution(const Var& m, double tau_g) {
  if (!m.valid()) throw StateError("global_relation_distribution: view features missing");
  return global_relation_distribution(m, Tensor::ones({m.rows()}), tau_g);
}

Var lrcm_loss(const ViewPair& views, const VarSet& online, const VarSet& target,
              const Tensor& valid, const PretrainConfig& cfg) {
  cfg.validate();
  const int n = checked_width(views.v1_online, valid, "lrcm_loss");
  const int n_valid = count_valid(valid);
  if (n_valid == 0) throw DegenerateInputError("lrcm_loss: no valid entity pairs");

  Tensor pair_weights({n * n});
  const double w = 1.0 / (static_cast<double>(n_valid) * n_valid);
  for (int i = 0; i < n; ++i) {
    for (int j = 0; j < n; ++j) {
      if (valid[i] != 0.0 && valid[j] != 0.0) pair_weights[i * n + j] = w;
    }
  }

  const Var first = lrcm_direction(views.v1_online, views.v2_target, online, target,
                                   pair_weights);
  if (!cfg.symmetrized) return first;
  if (!views.v2_online.valid() || !views.v1_target.valid()) {
    throw StateError("lrcm_loss: symmetrized loss needs both view orderings");
  }
  const Var second = lrcm_direction(views.v2_online, views.v1_target, online, target,
                                    pair_weights);
  return scale(first + second, 0.5);
}

Var grcm_loss(const ViewPair& views, const VarSet& online, const VarSet& target,
              const Tensor& valid, const PretrainConfig& cfg) {
  cfg.validate();
  const int n = checked_width(views.v1_online, valid, "grcm_loss");
  if (n > cfg.n_cap) {
    throw CapacityError("grcm_loss: " + std::to_string(n) + " entities exceed the head width " +
                        std::to_string(cfg.n_cap));
  }
  const int n_valid = count_valid(valid);
  if (n_valid == 0) throw DegenerateInputError("grcm_loss: no valid entities");

  Tensor row_weights({n});
  for (int i = 0; i < n; ++i) {
    if (valid[i] != 0.0) row_weights[i] = 1.0 / n_valid;
  }

  const Var first = grcm_direction(views.v1_online, views.v2_target, online, target, valid,
                                   row_weights, cfg);
  if (!cfg.symmetrized) return first;
  if (!views.v2_online.valid() || !views.v1_target.valid()) {
    throw StateError("grcm_loss: symmetrized loss needs both view orderings");
  }
  const Var second = grcm_direction(views.v2_online, views.v1_target, online, target, valid,
                                    row_weights, cfg);
  return scale(first + second, 0.5);
}

Var rcm_loss(const ViewPair& views, const VarSet& online, const VarSet& target,
             const Tensor& valid, const PretrainConfig& cfg) {
  return lrcm_loss(views, online, target, valid, cfg) +
         grcm_loss(views, online, target, valid, cfg);
}

MvlmBatch prepare_mvlm(const Document& doc, const EncoderConfig& cfg, double mask_rate,
                       std::uint64_t seed) {
  if (!(mask_rate > 0.0 && mask_rate < 1.0)) {
    throw ParamError("prepare_mvlm: mask rate must lie strictly between 0 and 1");
  }
  MvlmBatch batch;
  batch.seq = tokenize(doc, cfg);
  for (int attempt = 0; attempt < 2 && batch.positions.empty(); ++attempt) {
    Rng rng = derive_rng(seed, "mask", static_cast<std::uint64_t>(attempt));
    for (int t = 0; t < batch.seq.valid_len; ++t) {
      const bool draw = rng.next_double() < mask_rate;
      if (batch.seq.maskable(t) && draw) batch.positions.push_back(t);
    }
  }
  if (batch.positions.empty()) {
    throw DegenerateInputError("prepare_mvlm: " + document_name(doc) +
                               ": no tokens selected after one redraw");
  }
  for (const int t : batch.positions) {
    batch.targets.push_back(batch.seq.ids[static_cast<std::size_t>(t)]);
    batch.seq.ids[static_cast<std::size_t>(t)] = cfg.mask_id();
  }
  return batch;
}

Var mvlm_loss(Tape& tape, const VarSet& online, const MvlmBatch& batch,
              const EncoderConfig& cfg) {
  const Var fused = encode_sequence(tape, online, batch.seq, cfg);
  const Var rows = gather_rows(fused, batch.positions);
  const Var logits = add_rowvec(matmul(rows, pick(online, "mvlm.w")), pick(online, "mvlm.b"));
  const std::vector<double> weights(batch.positions.size(), 1.0);
  return softmax_cross_entropy(logits, batch.targets, weights);
}

Var mvlm_loss(Tape& tape, const VarSet& online, const Document& doc, const EncoderConfig& cfg,
              double mask_rate, std::uint64_t seed) {
  return mvlm_loss(tape, online, prepare_mvlm(doc, cfg, mask_rate, seed), cfg);
}

void ema_update(ParamSet& target, const ParamSet& online, double tau) {
  if (tau == 1.0) return;  // exact no-op, bit patterns included
  for (auto& [name, value] : target) {
    const auto it = online.find(name);
    if (it == online.end()) {
      throw StateError("ema_update: online parameters lack '" + name + "'");
    }
    const Tensor& theta = it->second;
    if (!value.same_shape(theta)) {
      throw StateError("ema_update: shape mismatch for '" + name + "'");
    }
    for (std::int64_t i = 0; i < value.size(); ++i) {
      value[i] = tau * value[i] + (1.0 - tau) * theta[i];
    }
  }
}

void ema_update(ModelState& state) {
  ema_update(state.target, state.online, state.pretrain.tau_ema);
}

namespace {

// Rate-based masking may select nothing twice over on a desk-scale document,
// which is common enough that training could not survive it as an error. The
// step then masks one word token drawn from a fallback stream; only a
// document with no maskable token at all stays degenerate.
MvlmBatch training_mask(const Document& doc, const EncoderConfig& cfg, double mask_rate,
                        std::uint64_t seed, std::uint64_t key) {
  try {
    return prepare_mvlm(doc, cfg, mask_rate, derive_rng(seed, "mask-seed", key).next_u64());
  } catch (const DegenerateInputError&) {
    MvlmBatch batch;
    batch.seq = tokenize(doc, cfg);
    std::vector<int> candidates;
    for (int t = 0; t < batch.seq.valid_len; ++t) {
      if (batch.seq.maskable(t)) candidates.push_back(t);
    }
    if (candidates.empty()) {
      throw DegenerateInputError("pretrain_step: " + document_name(doc) +
                                 ": no maskable tokens");
    }
    Rng rng = derive_rng(seed, "mask-fallback", key);
    const auto pick = static_cast<std::size_t>(
        rng.uniform_int(0, static_cast<std::int64_t>(candidates.size()) - 1));
    const int t = candidates[pick];
    batch.positions.push_back(t);
    batch.targets.push_back(batch.seq.ids[static_cast<std::size_t>(t)]);
    batch.seq.ids[static_cast<std::size_t>(t)] = cfg.mask_id();
    return batch;
  }
}

}  // namespace

StepMetrics pretrain_step(ModelState& state, const std::vector<Document>& batch,
                          std::uint64_t seed) {
  state.validate();
  if (batch.empty()) throw ParamError("pretrain_step: empty batch");
  const EncoderConfig& enc = state.encoder;
  const PretrainConfig& cfg = state.pretrain;

  Tape tape;
  const VarSet online = make_leaves(tape, state.online, /*requires_grad=*/true);
  const VarSet target = make_leaves(tape, state.target, /*requires_grad=*/false);

  StepMetrics metrics;
  metrics.step = state.step;
  metrics.seed = seed;

  Var total;
  for (const Document& doc : batch) {
    // Streams keyed by document content: a document draws the same views
    // and masks regardless of batch position or company.
    const std::uint64_t key = document_digest(doc);
    Var doc_total;
    const auto accumulate = [&](const Var& term, double& slot) {
      slot += term.value().item();
      doc_total = doc_total.valid() ? doc_total + term : term;
    };

    if (cfg.use_lrcm || cfg.use_grcm) {
      const Document v1 = make_view(doc, derive_rng(seed, "view1", key).next_u64());
      const Document v2 = make_view(doc, derive_rng(seed, "view2", key).next_u64());
      const TokenSeq seq1 = tokenize(v1, enc);
      const TokenSeq seq2 = tokenize(v2, enc);

      ViewPair views;
      views.v1_online = entity_features(tape, online, seq1, enc);
      views.v2_target = entity_features(tape, target, seq2, enc);
      if (cfg.symmetrized) {
        views.v2_online = entity_features(tape, online, seq2, enc);
        views.v1_target = entity_features(tape, target, seq1, enc);
      }

      const Tensor valid = Tensor::ones({seq1.n_entities});
      if (cfg.use_lrcm) accumulate(lrcm_loss(views, online, target, valid, cfg), metrics.lrcm);
      if (cfg.use_grcm) accumulate(grcm_loss(views, online, target, valid, cfg), metrics.grcm);
    }
    accumulate(mvlm_loss(tape, online, training_mask(doc, enc, cfg.mask_rate, seed, key), enc),
               metrics.mvlm);
    if (!std::isfinite(doc_total.value().item())) {
      throw StateError("pretrain_step: non-finite loss on " + document_name(doc) +
                       " at step " + std::to_string(state.step));
    }
    total = total.valid() ? total + doc_total : doc_total;
  }

  const double inv_b = 1.0 / static_cast<double>(batch.size());
  total = scale(total, inv_b);
  metrics.lrcm *= inv_b;
  metrics.grcm *= inv_b;
  metrics.mvlm *= inv_b;
  metrics.total = total.value().item();

  tape.backward(total);
  double norm_sq = 0.0;
  for (const auto& [name, leaf] : online) {
    const Tensor& g = leaf.grad();
    for (std::int64_t i = 0; i < g.size(); ++i) norm_sq += g[i] * g[i];
  }
  metrics.grad_norm = std::sqrt(norm_sq);

  const double frac = 1.0 - static_cast<double>(state.step) / cfg.total_steps;
  const double lr = cfg.lr * std::max(0.0, frac);
  for (auto& [name, value] : state.online) {
    const Tensor& g = online.at(name).grad();
    for (std::int64_t i = 0; i < value.size(); ++i) value[i] -= lr * g[i];
  }
  ema_update(state);
  state.step += 1;
  return metrics;
}

ParamSet export_encoder(const ModelState& state) {
  ParamSet out;
  for (const auto& [name, value] : state.online) {
    if (name.starts_with("embed.") || name.starts_with("layer")) out.emplace(name, value);
  }
  return out;
}

}  // namespace layoutrel

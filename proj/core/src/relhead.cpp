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

#include "layoutrel/relhead.hpp"

#include <array>
#include <cmath>
#include <string>
#include <vector>

#include "layoutrel/errors.hpp"

namespace layoutrel {
namespace {

constexpr std::array<RelationKind, 4> kAllKinds = {RelationKind::kRow, RelationKind::kCol,
                                                   RelationKind::kKv, RelationKind::kOrder};
constexpr std::array<const char*, 6> kHeadSuffixes = {"f.w1", "f.b1",  "f.w2",
                                                     "f.b2", "cls.w", "cls.b"};

const Var& pick(const VarSet& w, const std::string& name) {
  const auto it = w.find(name);
  if (it == w.end()) throw StateError("relation head: missing parameter '" + name + "'");
  return it->second;
}

bool is_encoder_param(const std::string& name) {
  return name.starts_with("embed.") || name.starts_with("layer");
}

}  // namespace

void FinetuneConfig::validate() const {
  if (d_head < 1) throw ParamError("FinetuneConfig: d_head must be positive");
  if (!(lr > 0.0)) throw ParamError("FinetuneConfig: lr must be positive");
}

void FinetuneState::validate() const {
  encoder.validate();
  config.validate();
  for (const RelationKind kind : kAllKinds) {
    const std::string stem = head_stem(kind);
    for (const char* suffix : kHeadSuffixes) {
      if (params.count(stem + suffix) != 1) {
        throw StateError("FinetuneState: missing parameter '" + stem + suffix + "'");
      }
    }
    const Tensor& w1 = params.at(stem + "f.w1");
    if (w1.shape() != std::vector<int>{2 * encoder.d, config.d_head}) {
      throw StateError("FinetuneState: '" + stem + "f.w1' does not match 2d x d_head");
    }
  }
}

std::string head_stem(RelationKind kind) { return "head." + to_string(kind) + "."; }

FinetuneState init_finetune_state(const EncoderConfig& encoder, const FinetuneConfig& config,
                                  Rng& rng) {
  encoder.validate();
  config.validate();
  FinetuneState state;
  state.encoder = encoder;
  state.config = config;
  state.params = init_encoder_params(encoder, rng);
  for (const RelationKind kind : kAllKinds) {
    const std::string stem = head_stem(kind);
    state.params[stem + "f.w1"] = glorot_uniform(2 * encoder.d, config.d_head, rng);
    state.params[stem + "f.b1"] = Tensor({1, config.d_head});
    state.params[stem + "f.w2"] = glorot_uniform(config.d_head, config.d_head, rng);
    state.params[stem + "f.b2"] = Tensor({1, config.d_head});
    state.params[stem + "cls.w"] = glorot_uniform(config.d_head, 1, rng);
    state.params[stem + "cls.b"] = Tensor({1, 1});
  }
  state.validate();
  return state;
}

void load_pretrained_encoder(FinetuneState& state, const ParamSet& encoder_weights) {
  for (const auto& [name, value] : encoder_weights) {
    const auto it = state.params.find(name);
    if (it == state.params.end()) {
      throw StateError("load_pretrained_encoder: unknown parameter '" + name + "'");
    }
    if (!it->second.same_shape(value)) {
      throw StateError("load_pretrained_encoder: shape mismatch for '" + name + "'");
    }
  }
  // Partial loads would silently leave random encoder weights behind.
  for (const auto& [name, value] : state.params) {
    if (is_encoder_param(name) && encoder_weights.count(name) == 0) {
      throw StateError("load_pretrained_encoder: pre-trained weights lack '" + name + "'");
    }
  }
  for (const auto& [name, value] : encoder_weights) state.params[name] = value;
}

void warm_start_heads(FinetuneState& state, const ParamSet& pretrain_online) {
  static constexpr std::array<const char*, 4> kAggSuffixes = {"f.w1", "f.b1", "f.w2", "f.b2"};
  for (const char* suffix : kAggSuffixes) {
    const auto it = pretrain_online.find(std::string("rel.") + suffix);
    if (it == pretrain_online.end()) {
      throw StateError(std::string("warm_start_heads: pre-trained set lacks 'rel.") + suffix +
                       "'");
    }
    for (const RelationKind kind : kAllKinds) {
      Tensor& dst = state.params.at(head_stem(kind) + suffix);
      if (!dst.same_shape(it->second)) {
        throw StateError("warm_start_heads: aggregator width differs from d_head");
      }
      dst = it->second;
    }
  }
}

Var pair_logits(const Var& m, const VarSet& w, RelationKind kind) {
  const std::string stem = head_stem(kind);
  const Var pairs = pair_concat(m);
  const Var hidden =
      gelu(add_rowvec(matmul(pairs, pick(w, stem + "f.w1")), pick(w, stem + "f.b1")));
  const Var agg = add_rowvec(matmul(hidden, pick(w, stem + "f.w2")), pick(w, stem + "f.b2"));
  return add_rowvec(matmul(agg, pick(w, stem + "cls.w")), pick(w, stem + "cls.b"));
}

Var relation_scores(const Var& m, const VarSet& w, RelationKind kind) {
  const int n = m.value().rows();
  return reshape(sigmoid(pair_logits(m, w, kind)), {n, n});
}

RelationMatrix predict_relation_matrix(const Document& doc, const FinetuneState& state,
                                       RelationKind kind, double threshold) {
  if (!(threshold > 0.0 && threshold < 1.0)) {
    throw ParamError("predict_relation_matrix: threshold must lie strictly between 0 and 1");
  }
  state.validate();
  const TokenSeq seq = tokenize(doc, state.encoder);
  Tape tape;
  const VarSet w = make_leaves(tape, state.params, /*requires_grad=*/false);
  const Var m = entity_features(tape, w, seq, state.encoder);

  RelationMatrix rel;
  rel.n = doc.n_entities();
  rel.kind = kind;
  rel.threshold = threshold;
  rel.scores = relation_scores(m, w, kind).value();
  return rel;
}

Var pair_bce(const Var& logits_flat, const RelationMatrix& gt, bool reweight) {
  const int n = gt.n;
  const std::int64_t n_pairs = static_cast<std::int64_t>(n) * n;
  if (logits_flat.value().shape() != std::vector<int>{static_cast<int>(n_pairs), 1}) {
    throw ShapeError("pair_bce: logits do not match an N^2 x 1 pair column");
  }

  std::int64_t n_pos = 0;
  for (std::int64_t p = 0; p < n_pairs; ++p) {
    const double s = gt.scores[p];
    if (s != 0.0 && s != 1.0) {
      throw LabelError("pair_bce: target matrix entries must be exactly 0 or 1");
    }
    if (s == 1.0) ++n_pos;
  }
  const std::int64_t n_neg = n_pairs - n_pos;

  // Balanced class weights; with one class absent there is nothing to
  // balance and every pair weighs 1.
  double w_pos = 1.0, w_neg = 1.0;
  if (reweight && n_pos > 0 && n_neg > 0) {
    w_pos = static_cast<double>(n_pairs) / (2.0 * static_cast<double>(n_pos));
    w_neg = static_cast<double>(n_pairs) / (2.0 * static_cast<double>(n_neg));
  }
  Tensor targets({static_cast<int>(n_pairs), 1});
  Tensor weights({static_cast<int>(n_pairs), 1});
  for (std::int64_t p = 0; p < n_pairs; ++p) {
    targets[p] = gt.scores[p];
    weights[p] = gt.scores[p] == 1.0 ? w_pos : w_neg;
  }
  return bce_with_logits(logits_flat, targets, weights);
}

FinetuneMetrics finetune_step(FinetuneState& state, const std::vector<Document>& batch,
                              const std::vector<RelationMatrix>& gt, RelationKind kind) {
  state.validate();
  if (batch.empty()) throw ParamError("finetune_step: empty batch");
  if (gt.size() != batch.size()) {
    throw LabelError("finetune_step: " + std::to_string(gt.size()) + " target matrices for " +
                     std::to_string(batch.size()) + " documents");
  }

  Tape tape;
  const VarSet w = make_leaves(tape, state.params, /*requires_grad=*/true);

  Var total;
  for (std::size_t b = 0; b < batch.size(); ++b) {
    const Document& doc = batch[b];
    if (gt[b].kind != kind) {
      throw LabelError("finetune_step: target matrix kind " + to_string(gt[b].kind) +
                       " does not match " + to_string(kind));
    }
    if (gt[b].n != doc.n_entities()) {
      throw LabelError("finetune_step: target matrix size " + std::to_string(gt[b].n) +
                       " does not match " + document_name(doc));
    }
    const TokenSeq seq = tokenize(doc, state.encoder);
    const Var m = entity_features(tape, w, seq, state.encoder);
    const Var loss = pair_bce(pair_logits(m, w, kind), gt[b], state.config.reweight);
    if (!std::isfinite(loss.value().item())) {
      throw StateError("finetune_step: non-finite loss on " + document_name(doc) + " at step " +
                       std::to_string(state.step));
    }
    total = total.valid() ? total + loss : loss;
  }
  total = scale(total, 1.0 / static_cast<double>(batch.size()));

  FinetuneMetrics metrics;
  metrics.step = state.step;
  metrics.loss = total.value().item();

  tape.backward(total);
  double norm_sq = 0.0;
  for (const auto& [name, leaf] : w) {
    const Tensor& g = leaf.grad();
    for (std::int64_t i = 0; i < g.size(); ++i) norm_sq += g[i] * g[i];
  }
  metrics.grad_norm = std::sqrt(norm_sq);

  for (auto& [name, value] : state.params) {
    const Tensor& g = w.at(name).grad();
    for (std::int64_t i = 0; i < value.size(); ++i) value[i] -= state.config.lr * g[i];
  }
  state.step += 1;
  return metrics;
}

FinetuneMetrics finetune_step(FinetuneState& state, const std::vector<Document>& batch,
                              RelationKind kind) {
  std::vector<RelationMatrix> gt;
  gt.reserve(batch.size());
  for (const Document& doc : batch) gt.push_back(gt_relation_matrix(doc, kind));
  return finetune_step(state, batch, gt, kind);
}

}  // namespace layoutrel

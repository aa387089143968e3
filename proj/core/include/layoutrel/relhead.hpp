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
// Supervised relation prediction on top of the encoder. Each relation kind
// owns an independent head: a pair aggregator of the same shape used in
// pre-training, then a sigmoid-terminated linear classifier over each ordered
// entity pair. Fine-tuning updates the encoder and the trained kind's head
// jointly; other kinds' heads never move.

#ifndef LAYOUTREL_RELHEAD_HPP_
#define LAYOUTREL_RELHEAD_HPP_

#include <string>
#include <vector>

#include "layoutrel/autodiff.hpp"
#include "layoutrel/document.hpp"
#include "layoutrel/encoder.hpp"
#include "layoutrel/params.hpp"
#include "layoutrel/rng.hpp"

namespace layoutrel {

struct FinetuneConfig {
  int d_head = 32;       // aggregator output width inside each kind head
  double lr = 1e-2;      // plain gradient-descent step size
  bool reweight = true;  // balance positive against negative pairs
  // Copy the pre-trained pair aggregator into each head before training.
  // Off = the random-init ablation.
  bool warm_start = true;

  void validate() const;  // ParamError on out-of-range values
};

struct FinetuneState {
  EncoderConfig encoder;
  FinetuneConfig config;
  ParamSet params;  // encoder weights plus all four kind heads
  long step = 0;

  void validate() const;  // config checks plus presence of every head
};

// Parameter name prefix of one kind's head, "head.row." style.
std::string head_stem(RelationKind kind);

// Fresh state with a randomly initialized encoder and heads.
FinetuneState init_finetune_state(const EncoderConfig& encoder, const FinetuneConfig& config,
                                  Rng& rng);

// Overwrites the encoder subset of the state with pre-trained weights.
// Throws StateError when a name is missing or a shape disagrees.
void load_pretrained_encoder(FinetuneState& state, const ParamSet& encoder_weights);

// Copies the pre-trained pair aggregator into every kind head. Requires the
// pre-training head width to equal d_head; throws StateError otherwise.
void warm_start_heads(FinetuneState& state, const ParamSet& pretrain_online);

// Ordered-pair classifier logits, N^2 x 1 with row i*N + j, for the loss.
Var pair_logits(const Var& m, const VarSet& w, RelationKind kind);

// N x N score matrix for one kind: entry (i, j) is the sigmoid classifier
// output on the aggregated pair (i, j). Strictly inside (0, 1).
Var relation_scores(const Var& m, const VarSet& w, RelationKind kind);

// Full forward pass on a document, packaged for the decoders. The threshold
// must lie strictly between 0 and 1.
RelationMatrix predict_relation_matrix(const Document& doc, const FinetuneState& state,
                                       RelationKind kind, double threshold = 0.5);

struct FinetuneMetrics {
  long step = 0;
  double loss = 0.0;
  double grad_norm = 0.0;
};

// One gradient-descent step of the binary pair classification loss for one
// kind, averaged over the batch. gt runs parallel to batch; a kind or size
// mismatch raises LabelError. The overload without gt derives the target
// matrices from each document's labels.
FinetuneMetrics finetune_step(FinetuneState& state, const std::vector<Document>& batch,
                              const std::vector<RelationMatrix>& gt, RelationKind kind);
FinetuneMetrics finetune_step(FinetuneState& state, const std::vector<Document>& batch,
                              RelationKind kind);

// The per-pair classification loss behind finetune_step: weighted binary
// cross entropy between the pair logits and the 0/1 target matrix. With
// reweighting, positive and negative pairs contribute equal total weight;
// otherwise every pair weighs 1.
Var pair_bce(const Var& logits_flat, const RelationMatrix& gt, bool reweight);

}  // namespace layoutrel

#endif  // LAYOUTREL_RELHEAD_HPP_

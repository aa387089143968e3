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
// Self-supervised pre-training. Two parameter sets are kept: the online set
// is trained by gradient descent, the target set only ever moves through an
// exponential moving average toward the online set. Each step draws two
// augmented views per document, pushes view 1 through the online encoder and
// view 2 through the target encoder, and penalizes disagreement between
// their relation representations at two granularities:
//
//   local:  every ordered entity pair (i, j), including i = j, is aggregated
//           into one vector; the online prediction must match the target
//           projection pair by pair.
//   global: each entity's softmax similarity distribution over all entities
//           must match after projection, row by row.
//
// A masked-token objective on the raw document trains the encoder jointly.
// Target outputs sit behind stop_gradient, so target parameters receive
// exactly zero gradient; they move only in ema_update.

#ifndef LAYOUTREL_PRETRAIN_HPP_
#define LAYOUTREL_PRETRAIN_HPP_

#include <cstdint>
#include <string>
#include <vector>

#include "layoutrel/augment.hpp"
#include "layoutrel/autodiff.hpp"
#include "layoutrel/document.hpp"
#include "layoutrel/encoder.hpp"
#include "layoutrel/params.hpp"
#include "layoutrel/rng.hpp"

namespace layoutrel {

struct PretrainConfig {
  // Head widths. For the stock encoder width 64 both default to half of it.
  int d_local = 32;   // relation vector width after aggregation
  int d_global = 32;  // projected width of a similarity row
  // Fixed input width of the global heads. Similarity rows are zero-padded
  // up to this cap, so documents must keep their entity count within it.
  int n_cap = kMaxEntitiesPerDoc;

  double tau_g = 0.5;     // softmax temperature over entity similarities
  double tau_ema = 0.99;  // target decay per step, in (0, 1)
  double mask_rate = 0.15;
  // Objective toggles for ablation runs. The masked-token loss is always on;
  // these select which consistency terms join it.
  bool use_lrcm = true;
  bool use_grcm = true;
  // Average the two view orderings (online on view 2 against target on
  // view 1 as well). Costs two extra encoder passes per document.
  bool symmetrized = true;

  double lr = 1e-3;        // initial step size, decayed linearly
  int total_steps = 2000;  // decay horizon; the step size reaches 0 here

  void validate() const;  // ParamError on out-of-range values
};

struct ModelState {
  EncoderConfig encoder;
  PretrainConfig pretrain;
  ParamSet online;  // encoder, relation heads, predictors, token head
  ParamSet target;  // encoder and projector-bearing heads only
  long step = 0;

  void validate() const;  // config checks plus name/shape alignment
};

// Fresh state: online parameters initialized from the rng, target parameters
// copied from the online subset they track, predictors set to the identity
// so aligned views start at zero consistency loss.
ModelState init_model_state(const EncoderConfig& encoder, const PretrainConfig& pretrain,
                            Rng& rng);

// All ordered entity pairs aggregated through the two-layer head in w:
// m is N x d, the result is N^2 x d_local with row i*N + j built from
// the concatenation of features i and j (order matters).
Var local_relation_repr(const Var& m, const VarSet& w);

// Row-stochastic similarity matrix: entry (i, j) is the softmax over valid
// entities j of the feature dot product at temperature tau_g. Rows of
// entities with valid[i] == 0 come out exactly zero. valid is a length-N
// 0/1 tensor; the overload without it treats every entity as valid.
Var global_relation_distribution(const Var& m, const Tensor& valid, double tau_g);
Var global_relation_distribution(const Var& m, double tau_g);

// Entity features of the two views through both parameter sets. The second
// ordering (online on view 2, target on view 1) is only consulted when the
// loss is symmetrized; leave the handles default-constructed otherwise.
struct ViewPair {
  Var v1_online;
  Var v2_target;
  Var v2_online;
  Var v1_target;
};

// Mean over valid ordered pairs of the squared distance between the online
// prediction and the stopped target projection of the pair representation.
// valid marks real (non padded) entities; a pair is valid when both ends
// are. Zero valid pairs raise DegenerateInputError.
Var lrcm_loss(const ViewPair& views, const VarSet& online, const VarSet& target,
              const Tensor& valid, const PretrainConfig& cfg);

// Mean over valid entities of the squared distance between the online
// prediction and the stopped target projection of the entity's similarity
// row, zero-padded to n_cap before the heads.
Var grcm_loss(const ViewPair& views, const VarSet& online, const VarSet& target,
              const Tensor& valid, const PretrainConfig& cfg);

// Sum of the local and the global term, equally weighted.
Var rcm_loss(const ViewPair& views, const VarSet& online, const VarSet& target,
             const Tensor& valid, const PretrainConfig& cfg);

// Token masking for the language objective. Word positions are selected
// independently at mask_rate and replaced by the mask id; layout rows and
// patches stay, so the model can lean on geometry and vision to fill gaps.
// An empty selection is redrawn once, then rejected as degenerate.
struct MvlmBatch {
  TokenSeq seq;                // ids already masked
  std::vector<int> positions;  // masked sequence positions
  std::vector<int> targets;    // original ids at those positions
};
MvlmBatch prepare_mvlm(const Document& doc, const EncoderConfig& cfg, double mask_rate,
                       std::uint64_t seed);

// Cross entropy of the token head at the masked positions only.
Var mvlm_loss(Tape& tape, const VarSet& online, const MvlmBatch& batch,
              const EncoderConfig& cfg);
Var mvlm_loss(Tape& tape, const VarSet& online, const Document& doc, const EncoderConfig& cfg,
              double mask_rate, std::uint64_t seed);

// target <- tau * target + (1 - tau) * online, elementwise, for every name
// in target. Missing names or shape mismatches raise StateError. tau = 1
// leaves the target untouched.
void ema_update(ParamSet& target, const ParamSet& online, double tau);
void ema_update(ModelState& state);

struct StepMetrics {
  long step = 0;
  double lrcm = 0.0;
  double grcm = 0.0;
  double mvlm = 0.0;
  double total = 0.0;
  double grad_norm = 0.0;
  std::uint64_t seed = 0;
};

// One optimization step over a batch: per document, two fresh views, the
// consistency losses plus the masked-token loss, averaged across the batch;
// one plain gradient-descent update of the online set with a linearly
// decayed step size; then the moving-average update of the target set.
// View and mask streams derive from (seed, document id), so a document's
// contribution does not depend on its position in the batch. When the mask
// draw degenerates twice, the step falls back to masking a single word token
// so small documents cannot stall training.
StepMetrics pretrain_step(ModelState& state, const std::vector<Document>& batch,
                          std::uint64_t seed);

// The deliverable of pre-training: just the online encoder weights.
ParamSet export_encoder(const ModelState& state);

}  // namespace layoutrel

#endif  // LAYOUTREL_PRETRAIN_HPP_

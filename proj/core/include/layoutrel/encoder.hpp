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
// Document encoder: five embedding channels (token or patch projection, 1-D
// position, linear 2-D layout, segment, modality) summed per token, fused by
// a pre-norm transformer, with per-entity features read off the [ENT]
// positions. Runs on the autodiff tape so the same code path serves training
// and inference.

#ifndef LAYOUTREL_ENCODER_HPP_
#define LAYOUTREL_ENCODER_HPP_

#include <cstdint>
#include <string>
#include <vector>

#include "layoutrel/autodiff.hpp"
#include "layoutrel/document.hpp"
#include "layoutrel/params.hpp"
#include "layoutrel/rng.hpp"
#include "layoutrel/synth.hpp"

namespace layoutrel {

struct EncoderConfig {
  int d = 64;
  int layers = 2;
  int heads = 4;
  int ffn = 128;
  int vocab = kVocabSize;
  int max_seq_len = kMaxSeqLen;
  int max_entities = kMaxEntitiesPerDoc;
  int patch_size = kPatchSize;

  // Special token ids live just past the word vocabulary.
  int ent_id() const { return vocab; }
  int mask_id() const { return vocab + 1; }
  int pad_id() const { return vocab + 2; }
  int table_size() const { return vocab + 3; }
  int patch_dim() const { return patch_size * patch_size * 3; }

  // Throws ParamError on impossible dimensions (heads not dividing d, ...).
  void validate() const;
};

// Flat token sequence for one document. Each entity contributes an [ENT]
// marker, its word tokens, and one trailing visual token; visual tokens for
// all entities sit after the text block. Padding rows may follow valid_len.
struct TokenSeq {
  std::vector<int> ids;        // table id per token; visual tokens carry -1
  std::vector<int> positions;  // 0..len-1
  std::vector<int> segments;   // owning entity index (0 for padding)
  std::vector<int> modality;   // 0 text, 1 visual
  std::vector<int> patch_row;  // row into patches for visual tokens, else -1
  std::vector<int> ent_pos;    // sequence position of entity i's [ENT]
  Tensor layout;               // len x 6: (x0, y0, x1, y1, w, h) / 1000
  Tensor patches;              // n_entities x patch_dim, flattened crops
  int valid_len = 0;
  int n_entities = 0;
  int n_vocab = 0;  // word-vocabulary size the ids were drawn from

  int length() const { return static_cast<int>(ids.size()); }
  // True for positions whose id may be swapped for [MASK]: word tokens only,
  // not [ENT], visual, or padding.
  bool maskable(int t) const;
};

// Builds the sequence. Throws CapacityError when the document exceeds the
// sequence or entity budget, ShapeError on a patch size mismatch.
TokenSeq tokenize(const Document& doc, const EncoderConfig& cfg);

// Appends [PAD] tokens (attention-invisible) up to total_len.
void pad_to(TokenSeq& seq, int total_len, const EncoderConfig& cfg);

// Fresh parameter set: glorot weight matrices, small-noise embedding tables,
// zero biases, unit layer-norm gains.
ParamSet init_encoder_params(const EncoderConfig& cfg, Rng& rng);

// Transformer forward pass, output len x d. With layers = 0 this returns the
// summed embeddings unchanged. Padded positions never influence valid ones.
Var encode_sequence(Tape& tape, const VarSet& w, const TokenSeq& seq, const EncoderConfig& cfg);

// n_entities x d matrix of [ENT]-position outputs, entity order.
Var entity_features(Tape& tape, const VarSet& w, const TokenSeq& seq, const EncoderConfig& cfg);

struct EntityFeatures {
  Tensor m;  // n_valid x d
  int n_valid = 0;
};

struct BatchFeatures {
  Tensor batch;  // B x n_max x d, padded rows zero
  Tensor mask;   // B x n_max, 1 for valid rows
};

// Stacks features to the largest entity count in the list.
BatchFeatures pad_batch(const std::vector<EntityFeatures>& features);

}  // namespace layoutrel

#endif  // LAYOUTREL_ENCODER_HPP_

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

#include "layoutrel/encoder.hpp"

#include <algorithm>
#include <cmath>

namespace layoutrel {

namespace {

// Looks a parameter up by name; a miss is a programming error surfaced as
// StateError rather than a silent map insert.
const Var& pick(const VarSet& w, const std::string& name) {
  const auto it = w.find(name);
  if (it == w.end()) throw StateError("missing parameter '" + name + "'");
  return it->second;
}

std::string layer_key(int l, const char* suffix) {
  return "layer" + std::to_string(l) + "." + suffix;
}

// Attention mask: valid queries see valid keys; padded queries see only
// themselves, which keeps every softmax row nonempty while padded content
// stays invisible to valid rows.
Tensor attention_mask(const TokenSeq& seq) {
  const int t = seq.length();
  Tensor mask({t, t});
  for (int i = 0; i < t; ++i) {
    if (i < seq.valid_len) {
      for (int j = 0; j < seq.valid_len; ++j) mask.at(i, j) = 1.0;
    } else {
      mask.at(i, i) = 1.0;
    }
  }
  return mask;
}

Var attention(const VarSet& w, const Var& x, const Tensor& mask, int l,
              const EncoderConfig& cfg) {
  const int dk = cfg.d / cfg.heads;
  const Var q = add_rowvec(matmul(x, pick(w, layer_key(l, "attn.wq"))),
                           pick(w, layer_key(l, "attn.bq")));
  const Var k = add_rowvec(matmul(x, pick(w, layer_key(l, "attn.wk"))),
                           pick(w, layer_key(l, "attn.bk")));
  const Var v = add_rowvec(matmul(x, pick(w, layer_key(l, "attn.wv"))),
                           pick(w, layer_key(l, "attn.bv")));

  Var merged;
  for (int h = 0; h < cfg.heads; ++h) {
    const int c0 = h * dk, c1 = (h + 1) * dk;
    const Var qh = slice_cols(q, c0, c1);
    const Var kh = slice_cols(k, c0, c1);
    const Var vh = slice_cols(v, c0, c1);
    const Var scores = scale(matmul(qh, transpose(kh)), 1.0 / std::sqrt(static_cast<double>(dk)));
    const Var probs = masked_softmax_rows(scores, mask);
    const Var head = matmul(probs, vh);
    merged = h == 0 ? head : concat_cols(merged, head);
  }
  return add_rowvec(matmul(merged, pick(w, layer_key(l, "attn.wo"))),
                    pick(w, layer_key(l, "attn.bo")));
}

Var feed_forward(const VarSet& w, const Var& x, int l) {
  const Var hidden = gelu(add_rowvec(matmul(x, pick(w, layer_key(l, "ffn.w1"))),
                                     pick(w, layer_key(l, "ffn.b1"))));
  return add_rowvec(matmul(hidden, pick(w, layer_key(l, "ffn.w2"))),
                    pick(w, layer_key(l, "ffn.b2")));
}

Tensor table_init(int rows, int cols, Rng& rng) {
  Tensor t({rows, cols});
  for (std::int64_t i = 0; i < t.size(); ++i) t[i] = 0.02 * rng.gaussian();
  return t;
}

}  // namespace

void EncoderConfig::validate() const {
  if (d <= 0 || layers < 0 || heads <= 0 || ffn <= 0 || vocab <= 0 || max_seq_len <= 0 ||
      max_entities <= 0 || patch_size <= 0) {
    throw ParamError("encoder config: dimensions must be positive");
  }
  if (d % heads != 0) {
    throw ParamError("encoder config: head count " + std::to_string(heads) +
                     " must divide width " + std::to_string(d));
  }
}

bool TokenSeq::maskable(int t) const {
  return t < valid_len && modality[static_cast<std::size_t>(t)] == 0 &&
         ids[static_cast<std::size_t>(t)] >= 0 && ids[static_cast<std::size_t>(t)] < n_vocab;
}

TokenSeq tokenize(const Document& doc, const EncoderConfig& cfg) {
  cfg.validate();
  const int n = doc.n_entities();
  if (n > cfg.max_entities) {
    throw CapacityError("document (" + to_string(doc.kind) + ", " + std::to_string(n) +
                        " entities) exceeds the entity budget of " +
                        std::to_string(cfg.max_entities));
  }
  int total = n;  // one visual token per entity
  for (const Entity& e : doc.entities) total += 1 + static_cast<int>(e.tokens.size());
  if (total > cfg.max_seq_len) {
    throw CapacityError("document (" + to_string(doc.kind) + ", " + std::to_string(n) +
                        " entities): sequence length " + std::to_string(total) + " exceeds " +
                        std::to_string(cfg.max_seq_len));
  }

  TokenSeq seq;
  seq.n_entities = n;
  seq.n_vocab = cfg.vocab;
  seq.layout = Tensor({total, 6});
  seq.patches = Tensor({n, cfg.patch_dim()});

  const auto push = [&seq](int id, int segment, int mod, int prow, const BBox& b) {
    const int t = seq.length();
    seq.ids.push_back(id);
    seq.positions.push_back(t);
    seq.segments.push_back(segment);
    seq.modality.push_back(mod);
    seq.patch_row.push_back(prow);
    const double g = kPageGrid;
    seq.layout.at(t, 0) = b.x0 / g;
    seq.layout.at(t, 1) = b.y0 / g;
    seq.layout.at(t, 2) = b.x1 / g;
    seq.layout.at(t, 3) = b.y1 / g;
    seq.layout.at(t, 4) = b.width() / g;
    seq.layout.at(t, 5) = b.height() / g;
  };

  for (int i = 0; i < n; ++i) {
    const Entity& e = doc.entities[static_cast<std::size_t>(i)];
    seq.ent_pos.push_back(seq.length());
    push(cfg.ent_id(), i, 0, -1, e.bbox);
    for (const int tok : e.tokens) {
      if (tok >= cfg.vocab) {
        throw ParamError("entity " + std::to_string(i) + ": token id " + std::to_string(tok) +
                         " outside the vocabulary of " + std::to_string(cfg.vocab));
      }
      push(tok, i, 0, -1, e.bbox);
    }
  }
  for (int i = 0; i < n; ++i) {
    const Entity& e = doc.entities[static_cast<std::size_t>(i)];
    if (e.patch_size() != cfg.patch_size) {
      throw ShapeError("entity " + std::to_string(i) + ": patch size " +
                       std::to_string(e.patch_size()) + " does not match the configured " +
                       std::to_string(cfg.patch_size));
    }
    for (int k = 0; k < cfg.patch_dim(); ++k) seq.patches.at(i, k) = e.patch[k];
    push(-1, i, 1, i, e.bbox);
  }
  seq.valid_len = seq.length();
  return seq;
}

void pad_to(TokenSeq& seq, int total_len, const EncoderConfig& cfg) {
  if (total_len < seq.length()) {
    throw ParamError("pad_to: target length below the current sequence length");
  }
  if (total_len > cfg.max_seq_len) {
    throw CapacityError("pad_to: target length " + std::to_string(total_len) + " exceeds " +
                        std::to_string(cfg.max_seq_len));
  }
  Tensor layout({total_len, 6});
  for (int t = 0; t < seq.length(); ++t) {
    for (int k = 0; k < 6; ++k) layout.at(t, k) = seq.layout.at(t, k);
  }
  seq.layout = std::move(layout);
  while (seq.length() < total_len) {
    const int t = seq.length();
    seq.ids.push_back(cfg.pad_id());
    seq.positions.push_back(t);
    seq.segments.push_back(0);
    seq.modality.push_back(0);
    seq.patch_row.push_back(-1);
  }
}

ParamSet init_encoder_params(const EncoderConfig& cfg, Rng& rng) {
  cfg.validate();
  ParamSet p;
  p["embed.token"] = table_init(cfg.table_size(), cfg.d, rng);
  p["embed.pos"] = table_init(cfg.max_seq_len, cfg.d, rng);
  p["embed.layout"] = glorot_uniform(6, cfg.d, rng);
  p["embed.segment"] = table_init(cfg.max_entities, cfg.d, rng);
  p["embed.modality"] = table_init(2, cfg.d, rng);
  p["embed.patch.w"] = glorot_uniform(cfg.patch_dim(), cfg.d, rng);
  p["embed.patch.b"] = Tensor({1, cfg.d});
  for (int l = 0; l < cfg.layers; ++l) {
    p[layer_key(l, "ln1.g")] = Tensor::ones({1, cfg.d});
    p[layer_key(l, "ln1.b")] = Tensor({1, cfg.d});
    p[layer_key(l, "attn.wq")] = glorot_uniform(cfg.d, cfg.d, rng);
    p[layer_key(l, "attn.bq")] = Tensor({1, cfg.d});
    p[layer_key(l, "attn.wk")] = glorot_uniform(cfg.d, cfg.d, rng);
    p[layer_key(l, "attn.bk")] = Tensor({1, cfg.d});
    p[layer_key(l, "attn.wv")] = glorot_uniform(cfg.d, cfg.d, rng);
    p[layer_key(l, "attn.bv")] = Tensor({1, cfg.d});
    p[layer_key(l, "attn.wo")] = glorot_uniform(cfg.d, cfg.d, rng);
    p[layer_key(l, "attn.bo")] = Tensor({1, cfg.d});
    p[layer_key(l, "ln2.g")] = Tensor::ones({1, cfg.d});
    p[layer_key(l, "ln2.b")] = Tensor({1, cfg.d});
    p[layer_key(l, "ffn.w1")] = glorot_uniform(cfg.d, cfg.ffn, rng);
    p[layer_key(l, "ffn.b1")] = Tensor({1, cfg.ffn});
    p[layer_key(l, "ffn.w2")] = glorot_uniform(cfg.ffn, cfg.d, rng);
    p[layer_key(l, "ffn.b2")] = Tensor({1, cfg.d});
  }
  return p;
}

Var encode_sequence(Tape& tape, const VarSet& w, const TokenSeq& seq, const EncoderConfig& cfg) {
  cfg.validate();
  const int t_len = seq.length();
  if (t_len == 0) throw DegenerateInputError("encode_sequence: empty sequence");

  // Base embedding: table row for text tokens, projected patch for visual
  // tokens, selected by complementary row masks.
  std::vector<int> safe_ids(seq.ids.begin(), seq.ids.end());
  Tensor text_mask({t_len, cfg.d});
  Tensor visual_mask({t_len, cfg.d});
  Tensor patches_full({t_len, cfg.patch_dim()});
  for (int t = 0; t < t_len; ++t) {
    if (seq.modality[static_cast<std::size_t>(t)] == 1) {
      safe_ids[static_cast<std::size_t>(t)] = 0;
      const int row = seq.patch_row[static_cast<std::size_t>(t)];
      for (int k = 0; k < cfg.patch_dim(); ++k) {
        patches_full.at(t, k) = seq.patches.at(row, k);
      }
      for (int c = 0; c < cfg.d; ++c) visual_mask.at(t, c) = 1.0;
    } else {
      for (int c = 0; c < cfg.d; ++c) text_mask.at(t, c) = 1.0;
    }
  }

  const Var base_text = mul_const(gather_rows(pick(w, "embed.token"), safe_ids), text_mask);
  const Var base_visual = mul_const(
      add_rowvec(matmul(tape.constant(patches_full), pick(w, "embed.patch.w")),
                 pick(w, "embed.patch.b")),
      visual_mask);
  const Var pos_emb = gather_rows(pick(w, "embed.pos"), seq.positions);
  const Var lay_emb = matmul(tape.constant(seq.layout), pick(w, "embed.layout"));
  const Var seg_emb = gather_rows(pick(w, "embed.segment"), seq.segments);
  const Var mod_emb = gather_rows(pick(w, "embed.modality"), seq.modality);

  Var x = base_text + base_visual + pos_emb + lay_emb + seg_emb + mod_emb;

  const Tensor mask = attention_mask(seq);
  for (int l = 0; l < cfg.layers; ++l) {
    const Var normed1 = layer_norm(x, pick(w, layer_key(l, "ln1.g")), pick(w, layer_key(l, "ln1.b")));
    x = x + attention(w, normed1, mask, l, cfg);
    const Var normed2 = layer_norm(x, pick(w, layer_key(l, "ln2.g")), pick(w, layer_key(l, "ln2.b")));
    x = x + feed_forward(w, normed2, l);
  }
  return x;
}

Var entity_features(Tape& tape, const VarSet& w, const TokenSeq& seq, const EncoderConfig& cfg) {
  const Var fused = encode_sequence(tape, w, seq, cfg);
  return gather_rows(fused, seq.ent_pos);
}

BatchFeatures pad_batch(const std::vector<EntityFeatures>& features) {
  if (features.empty()) throw ParamError("pad_batch: empty feature list");
  int n_max = 0;
  const int d = features.front().m.rank() == 2 ? features.front().m.shape()[1] : 0;
  for (const EntityFeatures& f : features) {
    if (f.m.rank() != 2 || f.m.shape()[1] != d) {
      throw ShapeError("pad_batch: inconsistent feature widths");
    }
    if (f.n_valid != f.m.shape()[0]) {
      throw ShapeError("pad_batch: n_valid does not match the row count");
    }
    n_max = std::max(n_max, f.n_valid);
  }
  const int b = static_cast<int>(features.size());
  BatchFeatures out;
  out.batch = Tensor({b, n_max, d});
  out.mask = Tensor({b, n_max});
  for (int i = 0; i < b; ++i) {
    const EntityFeatures& f = features[static_cast<std::size_t>(i)];
    for (int r = 0; r < f.n_valid; ++r) {
      out.mask.at(i, r) = 1.0;
      for (int c = 0; c < d; ++c) {
        out.batch[(static_cast<std::int64_t>(i) * n_max + r) * d + c] = f.m.at(r, c);
      }
    }
  }
  return out;
}

}  // namespace layoutrel

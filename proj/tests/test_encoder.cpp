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

#include <cmath>
#include <string>
#include <vector>

#include "doctest.h"
#include "helpers.hpp"
#include "layoutrel/encoder.hpp"
#include "layoutrel/errors.hpp"

namespace layoutrel {
namespace {

EncoderConfig tiny_config(int layers = 2) {
  EncoderConfig cfg;
  cfg.d = 8;
  cfg.layers = layers;
  cfg.heads = 2;
  cfg.ffn = 12;
  cfg.max_seq_len = 64;
  cfg.max_entities = 8;
  cfg.patch_size = 2;
  return cfg;
}

// Vertically stacked entities with small patches, enough structure for every
// sequence test without the full generator.
Document tiny_doc(int n_entities, int tokens_each) {
  Document doc;
  doc.kind = DocKind::kParagraphs;
  Rng rng(17);
  for (int i = 0; i < n_entities; ++i) {
    Entity e;
    e.id = i;
    for (int t = 0; t < tokens_each; ++t) e.tokens.push_back((5 * i + t) % kVocabSize);
    e.bbox = {20, 30 + 100 * i, 140, 80 + 100 * i};
    e.patch = testing::random_tensor({2, 2, 3}, rng, 0.1, 0.9);
    doc.entities.push_back(std::move(e));
    doc.labels.reading_order.push_back(i);
  }
  return doc;
}

// Scalar-loop recomputation of the five summed embedding channels, the
// oracle for the vectorized embedding path.
Tensor embedding_oracle(const TokenSeq& seq, const ParamSet& p, const EncoderConfig& cfg) {
  const int t_len = seq.length();
  Tensor out({t_len, cfg.d});
  for (int t = 0; t < t_len; ++t) {
    for (int c = 0; c < cfg.d; ++c) {
      double v = 0.0;
      if (seq.modality[static_cast<std::size_t>(t)] == 1) {
        const int row = seq.patch_row[static_cast<std::size_t>(t)];
        for (int k = 0; k < cfg.patch_dim(); ++k) {
          v += seq.patches.at(row, k) * p.at("embed.patch.w").at(k, c);
        }
        v += p.at("embed.patch.b").at(0, c);
      } else {
        v += p.at("embed.token").at(seq.ids[static_cast<std::size_t>(t)], c);
      }
      v += p.at("embed.pos").at(seq.positions[static_cast<std::size_t>(t)], c);
      v += p.at("embed.segment").at(seq.segments[static_cast<std::size_t>(t)], c);
      v += p.at("embed.modality").at(seq.modality[static_cast<std::size_t>(t)], c);
      for (int k = 0; k < 6; ++k) v += seq.layout.at(t, k) * p.at("embed.layout").at(k, c);
      out.at(t, c) = v;
    }
  }
  return out;
}

TEST_CASE("sequence layout: markers, text, then per-entity visual tokens") {
  const EncoderConfig cfg = tiny_config();
  const Document doc = tiny_doc(2, 1);
  const TokenSeq seq = tokenize(doc, cfg);

  REQUIRE(seq.length() == 6);
  CHECK(seq.valid_len == 6);
  CHECK(seq.n_entities == 2);
  const int ent = cfg.ent_id();
  CHECK(seq.ids == std::vector<int>{ent, doc.entities[0].tokens[0], ent,
                                    doc.entities[1].tokens[0], -1, -1});
  CHECK(seq.segments == std::vector<int>{0, 0, 1, 1, 0, 1});
  CHECK(seq.modality == std::vector<int>{0, 0, 0, 0, 1, 1});
  CHECK(seq.ent_pos == std::vector<int>{0, 2});
  CHECK(seq.patch_row == std::vector<int>{-1, -1, -1, -1, 0, 1});
  CHECK(seq.positions == std::vector<int>{0, 1, 2, 3, 4, 5});
  // Every token of an entity carries that entity's layout row.
  for (int t = 0; t < seq.length(); ++t) {
    const BBox& b = doc.entities[static_cast<std::size_t>(seq.segments[t])].bbox;
    CHECK(seq.layout.at(t, 0) == b.x0 / 1000.0);
    CHECK(seq.layout.at(t, 3) == b.y1 / 1000.0);
    CHECK(seq.layout.at(t, 5) == b.height() / 1000.0);
  }
}

TEST_CASE("maskable positions are exactly the word tokens") {
  const EncoderConfig cfg = tiny_config();
  TokenSeq seq = tokenize(tiny_doc(2, 2), cfg);
  pad_to(seq, seq.length() + 3, cfg);
  std::vector<int> maskable;
  for (int t = 0; t < seq.length(); ++t) {
    if (seq.maskable(t)) maskable.push_back(t);
  }
  // [ENT] at 0 and 3, words at 1, 2, 4, 5, visual at 6, 7, pads after.
  CHECK(maskable == std::vector<int>{1, 2, 4, 5});
}

TEST_CASE("budget overruns and bad inputs are rejected") {
  EncoderConfig cfg = tiny_config();
  CHECK_THROWS_AS(tokenize(tiny_doc(cfg.max_entities + 1, 1), cfg), CapacityError);

  cfg.max_seq_len = 8;
  CHECK_THROWS_WITH_AS(tokenize(tiny_doc(4, 2), cfg), doctest::Contains("sequence length"),
                       CapacityError);

  cfg = tiny_config();
  Document doc = tiny_doc(2, 1);
  doc.entities[0].patch = Tensor::full({3, 3, 3}, 0.5);
  CHECK_THROWS_AS(tokenize(doc, cfg), ShapeError);

  doc = tiny_doc(2, 1);
  doc.entities[1].tokens[0] = cfg.vocab + 4;
  CHECK_THROWS_AS(tokenize(doc, cfg), ParamError);

  cfg.heads = 3;  // does not divide d=8
  CHECK_THROWS_AS(tokenize(tiny_doc(2, 1), cfg), ParamError);
}

TEST_CASE("zero layers reproduce the summed embeddings exactly") {
  const EncoderConfig cfg = tiny_config(0);
  Rng rng(21);
  const ParamSet p = init_encoder_params(cfg, rng);
  const TokenSeq seq = tokenize(tiny_doc(3, 2), cfg);
  const Tensor expect = embedding_oracle(seq, p, cfg);

  Tape tape;
  const VarSet w = make_leaves(tape, p, /*requires_grad=*/false);
  const Tensor got = encode_sequence(tape, w, seq, cfg).value();
  REQUIRE(got.shape() == expect.shape());
  for (std::int64_t i = 0; i < got.size(); ++i) {
    CHECK(got[i] == doctest::Approx(expect[i]).epsilon(1e-12));
  }
}

TEST_CASE("zero patch leaves only the projection bias in the visual channel") {
  const EncoderConfig cfg = tiny_config(0);
  Rng rng(11);
  ParamSet p = init_encoder_params(cfg, rng);
  for (auto& [name, value] : p) {
    if (name != "embed.patch.b") value = Tensor(value.shape());
  }
  for (std::int64_t i = 0; i < p["embed.patch.b"].size(); ++i) {
    p["embed.patch.b"][i] = 0.25 * static_cast<double>(i + 1);
  }
  Document doc = tiny_doc(2, 1);
  for (Entity& e : doc.entities) e.patch = Tensor({2, 2, 3});
  const TokenSeq seq = tokenize(doc, cfg);

  Tape tape;
  const VarSet w = make_leaves(tape, p, false);
  const Tensor got = encode_sequence(tape, w, seq, cfg).value();
  for (int t = 0; t < seq.length(); ++t) {
    for (int c = 0; c < cfg.d; ++c) {
      const double want =
          seq.modality[static_cast<std::size_t>(t)] == 1 ? 0.25 * (c + 1) : 0.0;
      CHECK(got.at(t, c) == want);
    }
  }
}

TEST_CASE("perturbing one entity's box moves only its own segment") {
  const EncoderConfig cfg = tiny_config(0);
  Rng rng(31);
  const ParamSet p = init_encoder_params(cfg, rng);
  Document doc = tiny_doc(3, 2);

  Tape t1;
  const Tensor before =
      encode_sequence(t1, make_leaves(t1, p, false), tokenize(doc, cfg), cfg).value();
  doc.entities[1].bbox.x0 += 40;
  doc.entities[1].bbox.x1 += 40;
  Tape t2;
  const TokenSeq seq = tokenize(doc, cfg);
  const Tensor after = encode_sequence(t2, make_leaves(t2, p, false), seq, cfg).value();

  for (int t = 0; t < seq.length(); ++t) {
    bool changed = false;
    for (int c = 0; c < cfg.d; ++c) changed = changed || before.at(t, c) != after.at(t, c);
    if (seq.segments[static_cast<std::size_t>(t)] == 1) {
      CHECK(changed);
    } else {
      CHECK_FALSE(changed);
    }
  }
}

TEST_CASE("padding is invisible to valid positions") {
  const EncoderConfig cfg = tiny_config(2);
  Rng rng(41);
  const ParamSet p = init_encoder_params(cfg, rng);
  const Document doc = tiny_doc(3, 2);
  const TokenSeq plain = tokenize(doc, cfg);
  TokenSeq padded = tokenize(doc, cfg);
  pad_to(padded, plain.length() + 7, cfg);

  Tape t1, t2;
  const Tensor a = encode_sequence(t1, make_leaves(t1, p, false), plain, cfg).value();
  const Tensor b = encode_sequence(t2, make_leaves(t2, p, false), padded, cfg).value();
  for (int t = 0; t < plain.valid_len; ++t) {
    for (int c = 0; c < cfg.d; ++c) {
      CHECK(a.at(t, c) == doctest::Approx(b.at(t, c)).epsilon(1e-12));
    }
  }

  // Entity features see through padding as well.
  Tape t3, t4;
  const Tensor fa = entity_features(t3, make_leaves(t3, p, false), plain, cfg).value();
  const Tensor fb = entity_features(t4, make_leaves(t4, p, false), padded, cfg).value();
  REQUIRE(fa.shape() == std::vector<int>{3, cfg.d});
  for (std::int64_t i = 0; i < fa.size(); ++i) {
    CHECK(fa[i] == doctest::Approx(fb[i]).epsilon(1e-12));
  }
}

TEST_CASE("entity features are the fused rows at the marker positions") {
  const EncoderConfig cfg = tiny_config(1);
  Rng rng(51);
  const ParamSet p = init_encoder_params(cfg, rng);
  const TokenSeq seq = tokenize(tiny_doc(4, 1), cfg);
  Tape tape;
  const VarSet w = make_leaves(tape, p, false);
  const Tensor fused = encode_sequence(tape, w, seq, cfg).value();
  const Tensor feats = entity_features(tape, w, seq, cfg).value();
  REQUIRE(feats.rows() == 4);
  for (int i = 0; i < 4; ++i) {
    for (int c = 0; c < cfg.d; ++c) {
      CHECK(feats.at(i, c) == fused.at(seq.ent_pos[static_cast<std::size_t>(i)], c));
    }
  }
}

TEST_CASE("gradients of a pooled feature scalar match finite differences") {
  EncoderConfig cfg = tiny_config(2);
  // Small tables keep the element-wise finite-difference sweep quick.
  cfg.vocab = 16;
  cfg.max_seq_len = 16;
  Rng rng(61);
  const ParamSet p = init_encoder_params(cfg, rng);
  const TokenSeq seq = tokenize(tiny_doc(3, 2), cfg);

  std::vector<std::string> names;
  std::vector<Tensor> inputs;
  for (const auto& [name, value] : p) {
    names.push_back(name);
    inputs.push_back(value);
  }
  const testing::ScalarFn fn = [&names, &seq, &cfg](Tape& tape, const std::vector<Var>& leaves) {
    VarSet w;
    for (std::size_t i = 0; i < names.size(); ++i) w.emplace(names[i], leaves[i]);
    return sum(entity_features(tape, w, seq, cfg));
  };
  // The loss is O(7), so finite differences carry cancellation noise near
  // 1e-10; key biases have an exactly-zero gradient (softmax shift
  // invariance), and the raised floor keeps that noise from reading as
  // relative error.
  const auto res = testing::grad_check(fn, inputs, 1e-5, 1e-5);
  CHECK_MESSAGE(res.max_rel_err < 1e-4, res.worst);
}

TEST_CASE("parameter initialization is seed-deterministic") {
  const EncoderConfig cfg = tiny_config();
  Rng r1(77), r2(77), r3(78);
  const ParamSet a = init_encoder_params(cfg, r1);
  const ParamSet b = init_encoder_params(cfg, r2);
  const ParamSet c = init_encoder_params(cfg, r3);
  CHECK(a == b);
  CHECK(a != c);
  CHECK(all_finite(a));
}

TEST_CASE("feature batches pad to the widest document") {
  EntityFeatures f2{Tensor::full({2, 4}, 1.5), 2};
  EntityFeatures f5{Tensor::full({5, 4}, 2.5), 5};
  const BatchFeatures batch = pad_batch({f2, f5});
  REQUIRE(batch.batch.shape() == std::vector<int>{2, 5, 4});
  REQUIRE(batch.mask.shape() == std::vector<int>{2, 5});
  for (int r = 0; r < 5; ++r) {
    CHECK(batch.mask.at(0, r) == (r < 2 ? 1.0 : 0.0));
    CHECK(batch.mask.at(1, r) == 1.0);
  }
  // Padded rows are zero-filled.
  for (int c = 0; c < 4; ++c) {
    CHECK(batch.batch[(0 * 5 + 3) * 4 + c] == 0.0);
    CHECK(batch.batch[(0 * 5 + 1) * 4 + c] == 1.5);
    CHECK(batch.batch[(1 * 5 + 4) * 4 + c] == 2.5);
  }

  CHECK_THROWS_AS(pad_batch({}), ParamError);
  EntityFeatures wrong{Tensor::full({2, 3}, 0.0), 2};
  CHECK_THROWS_AS(pad_batch({f2, wrong}), ShapeError);
}

}  // namespace
}  // namespace layoutrel

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

#include "layoutrel/synth.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>

#include "layoutrel/corpus.hpp"
#include "layoutrel/rng.hpp"

namespace layoutrel {

namespace {

constexpr int kMargin = 10;
constexpr int kJitter = 12;       // positional noise per entity
constexpr int kMaxSide = 126;     // see the geometry contract in the header
constexpr int kSlack = 34;        // stride minus this bounds the side length

// Patch values are quantized to two decimals: the serialized form stays
// short and round-trips exactly.
double quantize(double v) { return std::round(std::clamp(v, 0.0, 1.0) * 100.0) / 100.0; }

Tensor make_patch(Rng& rng, double r, double g, double b, double noise) {
  Tensor p({kPatchSize, kPatchSize, 3});
  const double base[3] = {r, g, b};
  std::int64_t k = 0;
  for (int i = 0; i < kPatchSize * kPatchSize; ++i) {
    for (int c = 0; c < 3; ++c) p[k++] = quantize(base[c] + rng.uniform(-noise, noise));
  }
  return p;
}

void check_capacity(const std::string& what, int n) {
  if (n > kMaxEntitiesPerDoc) {
    throw CapacityError(what + ": " + std::to_string(n) + " entities exceed the per-document cap of " +
                        std::to_string(kMaxEntitiesPerDoc));
  }
  // Worst case: [ENT] + max tokens per entity, plus one visual token each.
  const int worst_seq = n * (2 + kMaxTokensPerEntity);
  if (worst_seq > kMaxSeqLen) {
    throw CapacityError(what + ": worst-case sequence length " + std::to_string(worst_seq) +
                        " exceeds " + std::to_string(kMaxSeqLen));
  }
}

// Gap (negative means overlap) between two closed intervals.
int interval_gap(int a0, int a1, int b0, int b1) { return std::max(b0 - a1, a0 - b1); }

int x_overlap(const BBox& a, const BBox& b) {
  return std::min(a.x1, b.x1) - std::max(a.x0, b.x0);
}
int y_overlap(const BBox& a, const BBox& b) {
  return std::min(a.y1, b.y1) - std::max(a.y0, b.y0);
}

// Connected components of the "intervals overlap" graph along one axis.
std::vector<std::vector<int>> overlap_components(const Document& doc, bool along_y) {
  const int n = doc.n_entities();
  std::vector<int> parent(static_cast<std::size_t>(n));
  std::iota(parent.begin(), parent.end(), 0);
  auto find = [&](int x) {
    while (parent[static_cast<std::size_t>(x)] != x) {
      parent[static_cast<std::size_t>(x)] = parent[static_cast<std::size_t>(parent[static_cast<std::size_t>(x)])];
      x = parent[static_cast<std::size_t>(x)];
    }
    return x;
  };
  for (int i = 0; i < n; ++i) {
    for (int j = i + 1; j < n; ++j) {
      const BBox& a = doc.entities[static_cast<std::size_t>(i)].bbox;
      const BBox& b = doc.entities[static_cast<std::size_t>(j)].bbox;
      const int ov = along_y ? y_overlap(a, b) : x_overlap(a, b);
      if (ov > 0) parent[static_cast<std::size_t>(find(i))] = find(j);
    }
  }
  std::vector<std::vector<int>> groups;
  std::vector<int> root_to_group(static_cast<std::size_t>(n), -1);
  for (int i = 0; i < n; ++i) {
    const int r = find(i);
    if (root_to_group[static_cast<std::size_t>(r)] == -1) {
      root_to_group[static_cast<std::size_t>(r)] = static_cast<int>(groups.size());
      groups.emplace_back();
    }
    groups[static_cast<std::size_t>(root_to_group[static_cast<std::size_t>(r)])].push_back(i);
  }
  std::sort(groups.begin(), groups.end(),
            [](const auto& a, const auto& b) { return a.front() < b.front(); });
  return groups;
}

}  // namespace

Document gen_table(int rows, int cols, std::uint64_t seed) {
  if (rows < 2 || rows > 10 || cols < 2 || cols > 10) {
    throw ParamError("gen_table: rows/cols must lie in [2, 10]");
  }
  const int n = rows * cols;
  check_capacity("gen_table " + std::to_string(rows) + "x" + std::to_string(cols), n);

  Rng rng(seed);
  const int sx = (kPageGrid - 2 * kMargin) / cols;
  const int sy = (kPageGrid - 2 * kMargin) / rows;
  const int w_hi = std::min(kMaxSide, sx - kSlack);
  const int h_hi = std::min(kMaxSide, sy - kSlack);
  const int w_lo = std::max(24, 2 * w_hi / 3);
  const int h_lo = std::max(24, 2 * h_hi / 3);

  Document doc;
  doc.kind = DocKind::kTable;
  for (int i = 0; i < rows; ++i) {
    for (int j = 0; j < cols; ++j) {
      Entity e;
      e.id = static_cast<int>(doc.entities.size());
      const int jx = static_cast<int>(rng.uniform_int(0, kJitter));
      const int jy = static_cast<int>(rng.uniform_int(0, kJitter));
      const int w = static_cast<int>(rng.uniform_int(w_lo, w_hi));
      const int h = static_cast<int>(rng.uniform_int(h_lo, h_hi));
      e.bbox.x0 = kMargin + j * sx + jx;
      e.bbox.y0 = kMargin + i * sy + jy;
      e.bbox.x1 = e.bbox.x0 + w;
      e.bbox.y1 = e.bbox.y0 + h;
      // Cell text is a simple function of the column so the masked-token
      // task has layout-grounded structure to learn.
      const int ntok = static_cast<int>(rng.uniform_int(1, 3));
      for (int t = 0; t < ntok; ++t) {
        e.tokens.push_back(kTableVocabLo + (j + t) % (kTableVocabHi - kTableVocabLo));
      }
      e.patch = make_patch(rng, 0.55, 0.60, 0.80, 0.10);
      doc.entities.push_back(std::move(e));
    }
  }
  for (int i = 0; i < rows; ++i) {
    std::vector<int> g(static_cast<std::size_t>(cols));
    std::iota(g.begin(), g.end(), i * cols);
    doc.labels.row_groups.push_back(std::move(g));
  }
  for (int j = 0; j < cols; ++j) {
    std::vector<int> g;
    for (int i = 0; i < rows; ++i) g.push_back(i * cols + j);
    doc.labels.col_groups.push_back(std::move(g));
  }
  doc = sort_entities(doc);
  validate_document(doc);
  return doc;
}

Document gen_form(int n_pairs, std::uint64_t seed) {
  if (n_pairs < 1 || n_pairs > 12) throw ParamError("gen_form: n_pairs must lie in [1, 12]");
  check_capacity("gen_form " + std::to_string(n_pairs), 2 * n_pairs);

  Rng rng(seed);
  const int slot_sx = (kPageGrid - 2 * kMargin) / 3;  // 3 slot columns
  const int slot_sy = (kPageGrid - 2 * kMargin) / 4;  // 4 slot rows

  Document doc;
  doc.kind = DocKind::kForm;
  for (int s = 0; s < n_pairs; ++s) {
    const int ox = kMargin + (s % 3) * slot_sx;
    const int oy = kMargin + (s / 3) * slot_sy;
    const int jx = static_cast<int>(rng.uniform_int(0, kJitter));
    const int jy = static_cast<int>(rng.uniform_int(0, kJitter));
    const bool horizontal = rng.coin();
    const int wk = static_cast<int>(rng.uniform_int(50, 90));
    const int hk = static_cast<int>(rng.uniform_int(28, 50));
    const int wv = static_cast<int>(rng.uniform_int(50, 100));
    const int hv = static_cast<int>(rng.uniform_int(28, 50));
    const int gap = static_cast<int>(rng.uniform_int(24, 30));
    const int shift = static_cast<int>(rng.uniform_int(-6, 6));

    Entity key;
    key.id = 2 * s;
    key.bbox = {ox + jx, oy + jy, ox + jx + wk, oy + jy + hk};
    Entity value;
    value.id = 2 * s + 1;
    if (horizontal) {
      value.bbox = {key.bbox.x1 + gap, key.bbox.y0 + shift, key.bbox.x1 + gap + wv,
                    key.bbox.y0 + shift + hv};
    } else {
      value.bbox = {key.bbox.x0 + shift, key.bbox.y1 + gap, key.bbox.x0 + shift + wv,
                    key.bbox.y1 + gap + hv};
    }

    const int nk = static_cast<int>(rng.uniform_int(1, 2));
    for (int t = 0; t < nk; ++t) {
      key.tokens.push_back(kFormKeyVocabLo + (s + t) % (kFormKeyVocabHi - kFormKeyVocabLo));
    }
    const int nv = static_cast<int>(rng.uniform_int(1, 3));
    for (int t = 0; t < nv; ++t) {
      value.tokens.push_back(kFormValueVocabLo + (s + t) % (kFormValueVocabHi - kFormValueVocabLo));
    }
    // Keys and values carry different tints; the visual channel alone can
    // tell the roles apart.
    key.patch = make_patch(rng, 0.78, 0.55, 0.52, 0.10);
    value.patch = make_patch(rng, 0.52, 0.60, 0.78, 0.10);

    doc.entities.push_back(std::move(key));
    doc.entities.push_back(std::move(value));
    doc.labels.kv_links.emplace_back(2 * s, 2 * s + 1);
  }
  doc = sort_entities(doc);
  validate_document(doc);
  return doc;
}

Document gen_paragraphs(int n_sentences, std::uint64_t seed) {
  if (n_sentences < 2 || n_sentences > 20) {
    throw ParamError("gen_paragraphs: n_sentences must lie in [2, 20]");
  }
  check_capacity("gen_paragraphs " + std::to_string(n_sentences), n_sentences);

  Rng rng(seed);
  const int n_cols = n_sentences >= 4 && rng.coin() ? 2 : 1;

  Document doc;
  doc.kind = DocKind::kParagraphs;
  int s = 0;
  for (int c = 0; c < n_cols; ++c) {
    // First column takes the ceiling half so reading order fills it fully
    // before the second column starts.
    const int in_col = n_cols == 1 ? n_sentences
                                   : (c == 0 ? (n_sentences + 1) / 2 : n_sentences / 2);
    const int base_x = kMargin + c * ((kPageGrid - 2 * kMargin) / 2 + kMargin);
    const int sy = (kPageGrid - 2 * kMargin) / in_col;
    const int h_hi = std::min(80, sy - kSlack);
    const int h_lo = std::max(8, 2 * h_hi / 3);
    for (int i = 0; i < in_col; ++i, ++s) {
      Entity e;
      e.id = s;
      const int jx = static_cast<int>(rng.uniform_int(0, kJitter));
      const int jy = static_cast<int>(rng.uniform_int(0, kJitter));
      const int w = static_cast<int>(rng.uniform_int(80, kMaxSide));
      const int h = static_cast<int>(rng.uniform_int(h_lo, h_hi));
      e.bbox = {base_x + jx, kMargin + i * sy + jy, base_x + jx + w, kMargin + i * sy + jy + h};
      const int ntok = static_cast<int>(rng.uniform_int(3, 6));
      for (int t = 0; t < ntok; ++t) {
        e.tokens.push_back(kParaVocabLo + (s + t) % (kParaVocabHi - kParaVocabLo));
      }
      // Brightness fades along the reading sequence; the image channel
      // correlates with position.
      const double lum = 0.85 - 0.55 * static_cast<double>(s) / (n_sentences - 1);
      e.patch = make_patch(rng, lum, lum, lum, 0.08);
      doc.entities.push_back(std::move(e));
      doc.labels.reading_order.push_back(s);
    }
  }
  doc = sort_entities(doc);
  validate_document(doc);
  return doc;
}

std::vector<Document> gen_corpus(const CorpusMix& mix, std::uint64_t seed) {
  if (mix.tables < 0 || mix.forms < 0 || mix.paragraphs < 0) {
    throw ParamError("gen_corpus: negative document count");
  }
  std::vector<Document> docs;
  docs.reserve(static_cast<std::size_t>(mix.tables + mix.forms + mix.paragraphs));
  std::uint64_t idx = 0;
  for (int i = 0; i < mix.tables; ++i, ++idx) {
    Rng pr = derive_rng(seed, "corpus", idx);
    const int rows = static_cast<int>(pr.uniform_int(mix.table_rows_lo, mix.table_rows_hi));
    const int cols = static_cast<int>(pr.uniform_int(mix.table_cols_lo, mix.table_cols_hi));
    docs.push_back(gen_table(rows, cols, pr.next_u64()));
  }
  for (int i = 0; i < mix.forms; ++i, ++idx) {
    Rng pr = derive_rng(seed, "corpus", idx);
    const int pairs = static_cast<int>(pr.uniform_int(mix.form_pairs_lo, mix.form_pairs_hi));
    docs.push_back(gen_form(pairs, pr.next_u64()));
  }
  for (int i = 0; i < mix.paragraphs; ++i, ++idx) {
    Rng pr = derive_rng(seed, "corpus", idx);
    const int ns = static_cast<int>(pr.uniform_int(mix.para_sentences_lo, mix.para_sentences_hi));
    docs.push_back(gen_paragraphs(ns, pr.next_u64()));
  }
  return docs;
}

void gen_corpus_file(const CorpusMix& mix, std::uint64_t seed, const std::string& path) {
  save_corpus(gen_corpus(mix, seed), path);
}

int min_pair_gap(const Document& doc) {
  int best = kPageGrid;
  const int n = doc.n_entities();
  for (int i = 0; i < n; ++i) {
    for (int j = i + 1; j < n; ++j) {
      const BBox& a = doc.entities[static_cast<std::size_t>(i)].bbox;
      const BBox& b = doc.entities[static_cast<std::size_t>(j)].bbox;
      const int gx = interval_gap(a.x0, a.x1, b.x0, b.x1);
      const int gy = interval_gap(a.y0, a.y1, b.y0, b.y1);
      best = std::min(best, std::max(gx, gy));
    }
  }
  return best;
}

std::vector<std::vector<int>> derive_row_groups(const Document& doc) {
  return overlap_components(doc, /*along_y=*/true);
}

std::vector<std::vector<int>> derive_col_groups(const Document& doc) {
  return overlap_components(doc, /*along_y=*/false);
}

std::vector<std::pair<int, int>> derive_kv_links(const Document& doc) {
  const int n = doc.n_entities();
  std::vector<int> keys, values;
  for (int i = 0; i < n; ++i) {
    const auto& toks = doc.entities[static_cast<std::size_t>(i)].tokens;
    if (toks.empty()) throw LabelError("entity " + std::to_string(i) + " has no tokens");
    const int t = toks.front();
    if (t >= kFormKeyVocabLo && t < kFormKeyVocabHi) {
      keys.push_back(i);
    } else if (t >= kFormValueVocabLo && t < kFormValueVocabHi) {
      values.push_back(i);
    } else {
      throw LabelError("entity " + std::to_string(i) + " is neither key nor value by vocabulary");
    }
  }

  std::vector<std::pair<int, int>> links;
  std::vector<char> value_taken(static_cast<std::size_t>(n), 0);
  for (const int k : keys) {
    const BBox& kb = doc.entities[static_cast<std::size_t>(k)].bbox;
    int best_v = -1;
    int best_dist = kPageGrid + 1;
    for (const int v : values) {
      const BBox& vb = doc.entities[static_cast<std::size_t>(v)].bbox;
      int dist = -1;
      if (y_overlap(kb, vb) > 0 && vb.x0 >= kb.x1) {
        dist = vb.x0 - kb.x1;  // value to the right
      } else if (x_overlap(kb, vb) > 0 && vb.y0 >= kb.y1) {
        dist = vb.y0 - kb.y1;  // value below
      }
      if (dist >= 0 && dist < best_dist) {
        best_dist = dist;
        best_v = v;
      }
    }
    if (best_v < 0) throw LabelError("no adjacent value for key " + std::to_string(k));
    if (value_taken[static_cast<std::size_t>(best_v)]) {
      throw LabelError("value " + std::to_string(best_v) + " claimed by two keys");
    }
    value_taken[static_cast<std::size_t>(best_v)] = 1;
    links.emplace_back(k, best_v);
  }
  std::sort(links.begin(), links.end());
  return links;
}

std::vector<int> derive_reading_order(const Document& doc) {
  const std::vector<std::vector<int>> columns = overlap_components(doc, /*along_y=*/false);
  // Columns left to right by their leftmost member, sentences top to bottom.
  std::vector<std::vector<int>> ordered = columns;
  for (auto& col : ordered) {
    std::sort(col.begin(), col.end(), [&doc](int a, int b) {
      const BBox& ba = doc.entities[static_cast<std::size_t>(a)].bbox;
      const BBox& bb = doc.entities[static_cast<std::size_t>(b)].bbox;
      if (ba.y0 != bb.y0) return ba.y0 < bb.y0;
      return ba.x0 < bb.x0;
    });
  }
  std::sort(ordered.begin(), ordered.end(), [&doc](const auto& a, const auto& b) {
    int min_a = kPageGrid + 1, min_b = kPageGrid + 1;
    for (const int id : a) min_a = std::min(min_a, doc.entities[static_cast<std::size_t>(id)].bbox.x0);
    for (const int id : b) min_b = std::min(min_b, doc.entities[static_cast<std::size_t>(id)].bbox.x0);
    return min_a < min_b;
  });
  std::vector<int> order;
  order.reserve(static_cast<std::size_t>(doc.n_entities()));
  for (const auto& col : ordered) order.insert(order.end(), col.begin(), col.end());
  return order;
}

}  // namespace layoutrel

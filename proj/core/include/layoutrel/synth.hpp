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
// Seeded synthetic document generator. Layout decisions are integer-only so
// identical seeds give identical documents on every platform.
//
// Geometry contract (why augmentation can never corrupt labels): every
// generated entity has sides <= 126 grid units and every pair of entities is
// separated by at least 22 units along some axis. A bounding-box edge resize
// by a ratio in [0.85, 1.15] about the center grows the box by at most
// lround(126 * 1.15) - 126 = 19 units, i.e. at most 10 per side including
// rounding, so two facing edges close at most 20 < 22 units and boxes stay
// disjoint. Clamping a grown box back inside the page can push one edge a
// few units further, but only form values sit near the page border and their
// neighbors on that side are >= 90 units away. Relation semantics are
// interval-overlap based with the same slack, so they survive as well.

#ifndef LAYOUTREL_SYNTH_HPP_
#define LAYOUTREL_SYNTH_HPP_

#include <cstdint>
#include <string>
#include <utility>
#include <vector>

#include "layoutrel/document.hpp"

namespace layoutrel {

// Token id ranges per document kind. Keys and values draw from disjoint
// ranges so the key/value role is recoverable from text alone.
inline constexpr int kTableVocabLo = 0;
inline constexpr int kTableVocabHi = 16;
inline constexpr int kFormKeyVocabLo = 16;
inline constexpr int kFormKeyVocabHi = 24;
inline constexpr int kFormValueVocabLo = 24;
inline constexpr int kFormValueVocabHi = 40;
inline constexpr int kParaVocabLo = 40;
inline constexpr int kParaVocabHi = 48;
inline constexpr int kVocabSize = 48;

// Entity count cap per document; the global relation heads consume
// fixed-width inputs sized by this cap.
inline constexpr int kMaxEntitiesPerDoc = 32;

// Sequence budget the encoder enforces; generation rejects documents that
// could not fit even at the maximum tokens-per-entity.
inline constexpr int kMaxSeqLen = 512;

inline constexpr int kPatchSize = 8;

// Table of rows x cols jittered cells with exact row/col partitions.
// Throws ParamError outside 2..10, CapacityError over the entity or
// sequence budget.
Document gen_table(int rows, int cols, std::uint64_t seed);

// Form of n_pairs key-value pairs laid out in well-separated slots; each
// value sits right of or below its key. Throws ParamError outside 1..12.
Document gen_form(int n_pairs, std::uint64_t seed);

// Paragraph page of n_sentences lines in one or two columns; the reading
// order is column-major, so with two columns it differs from a global
// top-to-bottom sort. Throws ParamError outside 2..20.
Document gen_paragraphs(int n_sentences, std::uint64_t seed);

struct CorpusMix {
  int tables = 0;
  int forms = 0;
  int paragraphs = 0;
  // Per-document parameter ranges, drawn uniformly.
  int table_rows_lo = 2, table_rows_hi = 4;
  int table_cols_lo = 2, table_cols_hi = 4;
  int form_pairs_lo = 2, form_pairs_hi = 6;
  int para_sentences_lo = 4, para_sentences_hi = 10;
};

// Deterministic corpus: document i draws from an independent stream derived
// from (seed, "corpus", i), so the mix counts can change without disturbing
// other documents.
std::vector<Document> gen_corpus(const CorpusMix& mix, std::uint64_t seed);
void gen_corpus_file(const CorpusMix& mix, std::uint64_t seed, const std::string& path);

// Smallest axis-aligned separation over all entity pairs: for each pair the
// larger of the x-gap and y-gap, minimized over pairs. Generated documents
// guarantee >= 22.
int min_pair_gap(const Document& doc);

// Label re-derivation from geometry (and token ranges, for forms). These
// recover the stored labels on every generated document and on every valid
// augmented view; they are how relation preservation is audited without
// trusting the carried-over labels.
std::vector<std::vector<int>> derive_row_groups(const Document& doc);
std::vector<std::vector<int>> derive_col_groups(const Document& doc);
std::vector<std::pair<int, int>> derive_kv_links(const Document& doc);  // throws LabelError
std::vector<int> derive_reading_order(const Document& doc);

}  // namespace layoutrel

#endif  // LAYOUTREL_SYNTH_HPP_

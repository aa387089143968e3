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
// Decoders from relation matrices to task outputs, and the evaluation
// metrics. All of it is pure: decoders must stay total on noisy, asymmetric,
// non-transitive predictions, and every decoder applied to a ground-truth
// matrix reconstructs the labels exactly.

#ifndef LAYOUTREL_DECODE_HPP_
#define LAYOUTREL_DECODE_HPP_

#include <string>
#include <vector>

#include "layoutrel/document.hpp"

namespace layoutrel {

// Entity groups from a row or col matrix: connected components of the
// OR-symmetrized decision graph, diagonal ignored. Components repair
// asymmetric and non-transitive predictions. Output is canonical: members
// ascending, groups ordered by first member. Throws ParamError on a matrix
// of any other kind.
std::vector<std::vector<int>> decode_groups(const RelationMatrix& rel);

// Table score: per side, each unordered pair (i, j), i < j, with a true
// decision counts as retrieved; F1 against the ground-truth pairs, then the
// row and col scores are averaged. Empty-set conventions per side: both
// empty -> 1, exactly one empty -> 0. Throws ParamError on size or kind
// mismatches.
double table_f1(const RelationMatrix& pred_row, const RelationMatrix& pred_col,
                const RelationMatrix& gt_row, const RelationMatrix& gt_col);

struct KvLink {
  int key_id = 0;
  int value_id = 0;
  std::string key_text;
  std::string value_text;

  bool operator==(const KvLink&) const = default;
};

// Key-value links from a kv matrix: every true decision is a candidate;
// conflicts are resolved greedily by descending score (ties by lower key,
// then lower value id) so each key keeps at most one value and each value at
// most one key. Links come back sorted by key id, with detokenized strings.
std::vector<KvLink> decode_kv(const RelationMatrix& rel, const Document& doc);

// Reading order from an order matrix: repeatedly pick the headmost entity
// among the unplaced, the one with the most true ahead-of decisions against
// other unplaced entities; ties fall to the higher mean score over unplaced
// rivals, then the lower id. Total and deterministic on any input.
std::vector<int> decode_reading_order(const RelationMatrix& rel);

// Sequence overlap score on id sequences: geometric mean of the modified
// n-gram precisions for n = 1..max_n times the brevity penalty
// exp(1 - ref_len/pred_len) capped at 1. max_n is clipped to the shorter
// sequence; if any counted precision is zero the score is zero (no
// smoothing). Empty sequences or max_n < 1 throw ParamError.
double bleu(const std::vector<int>& pred, const std::vector<int>& ref, int max_n = 4);

// Precision/recall harmonic mean over ordered decided pairs (i, j), i != j,
// with the empty-set conventions of table_f1. Throws ParamError when kinds
// or sizes differ.
double pairwise_f1(const RelationMatrix& pred, const RelationMatrix& gt);

// Baseline reading order: entity ids sorted top-to-bottom then
// left-to-right by (y0, x0), ties by id.
std::vector<int> heuristic_order(const Document& doc);

}  // namespace layoutrel

#endif  // LAYOUTREL_DECODE_HPP_

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
// Document data model: entities with layout and image crops, ground-truth
// relation labels, and the relation matrices every downstream stage consumes.

#ifndef LAYOUTREL_DOCUMENT_HPP_
#define LAYOUTREL_DOCUMENT_HPP_

#include <cstdint>
#include <string>
#include <utility>
#include <vector>

#include "layoutrel/errors.hpp"
#include "layoutrel/tensor.hpp"

namespace layoutrel {

// Page coordinates live on a normalized 0..1000 integer grid, which keeps
// overlap tests exact and layout decisions platform independent.
inline constexpr int kPageGrid = 1000;

// Longest token run a single entity may carry.
inline constexpr int kMaxTokensPerEntity = 8;

enum class DocKind { kTable, kForm, kParagraphs };
enum class RelationKind { kRow, kCol, kKv, kOrder };

std::string to_string(DocKind kind);
std::string to_string(RelationKind kind);
DocKind parse_doc_kind(const std::string& s);
RelationKind parse_relation_kind(const std::string& s);

struct BBox {
  int x0 = 0;
  int y0 = 0;
  int x1 = 0;
  int y1 = 0;

  int width() const { return x1 - x0; }
  int height() const { return y1 - y0; }
  bool operator==(const BBox&) const = default;
};

// True when the boxes share interior area. Touching edges do not count.
bool boxes_overlap(const BBox& a, const BBox& b);

struct Entity {
  int id = 0;
  std::vector<int> tokens;
  BBox bbox;
  // Square image crop, shape {P, P, 3}, values in [0, 1].
  Tensor patch;

  int patch_size() const { return patch.rank() == 3 ? patch.shape()[0] : 0; }
};

// Per-kind labels: tables carry row/col partitions, forms carry key-value
// links, paragraph pages carry a reading order. Unused fields stay empty.
struct GroundTruth {
  std::vector<std::vector<int>> row_groups;
  std::vector<std::vector<int>> col_groups;
  std::vector<std::pair<int, int>> kv_links;  // (key id, value id)
  std::vector<int> reading_order;             // ids in reading sequence
};

struct Document {
  DocKind kind = DocKind::kTable;
  std::vector<Entity> entities;
  GroundTruth labels;

  int n_entities() const { return static_cast<int>(entities.size()); }
};

// Square score/decision matrix for one relation kind; the interchange object
// between the prediction head, the decoders, and the metrics.
struct RelationMatrix {
  int n = 0;
  RelationKind kind = RelationKind::kRow;
  Tensor scores;  // n x n, values in [0, 1]
  double threshold = 0.5;

  bool decision(int i, int j) const { return scores.at(i, j) > threshold; }
};

// Checks every type invariant: bbox ranges, token counts, patch values,
// pairwise non-overlap, and the label structure the kind requires. Throws
// ValidationError naming the offending entity id (or label field).
void validate_document(const Document& doc);

// Reorders entities top-left to bottom-right by (y0, x0), reassigns ids
// 0..N-1, and remaps every label structure consistently. Group members and
// link lists come out in canonical ascending order, so the result is a fixed
// point: sorting twice equals sorting once.
Document sort_entities(const Document& doc);

// Relation matrix implied by the ground-truth labels, with 0/1 scores.
// row/col: same-group indicator with diagonal 1. kv: link indicator.
// order: strict precedence indicator. Missing labels raise LabelError.
RelationMatrix gt_relation_matrix(const Document& doc, RelationKind kind);

// Entity text as a string, for key-value output ("tok3 tok17" style).
std::string entity_string(const Entity& e);

// Order-sensitive content hash over kind, entities, and patches. Stable
// across processes; used to key per-document random streams and to name
// documents in diagnostics, since documents carry no external id.
std::uint64_t document_digest(const Document& doc);

// "table 0x1f2e3d4c5b6a7988" style display name built from the digest.
std::string document_name(const Document& doc);

}  // namespace layoutrel

#endif  // LAYOUTREL_DOCUMENT_HPP_

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

#include "layoutrel/document.hpp"

#include <algorithm>
#include <cmath>
#include <cstring>
#include <numeric>

namespace layoutrel {

namespace {

[[noreturn]] void fail_entity(int id, const std::string& what) {
  throw ValidationError("entity " + std::to_string(id) + ": " + what);
}

[[noreturn]] void fail_labels(const std::string& what) {
  throw ValidationError("labels: " + what);
}

// Verifies that groups are an exact partition of 0..n-1.
void check_partition(const std::vector<std::vector<int>>& groups, int n, const char* name) {
  std::vector<char> seen(static_cast<std::size_t>(n), 0);
  for (const auto& g : groups) {
    if (g.empty()) fail_labels(std::string(name) + " contains an empty group");
    for (const int id : g) {
      if (id < 0 || id >= n) fail_labels(std::string(name) + " references unknown id " + std::to_string(id));
      if (seen[static_cast<std::size_t>(id)]) {
        fail_labels(std::string(name) + " lists id " + std::to_string(id) + " twice");
      }
      seen[static_cast<std::size_t>(id)] = 1;
    }
  }
  for (int id = 0; id < n; ++id) {
    if (!seen[static_cast<std::size_t>(id)]) {
      fail_labels(std::string(name) + " misses id " + std::to_string(id));
    }
  }
}

// Maps each entity id to the index of its group.
std::vector<int> group_index(const std::vector<std::vector<int>>& groups, int n) {
  std::vector<int> idx(static_cast<std::size_t>(n), -1);
  for (std::size_t g = 0; g < groups.size(); ++g) {
    for (const int id : groups[g]) idx[static_cast<std::size_t>(id)] = static_cast<int>(g);
  }
  return idx;
}

std::vector<std::vector<int>> remap_groups(const std::vector<std::vector<int>>& groups,
                                           const std::vector<int>& old_to_new) {
  std::vector<std::vector<int>> out;
  out.reserve(groups.size());
  for (const auto& g : groups) {
    std::vector<int> ng;
    ng.reserve(g.size());
    for (const int id : g) ng.push_back(old_to_new[static_cast<std::size_t>(id)]);
    std::sort(ng.begin(), ng.end());
    out.push_back(std::move(ng));
  }
  std::sort(out.begin(), out.end(),
            [](const auto& a, const auto& b) { return a.front() < b.front(); });
  return out;
}

}  // namespace

std::string to_string(DocKind kind) {
  switch (kind) {
    case DocKind::kTable: return "table";
    case DocKind::kForm: return "form";
    case DocKind::kParagraphs: return "paragraphs";
  }
  throw ParamError("unknown document kind value");
}

std::string to_string(RelationKind kind) {
  switch (kind) {
    case RelationKind::kRow: return "row";
    case RelationKind::kCol: return "col";
    case RelationKind::kKv: return "kv";
    case RelationKind::kOrder: return "order";
  }
  throw ParamError("unknown relation kind value");
}

DocKind parse_doc_kind(const std::string& s) {
  if (s == "table") return DocKind::kTable;
  if (s == "form") return DocKind::kForm;
  if (s == "paragraphs") return DocKind::kParagraphs;
  throw ParamError("unknown document kind '" + s + "'");
}

RelationKind parse_relation_kind(const std::string& s) {
  if (s == "row") return RelationKind::kRow;
  if (s == "col") return RelationKind::kCol;
  if (s == "kv") return RelationKind::kKv;
  if (s == "order") return RelationKind::kOrder;
  throw ParamError("unknown relation kind '" + s + "'");
}

bool boxes_overlap(const BBox& a, const BBox& b) {
  const int ix = std::min(a.x1, b.x1) - std::max(a.x0, b.x0);
  const int iy = std::min(a.y1, b.y1) - std::max(a.y0, b.y0);
  return ix > 0 && iy > 0;
}

void validate_document(const Document& doc) {
  const int n = doc.n_entities();
  if (n < 2) throw ValidationError("document has " + std::to_string(n) + " entities, need at least 2");

  for (int i = 0; i < n; ++i) {
    const Entity& e = doc.entities[static_cast<std::size_t>(i)];
    if (e.id != i) fail_entity(e.id, "id out of sequence (expected " + std::to_string(i) + ")");
    const BBox& b = e.bbox;
    if (!(0 <= b.x0 && b.x0 < b.x1 && b.x1 <= kPageGrid)) {
      fail_entity(e.id, "bbox x range invalid");
    }
    if (!(0 <= b.y0 && b.y0 < b.y1 && b.y1 <= kPageGrid)) {
      fail_entity(e.id, "bbox y range invalid");
    }
    if (e.tokens.empty() || static_cast<int>(e.tokens.size()) > kMaxTokensPerEntity) {
      fail_entity(e.id, "token count " + std::to_string(e.tokens.size()) + " outside [1, " +
                            std::to_string(kMaxTokensPerEntity) + "]");
    }
    for (const int tok : e.tokens) {
      if (tok < 0) fail_entity(e.id, "negative token id");
    }
    const int p = e.patch_size();
    if (p <= 0 || !(e.patch.shape() == std::vector<int>{p, p, 3})) {
      fail_entity(e.id, "patch is not a square P x P x 3 array");
    }
    for (std::int64_t k = 0; k < e.patch.size(); ++k) {
      const double v = e.patch[k];
      if (!(v >= 0.0 && v <= 1.0)) fail_entity(e.id, "patch value outside [0, 1]");
    }
  }

  for (int i = 0; i < n; ++i) {
    for (int j = i + 1; j < n; ++j) {
      if (boxes_overlap(doc.entities[static_cast<std::size_t>(i)].bbox,
                        doc.entities[static_cast<std::size_t>(j)].bbox)) {
        fail_entity(j, "bbox overlaps entity " + std::to_string(i));
      }
    }
  }

  const GroundTruth& gt = doc.labels;
  switch (doc.kind) {
    case DocKind::kTable: {
      if (gt.row_groups.empty() || gt.col_groups.empty()) fail_labels("table needs row and column groups");
      check_partition(gt.row_groups, n, "row_groups");
      check_partition(gt.col_groups, n, "col_groups");
      break;
    }
    case DocKind::kForm: {
      if (gt.kv_links.empty()) fail_labels("form needs key-value links");
      std::vector<char> key_used(static_cast<std::size_t>(n), 0);
      std::vector<char> val_used(static_cast<std::size_t>(n), 0);
      for (const auto& [k, v] : gt.kv_links) {
        if (k < 0 || k >= n || v < 0 || v >= n) fail_labels("kv link references unknown id");
        if (k == v) fail_labels("kv link from id " + std::to_string(k) + " to itself");
        if (key_used[static_cast<std::size_t>(k)]) {
          fail_labels("key " + std::to_string(k) + " linked twice");
        }
        if (val_used[static_cast<std::size_t>(v)]) {
          fail_labels("value " + std::to_string(v) + " linked twice");
        }
        key_used[static_cast<std::size_t>(k)] = 1;
        val_used[static_cast<std::size_t>(v)] = 1;
      }
      break;
    }
    case DocKind::kParagraphs: {
      if (static_cast<int>(gt.reading_order.size()) != n) {
        fail_labels("reading order length != entity count");
      }
      std::vector<char> seen(static_cast<std::size_t>(n), 0);
      for (const int id : gt.reading_order) {
        if (id < 0 || id >= n || seen[static_cast<std::size_t>(id)]) {
          fail_labels("reading order is not a permutation");
        }
        seen[static_cast<std::size_t>(id)] = 1;
      }
      break;
    }
  }
}

Document sort_entities(const Document& doc) {
  const int n = doc.n_entities();
  std::vector<int> perm(static_cast<std::size_t>(n));
  std::iota(perm.begin(), perm.end(), 0);
  std::sort(perm.begin(), perm.end(), [&doc](int a, int b) {
    const BBox& ba = doc.entities[static_cast<std::size_t>(a)].bbox;
    const BBox& bb = doc.entities[static_cast<std::size_t>(b)].bbox;
    if (ba.y0 != bb.y0) return ba.y0 < bb.y0;
    return ba.x0 < bb.x0;
  });

  // old id held at sorted position k gets new id k.
  std::vector<int> old_to_new(static_cast<std::size_t>(n));
  for (int k = 0; k < n; ++k) old_to_new[static_cast<std::size_t>(perm[static_cast<std::size_t>(k)])] = k;

  Document out;
  out.kind = doc.kind;
  out.entities.reserve(static_cast<std::size_t>(n));
  for (int k = 0; k < n; ++k) {
    Entity e = doc.entities[static_cast<std::size_t>(perm[static_cast<std::size_t>(k)])];
    e.id = k;
    out.entities.push_back(std::move(e));
  }

  const GroundTruth& gt = doc.labels;
  out.labels.row_groups = remap_groups(gt.row_groups, old_to_new);
  out.labels.col_groups = remap_groups(gt.col_groups, old_to_new);
  out.labels.kv_links.reserve(gt.kv_links.size());
  for (const auto& [k, v] : gt.kv_links) {
    out.labels.kv_links.emplace_back(old_to_new[static_cast<std::size_t>(k)],
                                     old_to_new[static_cast<std::size_t>(v)]);
  }
  std::sort(out.labels.kv_links.begin(), out.labels.kv_links.end());
  out.labels.reading_order.reserve(gt.reading_order.size());
  for (const int id : gt.reading_order) {
    out.labels.reading_order.push_back(old_to_new[static_cast<std::size_t>(id)]);
  }
  return out;
}

RelationMatrix gt_relation_matrix(const Document& doc, RelationKind kind) {
  const int n = doc.n_entities();
  RelationMatrix rel;
  rel.n = n;
  rel.kind = kind;
  rel.scores = Tensor({n, n});
  const GroundTruth& gt = doc.labels;

  switch (kind) {
    case RelationKind::kRow:
    case RelationKind::kCol: {
      const auto& groups = kind == RelationKind::kRow ? gt.row_groups : gt.col_groups;
      if (groups.empty()) {
        throw LabelError("document carries no " + to_string(kind) + " groups");
      }
      check_partition(groups, n, kind == RelationKind::kRow ? "row_groups" : "col_groups");
      const std::vector<int> idx = group_index(groups, n);
      for (int i = 0; i < n; ++i) {
        for (int j = 0; j < n; ++j) {
          if (idx[static_cast<std::size_t>(i)] == idx[static_cast<std::size_t>(j)]) {
            rel.scores.at(i, j) = 1.0;
          }
        }
      }
      break;
    }
    case RelationKind::kKv: {
      if (gt.kv_links.empty()) throw LabelError("document carries no key-value links");
      for (const auto& [k, v] : gt.kv_links) {
        if (k < 0 || k >= n || v < 0 || v >= n) throw LabelError("kv link references unknown id");
        rel.scores.at(k, v) = 1.0;
      }
      break;
    }
    case RelationKind::kOrder: {
      if (static_cast<int>(gt.reading_order.size()) != n) {
        throw LabelError("document carries no full reading order");
      }
      std::vector<int> pos(static_cast<std::size_t>(n), -1);
      for (int p = 0; p < n; ++p) {
        const int id = gt.reading_order[static_cast<std::size_t>(p)];
        if (id < 0 || id >= n || pos[static_cast<std::size_t>(id)] != -1) {
          throw LabelError("reading order is not a permutation");
        }
        pos[static_cast<std::size_t>(id)] = p;
      }
      for (int i = 0; i < n; ++i) {
        for (int j = 0; j < n; ++j) {
          if (i != j && pos[static_cast<std::size_t>(i)] < pos[static_cast<std::size_t>(j)]) {
            rel.scores.at(i, j) = 1.0;
          }
        }
      }
      break;
    }
  }
  return rel;
}

std::string entity_string(const Entity& e) {
  std::string s;
  for (std::size_t i = 0; i < e.tokens.size(); ++i) {
    if (i > 0) s += ' ';
    s += "tok" + std::to_string(e.tokens[i]);
  }
  return s;
}

std::uint64_t document_digest(const Document& doc) {
  std::uint64_t h = 0xcbf29ce484222325ULL;
  const auto mix = [&h](std::uint64_t v) {
    for (int b = 0; b < 8; ++b) {
      h ^= (v >> (8 * b)) & 0xff;
      h *= 0x100000001b3ULL;
    }
  };
  mix(static_cast<std::uint64_t>(doc.kind));
  mix(static_cast<std::uint64_t>(doc.entities.size()));
  for (const Entity& e : doc.entities) {
    mix(static_cast<std::uint64_t>(e.id));
    mix(static_cast<std::uint64_t>(e.tokens.size()));
    for (const int t : e.tokens) mix(static_cast<std::uint64_t>(t));
    mix(static_cast<std::uint64_t>(e.bbox.x0));
    mix(static_cast<std::uint64_t>(e.bbox.y0));
    mix(static_cast<std::uint64_t>(e.bbox.x1));
    mix(static_cast<std::uint64_t>(e.bbox.y1));
    for (std::int64_t i = 0; i < e.patch.size(); ++i) {
      const double d = e.patch[i];
      std::uint64_t bits;
      std::memcpy(&bits, &d, 8);
      mix(bits);
    }
  }
  return h;
}

std::string document_name(const Document& doc) {
  static const char* hex = "0123456789abcdef";
  const std::uint64_t digest = document_digest(doc);
  std::string s = to_string(doc.kind) + " 0x";
  for (int i = 15; i >= 0; --i) s.push_back(hex[(digest >> (4 * i)) & 0xf]);
  return s;
}

}  // namespace layoutrel

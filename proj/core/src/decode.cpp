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

#include "layoutrel/decode.hpp"

#include <algorithm>
#include <cmath>
#include <map>
#include <tuple>
#include <vector>

#include "layoutrel/errors.hpp"

namespace layoutrel {
namespace {

// F1 with the empty-set conventions: both sides empty is a perfect score,
// one side empty is a total miss.
double f1_from_counts(int tp, int n_pred, int n_gt) {
  if (n_pred == 0 && n_gt == 0) return 1.0;
  if (n_pred == 0 || n_gt == 0) return 0.0;
  if (tp == 0) return 0.0;
  const double p = static_cast<double>(tp) / n_pred;
  const double r = static_cast<double>(tp) / n_gt;
  return 2.0 * p * r / (p + r);
}

// Unordered upper-triangle F1 of one side of a table.
double side_f1(const RelationMatrix& pred, const RelationMatrix& gt) {
  int tp = 0, n_pred = 0, n_gt = 0;
  for (int i = 0; i < pred.n; ++i) {
    for (int j = i + 1; j < pred.n; ++j) {
      const bool p = pred.decision(i, j);
      const bool g = gt.decision(i, j);
      if (p) ++n_pred;
      if (g) ++n_gt;
      if (p && g) ++tp;
    }
  }
  return f1_from_counts(tp, n_pred, n_gt);
}

void require_kind(const RelationMatrix& rel, RelationKind kind, const char* who) {
  if (rel.kind != kind) {
    throw ParamError(std::string(who) + ": expected a " + to_string(kind) + " matrix, got " +
                     to_string(rel.kind));
  }
}

}  // namespace

std::vector<std::vector<int>> decode_groups(const RelationMatrix& rel) {
  if (rel.kind != RelationKind::kRow && rel.kind != RelationKind::kCol) {
    throw ParamError("decode_groups: expected a row or col matrix, got " + to_string(rel.kind));
  }
  const int n = rel.n;
  std::vector<int> root(static_cast<std::size_t>(n), -1);
  std::vector<std::vector<int>> groups;
  for (int start = 0; start < n; ++start) {
    if (root[static_cast<std::size_t>(start)] != -1) continue;
    // Breadth-first sweep over the OR-symmetrized decisions.
    std::vector<int> member = {start};
    root[static_cast<std::size_t>(start)] = start;
    for (std::size_t head = 0; head < member.size(); ++head) {
      const int i = member[head];
      for (int j = 0; j < n; ++j) {
        if (j == i || root[static_cast<std::size_t>(j)] != -1) continue;
        if (rel.decision(i, j) || rel.decision(j, i)) {
          root[static_cast<std::size_t>(j)] = start;
          member.push_back(j);
        }
      }
    }
    std::sort(member.begin(), member.end());
    groups.push_back(std::move(member));
  }
  return groups;
}

double table_f1(const RelationMatrix& pred_row, const RelationMatrix& pred_col,
                const RelationMatrix& gt_row, const RelationMatrix& gt_col) {
  require_kind(pred_row, RelationKind::kRow, "table_f1");
  require_kind(gt_row, RelationKind::kRow, "table_f1");
  require_kind(pred_col, RelationKind::kCol, "table_f1");
  require_kind(gt_col, RelationKind::kCol, "table_f1");
  if (pred_row.n != gt_row.n || pred_col.n != gt_col.n || pred_row.n != pred_col.n) {
    throw ParamError("table_f1: matrix sizes differ");
  }
  return 0.5 * (side_f1(pred_row, gt_row) + side_f1(pred_col, gt_col));
}

std::vector<KvLink> decode_kv(const RelationMatrix& rel, const Document& doc) {
  require_kind(rel, RelationKind::kKv, "decode_kv");
  if (rel.n != doc.n_entities()) {
    throw ParamError("decode_kv: matrix size " + std::to_string(rel.n) + " does not match " +
                     std::to_string(doc.n_entities()) + " entities");
  }
  // Candidates ordered by descending score; deterministic tie-break.
  std::vector<std::tuple<double, int, int>> candidates;
  for (int i = 0; i < rel.n; ++i) {
    for (int j = 0; j < rel.n; ++j) {
      if (i != j && rel.decision(i, j)) candidates.emplace_back(-rel.scores.at(i, j), i, j);
    }
  }
  std::sort(candidates.begin(), candidates.end());

  std::vector<bool> key_used(static_cast<std::size_t>(rel.n), false);
  std::vector<bool> value_used(static_cast<std::size_t>(rel.n), false);
  std::vector<KvLink> links;
  for (const auto& [neg_score, i, j] : candidates) {
    if (key_used[static_cast<std::size_t>(i)] || value_used[static_cast<std::size_t>(j)]) {
      continue;
    }
    key_used[static_cast<std::size_t>(i)] = true;
    value_used[static_cast<std::size_t>(j)] = true;
    links.push_back({doc.entities[static_cast<std::size_t>(i)].id,
                     doc.entities[static_cast<std::size_t>(j)].id,
                     entity_string(doc.entities[static_cast<std::size_t>(i)]),
                     entity_string(doc.entities[static_cast<std::size_t>(j)])});
  }
  std::sort(links.begin(), links.end(),
            [](const KvLink& a, const KvLink& b) { return a.key_id < b.key_id; });
  return links;
}

std::vector<int> decode_reading_order(const RelationMatrix& rel) {
  require_kind(rel, RelationKind::kOrder, "decode_reading_order");
  const int n = rel.n;
  std::vector<bool> placed(static_cast<std::size_t>(n), false);
  std::vector<int> order;
  order.reserve(static_cast<std::size_t>(n));
  for (int round = 0; round < n; ++round) {
    int best = -1, best_wins = -1;
    double best_mean = 0.0;
    for (int i = 0; i < n; ++i) {
      if (placed[static_cast<std::size_t>(i)]) continue;
      int wins = 0, rivals = 0;
      double sum = 0.0;
      for (int j = 0; j < n; ++j) {
        if (j == i || placed[static_cast<std::size_t>(j)]) continue;
        ++rivals;
        sum += rel.scores.at(i, j);
        if (rel.decision(i, j)) ++wins;
      }
      const double mean = rivals > 0 ? sum / rivals : 0.0;
      if (wins > best_wins || (wins == best_wins && mean > best_mean)) {
        best = i;
        best_wins = wins;
        best_mean = mean;
      }
    }
    placed[static_cast<std::size_t>(best)] = true;
    order.push_back(best);
  }
  return order;
}

double bleu(const std::vector<int>& pred, const std::vector<int>& ref, int max_n) {
  if (pred.empty() || ref.empty()) throw ParamError("bleu: empty sequence");
  if (max_n < 1) throw ParamError("bleu: max_n must be at least 1");
  const int c = static_cast<int>(pred.size());
  const int r = static_cast<int>(ref.size());
  const int top = std::min({max_n, c, r});

  double log_sum = 0.0;
  for (int n = 1; n <= top; ++n) {
    std::map<std::vector<int>, int> ref_counts;
    for (int s = 0; s + n <= r; ++s) {
      ++ref_counts[std::vector<int>(ref.begin() + s, ref.begin() + s + n)];
    }
    std::map<std::vector<int>, int> pred_counts;
    for (int s = 0; s + n <= c; ++s) {
      ++pred_counts[std::vector<int>(pred.begin() + s, pred.begin() + s + n)];
    }
    int clipped = 0, total = 0;
    for (const auto& [gram, count] : pred_counts) {
      total += count;
      const auto it = ref_counts.find(gram);
      if (it != ref_counts.end()) clipped += std::min(count, it->second);
    }
    if (clipped == 0) return 0.0;  // no smoothing by design
    log_sum += std::log(static_cast<double>(clipped) / total);
  }
  const double brevity = c < r ? std::exp(1.0 - static_cast<double>(r) / c) : 1.0;
  return brevity * std::exp(log_sum / top);
}

double pairwise_f1(const RelationMatrix& pred, const RelationMatrix& gt) {
  if (pred.kind != gt.kind) {
    throw ParamError("pairwise_f1: kinds differ (" + to_string(pred.kind) + " vs " +
                     to_string(gt.kind) + ")");
  }
  if (pred.n != gt.n) throw ParamError("pairwise_f1: matrix sizes differ");
  int tp = 0, n_pred = 0, n_gt = 0;
  for (int i = 0; i < pred.n; ++i) {
    for (int j = 0; j < pred.n; ++j) {
      if (i == j) continue;
      const bool p = pred.decision(i, j);
      const bool g = gt.decision(i, j);
      if (p) ++n_pred;
      if (g) ++n_gt;
      if (p && g) ++tp;
    }
  }
  return f1_from_counts(tp, n_pred, n_gt);
}

std::vector<int> heuristic_order(const Document& doc) {
  std::vector<int> idx(static_cast<std::size_t>(doc.n_entities()));
  for (std::size_t i = 0; i < idx.size(); ++i) idx[i] = static_cast<int>(i);
  std::sort(idx.begin(), idx.end(), [&](int a, int b) {
    const Entity& ea = doc.entities[static_cast<std::size_t>(a)];
    const Entity& eb = doc.entities[static_cast<std::size_t>(b)];
    return std::tie(ea.bbox.y0, ea.bbox.x0, ea.id) < std::tie(eb.bbox.y0, eb.bbox.x0, eb.id);
  });
  std::vector<int> order;
  order.reserve(idx.size());
  for (const int i : idx) order.push_back(doc.entities[static_cast<std::size_t>(i)].id);
  return order;
}

}  // namespace layoutrel

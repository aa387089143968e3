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
// Positive-view generation. Both operations leave tokens and labels alone;
// the layout variant additionally proves, via an exact pairwise overlap
// check, that the perturbed geometry is still a valid document.

#ifndef LAYOUTREL_AUGMENT_HPP_
#define LAYOUTREL_AUGMENT_HPP_

#include <cstdint>
#include <utility>
#include <vector>

#include "layoutrel/document.hpp"

namespace layoutrel {

struct AugmentRecord {
  enum class Op { kVisual, kVisualLayout };
  Op op = Op::kVisual;

  // Color and blur parameters (identity: 0, 1, 1, 0, 0).
  double brightness = 0.0;
  double contrast = 1.0;
  double saturation = 1.0;
  double hue = 0.0;  // radians about the gray axis
  double blur_sigma = 0.0;

  struct EdgeResize {
    bool width_axis = true;  // false: height
    double ratio = 1.0;      // in [0.85, 1.15]
  };
  std::vector<EdgeResize> resizes;  // one per entity, layout op only
};

// Color jitter plus Gaussian blur on every patch. Boxes, tokens, and labels
// are untouched; patch values stay in [0, 1].
std::pair<Document, AugmentRecord> augment_visual(const Document& doc, std::uint64_t seed);

// Same patch transform as above, applied with explicit parameters. Identity
// parameters reproduce the input bit for bit.
Tensor apply_visual_to_patch(const Tensor& patch, const AugmentRecord& rec);

// Per entity, scales either the width or the height about the box center by
// a ratio from [0.85, 1.15], rounded to the grid and clamped to the page,
// then checks all pairs for overlap. An overlapping draw is rejected and
// retried from a derived seed, up to 8 retries; exhaustion raises
// AugmentFailedError (callers fall back to augment_visual). Patches are
// resampled along the resized axis; the visual transform is applied too.
std::pair<Document, AugmentRecord> augment_layout(const Document& doc, std::uint64_t seed);

// Fair coin between the two operations, as the training loop draws views.
std::pair<Document, AugmentRecord> sample_positive_view(const Document& doc, std::uint64_t seed);

// Re-derives aug's relation structure from its geometry (and token ranges)
// and compares the implied relation matrices against orig's stored labels,
// for every kind orig carries. This audits preservation without trusting
// the labels the augmented copy inherited.
bool verify_relation_preserved(const Document& orig, const Document& aug);

}  // namespace layoutrel

#endif  // LAYOUTREL_AUGMENT_HPP_

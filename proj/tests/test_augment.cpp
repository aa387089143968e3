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

#include <algorithm>
#include <cmath>
#include <utility>
#include <vector>

#include "doctest.h"
#include "helpers.hpp"
#include "layoutrel/augment.hpp"
#include "layoutrel/corpus.hpp"
#include "layoutrel/errors.hpp"
#include "layoutrel/synth.hpp"

namespace layoutrel {
namespace {

// Patch with values comfortably inside (0, 1) so color arithmetic can be
// checked without the clamp interfering.
Tensor mid_patch() {
  Tensor p({4, 4, 3});
  Rng rng(5);
  for (std::int64_t i = 0; i < p.size(); ++i) p[i] = rng.uniform(0.35, 0.65);
  return p;
}

std::vector<Document> mixed_docs(int per_kind, std::uint64_t seed) {
  CorpusMix mix;
  mix.tables = per_kind;
  mix.forms = per_kind;
  mix.paragraphs = per_kind;
  return gen_corpus(mix, seed);
}

TEST_CASE("identity parameters reproduce the patch bit for bit") {
  const Tensor p = mid_patch();
  const AugmentRecord rec;  // defaults are the identity
  CHECK(apply_visual_to_patch(p, rec) == p);
}

TEST_CASE("brightness shifts every channel by the given amount") {
  const Tensor p = mid_patch();
  AugmentRecord rec;
  rec.brightness = 0.07;
  const Tensor out = apply_visual_to_patch(p, rec);
  for (std::int64_t i = 0; i < p.size(); ++i) {
    CHECK(out[i] == doctest::Approx(p[i] + 0.07).epsilon(1e-12));
  }
}

TEST_CASE("contrast scales values about mid-gray") {
  const Tensor p = mid_patch();
  AugmentRecord rec;
  rec.contrast = 1.1;
  const Tensor out = apply_visual_to_patch(p, rec);
  for (std::int64_t i = 0; i < p.size(); ++i) {
    CHECK(out[i] == doctest::Approx(1.1 * (p[i] - 0.5) + 0.5).epsilon(1e-12));
  }
}

TEST_CASE("saturation leaves gray pixels alone") {
  Tensor p({2, 2, 3});
  for (std::int64_t i = 0; i < p.size(); ++i) p[i] = 0.42;
  AugmentRecord rec;
  rec.saturation = 1.15;
  const Tensor out = apply_visual_to_patch(p, rec);
  for (std::int64_t i = 0; i < p.size(); ++i) CHECK(out[i] == doctest::Approx(0.42).epsilon(1e-12));
}

TEST_CASE("hue rotation preserves per-pixel luminance") {
  const Tensor p = mid_patch();
  AugmentRecord rec;
  rec.hue = 0.25;
  const Tensor out = apply_visual_to_patch(p, rec);
  for (int px = 0; px < 16; ++px) {
    const double before = p[px * 3] + p[px * 3 + 1] + p[px * 3 + 2];
    const double after = out[px * 3] + out[px * 3 + 1] + out[px * 3 + 2];
    CHECK(after == doctest::Approx(before).epsilon(1e-10));
    // It must actually move the chroma, not silently no-op.
    CHECK(out[px * 3] != p[px * 3]);
  }
}

TEST_CASE("blurring a constant patch changes nothing") {
  Tensor p({4, 4, 3});
  for (std::int64_t i = 0; i < p.size(); ++i) p[i] = 0.6;
  AugmentRecord rec;
  rec.blur_sigma = 0.8;
  const Tensor out = apply_visual_to_patch(p, rec);
  for (std::int64_t i = 0; i < p.size(); ++i) CHECK(out[i] == doctest::Approx(0.6).epsilon(1e-12));
}

TEST_CASE("blur smooths a single bright pixel symmetrically") {
  Tensor p({5, 5, 3});
  p[(2 * 5 + 2) * 3] = 1.0;  // red center
  AugmentRecord rec;
  rec.blur_sigma = 0.6;
  const Tensor out = apply_visual_to_patch(p, rec);
  CHECK(out[(2 * 5 + 2) * 3] < 1.0);
  CHECK(out[(2 * 5 + 1) * 3] > 0.0);
  // Four-fold symmetry about the center.
  CHECK(out[(2 * 5 + 1) * 3] == doctest::Approx(out[(2 * 5 + 3) * 3]).epsilon(1e-12));
  CHECK(out[(1 * 5 + 2) * 3] == doctest::Approx(out[(3 * 5 + 2) * 3]).epsilon(1e-12));
  CHECK(out[(1 * 5 + 2) * 3] == doctest::Approx(out[(2 * 5 + 1) * 3]).epsilon(1e-12));
}

TEST_CASE("output values always stay inside the unit interval") {
  Tensor p({3, 3, 3});
  for (std::int64_t i = 0; i < p.size(); ++i) p[i] = i % 2 == 0 ? 0.98 : 0.02;
  AugmentRecord rec;
  rec.brightness = 0.15;
  rec.contrast = 1.15;
  rec.saturation = 1.15;
  rec.hue = 0.3;
  rec.blur_sigma = 1.2;
  const Tensor out = apply_visual_to_patch(p, rec);
  for (std::int64_t i = 0; i < out.size(); ++i) {
    CHECK(out[i] >= 0.0);
    CHECK(out[i] <= 1.0);
  }
}

TEST_CASE("visual views keep geometry, text, and labels untouched") {
  for (const Document& doc : mixed_docs(3, 21)) {
    const auto [view, rec] = augment_visual(doc, 404);
    CHECK(rec.op == AugmentRecord::Op::kVisual);
    CHECK(rec.resizes.empty());
    CHECK(rec.brightness >= -0.15);
    CHECK(rec.brightness <= 0.15);
    CHECK(rec.contrast >= 0.85);
    CHECK(rec.contrast <= 1.15);
    CHECK(rec.saturation >= 0.85);
    CHECK(rec.saturation <= 1.15);
    CHECK(rec.hue >= -0.3);
    CHECK(rec.hue <= 0.3);
    CHECK((rec.blur_sigma == 0.0 || (rec.blur_sigma >= 0.3 && rec.blur_sigma <= 1.2)));
    validate_document(view);
    REQUIRE(view.n_entities() == doc.n_entities());
    for (int i = 0; i < doc.n_entities(); ++i) {
      CHECK(view.entities[static_cast<std::size_t>(i)].bbox ==
            doc.entities[static_cast<std::size_t>(i)].bbox);
      CHECK(view.entities[static_cast<std::size_t>(i)].tokens ==
            doc.entities[static_cast<std::size_t>(i)].tokens);
    }
    CHECK(verify_relation_preserved(doc, view));
  }
}

TEST_CASE("layout views resize one axis per entity within bounds") {
  for (const Document& doc : mixed_docs(3, 22)) {
    const auto [view, rec] = augment_layout(doc, 505);
    CHECK(rec.op == AugmentRecord::Op::kVisualLayout);
    REQUIRE(static_cast<int>(rec.resizes.size()) == doc.n_entities());
    validate_document(view);
    for (int i = 0; i < doc.n_entities(); ++i) {
      const BBox& a = doc.entities[static_cast<std::size_t>(i)].bbox;
      const BBox& b = view.entities[static_cast<std::size_t>(i)].bbox;
      const AugmentRecord::EdgeResize& rz = rec.resizes[static_cast<std::size_t>(i)];
      CHECK(rz.ratio >= 0.85);
      CHECK(rz.ratio <= 1.15);
      if (rz.width_axis) {
        CHECK(a.y0 == b.y0);
        CHECK(a.y1 == b.y1);
        CHECK(b.width() == std::max<int>(1, static_cast<int>(std::lround(a.width() * rz.ratio))));
      } else {
        CHECK(a.x0 == b.x0);
        CHECK(a.x1 == b.x1);
        CHECK(b.height() ==
              std::max<int>(1, static_cast<int>(std::lround(a.height() * rz.ratio))));
      }
      CHECK(view.entities[static_cast<std::size_t>(i)].tokens ==
            doc.entities[static_cast<std::size_t>(i)].tokens);
    }
    CHECK(verify_relation_preserved(doc, view));
  }
}

TEST_CASE("sampled views are deterministic and split close to evenly") {
  const Document doc = gen_form(3, 8);
  int layout_count = 0;
  const int draws = 4000;
  for (int s = 0; s < draws; ++s) {
    const auto [view, rec] = sample_positive_view(doc, static_cast<std::uint64_t>(s));
    if (rec.op == AugmentRecord::Op::kVisualLayout) ++layout_count;
  }
  const double frac = static_cast<double>(layout_count) / draws;
  CHECK(frac > 0.47);
  CHECK(frac < 0.53);

  const auto [v1, r1] = sample_positive_view(doc, 99);
  const auto [v2, r2] = sample_positive_view(doc, 99);
  CHECK(document_to_json(v1) == document_to_json(v2));
  CHECK(r1.op == r2.op);
}

TEST_CASE("every sampled view of every kind preserves relations") {
  for (const Document& doc : mixed_docs(10, 23)) {
    for (std::uint64_t s = 0; s < 4; ++s) {
      const auto [view, rec] = sample_positive_view(doc, 1000 + s);
      validate_document(view);
      CHECK(verify_relation_preserved(doc, view));
    }
  }
}

TEST_CASE("relation audit notices corrupted geometry") {
  // Swapping the boxes of two cells from different rows keeps all boxes
  // disjoint but changes which cells share a row band.
  const Document doc = gen_table(3, 3, 31);
  Document bad = doc;
  std::swap(bad.entities[0].bbox, bad.entities[8].bbox);
  CHECK_FALSE(verify_relation_preserved(doc, bad));

  // Same trick for forms: swap a key's box with a foreign value's box.
  const Document form = gen_form(4, 31);
  Document bad_form = form;
  std::swap(bad_form.entities[static_cast<std::size_t>(form.labels.kv_links[0].first)].bbox,
            bad_form.entities[static_cast<std::size_t>(form.labels.kv_links[2].second)].bbox);
  CHECK_FALSE(verify_relation_preserved(form, bad_form));

  // Entity count mismatch is rejected outright.
  Document shorter = doc;
  shorter.entities.pop_back();
  CHECK_FALSE(verify_relation_preserved(doc, shorter));
}

TEST_CASE("packed geometry exhausts the layout retry budget") {
  // Boxes of side 100 on a 101 pitch leave one-unit gaps; some pair collides
  // in every retry, so the layout op must give up.
  Document doc;
  doc.kind = DocKind::kTable;
  for (int i = 0; i < 5; ++i) {
    for (int j = 0; j < 5; ++j) {
      Entity e;
      e.id = i * 5 + j;
      e.tokens = {1};
      e.bbox = {10 + j * 101, 10 + i * 101, 110 + j * 101, 110 + i * 101};
      e.patch = Tensor::full({2, 2, 3}, 0.5);
      doc.entities.push_back(std::move(e));
    }
  }
  CHECK_THROWS_AS(augment_layout(doc, 1234), AugmentFailedError);
}

}  // namespace
}  // namespace layoutrel

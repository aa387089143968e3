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

#include "layoutrel/augment.hpp"

#include <algorithm>
#include <cmath>

#include "layoutrel/rng.hpp"
#include "layoutrel/synth.hpp"

namespace layoutrel {

namespace {

// Rotation of an RGB vector about the gray axis (1,1,1)/sqrt(3) by the hue
// angle; preserves the luminance component exactly.
void rotate_hue(double& r, double& g, double& b, double cos_h, double sin_h) {
  constexpr double k = 0.5773502691896257645;  // 1/sqrt(3)
  const double dot = (r + g + b) * k;
  const double px = r - dot * k, py = g - dot * k, pz = b - dot * k;
  // axis x p for axis = (k, k, k)
  const double cx = k * (pz - py), cy = k * (px - pz), cz = k * (py - px);
  r = dot * k + px * cos_h + cx * sin_h;
  g = dot * k + py * cos_h + cy * sin_h;
  b = dot * k + pz * cos_h + cz * sin_h;
}

std::vector<double> gaussian_kernel(double sigma) {
  const int radius = static_cast<int>(std::ceil(2.5 * sigma));
  std::vector<double> k(static_cast<std::size_t>(2 * radius + 1));
  double total = 0.0;
  for (int i = -radius; i <= radius; ++i) {
    const double v = std::exp(-0.5 * (i * i) / (sigma * sigma));
    k[static_cast<std::size_t>(i + radius)] = v;
    total += v;
  }
  for (double& v : k) v /= total;
  return k;
}

AugmentRecord draw_visual_params(Rng& rng) {
  AugmentRecord rec;
  rec.op = AugmentRecord::Op::kVisual;
  rec.brightness = rng.uniform(-0.15, 0.15);
  rec.contrast = rng.uniform(0.85, 1.15);
  rec.saturation = rng.uniform(0.85, 1.15);
  rec.hue = rng.uniform(-0.3, 0.3);
  rec.blur_sigma = rng.coin() ? rng.uniform(0.3, 1.2) : 0.0;
  return rec;
}

// Bilinear resample of the patch content along one axis by the box ratio,
// anchored at the patch center, with edge clamping.
Tensor resample_axis(const Tensor& patch, bool width_axis, double ratio) {
  const int p = patch.shape()[0];
  Tensor out({p, p, 3});
  const double c = (p - 1) / 2.0;
  for (int y = 0; y < p; ++y) {
    for (int x = 0; x < p; ++x) {
      const double u = width_axis ? c + (x - c) / ratio : static_cast<double>(x);
      const double v = width_axis ? static_cast<double>(y) : c + (y - c) / ratio;
      const double su = std::clamp(u, 0.0, static_cast<double>(p - 1));
      const double sv = std::clamp(v, 0.0, static_cast<double>(p - 1));
      const int u0 = static_cast<int>(std::floor(su)), v0 = static_cast<int>(std::floor(sv));
      const int u1 = std::min(u0 + 1, p - 1), v1 = std::min(v0 + 1, p - 1);
      const double fu = su - u0, fv = sv - v0;
      for (int ch = 0; ch < 3; ++ch) {
        auto px = [&](int yy, int xx) {
          return patch[(static_cast<std::int64_t>(yy) * p + xx) * 3 + ch];
        };
        const double top = px(v0, u0) * (1.0 - fu) + px(v0, u1) * fu;
        const double bot = px(v1, u0) * (1.0 - fu) + px(v1, u1) * fu;
        out[(static_cast<std::int64_t>(y) * p + x) * 3 + ch] = top * (1.0 - fv) + bot * fv;
      }
    }
  }
  return out;
}

}  // namespace

Tensor apply_visual_to_patch(const Tensor& patch, const AugmentRecord& rec) {
  const int p = patch.shape()[0];
  Tensor out = patch;
  const bool identity_color = rec.brightness == 0.0 && rec.contrast == 1.0 &&
                              rec.saturation == 1.0 && rec.hue == 0.0;
  if (!identity_color) {
    const double cos_h = std::cos(rec.hue), sin_h = std::sin(rec.hue);
    for (int i = 0; i < p * p; ++i) {
      double r = out[i * 3], g = out[i * 3 + 1], b = out[i * 3 + 2];
      // Contrast about mid-gray, then brightness shift.
      r = rec.contrast * (r - 0.5) + 0.5 + rec.brightness;
      g = rec.contrast * (g - 0.5) + 0.5 + rec.brightness;
      b = rec.contrast * (b - 0.5) + 0.5 + rec.brightness;
      const double lum = (r + g + b) / 3.0;
      r = lum + rec.saturation * (r - lum);
      g = lum + rec.saturation * (g - lum);
      b = lum + rec.saturation * (b - lum);
      if (rec.hue != 0.0) rotate_hue(r, g, b, cos_h, sin_h);
      out[i * 3] = r;
      out[i * 3 + 1] = g;
      out[i * 3 + 2] = b;
    }
  }
  if (rec.blur_sigma > 0.0) {
    const std::vector<double> kernel = gaussian_kernel(rec.blur_sigma);
    const int radius = static_cast<int>(kernel.size() / 2);
    auto convolve = [&](const Tensor& src, bool horizontal) {
      Tensor dst({p, p, 3});
      for (int y = 0; y < p; ++y) {
        for (int x = 0; x < p; ++x) {
          for (int ch = 0; ch < 3; ++ch) {
            double acc = 0.0;
            for (int t = -radius; t <= radius; ++t) {
              const int yy = horizontal ? y : std::clamp(y + t, 0, p - 1);
              const int xx = horizontal ? std::clamp(x + t, 0, p - 1) : x;
              acc += kernel[static_cast<std::size_t>(t + radius)] *
                     src[(static_cast<std::int64_t>(yy) * p + xx) * 3 + ch];
            }
            dst[(static_cast<std::int64_t>(y) * p + x) * 3 + ch] = acc;
          }
        }
      }
      return dst;
    };
    out = convolve(convolve(out, /*horizontal=*/true), /*horizontal=*/false);
  }
  // Keep the [0,1] patch invariant; kernel normalization alone can round a
  // hair past 1.
  if (!identity_color || rec.blur_sigma > 0.0) {
    for (std::int64_t i = 0; i < out.size(); ++i) out[i] = std::clamp(out[i], 0.0, 1.0);
  }
  return out;
}

std::pair<Document, AugmentRecord> augment_visual(const Document& doc, std::uint64_t seed) {
  Rng rng(seed);
  const AugmentRecord rec = draw_visual_params(rng);
  Document out = doc;
  for (Entity& e : out.entities) e.patch = apply_visual_to_patch(e.patch, rec);
  return {std::move(out), rec};
}

std::pair<Document, AugmentRecord> augment_layout(const Document& doc, std::uint64_t seed) {
  const int n = doc.n_entities();
  for (int attempt = 0; attempt <= 8; ++attempt) {
    Rng rng = derive_rng(seed, "layout", static_cast<std::uint64_t>(attempt));
    AugmentRecord rec;
    rec.op = AugmentRecord::Op::kVisualLayout;
    rec.resizes.resize(static_cast<std::size_t>(n));

    std::vector<BBox> boxes(static_cast<std::size_t>(n));
    for (int i = 0; i < n; ++i) {
      const BBox& b = doc.entities[static_cast<std::size_t>(i)].bbox;
      AugmentRecord::EdgeResize& rz = rec.resizes[static_cast<std::size_t>(i)];
      rz.width_axis = rng.coin();
      rz.ratio = rng.uniform(0.85, 1.15);
      BBox nb = b;
      if (rz.width_axis) {
        const int len = std::max<int>(1, static_cast<int>(std::lround(b.width() * rz.ratio)));
        int x0 = static_cast<int>(std::lround((b.x0 + b.x1 - len) / 2.0));
        x0 = std::clamp(x0, 0, kPageGrid - len);
        nb.x0 = x0;
        nb.x1 = x0 + len;
      } else {
        const int len = std::max<int>(1, static_cast<int>(std::lround(b.height() * rz.ratio)));
        int y0 = static_cast<int>(std::lround((b.y0 + b.y1 - len) / 2.0));
        y0 = std::clamp(y0, 0, kPageGrid - len);
        nb.y0 = y0;
        nb.y1 = y0 + len;
      }
      boxes[static_cast<std::size_t>(i)] = nb;
    }

    bool ok = true;
    for (int i = 0; ok && i < n; ++i) {
      for (int j = i + 1; ok && j < n; ++j) {
        if (boxes_overlap(boxes[static_cast<std::size_t>(i)], boxes[static_cast<std::size_t>(j)])) {
          ok = false;
        }
      }
    }
    if (!ok) continue;

    Document out = doc;
    for (int i = 0; i < n; ++i) {
      Entity& e = out.entities[static_cast<std::size_t>(i)];
      const AugmentRecord::EdgeResize& rz = rec.resizes[static_cast<std::size_t>(i)];
      e.bbox = boxes[static_cast<std::size_t>(i)];
      if (rz.ratio != 1.0) e.patch = resample_axis(e.patch, rz.width_axis, rz.ratio);
    }
    // Same color/blur treatment as the pure visual op, from a derived stream.
    Rng vis = derive_rng(seed, "layout-visual");
    const AugmentRecord vis_rec = draw_visual_params(vis);
    for (Entity& e : out.entities) e.patch = apply_visual_to_patch(e.patch, vis_rec);
    rec.brightness = vis_rec.brightness;
    rec.contrast = vis_rec.contrast;
    rec.saturation = vis_rec.saturation;
    rec.hue = vis_rec.hue;
    rec.blur_sigma = vis_rec.blur_sigma;
    return {std::move(out), rec};
  }
  throw AugmentFailedError("augment_layout: 8 consecutive rejected draws, geometry too tight");
}

std::pair<Document, AugmentRecord> sample_positive_view(const Document& doc, std::uint64_t seed) {
  Rng rng(seed);
  if (rng.coin()) return augment_layout(doc, rng.next_u64());
  return augment_visual(doc, rng.next_u64());
}

bool verify_relation_preserved(const Document& orig, const Document& aug) {
  if (orig.n_entities() != aug.n_entities()) return false;
  auto same = [](const RelationMatrix& a, const RelationMatrix& b) {
    return a.n == b.n && a.scores == b.scores;
  };
  try {
    Document derived = aug;
    switch (orig.kind) {
      case DocKind::kTable:
        derived.labels.row_groups = derive_row_groups(aug);
        derived.labels.col_groups = derive_col_groups(aug);
        return same(gt_relation_matrix(orig, RelationKind::kRow),
                    gt_relation_matrix(derived, RelationKind::kRow)) &&
               same(gt_relation_matrix(orig, RelationKind::kCol),
                    gt_relation_matrix(derived, RelationKind::kCol));
      case DocKind::kForm:
        derived.labels.kv_links = derive_kv_links(aug);
        return same(gt_relation_matrix(orig, RelationKind::kKv),
                    gt_relation_matrix(derived, RelationKind::kKv));
      case DocKind::kParagraphs:
        derived.labels.reading_order = derive_reading_order(aug);
        return same(gt_relation_matrix(orig, RelationKind::kOrder),
                    gt_relation_matrix(derived, RelationKind::kOrder));
    }
  } catch (const LabelError&) {
    return false;
  } catch (const ValidationError&) {
    return false;
  }
  return false;
}

}  // namespace layoutrel

// Copyright 2026 The ASN Authors.
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

#pragma once

#include <algorithm>
#include <cmath>
#include <cstddef>
#include <numeric>
#include <span>
#include <vector>

#include "asn/error.hpp"
#include "asn/geometry.hpp"

namespace asn {

/// Per-pixel C-channel latent feature grid (the geometric context).
class ContextMap {
 public:
  ContextMap() = default;
  ContextMap(int width, int height, int channels, double fill = 0.0)
      : width_(width), height_(height), channels_(channels) {
    if (width < 0 || height < 0 || channels < 1) {
      throw Error(ErrorKind::kConfiguration, "context map needs non-negative size and >= 1 channel");
    }
    features_.assign(static_cast<std::size_t>(width) * static_cast<std::size_t>(height) *
                         static_cast<std::size_t>(channels),
                     fill);
  }

  int width() const noexcept { return width_; }
  int height() const noexcept { return height_; }
  int channels() const noexcept { return channels_; }

  std::size_t offset(int u, int v) const noexcept {
    return (static_cast<std::size_t>(v) * static_cast<std::size_t>(width_) + static_cast<std::size_t>(u)) *
           static_cast<std::size_t>(channels_);
  }
  std::span<const double> feature(int u, int v) const {
    return {features_.data() + offset(u, v), static_cast<std::size_t>(channels_)};
  }
  std::span<double> feature(int u, int v) {
    return {features_.data() + offset(u, v), static_cast<std::size_t>(channels_)};
  }
  std::span<const double> feature(Pixel p) const { return feature(p.u, p.v); }

  const std::vector<double>& data() const noexcept { return features_; }
  std::vector<double>& data() noexcept { return features_; }

  template <typename T>
  bool same_shape(const Map<T>& m) const noexcept {
    return m.width() == width_ && m.height() == height_;
  }

  bool all_finite() const {
    return std::all_of(features_.begin(), features_.end(), [](double x) { return std::isfinite(x); });
  }

  friend bool operator==(const ContextMap&, const ContextMap&) = default;

 private:
  int width_ = 0;
  int height_ = 0;
  int channels_ = 1;
  std::vector<double> features_;
};

inline double feature_distance(std::span<const double> a, std::span<const double> b) {
  double sq = 0.0;
  for (std::size_t c = 0; c < a.size(); ++c) {
    const double d = a[c] - b[c];
    sq += d * d;
  }
  return std::sqrt(sq);
}

/// Context similarity exp(-0.5 * ||fi - fj||). The distance is the plain L2
/// norm, not its square.
inline double similarity(std::span<const double> fi, std::span<const double> fj) {
  if (fi.size() != fj.size()) throw Error(ErrorKind::kConfiguration, "feature channel mismatch");
  return std::exp(-0.5 * feature_distance(fi, fj));
}

/// Raw and patch-normalized similarities of every patch pixel to the center.
struct PatchSimilarity {
  std::vector<double> raw;
  std::vector<double> normalized;
  double total = 0.0;
};

inline PatchSimilarity patch_similarity(const ContextMap& ctx, Pixel center, std::span<const Pixel> patch) {
  if (patch.empty()) throw Error(ErrorKind::kDegeneratePatch, "empty patch");
  PatchSimilarity out;
  out.raw.reserve(patch.size());
  const auto fc = ctx.feature(center);
  for (const Pixel& p : patch) {
    const double l = similarity(fc, ctx.feature(p));
    out.raw.push_back(l);
    out.total += l;
  }
  out.normalized.reserve(patch.size());
  for (double l : out.raw) out.normalized.push_back(l / out.total);
  return out;
}

/// Similarities normalized over the patch; the result sums to one.
inline std::vector<double> normalized_similarities(const ContextMap& ctx, Pixel center,
                                                   std::span<const Pixel> patch) {
  return patch_similarity(ctx, center, patch).normalized;
}

/// Confidence of a sampled triangle: product of its vertices' normalized
/// similarities.
inline double triplet_confidence(std::span<const double> lbar, int a, int b, int c) {
  return lbar[static_cast<std::size_t>(a)] * lbar[static_cast<std::size_t>(b)] * lbar[static_cast<std::size_t>(c)];
}

/// Channel-wise absolute sum of the context.
inline ScalarMap intensity_map(const ContextMap& ctx) {
  ScalarMap out(ctx.width(), ctx.height(), 0.0, true);
  for (int v = 0; v < ctx.height(); ++v) {
    for (int u = 0; u < ctx.width(); ++u) {
      double s = 0.0;
      for (double f : ctx.feature(u, v)) s += std::abs(f);
      out.at(u, v) = s;
    }
  }
  return out;
}

enum class DerivativeOrder { kFirst = 1, kSecond = 2 };

/// Per-pixel non-negative weights used for sampling and loss weighting.
using GuidanceMap = Map<double>;

namespace detail {

// Stencils along one axis; `at(i)` reads sample i of a line of length n >= 3.
template <typename At>
double first_difference(At at, int i, int n) {
  if (i == 0) return at(1) - at(0);
  if (i == n - 1) return at(n - 1) - at(n - 2);
  return 0.5 * (at(i + 1) - at(i - 1));
}

template <typename At>
double second_difference(At at, int i, int n) {
  const int c = std::clamp(i, 1, n - 2);
  return at(c + 1) - 2.0 * at(c) + at(c - 1);
}

}  // namespace detail

/// Gradient (first order) or curvature (second order) magnitude of the
/// intensity map, normalized to [0, 1] by the per-image maximum.
inline GuidanceMap guidance_weights(const ScalarMap& intensity, DerivativeOrder order) {
  const int w = intensity.width();
  const int h = intensity.height();
  if (w < 3 || h < 3) throw Error(ErrorKind::kConfiguration, "guidance needs width and height >= 3");
  GuidanceMap out(w, h, 0.0, true);
  double peak = 0.0;
  for (int v = 0; v < h; ++v) {
    for (int u = 0; u < w; ++u) {
      auto row = [&](int i) { return intensity.at(i, v); };
      auto col = [&](int i) { return intensity.at(u, i); };
      double gx, gy;
      if (order == DerivativeOrder::kFirst) {
        gx = detail::first_difference(row, u, w);
        gy = detail::first_difference(col, v, h);
      } else {
        gx = detail::second_difference(row, u, w);
        gy = detail::second_difference(col, v, h);
      }
      const double mag = std::sqrt(gx * gx + gy * gy);
      out.at(u, v) = mag;
      peak = std::max(peak, mag);
    }
  }
  for (auto& x : out.values()) x = peak > 0.0 ? x / peak : 0.0;
  return out;
}

struct SampleSet {
  std::vector<Pixel> pixels;
  std::size_t v = 0;
};

/// Top round(ratio * valid count) pixels by weight; ties go to the smaller
/// row-major index.
inline SampleSet top_v_sample(const GuidanceMap& gm, double ratio) {
  if (!(ratio > 0.0 && ratio <= 1.0)) throw Error(ErrorKind::kValidation, "ratio must be in (0, 1]");
  std::vector<std::size_t> order;
  order.reserve(gm.size());
  for (std::size_t i = 0; i < gm.size(); ++i) {
    if (gm.mask()[i]) order.push_back(i);
  }
  const auto target = static_cast<std::size_t>(std::llround(ratio * static_cast<double>(order.size())));
  std::stable_sort(order.begin(), order.end(),
                   [&](std::size_t a, std::size_t b) { return gm.values()[a] > gm.values()[b]; });
  SampleSet out;
  out.v = target;
  out.pixels.reserve(target);
  for (std::size_t i = 0; i < target && i < order.size(); ++i) out.pixels.push_back(gm.pixel(order[i]));
  return out;
}

}  // namespace asn

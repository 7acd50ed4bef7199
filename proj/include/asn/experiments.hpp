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
#include <chrono>
#include <cmath>
#include <cstdint>
#include <cstdio>
#include <sstream>
#include <string>
#include <vector>

#include "asn/context.hpp"
#include "asn/error.hpp"
#include "asn/metrics.hpp"
#include "asn/normals.hpp"
#include "asn/scenes.hpp"

namespace asn {

struct SweepRow {
  double param = 0.0;
  std::string method;
  NormalMetrics metrics;
  double ms = 0.0;
};

struct SweepResult {
  std::string parameter;
  std::vector<SweepRow> rows;
  std::vector<std::uint64_t> seeds;

  /// Rows of one method, in parameter order.
  std::vector<SweepRow> method_rows(const std::string& method) const {
    std::vector<SweepRow> out;
    for (const auto& r : rows)
      if (r.method == method) out.push_back(r);
    return out;
  }
};

inline std::string format_double(double x) {
  char buf[64];
  std::snprintf(buf, sizeof(buf), "%.17g", x);
  return buf;
}

/// CSV with a fixed header. Wall-clock is only emitted on request because it
/// is the one column that differs between otherwise identical runs.
inline std::string to_csv(const SweepResult& r, bool include_timing = false) {
  std::ostringstream os;
  os << r.parameter << ",method,mean_deg,median_deg,pct_11_25,pct_22_5,pct_30,count";
  if (include_timing) os << ",ms";
  os << '\n';
  for (const auto& row : r.rows) {
    os << format_double(row.param) << ',' << row.method << ',' << format_double(row.metrics.mean_deg) << ','
       << format_double(row.metrics.median_deg) << ',' << format_double(row.metrics.pct_11_25) << ','
       << format_double(row.metrics.pct_22_5) << ',' << format_double(row.metrics.pct_30) << ','
       << row.metrics.count;
    if (include_timing) os << ',' << format_double(row.ms);
    os << '\n';
  }
  return os.str();
}

namespace detail {

template <typename Fn>
double time_ms(Fn&& fn, int repeats) {
  double best = 0.0;
  for (int i = 0; i < std::max(1, repeats); ++i) {
    const auto t0 = std::chrono::steady_clock::now();
    fn();
    const auto t1 = std::chrono::steady_clock::now();
    const double ms = std::chrono::duration<double, std::milli>(t1 - t0).count();
    best = i == 0 ? ms : std::min(best, ms);
  }
  return best;
}

inline void average_into(NormalMetrics& acc, const NormalMetrics& m, double weight) {
  acc.mean_deg += weight * m.mean_deg;
  acc.median_deg += weight * m.median_deg;
  acc.pct_11_25 += weight * m.pct_11_25;
  acc.pct_22_5 += weight * m.pct_22_5;
  acc.pct_30 += weight * m.pct_30;
  acc.count += m.count;
}

inline ContextMap scene_context(const Scene& scene) {
  return scene.context ? *scene.context : constant_context(scene.depth.width(), scene.depth.height());
}

}  // namespace detail

/// Area-weighted combination (uniform context) against the simple average of
/// the same sampled triangles, on a noisy semi-sphere. Metrics are averaged
/// over seeds; the scene seed and sampling seed both follow the listed seed.
inline SweepResult run_noise_experiment(const SceneSpec& base, const std::vector<double>& sigmas,
                                        const std::vector<std::uint64_t>& seeds, const AsnConfig& cfg) {
  cfg.validate();
  if (sigmas.size() < 2) throw Error(ErrorKind::kValidation, "noise experiment needs >= 2 sigma levels");
  if (seeds.size() < 3) throw Error(ErrorKind::kValidation, "noise experiment needs >= 3 seeds");
  SweepResult out{"sigma", {}, seeds};
  const double w = 1.0 / static_cast<double>(seeds.size());
  for (double sigma : sigmas) {
    SweepRow area{sigma, "area", {}, 0.0};
    SweepRow avg{sigma, "average", {}, 0.0};
    for (std::uint64_t seed : seeds) {
      SceneSpec spec = base;
      spec.noise_sigma = sigma;
      spec.seed = seed;
      AsnConfig c = cfg;
      c.seed = seed;
      const Scene scene = gen_scene(spec);
      const PointMap pm = unproject(scene.depth, spec.intrinsics);
      const ContextMap flat = constant_context(spec.width, spec.height);
      NormalMap n_area, n_avg;
      area.ms += w * detail::time_ms([&] { n_area = recover_normal_map(pm, flat, c, NormalMethod::kAsn); }, 1);
      avg.ms += w * detail::time_ms([&] { n_avg = recover_normal_map(pm, flat, c, NormalMethod::kAverage); }, 1);
      // Both methods are scored on the same pixels.
      auto mask = interior_mask(scene.depth, c.patch);
      for (std::size_t i = 0; i < mask.size(); ++i) mask.mask()[i] &= n_area.mask()[i] & n_avg.mask()[i];
      detail::average_into(area.metrics, normal_metrics(restrict_to(n_area, mask), scene.normals), w);
      detail::average_into(avg.metrics, normal_metrics(restrict_to(n_avg, mask), scene.normals), w);
    }
    out.rows.push_back(area);
    out.rows.push_back(avg);
  }
  return out;
}

/// ASN accuracy and runtime as a function of the triplet count K.
inline SweepResult run_triplet_sweep(const SceneSpec& spec, const std::vector<int>& ks, const AsnConfig& cfg,
                                     int timing_repeats = 1) {
  cfg.validate();
  if (!std::is_sorted(ks.begin(), ks.end())) throw Error(ErrorKind::kValidation, "K values must be ascending");
  if (std::find(ks.begin(), ks.end(), 10) == ks.end() || std::find(ks.begin(), ks.end(), 40) == ks.end()) {
    throw Error(ErrorKind::kValidation, "K values must include 10 and 40");
  }
  const Scene scene = gen_scene(spec);
  const PointMap pm = unproject(scene.depth, spec.intrinsics);
  const ContextMap ctx = detail::scene_context(scene);
  const auto mask = interior_mask(scene.depth, cfg.patch);
  SweepResult out{"k", {}, {spec.seed, cfg.seed}};
  for (int k : ks) {
    AsnConfig c = cfg;
    c.k = k;
    NormalMap n;
    const double ms = detail::time_ms([&] { n = recover_normal_map(pm, ctx, c, NormalMethod::kAsn); }, timing_repeats);
    out.rows.push_back({static_cast<double>(k), "asn", normal_metrics(restrict_to(n, mask), scene.normals), ms});
  }
  return out;
}

/// ASN accuracy per local patch size. All sizes are scored on the interior
/// of the largest window so the pixel sets match.
inline SweepResult run_patch_sweep(const SceneSpec& spec, const std::vector<int>& sizes, const AsnConfig& cfg,
                                   int timing_repeats = 1) {
  if (sizes.empty()) throw Error(ErrorKind::kValidation, "no patch sizes given");
  for (int s : sizes) {
    if (s < 3 || s % 2 == 0) throw Error(ErrorKind::kValidation, "patch sizes must be odd and >= 3");
  }
  const Scene scene = gen_scene(spec);
  const PointMap pm = unproject(scene.depth, spec.intrinsics);
  const ContextMap ctx = detail::scene_context(scene);
  const auto mask = interior_mask(scene.depth, *std::max_element(sizes.begin(), sizes.end()));
  SweepResult out{"patch", {}, {spec.seed, cfg.seed}};
  for (int s : sizes) {
    AsnConfig c = cfg;
    c.patch = s;
    c.validate();
    NormalMap n;
    const double ms = detail::time_ms([&] { n = recover_normal_map(pm, ctx, c, NormalMethod::kAsn); }, timing_repeats);
    out.rows.push_back({static_cast<double>(s), "asn", normal_metrics(restrict_to(n, mask), scene.normals), ms});
  }
  return out;
}

/// Semi-sphere used for the noise study: radius 1 centered 2.5 m ahead,
/// whole silhouette in view.
inline SceneSpec noise_scene() {
  SceneSpec s;
  s.kind = SceneKind::kSemisphere;
  s.width = s.height = 128;
  s.intrinsics = centered_intrinsics(128, 128, 140.0);
  return s;
}

/// Noise levels as fractions of the sphere radius.
inline std::vector<double> default_noise_sigmas(double radius) {
  std::vector<double> out;
  for (double f : {0.0, 0.002, 0.005, 0.01, 0.02}) out.push_back(f * radius);
  return out;
}

/// Fixed noisy semi-sphere for the triplet-count sweep.
inline SceneSpec triplet_scene() {
  SceneSpec s = noise_scene();
  s.width = 160;
  s.height = 120;
  s.intrinsics = centered_intrinsics(160, 120, 150.0);
  s.noise_sigma = 0.01;
  s.seed = 3;
  return s;
}

inline std::vector<int> default_triplet_counts() { return {10, 20, 30, 40, 50, 60, 80}; }

/// Corner with ground-truth context and light depth noise for the patch study.
inline SceneSpec patch_scene() {
  SceneSpec s;
  s.kind = SceneKind::kCorner;
  s.noise_sigma = 0.001;
  s.seed = 5;
  return s;
}

inline std::vector<int> default_patch_sizes() { return {3, 5, 7, 9}; }

/// Small noiseless corner for the context-learning demo.
inline SceneSpec context_fit_scene() {
  SceneSpec s;
  s.kind = SceneKind::kCorner;
  s.width = 32;
  s.height = 24;
  s.intrinsics = centered_intrinsics(32, 24, 30.0);
  return s;
}

/// Odd window size whose area is about `ratio` of the image area:
/// floor(sqrt(w * h * ratio)) rounded down to odd, at least 3.
inline int window_from_ratio(int width, int height, double ratio) {
  if (!(ratio > 0.0)) throw Error(ErrorKind::kValidation, "ratio must be positive");
  if (width < 1 || height < 1) throw Error(ErrorKind::kValidation, "image size must be positive");
  int w = static_cast<int>(std::floor(std::sqrt(static_cast<double>(width) * height * ratio)));
  if (w % 2 == 0) --w;
  w = std::max(w, 3);
  if (w > std::min(width, height)) throw Error(ErrorKind::kRange, "window exceeds the image");
  return w;
}

/// Least-squares line fit y = a + b x; returns R^2.
inline double linear_fit_r2(const std::vector<double>& x, const std::vector<double>& y) {
  const double n = static_cast<double>(x.size());
  double mx = 0.0, my = 0.0;
  for (std::size_t i = 0; i < x.size(); ++i) {
    mx += x[i];
    my += y[i];
  }
  mx /= n;
  my /= n;
  double sxy = 0.0, sxx = 0.0, syy = 0.0;
  for (std::size_t i = 0; i < x.size(); ++i) {
    sxy += (x[i] - mx) * (y[i] - my);
    sxx += (x[i] - mx) * (x[i] - mx);
    syy += (y[i] - my) * (y[i] - my);
  }
  if (sxx == 0.0 || syy == 0.0) return 0.0;
  return sxy * sxy / (sxx * syy);
}

}  // namespace asn

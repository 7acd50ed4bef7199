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

#include <array>
#include <cmath>
#include <cstddef>
#include <cstdint>
#include <limits>
#include <span>
#include <string>
#include <vector>

#include <Eigen/Dense>

#include "asn/context.hpp"
#include "asn/error.hpp"
#include "asn/geometry.hpp"
#include "asn/parallel.hpp"

namespace asn {

/// Below this cross-product norm three points are treated as colinear.
inline constexpr double kColinearEpsilon = 1e-12;

/// Indices of one sampled triangle into a patch list.
struct Triplet {
  int a = 0;
  int b = 0;
  int c = 0;

  friend constexpr bool operator==(const Triplet&, const Triplet&) = default;
};

struct TripletSet {
  Pixel center;
  std::vector<Triplet> triplets;
  int k = 0;
};

/// splitmix64 step; used both as a hash for stream seeding and as the
/// per-pixel engine (cheap to construct, one 64-bit word of state).
class SplitMix64 {
 public:
  using result_type = std::uint64_t;

  explicit constexpr SplitMix64(std::uint64_t seed) : state_(seed) {}

  static constexpr result_type min() { return 0; }
  static constexpr result_type max() { return std::numeric_limits<result_type>::max(); }

  constexpr result_type operator()() {
    std::uint64_t z = (state_ += 0x9E3779B97F4A7C15ull);
    z = (z ^ (z >> 30)) * 0xBF58476D1CE4E5B9ull;
    z = (z ^ (z >> 27)) * 0x94D049BB133111EBull;
    return z ^ (z >> 31);
  }

 private:
  std::uint64_t state_;
};

/// Seed of the per-pixel stream: a hash of (global seed, row, column).
constexpr std::uint64_t pixel_stream_seed(std::uint64_t seed, Pixel center) {
  SplitMix64 h(seed);
  std::uint64_t s = h();
  SplitMix64 hr(s ^ static_cast<std::uint64_t>(static_cast<std::uint32_t>(center.v)));
  s = hr();
  SplitMix64 hc(s ^ (static_cast<std::uint64_t>(static_cast<std::uint32_t>(center.u)) << 32));
  return hc();
}

/// Deterministic stream of index triples with three distinct entries drawn
/// uniformly from [0, patch_size).
class TripletSampler {
 public:
  TripletSampler(int patch_size, std::uint64_t seed, Pixel center)
      : n_(patch_size), engine_(pixel_stream_seed(seed, center)) {
    if (patch_size < 3) throw Error(ErrorKind::kDegeneratePatch, "patch has fewer than 3 entries");
  }

  Triplet next() {
    const int a = draw(n_);
    int b = draw(n_ - 1);
    if (b >= a) ++b;
    const int lo = a < b ? a : b;
    const int hi = a < b ? b : a;
    int c = draw(n_ - 2);
    if (c >= lo) ++c;
    if (c >= hi) ++c;
    return {a, b, c};
  }

 private:
  // Unbiased draw from [0, n) by rejection; independent of the standard
  // library's distribution implementations.
  int draw(int n) {
    const auto bound = static_cast<std::uint64_t>(n);
    const std::uint64_t limit = SplitMix64::max() - SplitMix64::max() % bound;
    std::uint64_t x;
    do {
      x = engine_();
    } while (x >= limit);
    return static_cast<int>(x % bound);
  }

  int n_;
  SplitMix64 engine_;
};

inline TripletSet sample_triplets(int patch_size, int k, Pixel center, std::uint64_t seed) {
  TripletSampler sampler(patch_size, seed, center);
  TripletSet out{center, {}, k};
  out.triplets.reserve(static_cast<std::size_t>(k > 0 ? k : 0));
  for (int i = 0; i < k; ++i) out.triplets.push_back(sampler.next());
  return out;
}

/// All C(n, 3) index triples with a < b < c, in lexicographic order.
inline std::vector<Triplet> enumerate_triplets(int patch_size) {
  if (patch_size < 3) throw Error(ErrorKind::kDegeneratePatch, "patch has fewer than 3 entries");
  std::vector<Triplet> out;
  for (int a = 0; a < patch_size; ++a)
    for (int b = a + 1; b < patch_size; ++b)
      for (int c = b + 1; c < patch_size; ++c) out.push_back({a, b, c});
  return out;
}

/// Camera-facing unit normal of triangle (pa, pb, pc), oriented with
/// respect to `center`.
inline Vec3 triplet_normal(const Vec3& pa, const Vec3& pb, const Vec3& pc, const Vec3& center) {
  const Vec3 c = cross(pb - pa, pc - pa);
  const double len = norm(c);
  if (!(len > kColinearEpsilon)) throw Error(ErrorKind::kDegenerateTriplet, "colinear triplet");
  return orient_to_camera(c / len, center);
}

/// Image-plane area of the triangle, in pixels^2.
inline double projected_area(double ua, double va, double ub, double vb, double uc, double vc) {
  return 0.5 * std::abs((ub - ua) * (vc - va) - (vb - va) * (uc - ua));
}

inline double projected_area(Pixel a, Pixel b, Pixel c) {
  return projected_area(a.u, a.v, b.u, b.v, c.u, c.v);
}

struct WeightedCandidate {
  Vec3 normal;
  double area = 0.0;
  double confidence = 0.0;
};

struct AsnConfig {
  int patch = 5;
  int k = 40;
  double min_area = 1e-6;
  std::uint64_t seed = 42;

  void validate() const {
    if (patch < 3 || patch % 2 == 0) throw Error(ErrorKind::kValidation, "patch size must be odd and >= 3");
    if (k < 1) throw Error(ErrorKind::kValidation, "triplet count must be >= 1");
    if (!(min_area > 0.0)) throw Error(ErrorKind::kValidation, "min_area must be positive");
  }
};

/// Weighted combination of candidate normals, sum(s*g*n) / ||sum(s*g*n)||,
/// accumulated in candidate order and oriented toward the camera.
inline Vec3 combine_candidates(std::span<const WeightedCandidate> candidates, const Vec3& center_point) {
  Vec3 sum;
  double weight_sum = 0.0;
  for (const auto& c : candidates) {
    const double w = c.area * c.confidence;
    sum += w * c.normal;
    weight_sum += w;
  }
  if (!(weight_sum >= 1e-12)) throw Error(ErrorKind::kZeroWeight, "candidate weights sum to zero");
  const double len = norm(sum);
  if (!(len > 0.0)) throw Error(ErrorKind::kZeroWeight, "weighted normal sum vanishes");
  return orient_to_camera(sum / len, center_point);
}

/// Unweighted mean of candidate normals, normalized and oriented.
inline Vec3 average_normal(std::span<const WeightedCandidate> candidates, const Vec3& center_point) {
  if (candidates.empty()) throw Error(ErrorKind::kZeroMean, "no candidates to average");
  Vec3 sum;
  for (const auto& c : candidates) sum += c.normal;
  const Vec3 mean = sum / static_cast<double>(candidates.size());
  const double len = norm(mean);
  if (!(len >= 1e-12)) throw Error(ErrorKind::kZeroMean, "candidate normals cancel");
  return orient_to_camera(mean / len, center_point);
}

/// One accepted triangle with everything needed to differentiate through it.
struct AsnCandidate {
  Triplet triplet;
  Vec3 cross;          // (B - A) x (C - A), unnormalized
  double cross_norm;   // ||cross||
  double sign;         // +1 or -1 applied by camera orientation
  WeightedCandidate weighted;
};

/// Full intermediate state of one ASN evaluation.
struct AsnTrace {
  Pixel center;
  Vec3 center_point;
  std::vector<PatchEntry> patch;
  PatchSimilarity similarity;
  std::vector<AsnCandidate> candidates;
  Vec3 sum;
  double weight_sum = 0.0;
  double sum_norm = 0.0;
  double sign = 1.0;
  Vec3 normal;
};

namespace detail {

inline std::vector<Pixel> patch_pixels(const std::vector<PatchEntry>& patch) {
  std::vector<Pixel> out;
  out.reserve(patch.size());
  for (const auto& e : patch) out.push_back(e.pixel);
  return out;
}

// Accepts the triangle if its projected area clears min_area and it is not
// colinear in 3D. Confidence is filled in later.
inline bool accept_triplet(const std::vector<PatchEntry>& patch, const Vec3& center_point, Triplet t,
                           double min_area, AsnCandidate& out) {
  const auto& A = patch[static_cast<std::size_t>(t.a)];
  const auto& B = patch[static_cast<std::size_t>(t.b)];
  const auto& C = patch[static_cast<std::size_t>(t.c)];
  const double area = projected_area(A.pixel, B.pixel, C.pixel);
  if (area < min_area) return false;
  const Vec3 c = cross(B.point - A.point, C.point - A.point);
  const double len = norm(c);
  if (!(len > kColinearEpsilon)) return false;
  const Vec3 n = c / len;
  const bool flip = dot(n, center_point) > 0.0;
  out.triplet = t;
  out.cross = c;
  out.cross_norm = len;
  out.sign = flip ? -1.0 : 1.0;
  out.weighted.normal = flip ? -n : n;
  out.weighted.area = area;
  return true;
}

// Draws from the per-pixel stream until k triangles are accepted or 3k
// draws are spent.
inline std::vector<AsnCandidate> sample_candidates(const std::vector<PatchEntry>& patch, const Vec3& center_point,
                                                   Pixel center, const AsnConfig& cfg) {
  TripletSampler sampler(static_cast<int>(patch.size()), cfg.seed, center);
  std::vector<AsnCandidate> out;
  out.reserve(static_cast<std::size_t>(cfg.k));
  const int max_draws = 3 * cfg.k;
  AsnCandidate cand{};
  for (int draw = 0; draw < max_draws && static_cast<int>(out.size()) < cfg.k; ++draw) {
    if (accept_triplet(patch, center_point, sampler.next(), cfg.min_area, cand)) out.push_back(cand);
  }
  return out;
}

inline std::vector<AsnCandidate> enumerate_candidates(const std::vector<PatchEntry>& patch, const Vec3& center_point,
                                                      double min_area) {
  std::vector<AsnCandidate> out;
  AsnCandidate cand{};
  for (const Triplet& t : enumerate_triplets(static_cast<int>(patch.size()))) {
    if (accept_triplet(patch, center_point, t, min_area, cand)) out.push_back(cand);
  }
  return out;
}

inline void finish_trace(AsnTrace& tr) {
  if (tr.candidates.empty()) throw Error(ErrorKind::kUnrecoverablePixel, "no usable triplet in patch");
  const auto& lbar = tr.similarity.normalized;
  for (auto& c : tr.candidates) {
    c.weighted.confidence = triplet_confidence(lbar, c.triplet.a, c.triplet.b, c.triplet.c);
  }
  tr.sum = Vec3{};
  tr.weight_sum = 0.0;
  for (const auto& c : tr.candidates) {
    const double w = c.weighted.area * c.weighted.confidence;
    tr.sum += w * c.weighted.normal;
    tr.weight_sum += w;
  }
  if (!(tr.weight_sum >= 1e-12)) throw Error(ErrorKind::kZeroWeight, "candidate weights sum to zero");
  tr.sum_norm = norm(tr.sum);
  if (!(tr.sum_norm > 0.0)) throw Error(ErrorKind::kZeroWeight, "weighted normal sum vanishes");
  const Vec3 n = tr.sum / tr.sum_norm;
  const bool flip = dot(n, tr.center_point) > 0.0;
  tr.sign = flip ? -1.0 : 1.0;
  tr.normal = flip ? -n : n;
}

inline AsnTrace start_trace(const PointMap& pm, const ContextMap& ctx, Pixel center, int patch_size) {
  if (!ctx.same_shape(pm)) throw Error(ErrorKind::kConfiguration, "shape mismatch: context vs points");
  AsnTrace tr;
  tr.center = center;
  tr.patch = extract_patch(pm, center, patch_size);
  if (tr.patch.size() < 3) throw Error(ErrorKind::kUnrecoverablePixel, "patch has fewer than 3 valid entries");
  tr.center_point = pm.at(center);
  const auto pixels = patch_pixels(tr.patch);
  tr.similarity = patch_similarity(ctx, center, pixels);
  return tr;
}

}  // namespace detail

/// Runs the adaptive estimator at one pixel and keeps every intermediate.
inline AsnTrace asn_trace(const PointMap& pm, const ContextMap& ctx, Pixel center, const AsnConfig& cfg) {
  AsnTrace tr = detail::start_trace(pm, ctx, center, cfg.patch);
  tr.candidates = detail::sample_candidates(tr.patch, tr.center_point, center, cfg);
  detail::finish_trace(tr);
  return tr;
}

/// Same as asn_trace but over every triangle of the patch instead of K
/// random draws.
inline AsnTrace asn_trace_exhaustive(const PointMap& pm, const ContextMap& ctx, Pixel center, const AsnConfig& cfg) {
  AsnTrace tr = detail::start_trace(pm, ctx, center, cfg.patch);
  tr.candidates = detail::enumerate_candidates(tr.patch, tr.center_point, cfg.min_area);
  detail::finish_trace(tr);
  return tr;
}

/// Adaptive surface normal at `center`: K sampled triangles combined with
/// projected-area and context-confidence weights.
inline Vec3 asn_normal(const PointMap& pm, const ContextMap& ctx, Pixel center, const AsnConfig& cfg) {
  return asn_trace(pm, ctx, center, cfg).normal;
}

inline Vec3 asn_normal_exhaustive(const PointMap& pm, const ContextMap& ctx, Pixel center, const AsnConfig& cfg) {
  return asn_trace_exhaustive(pm, ctx, center, cfg).normal;
}

/// Unweighted average over the same triangles ASN would sample.
inline Vec3 sampled_average_normal(const PointMap& pm, Pixel center, const AsnConfig& cfg) {
  const auto patch = extract_patch(pm, center, cfg.patch);
  if (patch.size() < 3) throw Error(ErrorKind::kUnrecoverablePixel, "patch has fewer than 3 valid entries");
  const Vec3 cp = pm.at(center);
  const auto cands = detail::sample_candidates(patch, cp, center, cfg);
  if (cands.empty()) throw Error(ErrorKind::kUnrecoverablePixel, "no usable triplet in patch");
  std::vector<WeightedCandidate> weighted;
  weighted.reserve(cands.size());
  for (const auto& c : cands) weighted.push_back(c.weighted);
  return average_normal(weighted, cp);
}

/// Cross product of the horizontal and vertical central differences.
inline Vec3 sobel_normal(const PointMap& pm, Pixel center) {
  const int u = center.u;
  const int v = center.v;
  for (Pixel q : {Pixel{u - 1, v}, Pixel{u + 1, v}, Pixel{u, v - 1}, Pixel{u, v + 1}}) {
    if (!pm.in_bounds(q.u, q.v) || !pm.valid(q)) {
      throw Error(ErrorKind::kInsufficientSupport, "4-neighbourhood is not fully valid");
    }
  }
  if (!pm.valid(center)) throw Error(ErrorKind::kInsufficientSupport, "center is invalid");
  const Vec3 vx = pm.at(u + 1, v) - pm.at(u - 1, v);
  const Vec3 vy = pm.at(u, v + 1) - pm.at(u, v - 1);
  const Vec3 c = cross(vx, vy);
  const double len = norm(c);
  if (!(len > kColinearEpsilon)) throw Error(ErrorKind::kDegenerateTriplet, "principal vectors are parallel");
  return orient_to_camera(c / len, pm.at(center));
}

/// Total-least-squares plane normal: eigenvector of the smallest eigenvalue
/// of the centered covariance, oriented using the centroid.
inline Vec3 least_squares_normal(std::span<const Vec3> points) {
  if (points.size() < 3) throw Error(ErrorKind::kDegenerateTriplet, "need at least 3 points");
  Eigen::Vector3d centroid = Eigen::Vector3d::Zero();
  for (const auto& p : points) centroid += Eigen::Vector3d(p.x, p.y, p.z);
  centroid /= static_cast<double>(points.size());
  Eigen::Matrix3d cov = Eigen::Matrix3d::Zero();
  for (const auto& p : points) {
    const Eigen::Vector3d d = Eigen::Vector3d(p.x, p.y, p.z) - centroid;
    cov += d * d.transpose();
  }
  cov /= static_cast<double>(points.size());
  Eigen::SelfAdjointEigenSolver<Eigen::Matrix3d> solver(cov);
  if (solver.info() != Eigen::Success) throw Error(ErrorKind::kDegenerateTriplet, "eigen decomposition failed");
  const auto& ev = solver.eigenvalues();  // ascending
  if (ev(0) < 1e-12 && ev(1) < 1e-12) throw Error(ErrorKind::kDegenerateTriplet, "points are colinear");
  const Eigen::Vector3d n = solver.eigenvectors().col(0).normalized();
  return orient_to_camera({n.x(), n.y(), n.z()}, {centroid.x(), centroid.y(), centroid.z()});
}

enum class NormalMethod { kAsn, kSobel, kLeastSquares, kAverage };

inline const char* to_string(NormalMethod m) {
  switch (m) {
    case NormalMethod::kAsn: return "asn";
    case NormalMethod::kSobel: return "sobel";
    case NormalMethod::kLeastSquares: return "lsq";
    case NormalMethod::kAverage: return "average";
  }
  return "?";
}

inline NormalMethod parse_normal_method(const std::string& s) {
  if (s == "asn") return NormalMethod::kAsn;
  if (s == "sobel") return NormalMethod::kSobel;
  if (s == "lsq") return NormalMethod::kLeastSquares;
  if (s == "average") return NormalMethod::kAverage;
  throw Error(ErrorKind::kValidation, "unknown normal method: " + s);
}

inline Vec3 estimate_normal(const PointMap& pm, const ContextMap& ctx, Pixel center, const AsnConfig& cfg,
                            NormalMethod method) {
  switch (method) {
    case NormalMethod::kAsn: return asn_normal(pm, ctx, center, cfg);
    case NormalMethod::kSobel: return sobel_normal(pm, center);
    case NormalMethod::kAverage: return sampled_average_normal(pm, center, cfg);
    case NormalMethod::kLeastSquares: {
      const auto patch = extract_patch(pm, center, cfg.patch);
      std::vector<Vec3> pts;
      pts.reserve(patch.size());
      for (const auto& e : patch) pts.push_back(e.point);
      return least_squares_normal(pts);
    }
  }
  throw Error(ErrorKind::kConfiguration, "unknown normal method");
}

/// Applies the chosen estimator to every valid pixel. Pixels whose
/// estimator fails are left invalid.
inline NormalMap recover_normal_map(const PointMap& pm, const ContextMap& ctx, const AsnConfig& cfg,
                                    NormalMethod method) {
  cfg.validate();
  if (!ctx.same_shape(pm)) throw Error(ErrorKind::kConfiguration, "shape mismatch: context vs depth");
  NormalMap out(pm.width(), pm.height());
  parallel_for(static_cast<std::size_t>(pm.height()), [&](std::size_t row) {
    const int v = static_cast<int>(row);
    for (int u = 0; u < pm.width(); ++u) {
      if (!pm.valid(u, v)) continue;
      try {
        out.set(u, v, estimate_normal(pm, ctx, {u, v}, cfg, method));
      } catch (const Error&) {
        // stays invalid
      }
    }
  });
  return out;
}

inline NormalMap recover_normal_map(const DepthMap& depth, const Intrinsics& k, const ContextMap& ctx,
                                    const AsnConfig& cfg, NormalMethod method) {
  if (!ctx.same_shape(depth)) throw Error(ErrorKind::kConfiguration, "shape mismatch: context vs depth");
  return recover_normal_map(unproject(depth, k), ctx, cfg, method);
}

/// Constant single-channel context; reduces ASN to pure area weighting.
inline ContextMap constant_context(int width, int height) { return ContextMap(width, height, 1, 0.0); }

}  // namespace asn

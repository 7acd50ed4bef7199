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
#include <cstdint>
#include <optional>
#include <span>
#include <string>
#include <utility>
#include <vector>

#include "asn/context.hpp"
#include "asn/error.hpp"
#include "asn/geometry.hpp"
#include "asn/normals.hpp"
#include "asn/parallel.hpp"

namespace asn {

/// `kPlus` adds the squared mean residual and is the default; `kMinus`
/// subtracts it, which makes the loss invariant to a global depth scale.
enum class SilogVariant { kPlus, kMinus };

struct LossConfig {
  double lambda_d = 0.8;
  double lambda_n = 0.8;
  double alpha = 5.0;
  double beta = 5.0;
  SilogVariant silog_variant = SilogVariant::kPlus;
  /// Apply guidance weights to every pixel instead of only sampled ones.
  bool guidance_global = false;

  void validate() const {
    if (!(lambda_d > 0.0 && lambda_d <= 1.0)) throw Error(ErrorKind::kValidation, "lambda_d must be in (0, 1]");
    if (!(lambda_n > 0.0 && lambda_n <= 1.0)) throw Error(ErrorKind::kValidation, "lambda_n must be in (0, 1]");
    if (!(alpha >= 0.0)) throw Error(ErrorKind::kValidation, "alpha must be >= 0");
    if (!(beta >= 0.0)) throw Error(ErrorKind::kValidation, "beta must be >= 0");
  }
};

namespace detail {

inline std::vector<std::size_t> shared_valid(const DepthMap& pred, const DepthMap& gt) {
  require_same_shape(pred, gt, "pred vs gt depth");
  std::vector<std::size_t> idx;
  for (std::size_t i = 0; i < pred.size(); ++i) {
    if (!pred.mask()[i] || !gt.mask()[i]) continue;
    if (!(pred.values()[i] > 0.0) || !(gt.values()[i] > 0.0)) {
      throw Error(ErrorKind::kDomain, "non-positive depth on the valid mask");
    }
    idx.push_back(i);
  }
  if (idx.empty()) throw Error(ErrorKind::kNoOverlap, "pred and gt share no valid pixel");
  return idx;
}

inline double variant_sign(SilogVariant v) { return v == SilogVariant::kPlus ? 1.0 : -1.0; }

}  // namespace detail

/// Scale-related log loss: mean(e^2) +/- mean(e)^2 with e = ln(pred) - ln(gt).
inline double silog_loss(const DepthMap& pred, const DepthMap& gt, SilogVariant variant) {
  const auto idx = detail::shared_valid(pred, gt);
  double sum = 0.0;
  double sum_sq = 0.0;
  for (std::size_t i : idx) {
    const double e = std::log(pred.values()[i]) - std::log(gt.values()[i]);
    sum += e;
    sum_sq += e * e;
  }
  const double m = static_cast<double>(idx.size());
  const double mean = sum / m;
  return sum_sq / m + detail::variant_sign(variant) * mean * mean;
}

/// dL/dpred = [(2/m) e_i +/- (2/m^2) sum(e)] / pred_i; zero off the mask.
inline ScalarMap grad_silog_wrt_depth(const DepthMap& pred, const DepthMap& gt, SilogVariant variant) {
  const auto idx = detail::shared_valid(pred, gt);
  std::vector<double> e(idx.size());
  double sum = 0.0;
  for (std::size_t n = 0; n < idx.size(); ++n) {
    e[n] = std::log(pred.values()[idx[n]]) - std::log(gt.values()[idx[n]]);
    sum += e[n];
  }
  const double m = static_cast<double>(idx.size());
  const double sign = detail::variant_sign(variant);
  ScalarMap grad(pred.width(), pred.height(), 0.0, false);
  for (std::size_t n = 0; n < idx.size(); ++n) {
    const std::size_t i = idx[n];
    grad.values()[i] = (2.0 / m * e[n] + sign * 2.0 / (m * m) * sum) / pred.values()[i];
    grad.mask()[i] = 1;
  }
  return grad;
}

struct ScaleLevel {
  int scale = 0;
  DepthMap pred;
  DepthMap gt;
};

/// Predictions at scales s = 0..3 with their ground truth at the same size.
using ScaleStack = std::vector<ScaleLevel>;

/// sum_s lambda_d^(s-3) * silog(s). The coarsest listed scale (s = 0) gets
/// the largest weight for lambda_d < 1.
inline double multiscale_depth_loss(const ScaleStack& stack, const LossConfig& cfg) {
  cfg.validate();
  if (stack.size() != 4) throw Error(ErrorKind::kConfiguration, "depth loss needs exactly four scales");
  double total = 0.0;
  for (std::size_t i = 0; i < stack.size(); ++i) {
    if (stack[i].scale != static_cast<int>(i)) {
      throw Error(ErrorKind::kConfiguration, "scale indices must be 0, 1, 2, 3 in order");
    }
    total += std::pow(cfg.lambda_d, stack[i].scale - 3) *
             silog_loss(stack[i].pred, stack[i].gt, cfg.silog_variant);
  }
  return total;
}

namespace detail {

// 1 - a.b, exactly zero for identical vectors despite rounding in the dot.
inline double cosine_distance(const Vec3& a, const Vec3& b) { return a == b ? 0.0 : 1.0 - dot(a, b); }

}  // namespace detail

/// Mean cosine distance (1 - n_rec . n_gt) over the shared valid mask.
inline double asn_loss(const NormalMap& recovered, const NormalMap& gt) {
  require_same_shape(recovered, gt, "recovered vs gt normals");
  double sum = 0.0;
  std::size_t m = 0;
  for (std::size_t i = 0; i < gt.size(); ++i) {
    if (!recovered.mask()[i] || !gt.mask()[i]) continue;
    sum += detail::cosine_distance(recovered.values()[i], gt.values()[i]);
    ++m;
  }
  if (m == 0) throw Error(ErrorKind::kNoOverlap, "recovered and gt normals share no valid pixel");
  return sum / static_cast<double>(m);
}

/// Guidance-weighted normal loss at one scale:
/// lambda_n^(s-3) * mean((1 + w_i) * (1 - n_pred . n_gt)).
/// w_i is the guidance weight on sampled pixels and 0 elsewhere, unless
/// cfg.guidance_global is set.
inline double weighted_normal_loss(const NormalMap& pred, const NormalMap& gt, const GuidanceMap& gm,
                                   const SampleSet& sampled, const LossConfig& cfg, int scale) {
  cfg.validate();
  require_same_shape(pred, gt, "pred vs gt normals");
  require_same_shape(pred, gm, "normals vs guidance");
  std::vector<double> w(pred.size(), 0.0);
  if (cfg.guidance_global) {
    w = gm.values();
  } else {
    for (const Pixel& p : sampled.pixels) {
      if (!gm.in_bounds(p.u, p.v)) throw Error(ErrorKind::kRange, "sampled pixel out of bounds");
      w[gm.index(p.u, p.v)] = gm.at(p);
    }
  }
  double sum = 0.0;
  std::size_t m = 0;
  for (std::size_t i = 0; i < pred.size(); ++i) {
    if (!pred.mask()[i] || !gt.mask()[i]) continue;
    sum += (1.0 + w[i]) * detail::cosine_distance(pred.values()[i], gt.values()[i]);
    ++m;
  }
  if (m == 0) throw Error(ErrorKind::kNoOverlap, "pred and gt normals share no valid pixel");
  return std::pow(cfg.lambda_n, scale - 3) * sum / static_cast<double>(m);
}

inline double total_loss(double depth_term, double asn_term, double normal_term, const LossConfig& cfg) {
  return depth_term + cfg.alpha * asn_term + cfg.beta * normal_term;
}

/// Global-triplet baseline: M random pixel triangles over the whole image,
/// normals compared between pred- and gt-unprojected clouds.
inline double virtual_normal_loss(const DepthMap& pred, const DepthMap& gt, const Intrinsics& k, int m,
                                  std::uint64_t seed, double min_area = 1e-6) {
  if (m < 1) throw Error(ErrorKind::kValidation, "triplet count must be >= 1");
  const auto idx = detail::shared_valid(pred, gt);
  if (idx.size() < 3) throw Error(ErrorKind::kNoOverlap, "need at least 3 shared valid pixels");
  const PointMap pp = unproject(pred, k);
  const PointMap pg = unproject(gt, k);
  TripletSampler sampler(static_cast<int>(idx.size()), seed, Pixel{-1, -1});
  double sum = 0.0;
  int used = 0;
  for (int draw = 0; draw < 3 * m && used < m; ++draw) {
    const Triplet t = sampler.next();
    const Pixel a = pred.pixel(idx[static_cast<std::size_t>(t.a)]);
    const Pixel b = pred.pixel(idx[static_cast<std::size_t>(t.b)]);
    const Pixel c = pred.pixel(idx[static_cast<std::size_t>(t.c)]);
    if (projected_area(a, b, c) < min_area) continue;
    const Vec3 cp = (pp.at(a) + pp.at(b) + pp.at(c)) / 3.0;
    const Vec3 cg = (pg.at(a) + pg.at(b) + pg.at(c)) / 3.0;
    try {
      const Vec3 np = triplet_normal(pp.at(a), pp.at(b), pp.at(c), cp);
      const Vec3 ng = triplet_normal(pg.at(a), pg.at(b), pg.at(c), cg);
      sum += detail::cosine_distance(np, ng);
      ++used;
    } catch (const Error&) {
    }
  }
  if (used == 0) throw Error(ErrorKind::kDegenerateTriplet, "no usable triplet for the virtual normal loss");
  return sum / used;
}

namespace detail {

// One successful ASN evaluation paired with the gt normal at its pixel.
struct LossTerm {
  AsnTrace trace;
  Vec3 gt;
};

inline std::vector<LossTerm> asn_loss_terms(const PointMap& pm, const NormalMap& gt_normals, const ContextMap& ctx,
                                            const AsnConfig& cfg) {
  cfg.validate();
  require_same_shape(pm, gt_normals, "depth vs gt normals");
  if (!ctx.same_shape(pm)) throw Error(ErrorKind::kConfiguration, "shape mismatch: context vs depth");
  std::vector<std::optional<LossTerm>> slots(pm.size());
  parallel_for(pm.size(), [&](std::size_t i) {
    if (!pm.mask()[i] || !gt_normals.mask()[i]) return;
    try {
      slots[i] = LossTerm{asn_trace(pm, ctx, pm.pixel(i), cfg), gt_normals.values()[i]};
    } catch (const Error&) {
    }
  });
  std::vector<LossTerm> terms;
  for (auto& s : slots) {
    if (s) terms.push_back(std::move(*s));
  }
  if (terms.empty()) throw Error(ErrorKind::kNoOverlap, "no pixel has both a recovered and a gt normal");
  return terms;
}

// d(1 - n.g)/dS for n = sign * S / ||S||.
inline Vec3 loss_wrt_sum(const AsnTrace& tr, const Vec3& g) {
  const Vec3 tangential = g - dot(tr.normal, g) * tr.normal;
  return (-tr.sign / tr.sum_norm) * tangential;
}

}  // namespace detail

/// ASN loss of the normals recovered from `depth`, i.e. asn_loss composed
/// with recover_normal_map(method = asn).
inline double asn_loss_from_depth(const DepthMap& depth, const NormalMap& gt_normals, const Intrinsics& k,
                                  const ContextMap& ctx, const AsnConfig& cfg) {
  const auto terms = detail::asn_loss_terms(unproject(depth, k), gt_normals, ctx, cfg);
  double sum = 0.0;
  for (const auto& t : terms) sum += 1.0 - dot(t.trace.normal, t.gt);
  return sum / static_cast<double>(terms.size());
}

/// Analytic gradient of asn_loss_from_depth with respect to every depth
/// value. Triangle samples, projected areas and confidences are held fixed.
inline ScalarMap grad_asn_wrt_depth(const DepthMap& depth, const NormalMap& gt_normals, const Intrinsics& k,
                                    const ContextMap& ctx, const AsnConfig& cfg) {
  const PointMap pm = unproject(depth, k);
  const auto terms = detail::asn_loss_terms(pm, gt_normals, ctx, cfg);
  const double inv_m = 1.0 / static_cast<double>(terms.size());

  // Per-term contributions are gathered in parallel and reduced in pixel
  // order so the result does not depend on the worker count.
  std::vector<std::vector<std::pair<std::size_t, double>>> parts(terms.size());
  parallel_for(terms.size(), [&](std::size_t t) {
    const AsnTrace& tr = terms[t].trace;
    const Vec3 d_sum = detail::loss_wrt_sum(tr, terms[t].gt);
    std::vector<Vec3> d_point(tr.patch.size());
    for (const auto& c : tr.candidates) {
      const double w = c.weighted.area * c.weighted.confidence;
      const Vec3 d_n = w * d_sum;
      const Vec3 unit = c.cross / c.cross_norm;
      const Vec3 d_cross = (c.sign / c.cross_norm) * (d_n - dot(unit, d_n) * unit);
      const auto& A = tr.patch[static_cast<std::size_t>(c.triplet.a)].point;
      const auto& B = tr.patch[static_cast<std::size_t>(c.triplet.b)].point;
      const auto& C = tr.patch[static_cast<std::size_t>(c.triplet.c)].point;
      const Vec3 e1 = B - A;
      const Vec3 e2 = C - A;
      const Vec3 d_b = cross(e2, d_cross);
      const Vec3 d_c = cross(d_cross, e1);
      d_point[static_cast<std::size_t>(c.triplet.b)] += d_b;
      d_point[static_cast<std::size_t>(c.triplet.c)] += d_c;
      d_point[static_cast<std::size_t>(c.triplet.a)] -= d_b + d_c;
    }
    auto& out = parts[t];
    out.reserve(tr.patch.size());
    for (std::size_t j = 0; j < tr.patch.size(); ++j) {
      const Pixel p = tr.patch[j].pixel;
      out.emplace_back(depth.index(p.u, p.v), dot(k.ray(p.u, p.v), d_point[j]));
    }
  });

  ScalarMap grad(depth.width(), depth.height(), 0.0, false);
  grad.mask() = depth.mask();
  for (const auto& part : parts) {
    for (const auto& [i, g] : part) grad.values()[i] += inv_m * g;
  }
  return grad;
}

/// Analytic gradient of asn_loss_from_depth with respect to every context
/// feature. Triangle normals and areas are held fixed. Coincident features
/// (zero distance) take the zero subgradient.
inline ContextMap grad_asn_wrt_context(const DepthMap& depth, const NormalMap& gt_normals, const Intrinsics& k,
                                       const ContextMap& ctx, const AsnConfig& cfg) {
  const PointMap pm = unproject(depth, k);
  const auto terms = detail::asn_loss_terms(pm, gt_normals, ctx, cfg);
  const double inv_m = 1.0 / static_cast<double>(terms.size());
  const auto channels = static_cast<std::size_t>(ctx.channels());

  std::vector<std::vector<std::pair<std::size_t, double>>> parts(terms.size());
  parallel_for(terms.size(), [&](std::size_t t) {
    const AsnTrace& tr = terms[t].trace;
    const auto& raw = tr.similarity.raw;
    const auto& lbar = tr.similarity.normalized;
    const Vec3 d_sum = detail::loss_wrt_sum(tr, terms[t].gt);

    // Through the confidence product.
    std::vector<double> d_lbar(tr.patch.size(), 0.0);
    for (const auto& c : tr.candidates) {
      const double d_conf = c.weighted.area * dot(d_sum, c.weighted.normal);
      const auto a = static_cast<std::size_t>(c.triplet.a);
      const auto b = static_cast<std::size_t>(c.triplet.b);
      const auto cc = static_cast<std::size_t>(c.triplet.c);
      d_lbar[a] += d_conf * lbar[b] * lbar[cc];
      d_lbar[b] += d_conf * lbar[a] * lbar[cc];
      d_lbar[cc] += d_conf * lbar[a] * lbar[b];
    }
    // Through the patch normalization.
    double mix = 0.0;
    for (std::size_t j = 0; j < lbar.size(); ++j) mix += d_lbar[j] * lbar[j];

    auto& out = parts[t];
    const auto fi = ctx.feature(tr.center);
    const std::size_t center_off = ctx.offset(tr.center.u, tr.center.v);
    std::vector<double> d_center(channels, 0.0);
    for (std::size_t j = 0; j < tr.patch.size(); ++j) {
      const double d_raw = (d_lbar[j] - mix) / tr.similarity.total;
      const Pixel p = tr.patch[j].pixel;
      const auto fj = ctx.feature(p);
      const double dist = feature_distance(fi, fj);
      if (!(dist > 0.0)) continue;
      // raw = exp(-0.5 * dist)
      const double scale = d_raw * (-0.5) * raw[j] / dist;
      const std::size_t off = ctx.offset(p.u, p.v);
      for (std::size_t ch = 0; ch < channels; ++ch) {
        const double g = scale * (fj[ch] - fi[ch]);
        out.emplace_back(off + ch, g);
        d_center[ch] -= g;
      }
    }
    for (std::size_t ch = 0; ch < channels; ++ch) out.emplace_back(center_off + ch, d_center[ch]);
  });

  ContextMap grad(ctx.width(), ctx.height(), ctx.channels(), 0.0);
  for (const auto& part : parts) {
    for (const auto& [i, g] : part) grad.data()[i] += inv_m * g;
  }
  return grad;
}

/// Stencil of the finite-difference oracle.
enum class FiniteDifference {
  kCentral2,  ///< (f(x+h) - f(x-h)) / 2h, truncation O(h^2).
  kCentral4,  ///< (8(f(x+h) - f(x-h)) - (f(x+2h) - f(x-2h))) / 12h, truncation O(h^4).
};

/// Central differences, one entry at a time with every other entry fixed.
/// kCentral4 tolerates larger steps, which keeps cancellation from swamping
/// entries far below the gradient's overall scale.
template <typename Fn>
std::vector<double> finite_difference_oracle(Fn&& loss_fn, std::vector<double> grid, std::span<const double> steps,
                                             FiniteDifference stencil = FiniteDifference::kCentral2) {
  if (steps.size() != grid.size()) throw Error(ErrorKind::kConfiguration, "one step per grid entry required");
  std::vector<double> grad(grid.size(), 0.0);
  auto eval_at = [&](std::size_t i, double value) {
    grid[i] = value;
    const double f = loss_fn(std::as_const(grid));
    if (!std::isfinite(f)) throw Error(ErrorKind::kNonFinite, "loss is not finite");
    return f;
  };
  for (std::size_t i = 0; i < grid.size(); ++i) {
    const double h = steps[i];
    if (!(h > 0.0)) throw Error(ErrorKind::kValidation, "finite-difference step must be positive");
    const double x = grid[i];
    const double d1 = eval_at(i, x + h) - eval_at(i, x - h);
    if (stencil == FiniteDifference::kCentral2) {
      grad[i] = d1 / (2.0 * h);
    } else {
      const double d2 = eval_at(i, x + 2.0 * h) - eval_at(i, x - 2.0 * h);
      grad[i] = (8.0 * d1 - d2) / (12.0 * h);
    }
    grid[i] = x;
  }
  return grad;
}

template <typename Fn>
std::vector<double> finite_difference_oracle(Fn&& loss_fn, std::vector<double> grid, double h,
                                             FiniteDifference stencil = FiniteDifference::kCentral2) {
  const std::vector<double> steps(grid.size(), h);
  return finite_difference_oracle(std::forward<Fn>(loss_fn), std::move(grid), steps, stencil);
}

/// Largest |analytic - numeric| / max(|analytic|, |numeric|, floor) over the
/// entries selected by `include`; floor = floor_fraction * max|numeric|
/// keeps round-off on near-zero entries from dominating.
inline double max_relative_error(std::span<const double> analytic, std::span<const double> numeric,
                                 double floor_fraction = 1e-6,
                                 std::span<const std::uint8_t> include = {}) {
  double scale = 0.0;
  for (double x : numeric) scale = std::max(scale, std::abs(x));
  const double floor = std::max(floor_fraction * scale, 1e-300);
  double worst = 0.0;
  for (std::size_t i = 0; i < analytic.size(); ++i) {
    if (!include.empty() && !include[i]) continue;
    const double denom = std::max({std::abs(analytic[i]), std::abs(numeric[i]), floor});
    worst = std::max(worst, std::abs(analytic[i] - numeric[i]) / denom);
  }
  return worst;
}

}  // namespace asn

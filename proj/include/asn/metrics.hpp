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
#include <array>
#include <cmath>
#include <cstddef>
#include <numbers>
#include <optional>
#include <vector>

#include "asn/error.hpp"
#include "asn/geometry.hpp"

namespace asn {

struct DepthMetrics {
  double rel = 0.0;
  double log10 = 0.0;
  double rmse = 0.0;
  double delta1 = 0.0;
  double delta2 = 0.0;
  double delta3 = 0.0;
  std::size_t count = 0;
};

struct NormalMetrics {
  double mean_deg = 0.0;
  double median_deg = 0.0;
  double pct_11_25 = 0.0;
  double pct_22_5 = 0.0;
  double pct_30 = 0.0;
  std::size_t count = 0;
};

struct PointCloudMetrics {
  double dist = 0.0;
  double rms = 0.0;
  double pct_0_1 = 0.0;
  double pct_0_3 = 0.0;
  double pct_0_5 = 0.0;
  std::size_t count = 0;
};

/// Sections are optional so a report can cover only what was evaluated.
struct MetricsReport {
  std::optional<DepthMetrics> depth;
  std::optional<NormalMetrics> normal;
  std::optional<PointCloudMetrics> pointcloud;
};

inline DepthMetrics depth_metrics(const DepthMap& pred, const DepthMap& gt) {
  require_same_shape(pred, gt, "pred vs gt depth");
  double abs_rel = 0.0, log_err = 0.0, sq = 0.0;
  std::size_t d1 = 0, d2 = 0, d3 = 0, m = 0;
  constexpr double t1 = 1.25, t2 = 1.25 * 1.25, t3 = 1.25 * 1.25 * 1.25;
  for (std::size_t i = 0; i < gt.size(); ++i) {
    if (!pred.mask()[i] || !gt.mask()[i]) continue;
    const double p = pred.values()[i];
    const double g = gt.values()[i];
    if (!(p > 0.0) || !(g > 0.0)) throw Error(ErrorKind::kDomain, "non-positive depth on the valid mask");
    abs_rel += std::abs(p - g) / g;
    log_err += std::abs(std::log10(p) - std::log10(g));
    sq += (p - g) * (p - g);
    const double ratio = std::max(p / g, g / p);
    d1 += ratio < t1;
    d2 += ratio < t2;
    d3 += ratio < t3;
    ++m;
  }
  if (m == 0) throw Error(ErrorKind::kNoOverlap, "pred and gt depth share no valid pixel");
  const double n = static_cast<double>(m);
  return {abs_rel / n, log_err / n, std::sqrt(sq / n), d1 / n, d2 / n, d3 / n, m};
}

/// Angle errors in degrees; the median is the lower median.
inline NormalMetrics normal_metrics(const NormalMap& pred, const NormalMap& gt) {
  require_same_shape(pred, gt, "pred vs gt normals");
  std::vector<double> angles;
  for (std::size_t i = 0; i < gt.size(); ++i) {
    if (!pred.mask()[i] || !gt.mask()[i]) continue;
    angles.push_back(angle_between(pred.values()[i], gt.values()[i]) * 180.0 / std::numbers::pi);
  }
  if (angles.empty()) throw Error(ErrorKind::kNoOverlap, "pred and gt normals share no valid pixel");
  NormalMetrics out;
  out.count = angles.size();
  const double n = static_cast<double>(angles.size());
  double sum = 0.0;
  std::size_t a = 0, b = 0, c = 0;
  for (double x : angles) {
    sum += x;
    a += x < 11.25;
    b += x < 22.5;
    c += x < 30.0;
  }
  out.mean_deg = sum / n;
  out.pct_11_25 = a / n;
  out.pct_22_5 = b / n;
  out.pct_30 = c / n;
  const auto mid = angles.begin() + static_cast<std::ptrdiff_t>((angles.size() - 1) / 2);
  std::nth_element(angles.begin(), mid, angles.end());
  out.median_deg = *mid;
  return out;
}

/// Pixel-aligned Euclidean distances between two clouds.
inline PointCloudMetrics pointcloud_metrics(const PointMap& pred, const PointMap& gt) {
  require_same_shape(pred, gt, "pred vs gt points");
  double sum = 0.0, sq = 0.0;
  std::size_t a = 0, b = 0, c = 0, m = 0;
  for (std::size_t i = 0; i < gt.size(); ++i) {
    if (!pred.mask()[i] || !gt.mask()[i]) continue;
    const double d = norm(pred.values()[i] - gt.values()[i]);
    sum += d;
    sq += d * d;
    a += d < 0.1;
    b += d < 0.3;
    c += d < 0.5;
    ++m;
  }
  if (m == 0) throw Error(ErrorKind::kNoOverlap, "pred and gt points share no valid pixel");
  const double n = static_cast<double>(m);
  return {sum / n, std::sqrt(sq / n), a / n, b / n, c / n, m};
}

}  // namespace asn

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

// Acceptance suite. Prints one PASS/FAIL line per criterion and exits
// non-zero if any criterion fails.

#include <bit>
#include <chrono>
#include <cstdio>
#include <cstdlib>
#include <functional>
#include <limits>
#include <random>
#include <sstream>
#include <string>
#include <vector>

#include "cli.hpp"
#include "oracles.hpp"

using namespace asn;

namespace {

constexpr double kRadToDeg = 180.0 / 3.14159265358979323846;

struct Outcome {
  bool pass;
  std::string detail;
};

std::string fmt(const char* f, double a, double b = 0, double c = 0, double d = 0, double e = 0) {
  char buf[512];
  std::snprintf(buf, sizeof(buf), f, a, b, c, d, e);
  return buf;
}

double seconds_since(std::chrono::steady_clock::time_point t0) {
  return std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
}

struct SingleThread {
  SingleThread() { setenv("ASN_THREADS", "1", 1); }
  ~SingleThread() { unsetenv("ASN_THREADS"); }
};

/// Mean angle error in degrees over the pixels set in `mask`.
template <typename M>
double masked_mean_error(const NormalMap& pred, const NormalMap& gt, const Map<M>& mask, std::size_t* count = nullptr) {
  double sum = 0.0;
  std::size_t n = 0;
  for (std::size_t i = 0; i < gt.size(); ++i) {
    if (!mask.mask()[i] || !gt.mask()[i]) continue;
    if (!pred.mask()[i]) return std::numeric_limits<double>::infinity();
    sum += angle_between(pred.values()[i], gt.values()[i]) * kRadToDeg;
    ++n;
  }
  if (count) *count = n;
  return n ? sum / static_cast<double>(n) : std::numeric_limits<double>::infinity();
}

// 1. Noiseless slanted plane at 320x240: every estimator within 0.5 degrees
//    on interior pixels; single-threaded ASN under 10 s.
Outcome plane_recovery() {
  SingleThread st;
  SceneSpec spec;
  spec.width = 320;
  spec.height = 240;
  spec.intrinsics = centered_intrinsics(320, 240, 300.0);
  spec.plane_normal = {0.2, -0.1, -1.0};
  const Scene scene = gen_scene(spec);
  const PointMap pm = unproject(scene.depth, spec.intrinsics);
  const ContextMap ctx = constant_context(spec.width, spec.height);
  const auto mask = interior_mask(scene.depth, 5);
  std::string detail;
  bool ok = true;
  double asn_seconds = 0.0;
  for (auto m : {NormalMethod::kAsn, NormalMethod::kSobel, NormalMethod::kLeastSquares, NormalMethod::kAverage}) {
    const auto t0 = std::chrono::steady_clock::now();
    const NormalMap n = recover_normal_map(pm, ctx, AsnConfig{}, m);
    if (m == NormalMethod::kAsn) asn_seconds = seconds_since(t0);
    const double err = masked_mean_error(n, scene.normals, mask);
    ok = ok && err < 0.5;
    detail += std::string(to_string(m)) + fmt("=%.2e deg ", err);
  }
  ok = ok && asn_seconds < 10.0;
  return {ok, detail + fmt("asn_time=%.2fs", asn_seconds)};
}

// 2. Corner with one-hot context: ASN crease-adjacent error at least 5x
//    lower than Sobel and simple average, cross-checked by brute force.
Outcome corner_adaptivity() {
  SceneSpec spec;
  spec.kind = SceneKind::kCorner;
  const Scene scene = gen_scene(spec);
  const PointMap pm = unproject(scene.depth, spec.intrinsics);
  const AsnConfig cfg;
  auto mask = boundary_adjacent_mask(scene.labels);
  const auto inner = interior_mask(scene.depth, cfg.patch);
  for (std::size_t i = 0; i < mask.size(); ++i) mask.mask()[i] &= inner.mask()[i];

  std::size_t count = 0;
  const double e_asn =
      masked_mean_error(recover_normal_map(pm, *scene.context, cfg, NormalMethod::kAsn), scene.normals, mask, &count);
  const double e_sobel =
      masked_mean_error(recover_normal_map(pm, *scene.context, cfg, NormalMethod::kSobel), scene.normals, mask);
  const double e_avg =
      masked_mean_error(recover_normal_map(pm, *scene.context, cfg, NormalMethod::kAverage), scene.normals, mask);

  // Brute-force enumeration of every triangle with exact weights.
  NormalMap brute(spec.width, spec.height);
  bool bitwise = true;
  for (std::size_t i = 0; i < mask.size(); ++i) {
    if (!mask.mask()[i]) continue;
    const Pixel p = mask.pixel(i);
    const auto ref = oracle::brute_force_asn(pm, *scene.context, p.u, p.v, cfg.patch, cfg.min_area);
    if (!ref) return {false, "brute force failed at a crease pixel"};
    brute.set(p.u, p.v, *ref);
    bitwise = bitwise && asn_normal_exhaustive(pm, *scene.context, p, cfg) == *ref;
  }
  const double e_brute = masked_mean_error(brute, scene.normals, mask);
  const bool ok = e_asn * 5.0 <= e_sobel && e_asn * 5.0 <= e_avg && e_brute * 5.0 <= e_sobel &&
                  e_brute * 5.0 <= e_avg && bitwise && count > 0;
  return {ok, fmt("pixels=%.0f asn=%.3f brute=%.3f sobel=%.3f average=%.3f deg", static_cast<double>(count), e_asn,
                  e_brute, e_sobel, e_avg) +
                  (bitwise ? " exhaustive==brute" : " exhaustive!=brute")};
}

bool monotone_with_one_exception(const std::vector<double>& v) {
  int violations = 0;
  for (std::size_t i = 1; i < v.size(); ++i) violations += v[i] < v[i - 1];
  return violations <= 1;
}

// 3. Semi-sphere noise study over five seeds.
Outcome noise_trend() {
  const SceneSpec base = noise_scene();
  const auto sigmas = default_noise_sigmas(base.sphere_radius);
  const auto r = run_noise_experiment(base, sigmas, {42, 43, 44, 45, 46}, AsnConfig{});
  const auto area = r.method_rows("area");
  const auto avg = r.method_rows("average");
  std::vector<double> ea, eb;
  bool dominated = true;
  std::string detail;
  for (std::size_t i = 0; i < area.size(); ++i) {
    ea.push_back(area[i].metrics.mean_deg);
    eb.push_back(avg[i].metrics.mean_deg);
    if (area[i].param > 0.0) dominated = dominated && ea.back() <= eb.back();
    detail += fmt("s=%.3f:%.2f/%.2f ", area[i].param, ea.back(), eb.back());
  }
  const bool ok = dominated && monotone_with_one_exception(ea) && monotone_with_one_exception(eb);
  return {ok, detail + "(area/average deg)"};
}

// 4. Triplet-count sweep: accuracy improves then saturates; runtime linear.
Outcome triplet_trend() {
  SingleThread st;
  const auto r = run_triplet_sweep(triplet_scene(), default_triplet_counts(), AsnConfig{}, 3);
  auto err_at = [&](int k) {
    for (const auto& row : r.rows)
      if (static_cast<int>(row.param) == k) return row.metrics.mean_deg;
    return std::numeric_limits<double>::quiet_NaN();
  };
  std::vector<double> ks, ms;
  for (const auto& row : r.rows) {
    ks.push_back(row.param);
    ms.push_back(row.ms);
  }
  const double r2 = linear_fit_r2(ks, ms);
  const double e10 = err_at(10), e40 = err_at(40), e60 = err_at(60);
  const bool ok = e40 < e10 && std::abs(e60 - e40) < std::abs(e10 - e40) && r2 > 0.9;
  return {ok, fmt("err K10=%.3f K40=%.3f K60=%.3f deg, time R2=%.4f", e10, e40, e60, r2)};
}

// 5. Analytic gradients against central differences on 20 random 16x16
//    instances per target.
Outcome gradients() {
  const auto t0 = std::chrono::steady_clock::now();
  AsnConfig cfg;
  cfg.patch = 3;
  cfg.k = 8;
  std::string detail;
  bool ok = true;
  for (const char* target : {"silog", "depth", "context"}) {
    double worst = 0.0;
    for (std::uint64_t i = 0; i < 20; ++i) worst = std::max(worst, cli::gradcheck_instance(target, 1000 + i, cfg));
    ok = ok && worst < 1e-4;
    detail += std::string(target) + fmt("=%.2e ", worst);
  }
  const double secs = seconds_since(t0);
  ok = ok && secs < 60.0;
  return {ok, detail + fmt("time=%.1fs", secs)};
}

// 6. Learning a free context map by gradient descent on the ASN loss.
Outcome context_learning() {
  const SceneSpec spec = context_fit_scene();
  const Scene scene = gen_scene(spec);
  const AsnConfig cfg;
  const ContextFit fit = fit_context_demo(scene.depth, scene.normals, spec.intrinsics, cfg, ContextFitOptions{});
  const double l0 = fit.loss_trace.front();
  const double l1 = fit.loss_trace.back();
  int rises = 0;
  for (std::size_t i = 1; i < fit.loss_trace.size(); ++i) rises += fit.loss_trace[i] > fit.loss_trace[i - 1] * (1 + 1e-9);

  const auto mask = boundary_adjacent_mask(scene.labels);
  const ContextMap zero(spec.width, spec.height, 3, 0.0);
  const double e0 = masked_mean_error(
      recover_normal_map(scene.depth, spec.intrinsics, zero, cfg, NormalMethod::kAsn), scene.normals, mask);
  const double e1 = masked_mean_error(
      recover_normal_map(scene.depth, spec.intrinsics, fit.context, cfg, NormalMethod::kAsn), scene.normals, mask);
  const bool ok = l1 <= 0.7 * l0 && e1 <= 0.7 * e0;
  return {ok, fmt("loss %.5f -> %.5f, crease err %.2f -> %.2f deg, rises=%.0f", l0, l1, e0, e1,
                  static_cast<double>(rises))};
}

// 7. Exhaustive ASN against the brute-force oracle, least squares against
//    an SVD oracle.
Outcome oracle_equivalence() {
  SceneSpec spec;
  spec.kind = SceneKind::kSemisphere;
  spec.width = spec.height = 32;
  spec.intrinsics = centered_intrinsics(32, 32, 26.0);
  spec.noise_sigma = 0.01;
  spec.seed = 11;
  const PointMap pm = unproject(gen_scene(spec).depth, spec.intrinsics);
  ContextMap ctx(32, 32, 4);
  std::mt19937_64 rng(77);
  std::normal_distribution<double> g;
  for (double& x : ctx.data()) x = g(rng);
  AsnConfig cfg;
  std::size_t compared = 0, mismatched = 0;
  for (int v = 0; v < 32; ++v) {
    for (int u = 0; u < 32; ++u) {
      if (!pm.valid(u, v)) continue;
      const auto ref = oracle::brute_force_asn(pm, ctx, u, v, cfg.patch, cfg.min_area);
      if (!ref) continue;
      ++compared;
      mismatched += !(asn_normal_exhaustive(pm, ctx, {u, v}, cfg) == *ref);
    }
  }

  std::uniform_real_distribution<double> slope(-0.8, 0.8), offset(-0.3, 0.3);
  std::normal_distribution<double> noise(0.0, 0.02);
  double worst = 0.0;
  for (int trial = 0; trial < 100; ++trial) {
    const double a = slope(rng), b = slope(rng);
    std::vector<Vec3> pts;
    for (int i = -2; i <= 2; ++i)
      for (int j = -2; j <= 2; ++j) {
        const double x = 0.04 * i + offset(rng) * 0.01, y = 0.04 * j;
        pts.push_back({x, y, 2.0 + a * x + b * y + noise(rng)});
      }
    worst = std::max(worst, angle_between(least_squares_normal(pts), oracle::svd_plane_normal(pts)));
  }
  const bool ok = compared >= 400 && mismatched == 0 && worst < 1e-6;
  return {ok, fmt("exhaustive pixels=%.0f mismatches=%.0f, lsq-vs-svd max=%.2e rad", static_cast<double>(compared),
                  static_cast<double>(mismatched), worst)};
}

// 8. Hand-computed metric examples and ordering invariants.
Outcome metrics_correctness() {
  auto near = [](double a, double b) { return std::abs(a - b) <= 1e-12; };
  bool ok = true;
  {
    const DepthMap gt = make_depth_map(2, 2, {1, 2, 3, 4});
    ok = ok && near(depth_metrics(gt, gt).rel, 0) && near(depth_metrics(gt, gt).delta3, 1);
    DepthMap p = gt;
    for (double& x : p.values()) x *= 1.3;
    const auto m = depth_metrics(p, gt);
    ok = ok && near(m.rel, 0.3) && near(m.delta1, 0) && near(m.delta2, 1);
    const auto h = depth_metrics(make_depth_map(2, 1, {1, 2}), make_depth_map(2, 1, {2, 2}));
    ok = ok && near(h.rel, 0.25) && near(h.rmse, std::sqrt(0.5)) && near(h.delta1, 0.5);
  }
  {
    NormalMap pred(4, 1), gt(4, 1);
    const double deg[] = {0, 10, 20, 40};
    for (int i = 0; i < 4; ++i) {
      const double r = deg[i] / kRadToDeg;
      pred.set(i, 0, {std::sin(r), 0, -std::cos(r)});
      gt.set(i, 0, {0, 0, -1});
    }
    const auto m = normal_metrics(pred, gt);
    ok = ok && near(m.mean_deg, 17.5) && near(m.median_deg, 10) && near(m.pct_11_25, 0.5) &&
         near(m.pct_22_5, 0.75) && near(m.pct_30, 0.75);
    const auto o = normal_metrics(NormalMap(2, 2, Vec3{0, 0, -1}, true), NormalMap(2, 2, Vec3{1, 0, 0}, true));
    ok = ok && near(o.mean_deg, 90) && near(o.pct_30, 0);
  }
  {
    PointMap gt(2, 1), pred(2, 1);
    gt.set(0, 0, {0, 0, 1});
    pred.set(0, 0, {0, 0, 1.05});
    gt.set(1, 0, {0, 0, 2});
    pred.set(1, 0, {0, 0.45, 2});
    const auto m = pointcloud_metrics(pred, gt);
    ok = ok && near(m.dist, 0.25) && near(m.rms, std::sqrt(0.1025)) && near(m.pct_0_1, 0.5) && near(m.pct_0_5, 1);
    PointMap shifted = gt;
    for (auto& p : shifted.values()) p += Vec3{0.2, 0, 0};
    const auto s = pointcloud_metrics(shifted, gt);
    ok = ok && near(s.dist, 0.2) && near(s.pct_0_1, 0) && near(s.pct_0_3, 1);
  }
  const bool examples = ok;

  std::mt19937_64 rng(8);
  std::uniform_real_distribution<double> depth(0.3, 10.0), ratio(0.4, 2.2);
  std::normal_distribution<double> g;
  int violations = 0;
  for (int trial = 0; trial < 1000; ++trial) {
    DepthMap dg(5, 4, 1.0, true), dp(5, 4, 1.0, true);
    NormalMap ng(5, 4), np(5, 4);
    PointMap pg(5, 4), pp(5, 4);
    for (std::size_t i = 0; i < dg.size(); ++i) {
      const Pixel p = dg.pixel(i);
      dg.values()[i] = depth(rng);
      dp.values()[i] = dg.values()[i] * ratio(rng);
      ng.set(p.u, p.v, normalized({g(rng), g(rng), -1.5}));
      np.set(p.u, p.v, normalized({g(rng), g(rng), -1.5}));
      pg.set(p.u, p.v, {g(rng), g(rng), 3.0});
      pp.set(p.u, p.v, pg.at(p) + 0.25 * Vec3{g(rng), g(rng), g(rng)});
    }
    const auto d = depth_metrics(dp, dg);
    const auto n = normal_metrics(np, ng);
    const auto c = pointcloud_metrics(pp, pg);
    const bool good = d.delta1 <= d.delta2 && d.delta2 <= d.delta3 && n.pct_11_25 <= n.pct_22_5 &&
                      n.pct_22_5 <= n.pct_30 && c.pct_0_1 <= c.pct_0_3 && c.pct_0_3 <= c.pct_0_5 &&
                      c.rms >= c.dist && d.delta3 <= 1.0 && d.delta1 >= 0.0 && n.pct_30 <= 1.0;
    violations += !good;
  }
  return {examples && violations == 0,
          std::string(examples ? "examples exact" : "example mismatch") + fmt(", invariant violations=%.0f/1000",
                                                                              static_cast<double>(violations))};
}

// 9. Window size from an area ratio.
Outcome window_rule() {
  const int w = window_from_ratio(1280, 960, 8e-5);
  return {w == 9, fmt("window_from_ratio(1280, 960, 8e-5) = %.0f", w)};
}

// 10. Byte-identical CLI experiment re-runs and bitwise PFM round trips.
Outcome determinism() {
  auto run = [](std::vector<std::string> args, std::string& out) {
    args.insert(args.begin(), "asn");
    std::vector<const char*> argv;
    for (const auto& a : args) argv.push_back(a.c_str());
    std::ostringstream os, es;
    const int code = cli::cli_dispatch(static_cast<int>(argv.size()), argv.data(), os, es);
    out = os.str();
    return code;
  };
  const std::vector<std::vector<std::string>> cmds{
      {"experiment", "noise", "--seed", "42", "--sigmas", "0", "0.005", "0.02", "--seeds", "1", "2", "3"},
      {"experiment", "triplets", "--seed", "42"},
      {"experiment", "patch", "--seed", "42"},
      {"experiment", "window", "--width", "640", "--height", "480", "--ratio", "5e-5"},
      {"experiment", "fit-context", "--seed", "42", "--steps", "25"}};
  int identical = 0;
  for (const auto& c : cmds) {
    std::string a, b;
    const int ca = run(c, a);
    const int cb = run(c, b);
    identical += ca == 0 && cb == 0 && !a.empty() && a == b;
  }

  std::vector<float> corpus{0.0f, -0.0f, std::numeric_limits<float>::denorm_min(),
                            -std::numeric_limits<float>::denorm_min(), 1.17e-39f, -3.3e-42f,
                            std::numeric_limits<float>::min(), std::numeric_limits<float>::max(),
                            -std::numeric_limits<float>::max(), 1.0f};
  std::mt19937 rng(3);
  while (corpus.size() < 3000) {
    const float f = std::bit_cast<float>(static_cast<std::uint32_t>(rng()));
    if (std::isfinite(f)) corpus.push_back(f);
  }
  std::size_t bad = 0;
  for (int ch : {1, 3}) {
    const PfmImage img{ch == 1 ? 60 : 20, 50, ch, corpus};
    const PfmImage back = read_pfm(write_pfm(img));
    for (std::size_t i = 0; i < corpus.size(); ++i)
      bad += std::bit_cast<std::uint32_t>(back.data[i]) != std::bit_cast<std::uint32_t>(corpus[i]);
  }
  const bool ok = identical == static_cast<int>(cmds.size()) && bad == 0;
  return {ok, fmt("identical experiment reruns=%.0f/%.0f, pfm bit mismatches=%.0f", identical,
                  static_cast<double>(cmds.size()), static_cast<double>(bad))};
}

}  // namespace

int main() {
  const std::vector<std::pair<const char*, std::function<Outcome()>>> criteria{
      {"analytic plane recovery", plane_recovery},
      {"corner-scene adaptivity", corner_adaptivity},
      {"noise robustness trend", noise_trend},
      {"triplet-count trend", triplet_trend},
      {"gradient correctness", gradients},
      {"context learning", context_learning},
      {"oracle equivalence", oracle_equivalence},
      {"metrics correctness", metrics_correctness},
      {"window-ratio rule", window_rule},
      {"determinism", determinism}};
  int failures = 0;
  for (std::size_t i = 0; i < criteria.size(); ++i) {
    const auto t0 = std::chrono::steady_clock::now();
    Outcome o;
    try {
      o = criteria[i].second();
    } catch (const std::exception& e) {
      o = {false, std::string("exception: ") + e.what()};
    }
    failures += !o.pass;
    std::printf("%s %zu %s: %s [%.1fs]\n", o.pass ? "PASS" : "FAIL", i + 1, criteria[i].first, o.detail.c_str(),
                seconds_since(t0));
    std::fflush(stdout);
  }
  return failures == 0 ? 0 : 1;
}

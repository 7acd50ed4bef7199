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

#include <cstdint>
#include <cstdio>
#include <iostream>
#include <optional>
#include <random>
#include <sstream>
#include <string>
#include <vector>

#include "CLI11.hpp"

#include "asn/asn.hpp"

namespace asn::cli {

inline constexpr int kExitOk = 0;
inline constexpr int kExitValidation = 1;
inline constexpr int kExitIo = 2;

struct GlobalOptions {
  std::uint64_t seed = 42;
  int patch = 5;
  int k = 40;
  std::string out;
};

/// Writes `text` to the --out path, or to the output stream when no path
/// was given.
inline void emit(const GlobalOptions& g, std::ostream& out, const std::string& text) {
  if (g.out.empty()) {
    out << text;
  } else {
    write_file(g.out, text);
  }
}

inline void require_out(const GlobalOptions& g) {
  if (g.out.empty()) throw Error(ErrorKind::kValidation, "--out is required");
}

inline AsnConfig asn_config(const GlobalOptions& g) {
  AsnConfig cfg;
  cfg.patch = g.patch;
  cfg.k = g.k;
  cfg.seed = g.seed;
  cfg.validate();
  return cfg;
}

inline DepthMap load_depth(const std::string& path) { return pfm_to_depth(read_pfm(read_file(path))); }
inline NormalMap load_normals(const std::string& path) { return pfm_to_normals(read_pfm(read_file(path))); }
inline Intrinsics load_intrinsics(const std::string& path) { return read_intrinsics(read_file(path)); }
inline ContextMap load_context(const std::string& path) { return read_context(read_file(path)); }

inline std::string format_scalar(double x) { return format_double(x) + "\n"; }

/// Deterministic random 16x16 instance for gradient checking.
struct GradInstance {
  DepthMap depth;
  DepthMap gt_depth;
  NormalMap gt_normals;
  ContextMap context;
  Intrinsics k;
};

inline GradInstance random_grad_instance(std::uint64_t seed, int size = 16) {
  std::mt19937_64 rng(seed);
  std::uniform_real_distribution<double> uni(-1.0, 1.0);
  std::normal_distribution<double> gauss(0.0, 1.0);
  GradInstance g{DepthMap(size, size), DepthMap(size, size), NormalMap(size, size), ContextMap(size, size, 3),
                 Intrinsics{20.0, 20.0, 0.5 * (size - 1), 0.5 * (size - 1)}};
  const double phase = uni(rng);
  for (int v = 0; v < size; ++v) {
    for (int u = 0; u < size; ++u) {
      g.depth.set(u, v, 2.0 + 0.2 * std::sin(0.5 * u + phase) + 0.1 * std::cos(0.3 * v) + 0.05 * uni(rng));
      g.gt_depth.set(u, v, 2.0 + 0.3 * uni(rng));
      g.gt_normals.set(u, v, normalized(Vec3{0.3 * uni(rng), 0.3 * uni(rng), -1.0}));
    }
  }
  for (double& f : g.context.data()) f = gauss(rng);
  return g;
}

/// Max relative error of one analytic gradient against central differences.
inline double gradcheck_instance(const std::string& target, std::uint64_t seed, const AsnConfig& cfg) {
  const GradInstance g = random_grad_instance(seed);
  if (target == "depth") {
    const ScalarMap analytic = grad_asn_wrt_depth(g.depth, g.gt_normals, g.k, g.context, cfg);
    std::vector<double> steps(g.depth.size());
    for (std::size_t i = 0; i < steps.size(); ++i) steps[i] = 1e-6 * g.depth.values()[i];
    const auto numeric = finite_difference_oracle(
        [&](const std::vector<double>& x) {
          DepthMap d = g.depth;
          d.values() = x;
          return asn_loss_from_depth(d, g.gt_normals, g.k, g.context, cfg);
        },
        g.depth.values(), steps);
    return max_relative_error(analytic.values(), numeric, 1e-6);
  }
  if (target == "context") {
    const ContextMap analytic = grad_asn_wrt_context(g.depth, g.gt_normals, g.k, g.context, cfg);
    const auto numeric = finite_difference_oracle(
        [&](const std::vector<double>& x) {
          ContextMap c = g.context;
          c.data() = x;
          return asn_loss_from_depth(g.depth, g.gt_normals, g.k, c, cfg);
        },
        // Context gradients span ~6 decades; the fourth-order stencil allows
        // a step large enough that cancellation spares the smallest entries.
        g.context.data(), 1e-3, FiniteDifference::kCentral4);
    return max_relative_error(analytic.data(), numeric, 1e-6);
  }
  if (target == "silog") {
    const ScalarMap analytic = grad_silog_wrt_depth(g.depth, g.gt_depth, SilogVariant::kPlus);
    std::vector<double> steps(g.depth.size());
    for (std::size_t i = 0; i < steps.size(); ++i) steps[i] = 1e-6 * g.depth.values()[i];
    const auto numeric = finite_difference_oracle(
        [&](const std::vector<double>& x) {
          DepthMap d = g.depth;
          d.values() = x;
          return silog_loss(d, g.gt_depth, SilogVariant::kPlus);
        },
        g.depth.values(), steps);
    return max_relative_error(analytic.values(), numeric, 1e-6);
  }
  throw Error(ErrorKind::kValidation, "unknown gradcheck target: " + target);
}

/// Parses argv and runs one subcommand. Results go to --out or `out`;
/// diagnostics go to `err`. Returns 0 on success, 1 on validation errors
/// and usage errors, 2 on I/O errors.
inline int cli_dispatch(int argc, const char* const* argv, std::ostream& out = std::cout,
                        std::ostream& err = std::cerr) {
  CLI::App app{"Adaptive surface normal toolkit", "asn"};
  app.require_subcommand(1);
  GlobalOptions g;
  app.add_option("--seed", g.seed, "random seed")->capture_default_str();
  app.add_option("--patch", g.patch, "local patch size (odd)")->capture_default_str();
  app.add_option("--k", g.k, "sampled triplets per pixel")->capture_default_str();
  app.add_option("--out", g.out, "output path (stdout when omitted for text outputs)");

  std::string depth_path, intrinsics_path, context_path, method = "asn";
  std::string pred_depth, gt_depth, pred_normals, gt_normals, guidance_path, format = "json";
  std::string term, variant = "plus", target, experiment_name, scene_name, context_out;
  int order = 1, scale = 3, m_triplets = 100, instances = 20, steps = 500, width = 0, height = 0;
  double ratio = 0.4, ld = 0.0, lasn = 0.0, ln = 0.0, alpha = 5.0, beta = 5.0, lr = 300.0;
  double sigma = -1.0;
  bool global_weights = false, timing = false;
  std::vector<double> sigmas;
  std::vector<std::uint64_t> seeds;
  std::vector<int> ks, sizes;

  auto* unproject_cmd = app.add_subcommand("unproject", "depth PFM -> 3-channel point PFM");
  unproject_cmd->add_option("--depth", depth_path, "depth PFM")->required();
  unproject_cmd->add_option("--intrinsics", intrinsics_path, "intrinsics document")->required();

  auto* normals_cmd = app.add_subcommand("normals", "recover a normal map from depth");
  normals_cmd->add_option("--method", method, "asn | sobel | lsq | average")
      ->check(CLI::IsMember({"asn", "sobel", "lsq", "average"}))
      ->capture_default_str();
  normals_cmd->add_option("--depth", depth_path, "depth PFM")->required();
  normals_cmd->add_option("--intrinsics", intrinsics_path, "intrinsics document")->required();
  normals_cmd->add_option("--context", context_path, "context PFM (default: constant)");

  auto* metrics_cmd = app.add_subcommand("metrics", "depth / normal / point-cloud evaluation");
  metrics_cmd->add_option("--pred-depth", pred_depth, "predicted depth PFM");
  metrics_cmd->add_option("--gt-depth", gt_depth, "ground-truth depth PFM");
  metrics_cmd->add_option("--pred-normals", pred_normals, "predicted normal PFM");
  metrics_cmd->add_option("--gt-normals", gt_normals, "ground-truth normal PFM");
  metrics_cmd->add_option("--intrinsics", intrinsics_path, "enables point-cloud metrics");
  metrics_cmd->add_option("--format", format, "json | csv")->check(CLI::IsMember({"json", "csv"}));

  auto* guidance_cmd = app.add_subcommand("guidance", "context -> guidance weight PFM");
  guidance_cmd->add_option("--order", order, "1 (gradient) or 2 (curvature)")->check(CLI::IsMember({1, 2}));
  guidance_cmd->add_option("--context", context_path, "context PFM")->required();

  auto* sample_cmd = app.add_subcommand("sample", "top-v pixel sampling from a guidance map");
  sample_cmd->add_option("--ratio", ratio, "sampling ratio in (0, 1]")->capture_default_str();
  sample_cmd->add_option("--guidance", guidance_path, "guidance PFM")->required();

  auto* loss_cmd = app.add_subcommand("loss", "evaluate one loss term");
  loss_cmd->add_option("--term", term, "silog | asn | normal | total | vn")
      ->check(CLI::IsMember({"silog", "asn", "normal", "total", "vn"}))
      ->required();
  loss_cmd->add_option("--pred-depth", pred_depth);
  loss_cmd->add_option("--gt-depth", gt_depth);
  loss_cmd->add_option("--depth", depth_path);
  loss_cmd->add_option("--intrinsics", intrinsics_path);
  loss_cmd->add_option("--context", context_path);
  loss_cmd->add_option("--pred-normals", pred_normals);
  loss_cmd->add_option("--gt-normals", gt_normals);
  loss_cmd->add_option("--guidance", guidance_path);
  loss_cmd->add_option("--variant", variant, "plus | minus")->check(CLI::IsMember({"plus", "minus"}));
  loss_cmd->add_option("--ratio", ratio);
  loss_cmd->add_option("--scale", scale);
  loss_cmd->add_flag("--global", global_weights, "apply guidance weights to every pixel");
  loss_cmd->add_option("--ld", ld);
  loss_cmd->add_option("--lasn", lasn);
  loss_cmd->add_option("--ln", ln);
  loss_cmd->add_option("--alpha", alpha);
  loss_cmd->add_option("--beta", beta);
  loss_cmd->add_option("--m", m_triplets, "virtual-normal triplet count");

  auto* grad_cmd = app.add_subcommand("gradcheck", "analytic vs finite-difference gradients");
  grad_cmd->add_option("--target", target, "depth | context | silog")
      ->check(CLI::IsMember({"depth", "context", "silog"}))
      ->required();
  grad_cmd->add_option("--instances", instances, "random 16x16 instances")->capture_default_str();

  auto* exp_cmd = app.add_subcommand("experiment", "synthetic ablations");
  exp_cmd->add_option("name", experiment_name, "noise | triplets | patch | window | fit-context")
      ->check(CLI::IsMember({"noise", "triplets", "patch", "window", "fit-context"}))
      ->required();
  exp_cmd->add_option("--sigmas", sigmas, "noise levels in meters");
  exp_cmd->add_option("--seeds", seeds, "seeds for the noise study");
  exp_cmd->add_option("--ks", ks, "triplet counts");
  exp_cmd->add_option("--sizes", sizes, "patch sizes");
  exp_cmd->add_option("--scene", scene_name, "plane | corner | semisphere | step");
  exp_cmd->add_option("--sigma", sigma, "scene noise override (meters)");
  exp_cmd->add_option("--width", width);
  exp_cmd->add_option("--height", height);
  exp_cmd->add_option("--ratio", ratio, "window area / image area");
  exp_cmd->add_option("--steps", steps);
  exp_cmd->add_option("--lr", lr);
  exp_cmd->add_option("--context-out", context_out, "write the learned context PFM here");
  exp_cmd->add_flag("--timing", timing, "append a wall-clock column");

  for (auto* sub : app.get_subcommands([](const CLI::App*) { return true; })) sub->fallthrough();

  try {
    app.parse(argc, argv);
  } catch (const CLI::CallForHelp& e) {
    out << app.help();
    return kExitOk;
  } catch (const CLI::ParseError& e) {
    err << "error: " << e.what() << "\n" << app.help();
    return kExitValidation;
  }

  try {
    if (*unproject_cmd) {
      require_out(g);
      const PointMap pm = unproject(load_depth(depth_path), load_intrinsics(intrinsics_path));
      write_file(g.out, write_pfm(vectors_to_pfm(pm)));
    } else if (*normals_cmd) {
      require_out(g);
      const AsnConfig cfg = asn_config(g);
      const DepthMap depth = load_depth(depth_path);
      const Intrinsics k = load_intrinsics(intrinsics_path);
      const ContextMap ctx =
          context_path.empty() ? constant_context(depth.width(), depth.height()) : load_context(context_path);
      const NormalMap n = recover_normal_map(depth, k, ctx, cfg, parse_normal_method(method));
      write_file(g.out, write_pfm(vectors_to_pfm(n)));
    } else if (*metrics_cmd) {
      MetricsReport report;
      if (pred_depth.empty() != gt_depth.empty()) {
        throw Error(ErrorKind::kValidation, "--pred-depth and --gt-depth must be given together");
      }
      if (pred_normals.empty() != gt_normals.empty()) {
        throw Error(ErrorKind::kValidation, "--pred-normals and --gt-normals must be given together");
      }
      if (pred_depth.empty() && pred_normals.empty()) {
        throw Error(ErrorKind::kValidation, "metrics needs --pred-depth/--gt-depth or --pred-normals/--gt-normals");
      }
      if (!pred_depth.empty()) {
        const DepthMap p = load_depth(pred_depth);
        const DepthMap t = load_depth(gt_depth);
        report.depth = depth_metrics(p, t);
        if (!intrinsics_path.empty()) {
          const Intrinsics k = load_intrinsics(intrinsics_path);
          report.pointcloud = pointcloud_metrics(unproject(p, k), unproject(t, k));
        }
      }
      if (!pred_normals.empty()) report.normal = normal_metrics(load_normals(pred_normals), load_normals(gt_normals));
      emit(g, out, format == "csv" ? to_csv(report) : to_json(report).dump(2) + "\n");
    } else if (*guidance_cmd) {
      require_out(g);
      const GuidanceMap gm = guidance_weights(intensity_map(load_context(context_path)),
                                              order == 1 ? DerivativeOrder::kFirst : DerivativeOrder::kSecond);
      write_file(g.out, write_pfm(scalar_to_pfm(gm)));
    } else if (*sample_cmd) {
      const SampleSet s = top_v_sample(pfm_to_scalar(read_pfm(read_file(guidance_path))), ratio);
      std::ostringstream os;
      os << "rank,u,v\n";
      for (std::size_t i = 0; i < s.pixels.size(); ++i) os << i << ',' << s.pixels[i].u << ',' << s.pixels[i].v << '\n';
      emit(g, out, os.str());
    } else if (*loss_cmd) {
      auto need = [](const std::string& value, const char* flag) {
        if (value.empty()) throw Error(ErrorKind::kValidation, std::string(flag) + " is required for this term");
      };
      LossConfig lc;
      lc.alpha = alpha;
      lc.beta = beta;
      lc.silog_variant = variant == "plus" ? SilogVariant::kPlus : SilogVariant::kMinus;
      lc.guidance_global = global_weights;
      lc.validate();
      double value = 0.0;
      if (term == "silog") {
        need(pred_depth, "--pred-depth");
        need(gt_depth, "--gt-depth");
        value = silog_loss(load_depth(pred_depth), load_depth(gt_depth), lc.silog_variant);
      } else if (term == "asn") {
        need(depth_path, "--depth");
        need(gt_normals, "--gt-normals");
        need(intrinsics_path, "--intrinsics");
        const DepthMap depth = load_depth(depth_path);
        const ContextMap ctx =
            context_path.empty() ? constant_context(depth.width(), depth.height()) : load_context(context_path);
        value = asn_loss_from_depth(depth, load_normals(gt_normals), load_intrinsics(intrinsics_path), ctx,
                                    asn_config(g));
      } else if (term == "normal") {
        need(pred_normals, "--pred-normals");
        need(gt_normals, "--gt-normals");
        need(guidance_path, "--guidance");
        const GuidanceMap gm = pfm_to_scalar(read_pfm(read_file(guidance_path)));
        value = weighted_normal_loss(load_normals(pred_normals), load_normals(gt_normals), gm,
                                     top_v_sample(gm, ratio), lc, scale);
      } else if (term == "total") {
        value = total_loss(ld, lasn, ln, lc);
      } else {
        need(pred_depth, "--pred-depth");
        need(gt_depth, "--gt-depth");
        need(intrinsics_path, "--intrinsics");
        value = virtual_normal_loss(load_depth(pred_depth), load_depth(gt_depth), load_intrinsics(intrinsics_path),
                                    m_triplets, g.seed);
      }
      emit(g, out, format_scalar(value));
    } else if (*grad_cmd) {
      if (instances < 1) throw Error(ErrorKind::kValidation, "--instances must be >= 1");
      AsnConfig cfg = asn_config(g);
      // Small instances: r = 3, K = 8 unless overridden.
      if (app.count("--patch") == 0) cfg.patch = 3;
      if (app.count("--k") == 0) cfg.k = 8;
      std::ostringstream os;
      os << "instance,max_rel_error\n";
      double worst = 0.0;
      for (int i = 0; i < instances; ++i) {
        const double e = gradcheck_instance(target, g.seed + static_cast<std::uint64_t>(i), cfg);
        worst = std::max(worst, e);
        os << i << ',' << format_double(e) << '\n';
      }
      emit(g, out, os.str());
      if (!(worst < 1e-4)) {
        err << "gradcheck failed: max relative error " << worst << " >= 1e-4\n";
        return kExitValidation;
      }
    } else if (*exp_cmd) {
      AsnConfig cfg = asn_config(g);
      auto apply_overrides = [&](SceneSpec s) {
        if (!scene_name.empty()) s.kind = parse_scene_kind(scene_name);
        if (sigma >= 0.0) s.noise_sigma = sigma;
        return s;
      };
      if (experiment_name == "noise") {
        const SceneSpec base = apply_overrides(noise_scene());
        if (sigmas.empty()) sigmas = default_noise_sigmas(base.sphere_radius);
        if (seeds.empty())
          for (std::uint64_t i = 0; i < 5; ++i) seeds.push_back(g.seed + i);
        emit(g, out, to_csv(run_noise_experiment(base, sigmas, seeds, cfg), timing));
      } else if (experiment_name == "triplets") {
        if (ks.empty()) ks = default_triplet_counts();
        emit(g, out, to_csv(run_triplet_sweep(apply_overrides(triplet_scene()), ks, cfg, timing ? 3 : 1), timing));
      } else if (experiment_name == "patch") {
        if (sizes.empty()) sizes = default_patch_sizes();
        emit(g, out, to_csv(run_patch_sweep(apply_overrides(patch_scene()), sizes, cfg, timing ? 3 : 1), timing));
      } else if (experiment_name == "window") {
        if (width <= 0 || height <= 0) throw Error(ErrorKind::kValidation, "--width and --height are required");
        emit(g, out, std::to_string(window_from_ratio(width, height, ratio)) + "\n");
      } else {
        const SceneSpec spec = apply_overrides(context_fit_scene());
        const Scene scene = gen_scene(spec);
        ContextFitOptions opt;
        opt.steps = steps;
        opt.learning_rate = lr;
        const ContextFit fit = fit_context_demo(scene.depth, scene.normals, spec.intrinsics, cfg, opt);
        std::ostringstream os;
        os << "step,loss\n";
        for (std::size_t i = 0; i < fit.loss_trace.size(); ++i) os << i << ',' << format_double(fit.loss_trace[i]) << '\n';
        emit(g, out, os.str());
        if (!context_out.empty()) write_file(context_out, write_context(fit.context));
      }
    }
  } catch (const Error& e) {
    err << "error: " << e.what() << "\n";
    return e.kind() == ErrorKind::kIo ? kExitIo : kExitValidation;
  }
  return kExitOk;
}

}  // namespace asn::cli

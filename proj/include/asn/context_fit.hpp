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

#include <cmath>
#include <random>
#include <string>
#include <vector>

#include "asn/context.hpp"
#include "asn/error.hpp"
#include "asn/geometry.hpp"
#include "asn/losses.hpp"
#include "asn/normals.hpp"

namespace asn {

struct ContextFit {
  ContextMap context;
  /// loss_trace[0] is the zero-context loss; entry i > 0 is the loss after
  /// i gradient steps.
  std::vector<double> loss_trace;
};

struct ContextFitOptions {
  int channels = 3;
  int steps = 500;
  double learning_rate = 300.0;
  /// Uniform jitter amplitude applied once before the first step. At the
  /// all-zero map every pairwise feature distance is zero, where the
  /// similarity kernel only has the zero subgradient and descent cannot start.
  double jitter = 1e-3;
};

/// Learns a free per-pixel context map by plain gradient descent on the ASN
/// loss of the normals recovered from `depth_gt`.
inline ContextFit fit_context_demo(const DepthMap& depth_gt, const NormalMap& normals_gt, const Intrinsics& k,
                                   const AsnConfig& cfg, const ContextFitOptions& opt) {
  cfg.validate();
  if (opt.steps < 0) throw Error(ErrorKind::kValidation, "steps must be >= 0");
  if (!(opt.learning_rate > 0.0)) throw Error(ErrorKind::kValidation, "learning rate must be positive");
  ContextFit fit{ContextMap(depth_gt.width(), depth_gt.height(), opt.channels, 0.0), {}};
  fit.loss_trace.push_back(asn_loss_from_depth(depth_gt, normals_gt, k, fit.context, cfg));
  if (opt.steps == 0) return fit;

  std::mt19937_64 rng(cfg.seed);
  std::uniform_real_distribution<double> jitter(-opt.jitter, opt.jitter);
  for (double& f : fit.context.data()) f = jitter(rng);

  for (int step = 0; step < opt.steps; ++step) {
    const ContextMap grad = grad_asn_wrt_context(depth_gt, normals_gt, k, fit.context, cfg);
    auto& data = fit.context.data();
    for (std::size_t i = 0; i < data.size(); ++i) {
      const double g = grad.data()[i];
      if (!std::isfinite(g)) {
        throw Error(ErrorKind::kNonFinite, "non-finite context gradient at step " + std::to_string(step) +
                                               ", entry " + std::to_string(i));
      }
      data[i] -= opt.learning_rate * g;
    }
    fit.loss_trace.push_back(asn_loss_from_depth(depth_gt, normals_gt, k, fit.context, cfg));
  }
  return fit;
}

}  // namespace asn

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
#include <cstdint>
#include <numbers>
#include <optional>
#include <random>
#include <string>

#include "asn/context.hpp"
#include "asn/error.hpp"
#include "asn/geometry.hpp"

namespace asn {

enum class SceneKind { kPlane, kCorner, kSemisphere, kStep };

inline const char* to_string(SceneKind k) {
  switch (k) {
    case SceneKind::kPlane: return "plane";
    case SceneKind::kCorner: return "corner";
    case SceneKind::kSemisphere: return "semisphere";
    case SceneKind::kStep: return "step";
  }
  return "?";
}

inline SceneKind parse_scene_kind(const std::string& s) {
  if (s == "plane") return SceneKind::kPlane;
  if (s == "corner") return SceneKind::kCorner;
  if (s == "semisphere") return SceneKind::kSemisphere;
  if (s == "step") return SceneKind::kStep;
  throw Error(ErrorKind::kValidation, "unknown scene kind: " + s);
}

/// Camera with square pixels and the principal point at the image center.
inline Intrinsics centered_intrinsics(int width, int height, double focal) {
  return {focal, focal, 0.5 * (width - 1), 0.5 * (height - 1)};
}

/// Analytic test scene. Geometry parameters not used by `kind` are ignored.
struct SceneSpec {
  SceneKind kind = SceneKind::kPlane;
  int width = 64;
  int height = 48;
  Intrinsics intrinsics = centered_intrinsics(64, 48, 60.0);

  /// Plane: points X with normal . X == -distance; the normal faces the camera.
  Vec3 plane_normal{0.0, 0.0, -1.0};
  double plane_distance = 2.0;

  /// Corner: two planes meeting in a vertical crease through the optical
  /// axis at depth corner_depth, opening toward the camera.
  double corner_depth = 2.0;
  double corner_dihedral_deg = 90.0;

  Vec3 sphere_center{0.0, 0.0, 2.5};
  double sphere_radius = 1.0;

  /// Step: depth step_near left of the optical axis, step_far right of it.
  double step_near = 1.5;
  double step_far = 2.0;

  double noise_sigma = 0.0;
  std::uint64_t seed = 0;

  /// Amplitude of the one-hot plane-id context emitted for corner and step
  /// scenes.
  double context_contrast = 10.0;

  void validate() const {
    if (width < 16 || height < 16) throw Error(ErrorKind::kValidation, "scene resolution must be >= 16x16");
    intrinsics.validate();
    if (!(sphere_radius > 0.0)) throw Error(ErrorKind::kValidation, "sphere radius must be positive");
    if (!(noise_sigma >= 0.0)) throw Error(ErrorKind::kValidation, "noise sigma must be >= 0");
    if (!(corner_dihedral_deg > 0.0 && corner_dihedral_deg < 180.0)) {
      throw Error(ErrorKind::kValidation, "corner dihedral must be in (0, 180) degrees");
    }
    if (!(norm(plane_normal) > 0.0)) throw Error(ErrorKind::kValidation, "plane normal must be non-zero");
  }
};

struct Scene {
  DepthMap depth;
  NormalMap normals;
  /// Surface id per pixel (-1 where the ray misses).
  Map<int> labels;
  /// One-hot surface-id context for multi-surface scenes.
  std::optional<ContextMap> context;
};

namespace detail {

struct Hit {
  double depth;
  Vec3 normal;
  int label;
};

inline std::optional<Hit> cast_ray(const SceneSpec& s, const Vec3& d) {
  switch (s.kind) {
    case SceneKind::kPlane: {
      const Vec3 n = normalized(s.plane_normal);
      const double denom = dot(n, d);
      if (!(denom < 0.0)) return std::nullopt;
      const double t = -s.plane_distance / denom;
      if (!(t > 0.0)) return std::nullopt;
      return Hit{t, n, 0};
    }
    case SceneKind::kCorner: {
      const double slope = std::tan((180.0 - s.corner_dihedral_deg) * 0.5 * std::numbers::pi / 180.0);
      const double z = s.corner_depth / (1.0 + slope * std::abs(d.x));
      const double len = std::sqrt(1.0 + slope * slope);
      if (d.x < 0.0) return Hit{z, Vec3{slope / len, 0.0, -1.0 / len}, 0};
      return Hit{z, Vec3{-slope / len, 0.0, -1.0 / len}, 1};
    }
    case SceneKind::kSemisphere: {
      const Vec3& c = s.sphere_center;
      const double a = dot(d, d);
      const double b = dot(d, c);
      const double disc = b * b - a * (dot(c, c) - s.sphere_radius * s.sphere_radius);
      if (disc < 0.0) return std::nullopt;
      const double t = (b - std::sqrt(disc)) / a;
      if (!(t > 0.0)) return std::nullopt;
      const Vec3 p = t * d;
      return Hit{t, (p - c) / s.sphere_radius, 0};
    }
    case SceneKind::kStep: {
      if (d.x < 0.0) return Hit{s.step_near, Vec3{0.0, 0.0, -1.0}, 0};
      return Hit{s.step_far, Vec3{0.0, 0.0, -1.0}, 1};
    }
  }
  return std::nullopt;
}

}  // namespace detail

/// Ray-casts the analytic surface through every pixel center. Ground-truth
/// normals come from the surface; Gaussian noise is then added to depth.
inline Scene gen_scene(const SceneSpec& spec) {
  spec.validate();
  Scene scene{DepthMap(spec.width, spec.height), NormalMap(spec.width, spec.height),
              Map<int>(spec.width, spec.height, -1, false), std::nullopt};
  for (int v = 0; v < spec.height; ++v) {
    for (int u = 0; u < spec.width; ++u) {
      const auto hit = detail::cast_ray(spec, spec.intrinsics.ray(u, v));
      if (!hit) continue;
      const Vec3 p = hit->depth * spec.intrinsics.ray(u, v);
      scene.depth.set(u, v, hit->depth);
      scene.normals.set(u, v, orient_to_camera(hit->normal, p));
      scene.labels.set(u, v, hit->label);
    }
  }
  if (spec.noise_sigma > 0.0) {
    std::mt19937_64 rng(spec.seed);
    std::normal_distribution<double> noise(0.0, spec.noise_sigma);
    for (std::size_t i = 0; i < scene.depth.size(); ++i) {
      if (!scene.depth.mask()[i]) continue;
      const double d = scene.depth.values()[i] + noise(rng);
      scene.depth.values()[i] = d;
      if (!(d > 0.0)) scene.depth.mask()[i] = 0;
    }
  }
  if (spec.kind == SceneKind::kCorner || spec.kind == SceneKind::kStep) {
    ContextMap ctx(spec.width, spec.height, 2, 0.0);
    for (int v = 0; v < spec.height; ++v) {
      for (int u = 0; u < spec.width; ++u) {
        const int label = scene.labels.at(u, v);
        if (label >= 0) ctx.feature(u, v)[static_cast<std::size_t>(label)] = spec.context_contrast;
      }
    }
    scene.context = std::move(ctx);
  }
  return scene;
}

/// True when some 8-neighbour of (u, v) lies on a different surface.
inline bool is_boundary_adjacent(const Map<int>& labels, int u, int v) {
  if (!labels.valid(u, v)) return false;
  const int own = labels.at(u, v);
  for (int dv = -1; dv <= 1; ++dv) {
    for (int du = -1; du <= 1; ++du) {
      const int uu = u + du, vv = v + dv;
      if (!labels.in_bounds(uu, vv) || !labels.valid(uu, vv)) continue;
      if (labels.at(uu, vv) != own) return true;
    }
  }
  return false;
}

inline Map<std::uint8_t> boundary_adjacent_mask(const Map<int>& labels) {
  Map<std::uint8_t> out(labels.width(), labels.height(), 0, false);
  for (int v = 0; v < labels.height(); ++v)
    for (int u = 0; u < labels.width(); ++u)
      if (is_boundary_adjacent(labels, u, v)) out.set(u, v, 1);
  return out;
}

/// Pixels whose whole r x r window lies inside the image and is valid.
inline Map<std::uint8_t> interior_mask(const DepthMap& depth, int r) {
  const int h = r / 2;
  Map<std::uint8_t> out(depth.width(), depth.height(), 0, false);
  for (int v = h; v < depth.height() - h; ++v) {
    for (int u = h; u < depth.width() - h; ++u) {
      bool ok = true;
      for (int dv = -h; dv <= h && ok; ++dv)
        for (int du = -h; du <= h && ok; ++du) ok = depth.valid(u + du, v + dv);
      if (ok) out.set(u, v, 1);
    }
  }
  return out;
}

/// Copy of `normals` restricted to the pixels set in `mask`.
template <typename M>
NormalMap restrict_to(const NormalMap& normals, const Map<M>& mask) {
  NormalMap out = normals;
  for (std::size_t i = 0; i < out.size(); ++i) out.mask()[i] = out.mask()[i] && mask.mask()[i];
  return out;
}

}  // namespace asn

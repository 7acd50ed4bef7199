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
#include <cstddef>
#include <cstdint>
#include <string>
#include <vector>

#include "asn/error.hpp"

namespace asn {

/// Plain 3-vector in double precision. Operations are written out per
/// component so results are bit-reproducible regardless of vectorization.
struct Vec3 {
  double x = 0.0;
  double y = 0.0;
  double z = 0.0;

  constexpr Vec3() = default;
  constexpr Vec3(double x_, double y_, double z_) : x(x_), y(y_), z(z_) {}

  constexpr Vec3& operator+=(const Vec3& o) {
    x += o.x;
    y += o.y;
    z += o.z;
    return *this;
  }
  constexpr Vec3& operator-=(const Vec3& o) {
    x -= o.x;
    y -= o.y;
    z -= o.z;
    return *this;
  }
  constexpr Vec3& operator*=(double s) {
    x *= s;
    y *= s;
    z *= s;
    return *this;
  }

  friend constexpr bool operator==(const Vec3&, const Vec3&) = default;
};

constexpr Vec3 operator+(Vec3 a, const Vec3& b) { return a += b; }
constexpr Vec3 operator-(Vec3 a, const Vec3& b) { return a -= b; }
constexpr Vec3 operator-(const Vec3& a) { return {-a.x, -a.y, -a.z}; }
constexpr Vec3 operator*(double s, const Vec3& v) { return {s * v.x, s * v.y, s * v.z}; }
constexpr Vec3 operator*(const Vec3& v, double s) { return s * v; }
constexpr Vec3 operator/(const Vec3& v, double s) { return {v.x / s, v.y / s, v.z / s}; }

constexpr double dot(const Vec3& a, const Vec3& b) { return a.x * b.x + a.y * b.y + a.z * b.z; }

constexpr Vec3 cross(const Vec3& a, const Vec3& b) {
  return {a.y * b.z - a.z * b.y, a.z * b.x - a.x * b.z, a.x * b.y - a.y * b.x};
}

inline double norm(const Vec3& v) { return std::sqrt(v.x * v.x + v.y * v.y + v.z * v.z); }

inline Vec3 normalized(const Vec3& v) { return v / norm(v); }

inline bool is_finite(const Vec3& v) {
  return std::isfinite(v.x) && std::isfinite(v.y) && std::isfinite(v.z);
}

/// Angle between two unit vectors in radians. Equals acos of the clamped dot
/// product; the atan2 form keeps full precision near 0 and pi.
inline double angle_between(const Vec3& a, const Vec3& b) {
  return std::atan2(norm(cross(a, b)), dot(a, b));
}

/// Image coordinates: u is the column (x, right), v is the row (y, down).
struct Pixel {
  int u = 0;
  int v = 0;

  friend constexpr bool operator==(const Pixel&, const Pixel&) = default;
};

/// Pinhole camera. Camera frame is +x right, +y down, +z forward.
struct Intrinsics {
  double fx = 1.0;
  double fy = 1.0;
  double cx = 0.0;
  double cy = 0.0;

  /// Direction of the ray through pixel (u, v), scaled so that z == 1.
  constexpr Vec3 ray(double u, double v) const { return {(u - cx) / fx, (v - cy) / fy, 1.0}; }

  void validate() const {
    if (!(fx > 0.0) || !std::isfinite(fx)) throw Error(ErrorKind::kValidation, "fx must be positive");
    if (!(fy > 0.0) || !std::isfinite(fy)) throw Error(ErrorKind::kValidation, "fy must be positive");
    if (!std::isfinite(cx)) throw Error(ErrorKind::kValidation, "cx must be finite");
    if (!std::isfinite(cy)) throw Error(ErrorKind::kValidation, "cy must be finite");
  }
};

/// Dense per-pixel grid with a validity mask, stored row-major.
template <typename T>
class Map {
 public:
  Map() = default;
  Map(int width, int height, const T& fill = T{}, bool valid = false)
      : width_(width),
        height_(height),
        values_(checked_size(width, height), fill),
        valid_(values_.size(), valid ? 1 : 0) {}

  int width() const noexcept { return width_; }
  int height() const noexcept { return height_; }
  std::size_t size() const noexcept { return values_.size(); }

  bool in_bounds(int u, int v) const noexcept { return u >= 0 && v >= 0 && u < width_ && v < height_; }
  std::size_t index(int u, int v) const noexcept {
    return static_cast<std::size_t>(v) * static_cast<std::size_t>(width_) + static_cast<std::size_t>(u);
  }
  Pixel pixel(std::size_t i) const noexcept {
    return {static_cast<int>(i % static_cast<std::size_t>(width_)),
            static_cast<int>(i / static_cast<std::size_t>(width_))};
  }

  const T& at(int u, int v) const { return values_[index(u, v)]; }
  T& at(int u, int v) { return values_[index(u, v)]; }
  const T& at(Pixel p) const { return at(p.u, p.v); }
  T& at(Pixel p) { return at(p.u, p.v); }

  bool valid(int u, int v) const { return valid_[index(u, v)] != 0; }
  bool valid(Pixel p) const { return valid(p.u, p.v); }
  void set_valid(int u, int v, bool ok) { valid_[index(u, v)] = ok ? 1 : 0; }
  void set(int u, int v, const T& value) {
    values_[index(u, v)] = value;
    valid_[index(u, v)] = 1;
  }

  const std::vector<T>& values() const noexcept { return values_; }
  std::vector<T>& values() noexcept { return values_; }
  const std::vector<std::uint8_t>& mask() const noexcept { return valid_; }
  std::vector<std::uint8_t>& mask() noexcept { return valid_; }

  std::size_t valid_count() const noexcept {
    std::size_t n = 0;
    for (auto m : valid_) n += m != 0;
    return n;
  }

  bool same_shape(int w, int h) const noexcept { return w == width_ && h == height_; }
  template <typename U>
  bool same_shape(const Map<U>& o) const noexcept {
    return same_shape(o.width(), o.height());
  }

  friend bool operator==(const Map&, const Map&) = default;

 private:
  static std::size_t checked_size(int width, int height) {
    if (width < 0 || height < 0) throw Error(ErrorKind::kConfiguration, "negative map dimensions");
    return static_cast<std::size_t>(width) * static_cast<std::size_t>(height);
  }

  int width_ = 0;
  int height_ = 0;
  std::vector<T> values_;
  std::vector<std::uint8_t> valid_;
};

/// Depth in meters; valid entries are strictly positive.
using DepthMap = Map<double>;
/// Camera-frame 3D points; valid entries have z > 0.
using PointMap = Map<Vec3>;
/// Camera-facing unit normals.
using NormalMap = Map<Vec3>;
/// Generic scalar grid (intensity, gradients).
using ScalarMap = Map<double>;

template <typename T, typename U>
void require_same_shape(const Map<T>& a, const Map<U>& b, const char* what) {
  if (!a.same_shape(b)) {
    throw Error(ErrorKind::kConfiguration, std::string("shape mismatch: ") + what);
  }
}

/// Builds a depth map from raw values; entries that are not finite and
/// positive are marked invalid.
inline DepthMap make_depth_map(int width, int height, const std::vector<double>& values) {
  DepthMap d(width, height);
  if (values.size() != d.size()) throw Error(ErrorKind::kConfiguration, "depth value count does not match shape");
  for (std::size_t i = 0; i < values.size(); ++i) {
    d.values()[i] = values[i];
    d.mask()[i] = std::isfinite(values[i]) && values[i] > 0.0;
  }
  return d;
}

inline Vec3 unproject_pixel(double u, double v, double depth, const Intrinsics& k) {
  return {(u - k.cx) / k.fx * depth, (v - k.cy) / k.fy * depth, depth};
}

inline PointMap unproject(const DepthMap& depth, const Intrinsics& k) {
  PointMap pm(depth.width(), depth.height());
  for (int v = 0; v < depth.height(); ++v) {
    for (int u = 0; u < depth.width(); ++u) {
      if (depth.valid(u, v) && depth.at(u, v) > 0.0) pm.set(u, v, unproject_pixel(u, v, depth.at(u, v), k));
    }
  }
  return pm;
}

/// Flips n so that it faces the camera (n . p < 0). Exact tangency keeps n.
inline Vec3 orient_to_camera(const Vec3& n, const Vec3& p) { return dot(n, p) > 0.0 ? -n : n; }

struct PatchEntry {
  Pixel pixel;
  Vec3 point;
};

/// Valid in-bounds pixels of the r x r window around `center`, row-major,
/// center included. Border windows are clipped, never padded.
inline std::vector<PatchEntry> extract_patch(const PointMap& pm, Pixel center, int r) {
  if (r < 3 || r % 2 == 0) throw Error(ErrorKind::kConfiguration, "patch size must be odd and >= 3");
  if (!pm.in_bounds(center.u, center.v) || !pm.valid(center)) {
    throw Error(ErrorKind::kDegeneratePatch, "patch center is invalid");
  }
  const int h = r / 2;
  std::vector<PatchEntry> out;
  out.reserve(static_cast<std::size_t>(r) * static_cast<std::size_t>(r));
  for (int v = center.v - h; v <= center.v + h; ++v) {
    for (int u = center.u - h; u <= center.u + h; ++u) {
      if (pm.in_bounds(u, v) && pm.valid(u, v)) out.push_back({{u, v}, pm.at(u, v)});
    }
  }
  return out;
}

}  // namespace asn

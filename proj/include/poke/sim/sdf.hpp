// SPDX-License-Identifier: Apache-2.0
#pragma once

#include <algorithm>
#include <cmath>
#include <string>
#include <vector>

#include "poke/core/se3.hpp"

namespace poke::sim {

enum class ShapeType { sphere, box, superellipsoid, capsule };

inline std::string to_string(ShapeType t) {
  switch (t) {
    case ShapeType::sphere: return "sphere";
    case ShapeType::box: return "box";
    case ShapeType::superellipsoid: return "superellipsoid";
    case ShapeType::capsule: return "capsule";
  }
  return "?";
}

inline ShapeType shape_from_string(const std::string& s) {
  if (s == "sphere") return ShapeType::sphere;
  if (s == "box") return ShapeType::box;
  if (s == "superellipsoid") return ShapeType::superellipsoid;
  if (s == "capsule") return ShapeType::capsule;
  fail(ErrorClass::config, "unknown shape type: " + s);
}

// Analytic primitive in its local frame (origin at the shape center).
// sdf() is exact for sphere/box/capsule; for the superellipsoid it returns
// f/|grad f| with f = ||x/a||_p - 1, which is a lower bound on the true
// distance outside (f is convex for p >= 2), so sphere tracing never
// overshoots. Capsule axis runs along local z.
struct Shape {
  ShapeType type = ShapeType::sphere;
  Vec3 half = Vec3(0.03, 0.03, 0.03);  // box half extents / superellipsoid semi-axes
  double radius = 0.03;                // sphere, capsule
  double half_length = 0.03;           // capsule
  double exponent = 4.0;               // superellipsoid p

  double sdf(const Vec3& x) const {
    switch (type) {
      case ShapeType::sphere:
        return x.norm() - radius;
      case ShapeType::box: {
        Vec3 q = x.cwiseAbs() - half;
        double outside = q.cwiseMax(0.0).norm();
        double inside = std::min(q.maxCoeff(), 0.0);
        return outside + inside;
      }
      case ShapeType::capsule: {
        Vec3 p = x;
        p.z() -= std::clamp(p.z(), -half_length, half_length);
        return p.norm() - radius;
      }
      case ShapeType::superellipsoid: {
        double p = exponent;
        double s = 0.0;
        for (int i = 0; i < 3; ++i) s += std::pow(std::abs(x(i)) / half(i), p);
        if (s <= 0.0) return -half.minCoeff();
        double g = std::pow(s, 1.0 / p);
        Vec3 grad;
        for (int i = 0; i < 3; ++i) {
          double t = std::pow(std::abs(x(i)) / half(i), p - 1.0);
          grad(i) = std::pow(s, 1.0 / p - 1.0) * t * (x(i) < 0 ? -1.0 : 1.0) / half(i);
        }
        double gn = grad.norm();
        if (gn < 1e-12) return (g - 1.0) * half.minCoeff();
        return (g - 1.0) / gn;
      }
    }
    return 0.0;
  }

  Vec3 gradient(const Vec3& x, double h = 1e-6) const {
    Vec3 g;
    for (int i = 0; i < 3; ++i) {
      Vec3 dp = x, dm = x;
      dp(i) += h;
      dm(i) -= h;
      g(i) = (sdf(dp) - sdf(dm)) / (2.0 * h);
    }
    return g;
  }

  // Support function h(d) = max_{x in shape} x . d for |d| = 1.
  // Superellipsoid uses the dual norm of ||./a||_p.
  double support(const Vec3& d) const {
    switch (type) {
      case ShapeType::sphere:
        return radius;
      case ShapeType::box:
        return half.dot(d.cwiseAbs());
      case ShapeType::capsule:
        return half_length * std::abs(d.z()) + radius;
      case ShapeType::superellipsoid: {
        double q = exponent / (exponent - 1.0);
        double s = 0.0;
        for (int i = 0; i < 3; ++i) s += std::pow(half(i) * std::abs(d(i)), q);
        return std::pow(s, 1.0 / q);
      }
    }
    return 0.0;
  }

  double bounding_radius() const {
    switch (type) {
      case ShapeType::sphere: return radius;
      case ShapeType::box: return half.norm();
      case ShapeType::capsule: return half_length + radius;
      case ShapeType::superellipsoid: return half.norm();
    }
    return 0.0;
  }

  // Radial surface point along unit direction d from the center. All our
  // primitives are star-shaped about the origin, so bisection on the sdf
  // sign along the ray converges to the unique crossing.
  Vec3 surface_point(const Vec3& d) const {
    double lo = 0.0, hi = bounding_radius() * 1.0001 + 1e-6;
    for (int it = 0; it < 60; ++it) {
      double mid = 0.5 * (lo + hi);
      (sdf(mid * d) < 0.0 ? lo : hi) = mid;
    }
    return 0.5 * (lo + hi) * d;
  }

  // Deterministic quasi-uniform surface samples (fibonacci sphere directions).
  std::vector<Vec3> surface_points(int n) const {
    std::vector<Vec3> pts;
    pts.reserve(n);
    const double ga = M_PI * (3.0 - std::sqrt(5.0));
    for (int i = 0; i < n; ++i) {
      double z = 1.0 - 2.0 * (i + 0.5) / n;
      double r = std::sqrt(std::max(0.0, 1.0 - z * z));
      double th = ga * i;
      pts.push_back(surface_point(Vec3(r * std::cos(th), r * std::sin(th), z)));
    }
    return pts;
  }
};

// Lowest world-space z of the shape under the given pose.
inline double lowest_point_z(const Shape& shape, const Pose& pose) {
  Vec3 d_local = pose.rotation.transpose() * Vec3(0, 0, -1);
  return pose.translation.z() - shape.support(d_local);
}

enum class TextureType { solid, checker, noise };

inline std::string to_string(TextureType t) {
  switch (t) {
    case TextureType::solid: return "solid";
    case TextureType::checker: return "checker";
    case TextureType::noise: return "noise";
  }
  return "?";
}

inline TextureType texture_from_string(const std::string& s) {
  if (s == "solid") return TextureType::solid;
  if (s == "checker") return TextureType::checker;
  if (s == "noise") return TextureType::noise;
  fail(ErrorClass::config, "unknown texture type: " + s);
}

namespace detail {

inline double lattice_value(std::uint64_t seed, int ix, int iy, int iz) {
  std::uint64_t key = (static_cast<std::uint64_t>(static_cast<std::uint32_t>(ix)) << 42) ^
                      (static_cast<std::uint64_t>(static_cast<std::uint32_t>(iy)) << 21) ^
                      static_cast<std::uint64_t>(static_cast<std::uint32_t>(iz));
  return (mix_seed(seed, key) >> 11) * 0x1.0p-53;
}

inline double smoothstep(double t) { return t * t * (3.0 - 2.0 * t); }

}  // namespace detail

// Procedural albedo evaluated in the object's local frame so texture detail
// rides along with the object under motion.
struct Texture {
  TextureType type = TextureType::solid;
  Vec3 rgb_a = Vec3(0.7, 0.7, 0.7);
  Vec3 rgb_b = Vec3(0.3, 0.3, 0.3);
  double scale = 0.02;  // meters per cell
  std::uint64_t seed = 0;

  Vec3 sample(const Vec3& local) const {
    switch (type) {
      case TextureType::solid:
        return rgb_a;
      case TextureType::checker: {
        long ix = static_cast<long>(std::floor(local.x() / scale));
        long iy = static_cast<long>(std::floor(local.y() / scale));
        long iz = static_cast<long>(std::floor(local.z() / scale));
        return ((ix + iy + iz) & 1) ? rgb_b : rgb_a;
      }
      case TextureType::noise: {
        Vec3 p = local / scale;
        int ix = static_cast<int>(std::floor(p.x()));
        int iy = static_cast<int>(std::floor(p.y()));
        int iz = static_cast<int>(std::floor(p.z()));
        double fx = detail::smoothstep(p.x() - ix);
        double fy = detail::smoothstep(p.y() - iy);
        double fz = detail::smoothstep(p.z() - iz);
        double v = 0.0;
        for (int c = 0; c < 8; ++c) {
          double w = ((c & 1) ? fx : 1 - fx) * ((c & 2) ? fy : 1 - fy) *
                     ((c & 4) ? fz : 1 - fz);
          v += w * detail::lattice_value(seed, ix + (c & 1), iy + ((c >> 1) & 1),
                                         iz + ((c >> 2) & 1));
        }
        return rgb_a + (rgb_b - rgb_a) * v;
      }
    }
    return rgb_a;
  }
};

}  // namespace poke::sim

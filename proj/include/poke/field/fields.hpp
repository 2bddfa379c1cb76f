// SPDX-License-Identifier: Apache-2.0
#pragma once

#include <cmath>
#include <vector>

#include "poke/field/grid.hpp"

namespace poke::field {

// Channel layout shared by both field kinds: channel 0 is the shape channel
// (raw density for the background, signed distance for objects), channels
// 1..3 are pre-sigmoid color.
constexpr int kShapeChannel = 0;
constexpr int kColorChannel = 1;
constexpr int kFieldChannels = 4;

struct BackgroundField {
  VoxelGrid grid;

  BackgroundField() = default;
  BackgroundField(const Vec3& lo, const Vec3& hi, int res)
      : grid(lo, hi, res, res, res, kFieldChannels) {}
};

// Object field in its canonical frame. beta is optimized in log-space so it
// stays positive.
struct ObjectField {
  VoxelGrid grid;
  double log_beta = std::log(0.05);

  ObjectField() = default;
  ObjectField(const Vec3& lo, const Vec3& hi, int res)
      : grid(lo, hi, res, res, res, kFieldChannels) {}

  double beta() const { return std::exp(log_beta); }
};

// Per-object, per-frame world-from-object poses stored as twists.
struct PoseTrack {
  std::vector<std::vector<Twist>> twists;  // [object][frame]

  int object_count() const { return static_cast<int>(twists.size()); }
  int frame_count() const { return twists.empty() ? 0 : static_cast<int>(twists[0].size()); }
  Pose pose(int k, int t) const { return se3_exp(twists[k][t]); }
};

inline double sdf_to_density(double d, double beta) {
  if (d < 0) return (1.0 / beta) * (1.0 - 0.5 * std::exp(d / beta));
  return (0.5 / beta) * std::exp(-d / beta);
}

// Both branches share the same derivative magnitude, so the derivative is
// continuous across d = 0.
inline double sdf_to_density_dd(double d, double beta) {
  return -(0.5 / (beta * beta)) * std::exp(-std::abs(d) / beta);
}

inline double sdf_to_density_dbeta(double d, double beta) {
  double b2 = beta * beta;
  if (d < 0) return -1.0 / b2 + std::exp(d / beta) * (0.5 / b2 + 0.5 * d / (b2 * beta));
  return std::exp(-d / beta) * (-0.5 / b2 + 0.5 * d / (b2 * beta));
}

struct BackgroundSample {
  Vec3 color = Vec3::Zero();
  double sigma = 0;
  bool inside = false;
  TrilerpStencil stencil;          // valid only when inside
  double raw_sigma = 0;            // pre-softplus
  Vec3 raw_color = Vec3::Zero();   // pre-sigmoid
};

inline BackgroundSample query_background(const BackgroundField& f, const Vec3& x) {
  BackgroundSample s;
  if (!f.grid.inside(x)) return s;
  s.inside = true;
  s.stencil = make_stencil(f.grid, x);
  s.raw_sigma = s.stencil.value(f.grid, kShapeChannel);
  s.sigma = softplus(s.raw_sigma);
  for (int c = 0; c < 3; ++c) {
    s.raw_color[c] = s.stencil.value(f.grid, kColorChannel + c);
    s.color[c] = sigmoid(s.raw_color[c]);
  }
  return s;
}

struct ObjectSample {
  Vec3 color = Vec3::Zero();
  double sdf = 0;
  Vec3 x_object = Vec3::Zero();    // query point in the canonical frame
  bool inside = false;             // inside the canonical volume
  Vec3 outward = Vec3::Zero();     // unit direction from clamped point, zero inside
  TrilerpStencil stencil;          // at the (clamped) canonical point
  Vec3 raw_color = Vec3::Zero();
};

// Canonical-frame query. Outside the volume the signed distance grows with
// the distance to the volume boundary, keeping the density near zero far
// away while staying differentiable for the optimizer.
inline ObjectSample query_object_canonical(const ObjectField& f, const Vec3& x_o) {
  ObjectSample s;
  s.x_object = x_o;
  Vec3 xc = clamp_to_volume(f.grid, x_o);
  s.inside = (xc - x_o).norm() == 0;
  s.stencil = make_stencil(f.grid, xc);
  s.sdf = s.stencil.value(f.grid, kShapeChannel);
  if (!s.inside) {
    double dist = (x_o - xc).norm();
    s.outward = (x_o - xc) / dist;
    s.sdf += dist;
  }
  for (int c = 0; c < 3; ++c) {
    s.raw_color[c] = s.stencil.value(f.grid, kColorChannel + c);
    s.color[c] = sigmoid(s.raw_color[c]);
  }
  return s;
}

inline ObjectSample query_object(const ObjectField& f, const Vec3& x_world, const Pose& pose) {
  return query_object_canonical(f, pose.inverse().apply(x_world));
}

// Analytic spatial gradient of the interpolated signed distance, piecewise
// constant per cell along each axis. Outside the volume the boundary value is
// used together with the outward distance term.
inline Vec3 sdf_spatial_gradient(const ObjectField& f, const Vec3& x_o) {
  Vec3 xc = clamp_to_volume(f.grid, x_o);
  TrilerpStencil st = make_stencil(f.grid, xc);
  Vec3 g = st.gradient(f.grid, kShapeChannel);
  Vec3 d = x_o - xc;
  double dist = d.norm();
  if (dist > 0) {
    // Clamped axes contribute the distance direction and lose the lateral
    // interpolation derivative.
    for (int a = 0; a < 3; ++a)
      if (d[a] != 0) g[a] = d[a] / dist;
  }
  return g;
}

}  // namespace poke::field

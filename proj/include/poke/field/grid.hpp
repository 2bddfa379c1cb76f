// SPDX-License-Identifier: Apache-2.0
#pragma once

#include <cmath>
#include <vector>

#include "poke/common.hpp"
#include "poke/core/se3.hpp"

namespace poke::field {

// Dense node-centered voxel grid over an axis-aligned volume. Nodes span the
// volume inclusive of both faces, so each axis has res-1 cells. Channel values
// are stored raw (pre-activation); interpolation happens before activation.
struct VoxelGrid {
  Vec3 lo = Vec3::Zero();
  Vec3 hi = Vec3::Ones();
  int nx = 0, ny = 0, nz = 0, channels = 0;
  std::vector<double> data;  // ((z * ny + y) * nx + x) * channels + c

  VoxelGrid() = default;
  VoxelGrid(const Vec3& lo_, const Vec3& hi_, int nx_, int ny_, int nz_, int channels_)
      : lo(lo_), hi(hi_), nx(nx_), ny(ny_), nz(nz_), channels(channels_),
        data(static_cast<size_t>(nx_) * ny_ * nz_ * channels_, 0.0) {
    require(nx_ >= 2 && ny_ >= 2 && nz_ >= 2, ErrorClass::config, "VoxelGrid: need >= 2 nodes per axis");
    require(channels_ >= 1, ErrorClass::config, "VoxelGrid: need >= 1 channel");
    require((hi_ - lo_).minCoeff() > 0, ErrorClass::config, "VoxelGrid: empty volume");
  }

  size_t node_index(int x, int y, int z) const {
    return (static_cast<size_t>(z) * ny + y) * nx + x;
  }
  double& at(int x, int y, int z, int c) { return data[node_index(x, y, z) * channels + c]; }
  double at(int x, int y, int z, int c) const { return data[node_index(x, y, z) * channels + c]; }

  Vec3 cell_size() const {
    return Vec3((hi.x() - lo.x()) / (nx - 1), (hi.y() - lo.y()) / (ny - 1),
                (hi.z() - lo.z()) / (nz - 1));
  }

  bool inside(const Vec3& x) const {
    return x.x() >= lo.x() && x.x() <= hi.x() && x.y() >= lo.y() && x.y() <= hi.y() &&
           x.z() >= lo.z() && x.z() <= hi.z();
  }
};

// One interpolation query: the 8 cell-corner node indices, their trilinear
// weights, and the spatial gradient of each weight in world units.
struct TrilerpStencil {
  size_t node[8];
  double w[8];
  Vec3 dw[8];

  double value(const VoxelGrid& g, int c) const {
    double v = 0;
    for (int j = 0; j < 8; ++j) v += w[j] * g.data[node[j] * g.channels + c];
    return v;
  }

  Vec3 gradient(const VoxelGrid& g, int c) const {
    Vec3 v = Vec3::Zero();
    for (int j = 0; j < 8; ++j) v += dw[j] * g.data[node[j] * g.channels + c];
    return v;
  }

  // Accumulates d(value)/d(node data) into a gradient buffer shaped like data.
  void scatter(const VoxelGrid& g, int c, double upstream, std::vector<double>& grad) const {
    for (int j = 0; j < 8; ++j) grad[node[j] * g.channels + c] += upstream * w[j];
  }
};

// Builds the stencil at x clamped into the volume. Clamping makes boundary
// evaluation well-defined; callers that need the out-of-bounds distance use
// clamp_to_volume first.
inline TrilerpStencil make_stencil(const VoxelGrid& g, const Vec3& x) {
  Vec3 cs = g.cell_size();
  int ix[3];
  double f[3];
  double inv[3] = {1.0 / cs.x(), 1.0 / cs.y(), 1.0 / cs.z()};
  int res[3] = {g.nx, g.ny, g.nz};
  for (int a = 0; a < 3; ++a) {
    double u = (x[a] - g.lo[a]) * inv[a];
    double fl = std::floor(u);
    int i = static_cast<int>(fl);
    if (i < 0) i = 0;
    if (i > res[a] - 2) i = res[a] - 2;
    ix[a] = i;
    f[a] = std::clamp(u - i, 0.0, 1.0);
  }
  TrilerpStencil s;
  for (int j = 0; j < 8; ++j) {
    int dx = j & 1, dy = (j >> 1) & 1, dz = (j >> 2) & 1;
    s.node[j] = g.node_index(ix[0] + dx, ix[1] + dy, ix[2] + dz);
    double wx = dx ? f[0] : 1 - f[0];
    double wy = dy ? f[1] : 1 - f[1];
    double wz = dz ? f[2] : 1 - f[2];
    s.w[j] = wx * wy * wz;
    s.dw[j] = Vec3((dx ? 1 : -1) * inv[0] * wy * wz, (dy ? 1 : -1) * inv[1] * wx * wz,
                   (dz ? 1 : -1) * inv[2] * wx * wy);
  }
  return s;
}

inline Vec3 clamp_to_volume(const VoxelGrid& g, const Vec3& x) {
  return Vec3(std::clamp(x.x(), g.lo.x(), g.hi.x()), std::clamp(x.y(), g.lo.y(), g.hi.y()),
              std::clamp(x.z(), g.lo.z(), g.hi.z()));
}

inline double softplus(double x) {
  return x > 30.0 ? x : std::log1p(std::exp(x));
}

inline double softplus_derivative(double x) {
  return 1.0 / (1.0 + std::exp(-x));
}

inline double sigmoid(double x) {
  return 1.0 / (1.0 + std::exp(-x));
}

inline double sigmoid_inverse(double y) {
  require(y > 0 && y < 1, ErrorClass::numeric, "sigmoid_inverse: y outside (0,1)");
  return std::log(y / (1.0 - y));
}

}  // namespace poke::field

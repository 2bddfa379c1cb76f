// SPDX-License-Identifier: Apache-2.0
#pragma once

#include <algorithm>
#include <array>
#include <limits>
#include <vector>

#include "poke/core/se3.hpp"

namespace poke {

struct PointCloud {
  std::vector<Vec3> points;
  std::vector<Vec3> normals;  // empty or same size as points, unit length
  std::vector<Vec3> colors;   // empty or same size, RGB in [0,1]

  std::size_t size() const { return points.size(); }
  bool empty() const { return points.empty(); }

  PointCloud transformed(const Pose& p) const {
    PointCloud out;
    out.points.reserve(points.size());
    for (const auto& x : points) out.points.push_back(p.apply(x));
    out.normals.reserve(normals.size());
    for (const auto& n : normals) out.normals.push_back(p.rotation * n);
    out.colors = colors;
    return out;
  }
};

// Box with orthonormal axes; half_extents sorted so axis 0 is the longest side.
struct OrientedBoundingBox {
  Vec3 center = Vec3::Zero();
  Mat3 axes = Mat3::Identity();  // columns are the box axes
  Vec3 half_extents = Vec3::Ones();

  Vec3 corner(int i) const {
    Vec3 s((i & 1) ? 1 : -1, (i & 2) ? 1 : -1, (i & 4) ? 1 : -1);
    return center + axes * (s.cwiseProduct(half_extents));
  }

  bool contains(const Vec3& x, double margin = 0.0) const {
    Vec3 local = axes.transpose() * (x - center);
    return (local.cwiseAbs().array() <= half_extents.array() + margin).all();
  }

  OrientedBoundingBox transformed(const Pose& p) const {
    return OrientedBoundingBox{p.apply(center), p.rotation * axes, half_extents};
  }

  double diagonal() const { return 2.0 * half_extents.norm(); }
};

struct TriangleMesh {
  std::vector<Vec3> vertices;
  std::vector<std::array<int, 3>> triangles;
  std::vector<Vec3> vertex_colors;  // empty or same size as vertices

  bool empty() const { return triangles.empty(); }

  Vec3 face_normal(std::size_t f) const {
    const auto& t = triangles[f];
    Vec3 n = (vertices[t[1]] - vertices[t[0]]).cross(vertices[t[2]] - vertices[t[0]]);
    double len = n.norm();
    return len > 0 ? Vec3(n / len) : Vec3(0, 0, 1);
  }

  double face_area(std::size_t f) const {
    const auto& t = triangles[f];
    return 0.5 * (vertices[t[1]] - vertices[t[0]]).cross(vertices[t[2]] - vertices[t[0]]).norm();
  }

  TriangleMesh transformed(const Pose& p) const {
    TriangleMesh out = *this;
    for (auto& v : out.vertices) v = p.apply(v);
    return out;
  }
};

// PCA box fit: axes from the point covariance, extents from min/max in that
// frame, axes reordered so extents are descending. Planar clouds are allowed
// (thin boxes); rank < 2 is rejected.
inline OrientedBoundingBox fit_obb(const PointCloud& pc) {
  require(pc.size() >= 4, ErrorClass::geometry, "fit_obb: need at least 4 points");
  Vec3 mean = Vec3::Zero();
  for (const auto& p : pc.points) mean += p;
  mean /= double(pc.size());

  Mat3 cov = Mat3::Zero();
  for (const auto& p : pc.points) {
    Vec3 d = p - mean;
    cov += d * d.transpose();
  }
  cov /= double(pc.size());

  Eigen::SelfAdjointEigenSolver<Mat3> eig(cov);
  require(eig.info() == Eigen::Success, ErrorClass::numeric, "fit_obb: eigensolver failed");
  Vec3 evals = eig.eigenvalues();  // ascending
  double scale = std::max(evals.maxCoeff(), 1e-30);
  require(evals(1) > 1e-12 * scale, ErrorClass::geometry,
          "fit_obb: degenerate cloud (rank < 2)");

  Mat3 axes = eig.eigenvectors();
  Vec3 lo = Vec3::Constant(std::numeric_limits<double>::max());
  Vec3 hi = Vec3::Constant(std::numeric_limits<double>::lowest());
  for (const auto& p : pc.points) {
    Vec3 local = axes.transpose() * (p - mean);
    lo = lo.cwiseMin(local);
    hi = hi.cwiseMax(local);
  }
  Vec3 ext = (hi - lo) * 0.5;
  Vec3 mid = (hi + lo) * 0.5;

  std::array<int, 3> order = {0, 1, 2};
  std::sort(order.begin(), order.end(), [&](int a, int b) { return ext(a) > ext(b); });

  OrientedBoundingBox obb;
  obb.center = mean + axes * mid;
  for (int i = 0; i < 3; ++i) {
    obb.axes.col(i) = axes.col(order[i]);
    obb.half_extents(i) = std::max(ext(order[i]), 1e-9);
  }
  if (obb.axes.determinant() < 0) obb.axes.col(2) = -obb.axes.col(2);
  return obb;
}

}  // namespace poke

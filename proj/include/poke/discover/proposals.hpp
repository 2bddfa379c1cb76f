// SPDX-License-Identifier: Apache-2.0
#pragma once

#include <algorithm>
#include <cstdint>
#include <functional>
#include <map>
#include <numeric>

#include "poke/core/geometry.hpp"
#include "poke/data/frame.hpp"
#include "poke/sim/scene.hpp"

namespace poke::discover {

using nlohmann::json;

struct PlaneModel {
  Vec3 normal = Vec3::UnitZ();  // unit, oriented toward the camera
  double offset = 0.0;          // plane is normal . x = offset
  double inlier_threshold = 0.005;
  int inlier_count = 0;

  double height_above(const Vec3& x) const { return normal.dot(x) - offset; }
};

enum class ProposalStatus { candidate, confirmed, pruned };

inline std::string to_string(ProposalStatus s) {
  switch (s) {
    case ProposalStatus::candidate: return "candidate";
    case ProposalStatus::confirmed: return "confirmed";
    case ProposalStatus::pruned: return "pruned";
  }
  return "?";
}

struct ObjectProposal {
  int id = 0;
  PointCloud points;
  OrientedBoundingBox obb;
  ProposalStatus status = ProposalStatus::candidate;
  int pokes_done = 0;
  bool retried = false;
  bool unreachable = false;
};

// RANSAC plane fit over 3-point samples; deterministic under the seed. The
// returned normal points toward the camera position.
inline PlaneModel segment_plane(const PointCloud& pc, const Vec3& camera_position,
                                int iterations = 256, double inlier_threshold = 0.005,
                                std::uint64_t seed = 0) {
  const auto& pts = pc.points;
  require(pts.size() >= 3, ErrorClass::geometry, "segment_plane needs at least 3 points");
  auto rng = make_rng(seed, 0x9a5e);
  std::uniform_int_distribution<size_t> pick(0, pts.size() - 1);

  int best_count = -1;
  Vec3 best_n = Vec3::UnitZ();
  double best_d = 0.0;
  for (int it = 0; it < iterations; ++it) {
    size_t a = pick(rng), b = pick(rng), c = pick(rng);
    if (a == b || b == c || a == c) continue;
    Vec3 n = (pts[b] - pts[a]).cross(pts[c] - pts[a]);
    double len = n.norm();
    if (len < 1e-12) continue;
    n /= len;
    double d = n.dot(pts[a]);
    int count = 0;
    for (const auto& p : pts) count += std::abs(n.dot(p) - d) < inlier_threshold;
    if (count > best_count) {
      best_count = count;
      best_n = n;
      best_d = d;
    }
  }
  require(best_count >= static_cast<int>(pts.size() / 2), ErrorClass::geometry,
          "no dominant plane: best support " + std::to_string(best_count) + " of " +
              std::to_string(pts.size()));
  if (best_n.dot(camera_position) - best_d < 0) {
    best_n = -best_n;
    best_d = -best_d;
  }
  PlaneModel m;
  m.normal = best_n;
  m.offset = best_d;
  m.inlier_threshold = inlier_threshold;
  m.inlier_count = best_count;
  return m;
}

// Single-linkage Euclidean clustering on a uniform grid. Components with at
// least min_points become proposals, largest first (id 0 = largest).
inline std::vector<ObjectProposal> cluster_proposals(const PointCloud& pc,
                                                     double linkage_radius,
                                                     int min_points) {
  const auto& pts = pc.points;
  std::vector<ObjectProposal> out;
  if (pts.empty()) return out;

  std::vector<size_t> parent(pts.size());
  std::iota(parent.begin(), parent.end(), 0);
  std::function<size_t(size_t)> find = [&](size_t i) {
    while (parent[i] != i) {
      parent[i] = parent[parent[i]];
      i = parent[i];
    }
    return i;
  };
  auto unite = [&](size_t a, size_t b) {
    a = find(a);
    b = find(b);
    if (a != b) parent[std::max(a, b)] = std::min(a, b);
  };

  double cell = linkage_radius;
  auto cell_key = [&](const Vec3& p) {
    long x = static_cast<long>(std::floor(p.x() / cell));
    long y = static_cast<long>(std::floor(p.y() / cell));
    long z = static_cast<long>(std::floor(p.z() / cell));
    std::uint64_t h = 1469598103934665603ull;
    for (long v : {x, y, z}) {
      h ^= static_cast<std::uint64_t>(v) + 0x9e3779b97f4a7c15ull;
      h *= 1099511628211ull;
    }
    return h;
  };
  std::map<std::uint64_t, std::vector<size_t>> grid;
  for (size_t i = 0; i < pts.size(); ++i) grid[cell_key(pts[i])].push_back(i);

  double r2 = linkage_radius * linkage_radius;
  for (size_t i = 0; i < pts.size(); ++i) {
    for (int dx = -1; dx <= 1; ++dx)
      for (int dy = -1; dy <= 1; ++dy)
        for (int dz = -1; dz <= 1; ++dz) {
          Vec3 probe = pts[i] + Vec3(dx * cell, dy * cell, dz * cell);
          auto it = grid.find(cell_key(probe));
          if (it == grid.end()) continue;
          for (size_t j : it->second)
            if (j > i && (pts[j] - pts[i]).squaredNorm() <= r2) unite(i, j);
        }
  }

  std::map<size_t, std::vector<size_t>> comps;
  for (size_t i = 0; i < pts.size(); ++i) comps[find(i)].push_back(i);
  std::vector<std::vector<size_t>> big;
  for (auto& [root, members] : comps)
    if (static_cast<int>(members.size()) >= min_points) big.push_back(std::move(members));
  std::stable_sort(big.begin(), big.end(),
                   [](const auto& a, const auto& b) { return a.size() > b.size(); });

  for (size_t c = 0; c < big.size(); ++c) {
    ObjectProposal p;
    p.id = static_cast<int>(c);
    for (size_t i : big[c]) {
      p.points.points.push_back(pts[i]);
      if (!pc.colors.empty()) p.points.colors.push_back(pc.colors[i]);
    }
    p.obb = fit_obb(p.points);
    out.push_back(std::move(p));
  }
  return out;
}

// Visit order: increasing distance from the obb center to the plane's
// right-down corner (max x, min y over the inliers). Stable under ties.
inline std::vector<int> order_proposals(const std::vector<ObjectProposal>& proposals,
                                        const Vec3& corner) {
  std::vector<int> order(proposals.size());
  std::iota(order.begin(), order.end(), 0);
  std::stable_sort(order.begin(), order.end(), [&](int a, int b) {
    return (proposals[a].obb.center - corner).norm() <
           (proposals[b].obb.center - corner).norm();
  });
  return order;
}

inline Vec3 right_down_corner(const PointCloud& pc, const PlaneModel& plane) {
  double max_x = -1e9, min_y = 1e9;
  for (const auto& p : pc.points) {
    if (std::abs(plane.height_above(p)) > plane.inlier_threshold) continue;
    max_x = std::max(max_x, p.x());
    min_y = std::min(min_y, p.y());
  }
  require(max_x > -1e9, ErrorClass::geometry, "no plane inliers for corner");
  Vec3 c(max_x, min_y, 0);
  // drop the corner onto the plane
  c.z() = (plane.offset - plane.normal.x() * c.x() - plane.normal.y() * c.y()) /
          (std::abs(plane.normal.z()) > 1e-9 ? plane.normal.z() : 1.0);
  return c;
}

inline json obb_to_json(const OrientedBoundingBox& o) {
  json axes = json::array();
  for (int i = 0; i < 3; ++i)
    axes.push_back({o.axes(i, 0), o.axes(i, 1), o.axes(i, 2)});
  return json{{"center", sim::vec3_to_json(o.center)},
              {"axes", axes},
              {"half_extents", sim::vec3_to_json(o.half_extents)}};
}

inline OrientedBoundingBox obb_from_json(const json& j) {
  OrientedBoundingBox o;
  o.center = sim::vec3_from_json(j.at("center"));
  for (int i = 0; i < 3; ++i)
    for (int c = 0; c < 3; ++c) o.axes(i, c) = j.at("axes").at(i).at(c);
  o.half_extents = sim::vec3_from_json(j.at("half_extents"));
  return o;
}

// Depth image to world points; robot pixels and invalid depth skipped.
inline PointCloud cloud_from_frame(const data::FrameRecord& f, int stride = 1) {
  PointCloud pc;
  for (int y = 0; y < f.height(); y += stride)
    for (int x = 0; x < f.width(); x += stride) {
      double z = f.depth.at(x, y);
      if (z <= 0 || f.robot_at(x, y)) continue;
      pc.points.push_back(f.camera.backproject(x, y, z));
      pc.colors.push_back(Vec3(f.rgb.at(x, y, 0), f.rgb.at(x, y, 1), f.rgb.at(x, y, 2)));
    }
  return pc;
}

// Box fit for poke planning: plane-aligned, with the vertical extent taken
// from the plane up to the highest point. A bare PCA fit of the partial view
// is thin along the camera ray, and once pokes rotate it, its support along
// a new approach direction can undershoot the real object by over a
// centimeter, putting planned pusher starts inside the object. Anchoring one
// axis to the plane normal keeps horizontal supports silhouette-accurate.
inline OrientedBoundingBox completed_obb(const PointCloud& pc, const PlaneModel& plane) {
  require(pc.size() >= 4, ErrorClass::geometry, "completed_obb: need at least 4 points");
  const Vec3 n = plane.normal;
  Vec3 ref = std::abs(n.x()) < 0.9 ? Vec3::UnitX() : Vec3::UnitY();
  Vec3 u = (ref - n * ref.dot(n)).normalized();
  Vec3 v = n.cross(u);

  double ma = 0, mb = 0;
  for (const auto& p : pc.points) {
    ma += u.dot(p);
    mb += v.dot(p);
  }
  ma /= double(pc.size());
  mb /= double(pc.size());
  double caa = 0, cab = 0, cbb = 0;
  for (const auto& p : pc.points) {
    double da = u.dot(p) - ma, db = v.dot(p) - mb;
    caa += da * da;
    cab += da * db;
    cbb += db * db;
  }
  double theta = 0.5 * std::atan2(2.0 * cab, caa - cbb);
  Vec3 e0 = std::cos(theta) * u + std::sin(theta) * v;
  Vec3 e1 = -std::sin(theta) * u + std::cos(theta) * v;

  double hmax = 0;
  for (const auto& p : pc.points) hmax = std::max(hmax, plane.height_above(p));

  // The far side of the silhouette is occluded from an elevated camera, so
  // raw supports undershoot there. The top of a convex object resting on the
  // plane is visible and lies on its vertical axis; mirroring each side
  // support about the top-slab centroid bounds the hidden extent.
  Vec3 top = Vec3::Zero();
  int top_count = 0;
  for (const auto& p : pc.points) {
    if (plane.height_above(p) < hmax - plane.inlier_threshold) continue;
    top += p;
    ++top_count;
  }
  top /= double(top_count);

  double ha = 0, hb = 0;
  for (const auto& p : pc.points) {
    ha = std::max(ha, std::abs(e0.dot(p - top)));
    hb = std::max(hb, std::abs(e1.dot(p - top)));
  }

  Vec3 center = e0.dot(top) * e0 + e1.dot(top) * e1 + (plane.offset + 0.5 * hmax) * n;
  std::array<Vec3, 3> dirs = {e0, e1, n};
  Vec3 ext(ha, hb, 0.5 * hmax);
  std::array<int, 3> order = {0, 1, 2};
  std::sort(order.begin(), order.end(), [&](int a, int b) { return ext(a) > ext(b); });

  OrientedBoundingBox obb;
  obb.center = center;
  for (int i = 0; i < 3; ++i) {
    obb.axes.col(i) = dirs[order[i]];
    obb.half_extents(i) = std::max(ext(order[i]), 1e-9);
  }
  if (obb.axes.determinant() < 0) obb.axes.col(2) = -obb.axes.col(2);
  return obb;
}

inline PointCloud points_above_plane(const PointCloud& pc, const PlaneModel& plane) {
  PointCloud out;
  for (size_t i = 0; i < pc.points.size(); ++i) {
    if (plane.height_above(pc.points[i]) < plane.inlier_threshold) continue;
    out.points.push_back(pc.points[i]);
    if (!pc.colors.empty()) out.colors.push_back(pc.colors[i]);
  }
  return out;
}

}  // namespace poke::discover

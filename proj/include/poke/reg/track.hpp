// SPDX-License-Identifier: Apache-2.0
#pragma once

#include <array>

#include "poke/reg/registration.hpp"
#include "poke/sim/scene.hpp"

namespace poke::reg {

using nlohmann::json;

struct TrackOptions {
  double flow_threshold = 1.0;   // pixels; below this a pixel counts as static
  int min_correspondences = 50;  // fewer means the pair is not trackable
  double plane_threshold = 0.005;
  double obb_inflate = 0.02;       // target-cloud gate around the moved box, meters
  double max_displacement = 0.05;  // pairs moving farther are depth-mixing artifacts
  int mask_erosion = 1;            // px; strips depth-mixing silhouette stencils
  int ls_trim_rounds = 4;          // residual-trimmed least-squares refits
  double ls_trim_scale = 2.5;      // keep pairs under scale * median residual
  double ls_residual_floor = 1e-4; // m; never trim below this residual
  double icp_min_rms_drop = 0.3;   // accept ICP only on this relative improvement
  double icp_rescue_floor = 1.5;   // attempt ICP only above this many pixel footprints
  IcpOptions icp;
};

// Image-space bounding rectangle of the box corners, clipped to the image;
// {x0,y0,x1,y1} inclusive. x0 > x1 when the box projects off screen.
inline std::array<int, 4> obb_image_rect(const OrientedBoundingBox& obb,
                                         const PinholeCamera& cam, double pad_px = 2.0) {
  double u0 = 1e30, v0 = 1e30, u1 = -1e30, v1 = -1e30;
  for (int i = 0; i < 8; ++i) {
    Vec3 uvz = cam.project(obb.corner(i));
    if (uvz.z() <= 0) continue;
    u0 = std::min(u0, uvz.x());
    v0 = std::min(v0, uvz.y());
    u1 = std::max(u1, uvz.x());
    v1 = std::max(v1, uvz.y());
  }
  int x0 = std::max(0, static_cast<int>(std::floor(u0 - pad_px)));
  int y0 = std::max(0, static_cast<int>(std::floor(v0 - pad_px)));
  int x1 = std::min(cam.width - 1, static_cast<int>(std::ceil(u1 + pad_px)));
  int y1 = std::min(cam.height - 1, static_cast<int>(std::ceil(v1 + pad_px)));
  return {x0, y0, x1, y1};
}

// 255 where the pixel lies in the box's image rectangle, moves by more than
// the flow threshold, is not covered by the pusher, and has valid depth.
inline ImageU8 moving_mask(const data::FrameRecord& a, const OrientedBoundingBox& obb,
                           double flow_threshold) {
  ImageU8 m(a.width(), a.height(), 1);
  auto r = obb_image_rect(obb, a.camera);
  for (int y = r[1]; y <= r[3]; ++y)
    for (int x = r[0]; x <= r[2]; ++x) {
      if (a.robot_at(x, y) || a.depth.at(x, y) <= 0) continue;
      double du = a.flow_to_next.at(x, y, 0);
      double dv = a.flow_to_next.at(x, y, 1);
      if (du * du + dv * dv > flow_threshold * flow_threshold) m.at(x, y) = 255;
    }
  return m;
}

inline ImageU8 erode_mask(const ImageU8& m, int radius) {
  if (radius <= 0) return m;
  ImageU8 out(m.width, m.height, 1);
  for (int y = 0; y < m.height; ++y)
    for (int x = 0; x < m.width; ++x) {
      bool keep = m.at(x, y) != 0;
      for (int dy = -radius; dy <= radius && keep; ++dy)
        for (int dx = -radius; dx <= radius && keep; ++dx) {
          int px = x + dx, py = y + dy;
          if (px < 0 || py < 0 || px >= m.width || py >= m.height || m.at(px, py) == 0)
            keep = false;
        }
      if (keep) out.at(x, y) = 255;
    }
  return out;
}

// Least squares with residual-trimmed refits: outliers from depth folds and
// occlusion boundaries are cut at a multiple of the median residual.
inline Pose trimmed_least_squares(CorrespondenceSet c, const TrackOptions& opt) {
  Pose cur = rigid_least_squares(c);
  for (int round = 0; round < opt.ls_trim_rounds; ++round) {
    std::vector<double> res(c.size());
    for (size_t i = 0; i < c.size(); ++i)
      res[i] = (c.target[i] - cur.apply(c.source[i])).norm();
    std::vector<double> sorted = res;
    std::nth_element(sorted.begin(), sorted.begin() + sorted.size() / 2, sorted.end());
    double cut = std::max(opt.ls_trim_scale * sorted[sorted.size() / 2],
                          opt.ls_residual_floor);
    CorrespondenceSet kept;
    for (size_t i = 0; i < c.size(); ++i)
      if (res[i] < cut) {
        kept.source.push_back(c.source[i]);
        kept.target.push_back(c.target[i]);
      }
    if (kept.size() < 10 || kept.size() == c.size()) break;
    try {
      cur = rigid_least_squares(kept);
    } catch (const Error&) {
      break;
    }
    c = std::move(kept);
  }
  return cur;
}

struct PairTrack {
  bool ok = false;
  Pose motion;  // world points at frame a -> world points at frame b
  int correspondences = 0;
  bool icp_applied = false;
  ImageU8 mask_a;  // moving pixels used as evidence, frame a
};

// Estimates the rigid motion of the object inside obb_a between consecutive
// frames: flow correspondences seed a least-squares fit, then trimmed ICP
// against frame b's above-plane points near the moved box refines it.
inline PairTrack track_pair(const data::FrameRecord& a, const data::FrameRecord& b,
                            const OrientedBoundingBox& obb_a, const Vec3& plane_normal,
                            double plane_offset, const TrackOptions& opt = {}) {
  PairTrack out;
  out.mask_a = moving_mask(a, obb_a, opt.flow_threshold);
  ImageU8 eroded = erode_mask(out.mask_a, opt.mask_erosion);

  CorrespondenceSet corr;
  try {
    CorrespondenceSet raw = flow_to_correspondences(a, b, eroded);
    for (size_t i = 0; i < raw.size(); ++i) {
      if ((raw.target[i] - raw.source[i]).norm() > opt.max_displacement) continue;
      corr.source.push_back(raw.source[i]);
      corr.target.push_back(raw.target[i]);
    }
  } catch (const Error&) {
    return out;
  }
  out.correspondences = static_cast<int>(corr.size());
  if (out.correspondences < opt.min_correspondences) return out;

  Pose init;
  try {
    init = trimmed_least_squares(corr, opt);
  } catch (const Error&) {
    return out;
  }

  OrientedBoundingBox moved = obb_a.transformed(init);
  PointCloud target;
  for (int y = 0; y < b.height(); ++y)
    for (int x = 0; x < b.width(); ++x) {
      double z = b.depth.at(x, y);
      if (z <= 0 || b.robot_at(x, y)) continue;
      Vec3 p = b.camera.backproject(x, y, z);
      if (plane_normal.dot(p) - plane_offset < opt.plane_threshold) continue;
      if (!moved.contains(p, opt.obb_inflate)) continue;
      target.points.push_back(p);
    }

  out.motion = init;
  out.ok = true;
  if (target.points.size() < 10) return out;

  // ICP exists to rescue a coarse flow fit. Between two pixel-grid samplings
  // of the same surface the nearest-neighbor RMS has a floor near the pixel
  // footprint z/f, and ICP can always sink below it by locking onto the grid
  // while degrading the pose, so a relative RMS drop alone cannot gate it.
  // Refinement is attempted only when the init RMS sits above that floor.
  PointCloud source;
  source.points = corr.source;
  GridNN nn(target.points);
  auto trimmed_rms = [&](const Pose& p) {
    std::vector<double> d2(source.points.size());
    for (size_t i = 0; i < source.points.size(); ++i) {
      Vec3 m = p.apply(source.points[i]);
      d2[i] = (target.points[nn.nearest(m)] - m).squaredNorm();
    }
    size_t keep = std::max<size_t>(3, static_cast<size_t>(d2.size() * opt.icp.trim_ratio));
    keep = std::min(keep, d2.size());
    std::nth_element(d2.begin(), d2.begin() + keep - 1, d2.end());
    double sum = 0.0;
    for (size_t i = 0; i < keep; ++i) sum += d2[i];
    return std::sqrt(sum / keep);
  };
  double mean_depth = 0.0;
  for (const Vec3& p : source.points) mean_depth += a.camera.project(p).z();
  mean_depth /= static_cast<double>(source.points.size());
  double footprint = mean_depth / std::min(a.camera.fx, a.camera.fy);
  double rms_init = trimmed_rms(init);
  if (rms_init > opt.icp_rescue_floor * footprint) {
    Pose refined = icp_refine(source, target, init, opt.icp);
    if (trimmed_rms(refined) < (1.0 - opt.icp_min_rms_drop) * rms_init) {
      out.motion = refined;
      out.icp_applied = true;
    }
  }
  return out;
}

// Forward-warps a binary mask along frame a's flow, splatting each moving
// pixel onto the four pixels around its flowed position.
inline ImageU8 warp_mask_forward(const ImageU8& mask, const data::FrameRecord& a) {
  ImageU8 out(mask.width, mask.height, 1);
  for (int y = 0; y < mask.height; ++y)
    for (int x = 0; x < mask.width; ++x) {
      if (mask.at(x, y) == 0) continue;
      double tu = x + a.flow_to_next.at(x, y, 0);
      double tv = y + a.flow_to_next.at(x, y, 1);
      int u0 = static_cast<int>(std::floor(tu));
      int v0 = static_cast<int>(std::floor(tv));
      for (int c = 0; c < 4; ++c) {
        int px = u0 + (c & 1), py = v0 + (c >> 1);
        if (px >= 0 && py >= 0 && px < out.width && py < out.height) out.at(px, py) = 255;
      }
    }
  return out;
}

}  // namespace poke::reg

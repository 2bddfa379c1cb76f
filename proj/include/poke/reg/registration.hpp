// SPDX-License-Identifier: Apache-2.0
#pragma once

#include <algorithm>
#include <map>

#include "poke/core/geometry.hpp"
#include "poke/data/frame.hpp"

namespace poke::reg {

struct CorrespondenceSet {
  std::vector<Vec3> source;
  std::vector<Vec3> target;
  std::vector<double> weights;  // empty means uniform

  size_t size() const { return source.size(); }
};

// Pairs masked pixels of frame a with their flow targets in frame b.
// Source depth is read at the integer pixel, target depth bilinearly at the
// flowed position; pairs are dropped when the target leaves the image, any
// bilinear neighbor has invalid depth, or the pusher covers either end.
inline CorrespondenceSet flow_to_correspondences(const data::FrameRecord& a,
                                                 const data::FrameRecord& b,
                                                 const ImageU8& mask) {
  require(mask.width == a.rgb.width && mask.height == a.rgb.height, ErrorClass::data,
          "mask size mismatch");
  CorrespondenceSet out;
  for (int y = 0; y < a.height(); ++y)
    for (int x = 0; x < a.width(); ++x) {
      if (mask.at(x, y) == 0 || a.robot_at(x, y)) continue;
      double z = a.depth.at(x, y);
      if (z <= 0) continue;
      double tu = x + a.flow_to_next.at(x, y, 0);
      double tv = y + a.flow_to_next.at(x, y, 1);
      int u0 = static_cast<int>(std::floor(tu));
      int v0 = static_cast<int>(std::floor(tv));
      if (u0 < 0 || v0 < 0 || u0 + 1 >= b.width() || v0 + 1 >= b.height()) continue;
      double fu = tu - u0, fv = tv - v0;
      double zt = 0.0;
      bool ok = true;
      for (int c = 0; c < 4; ++c) {
        int px = u0 + (c & 1), py = v0 + (c >> 1);
        double d = b.depth.at(px, py);
        if (d <= 0 || b.robot_at(px, py)) {
          ok = false;
          break;
        }
        zt += d * ((c & 1) ? fu : 1 - fu) * ((c >> 1) ? fv : 1 - fv);
      }
      if (!ok) continue;
      out.source.push_back(a.camera.backproject(x, y, z));
      out.target.push_back(b.camera.backproject(tu, tv, zt));
    }
  require(out.size() >= 3, ErrorClass::data,
          "insufficient correspondences: " + std::to_string(out.size()));
  return out;
}

// Weighted Kabsch/Umeyama without scale: minimizes sum w |R s + t - g|^2.
inline Pose rigid_least_squares(const CorrespondenceSet& c) {
  require(c.size() >= 3, ErrorClass::geometry,
          "rigid_least_squares needs at least 3 pairs");
  double wsum = 0.0;
  Vec3 sbar = Vec3::Zero(), gbar = Vec3::Zero();
  auto weight = [&](size_t i) { return c.weights.empty() ? 1.0 : c.weights[i]; };
  for (size_t i = 0; i < c.size(); ++i) {
    double w = weight(i);
    wsum += w;
    sbar += w * c.source[i];
    gbar += w * c.target[i];
  }
  require(wsum > 0, ErrorClass::geometry, "rigid_least_squares: zero total weight");
  sbar /= wsum;
  gbar /= wsum;

  Mat3 m = Mat3::Zero();  // sum w (g - gbar)(s - sbar)^T
  double scale = 0.0;
  for (size_t i = 0; i < c.size(); ++i) {
    double w = weight(i);
    m += w * (c.target[i] - gbar) * (c.source[i] - sbar).transpose();
    scale += w * (c.source[i] - sbar).squaredNorm();
  }
  Eigen::JacobiSVD<Mat3> svd(m, Eigen::ComputeFullU | Eigen::ComputeFullV);
  Vec3 sv = svd.singularValues();
  require(sv(1) > 1e-9 * std::max(sv(0), scale / wsum + 1e-30), ErrorClass::geometry,
          "rigid_least_squares: degenerate (collinear) configuration");
  Mat3 s = Mat3::Identity();
  if ((svd.matrixU() * svd.matrixV().transpose()).determinant() < 0) s(2, 2) = -1;
  Pose p;
  p.rotation = svd.matrixU() * s * svd.matrixV().transpose();
  p.translation = gbar - p.rotation * sbar;
  return p;
}

// Uniform-grid exact nearest neighbor: expanding Chebyshev shells, stopping
// once the next shell cannot beat the best distance found.
class GridNN {
 public:
  explicit GridNN(const std::vector<Vec3>& points, double cell = 0.0)
      : points_(points) {
    require(!points.empty(), ErrorClass::geometry, "GridNN: empty point set");
    Vec3 lo = points[0], hi = points[0];
    for (const auto& p : points) {
      lo = lo.cwiseMin(p);
      hi = hi.cwiseMax(p);
    }
    double diag = (hi - lo).norm();
    cell_ = cell > 0 ? cell
                     : std::max(1e-6, diag / std::max(1.0, std::cbrt(double(points.size()))));
    for (size_t i = 0; i < points.size(); ++i) grid_[key(points[i])].push_back(i);
  }

  int nearest(const Vec3& q) const {
    std::array<long, 3> c = cell_of(q);
    int best = -1;
    double best_d2 = std::numeric_limits<double>::max();
    for (long ring = 0;; ++ring) {
      if (best >= 0) {
        double safe = (ring - 1) * cell_;
        if (safe > 0 && safe * safe > best_d2) break;
      }
      bool any_cell = scan_ring(q, c, ring, best, best_d2);
      // bounded expansion: once the ring is far beyond the cloud, fall back
      if (!any_cell && ring > max_ring_) {
        if (best >= 0) break;
        for (size_t i = 0; i < points_.size(); ++i) {
          double d2 = (points_[i] - q).squaredNorm();
          if (d2 < best_d2) {
            best_d2 = d2;
            best = static_cast<int>(i);
          }
        }
        break;
      }
    }
    return best;
  }

  double cell_size() const { return cell_; }

 private:
  std::array<long, 3> cell_of(const Vec3& p) const {
    return {static_cast<long>(std::floor(p.x() / cell_)),
            static_cast<long>(std::floor(p.y() / cell_)),
            static_cast<long>(std::floor(p.z() / cell_))};
  }
  std::uint64_t key(const Vec3& p) const {
    auto c = cell_of(p);
    return hash_cell(c[0], c[1], c[2]);
  }
  static std::uint64_t hash_cell(long x, long y, long z) {
    std::uint64_t h = 1469598103934665603ull;
    for (long v : {x, y, z}) {
      h ^= static_cast<std::uint64_t>(v) + 0x9e3779b97f4a7c15ull;
      h *= 1099511628211ull;
    }
    return h;
  }

  bool scan_ring(const Vec3& q, const std::array<long, 3>& c, long ring, int& best,
                 double& best_d2) const {
    bool any = false;
    for (long dx = -ring; dx <= ring; ++dx)
      for (long dy = -ring; dy <= ring; ++dy)
        for (long dz = -ring; dz <= ring; ++dz) {
          if (std::max({std::abs(dx), std::abs(dy), std::abs(dz)}) != ring) continue;
          auto it = grid_.find(hash_cell(c[0] + dx, c[1] + dy, c[2] + dz));
          if (it == grid_.end()) continue;
          any = true;
          for (size_t i : it->second) {
            double d2 = (points_[i] - q).squaredNorm();
            if (d2 < best_d2) {
              best_d2 = d2;
              best = static_cast<int>(i);
            }
          }
        }
    return any;
  }

  const std::vector<Vec3>& points_;
  double cell_ = 0.01;
  long max_ring_ = 64;
  std::map<std::uint64_t, std::vector<size_t>> grid_;
};

struct IcpOptions {
  int max_iters = 50;
  double tolerance = 1e-7;  // RMS improvement, meters
  double trim_ratio = 0.9;
};

// Point-to-point trimmed ICP. Returns the pose with the lowest trimmed RMS
// seen, so the result is never worse than init under that metric.
inline Pose icp_refine(const PointCloud& source, const PointCloud& target,
                       const Pose& init, const IcpOptions& opt = {}) {
  require(!source.points.empty() && !target.points.empty(), ErrorClass::geometry,
          "icp_refine: empty cloud");
  GridNN nn(target.points);

  auto trimmed_pairs = [&](const Pose& p, CorrespondenceSet& pairs, double& rms) {
    std::vector<std::pair<double, size_t>> d2;
    std::vector<int> match(source.points.size());
    d2.reserve(source.points.size());
    for (size_t i = 0; i < source.points.size(); ++i) {
      Vec3 moved = p.apply(source.points[i]);
      int j = nn.nearest(moved);
      match[i] = j;
      d2.push_back({(target.points[j] - moved).squaredNorm(), i});
    }
    size_t keep = std::max<size_t>(3, static_cast<size_t>(d2.size() * opt.trim_ratio));
    keep = std::min(keep, d2.size());
    std::nth_element(d2.begin(), d2.begin() + keep - 1, d2.end());
    d2.resize(keep);
    std::sort(d2.begin(), d2.end(),
              [](const auto& a, const auto& b) { return a.second < b.second; });
    pairs = {};
    double sum = 0.0;
    for (const auto& [dd, i] : d2) {
      pairs.source.push_back(source.points[i]);
      pairs.target.push_back(target.points[match[i]]);
      sum += dd;
    }
    rms = std::sqrt(sum / keep);
  };

  Pose best = init, cur = init;
  CorrespondenceSet pairs;
  double best_rms;
  trimmed_pairs(cur, pairs, best_rms);
  double prev_rms = best_rms;
  for (int it = 0; it < opt.max_iters; ++it) {
    Pose solved;
    try {
      solved = rigid_least_squares(pairs);
    } catch (const Error&) {
      break;  // degenerate trim set; keep the best pose found
    }
    cur = solved;
    double rms;
    trimmed_pairs(cur, pairs, rms);
    if (rms < best_rms) {
      best_rms = rms;
      best = cur;
    }
    if (prev_rms - rms < opt.tolerance) break;
    prev_rms = rms;
  }
  return best;
}

}  // namespace poke::reg

// SPDX-License-Identifier: Apache-2.0
#pragma once

#include "poke/discover/proposals.hpp"
#include "poke/reg/track.hpp"
#include "poke/sim/push.hpp"

namespace poke::discover {

struct PlanOptions {
  double push_length = 0.04;      // m of intended object travel
  double tilt_deg = 15.0;         // deviation from the side normal
  double tip_clearance = 0.004;   // pusher tip above the plane
  double start_slack = 0.011;     // gap between pusher surface and the face
  double obstacle_margin = 0.005; // extra clearance around other proposals
  int duration_frames = 10;
  std::string angle_sign_rule = "clockwise";  // or "toward_center"
};

struct PokePlan {
  int proposal_id = 0;
  Vec3 p1 = Vec3::Zero(), p2 = Vec3::Zero();  // endpoints of the chosen long side
  double approach_angle_deg = 90.0;           // r, between push direction and p1p2
  sim::PokeCommand command;
};

namespace detail {

// Horizontal footprint of an obb: the support rectangle spanned by the
// horizontalized longest axis and its in-plane perpendicular.
struct Footprint {
  Vec2 center;
  Vec2 long_dir, short_dir;  // unit, short_dir = rot90(long_dir)
  double half_long = 0.0, half_short = 0.0;
};

inline double support2(const OrientedBoundingBox& o, const Vec2& d) {
  double s = 0.0;
  for (int i = 0; i < 3; ++i)
    s += o.half_extents(i) * std::abs(d.x() * o.axes(0, i) + d.y() * o.axes(1, i));
  return s;
}

inline Footprint footprint(const OrientedBoundingBox& o) {
  Footprint f;
  f.center = Vec2(o.center.x(), o.center.y());
  Vec2 best = Vec2(1, 0);
  double best_len = -1.0;
  for (int i = 0; i < 3; ++i) {
    Vec2 proj(o.axes(0, i), o.axes(1, i));
    double len = o.half_extents(i) * proj.norm();
    if (len > best_len && proj.norm() > 1e-6) {
      best_len = len;
      best = proj.normalized();
    }
  }
  f.long_dir = best;
  f.short_dir = Vec2(-best.y(), best.x());
  f.half_long = support2(o, f.long_dir);
  f.half_short = support2(o, f.short_dir);
  if (f.half_long < f.half_short) {
    std::swap(f.half_long, f.half_short);
    f.long_dir = f.short_dir;
    f.short_dir = Vec2(-f.long_dir.y(), f.long_dir.x());
  }
  return f;
}

inline double cross2(const Vec2& a, const Vec2& b) { return a.x() * b.y() - a.y() * b.x(); }

inline double point_segment_dist2(const Vec2& p, const Vec2& a, const Vec2& b) {
  Vec2 ab = b - a;
  double t = ab.squaredNorm() > 0 ? (p - a).dot(ab) / ab.squaredNorm() : 0.0;
  t = std::clamp(t, 0.0, 1.0);
  return (p - (a + t * ab)).squaredNorm();
}

inline bool segments_intersect(const Vec2& a0, const Vec2& a1, const Vec2& b0,
                               const Vec2& b1) {
  auto side = [](const Vec2& p, const Vec2& q, const Vec2& r) {
    return cross2(q - p, r - p);
  };
  double d1 = side(b0, b1, a0), d2 = side(b0, b1, a1);
  double d3 = side(a0, a1, b0), d4 = side(a0, a1, b1);
  return ((d1 > 0) != (d2 > 0)) && ((d3 > 0) != (d4 > 0));
}

inline double segment_segment_dist(const Vec2& a0, const Vec2& a1, const Vec2& b0,
                                   const Vec2& b1) {
  if (segments_intersect(a0, a1, b0, b1)) return 0.0;
  double d2 = std::min({point_segment_dist2(a0, b0, b1), point_segment_dist2(a1, b0, b1),
                        point_segment_dist2(b0, a0, a1), point_segment_dist2(b1, a0, a1)});
  return std::sqrt(d2);
}

// Distance from a 2D segment to an obb's support rectangle; 0 if they touch.
inline double segment_rect_dist(const Vec2& s0, const Vec2& s1,
                                const OrientedBoundingBox& o) {
  Footprint f = footprint(o);
  std::array<Vec2, 4> c = {
      f.center + f.long_dir * f.half_long + f.short_dir * f.half_short,
      f.center - f.long_dir * f.half_long + f.short_dir * f.half_short,
      f.center - f.long_dir * f.half_long - f.short_dir * f.half_short,
      f.center + f.long_dir * f.half_long - f.short_dir * f.half_short};
  auto inside = [&](const Vec2& p) {
    Vec2 d = p - f.center;
    return std::abs(d.dot(f.long_dir)) <= f.half_long &&
           std::abs(d.dot(f.short_dir)) <= f.half_short;
  };
  if (inside(s0) || inside(s1)) return 0.0;
  double best = 1e30;
  for (int i = 0; i < 4; ++i)
    best = std::min(best, segment_segment_dist(s0, s1, c[i], c[(i + 1) % 4]));
  return best;
}

// Entry parameter of ray p + t d into the rectangle inflated by `inflate`,
// or a negative value when the ray misses it.
inline double ray_rect_entry(const Vec2& p, const Vec2& d, const Footprint& f,
                             double inflate) {
  double t0 = 0.0, t1 = 1e30;
  Vec2 rel = p - f.center;
  const Vec2 dirs[2] = {f.long_dir, f.short_dir};
  const double half[2] = {f.half_long + inflate, f.half_short + inflate};
  for (int i = 0; i < 2; ++i) {
    double o = rel.dot(dirs[i]);
    double v = d.dot(dirs[i]);
    if (std::abs(v) < 1e-12) {
      if (std::abs(o) > half[i]) return -1.0;
      continue;
    }
    double ta = (-half[i] - o) / v;
    double tb = (half[i] - o) / v;
    if (ta > tb) std::swap(ta, tb);
    t0 = std::max(t0, ta);
    t1 = std::min(t1, tb);
    if (t0 > t1) return -1.0;
  }
  return t0;
}

}  // namespace detail

// Plans one poke against the proposal's current obb. The push approaches a
// long side at 90 degrees +- tilt with the sign that rotates the object
// clockwise when seen from above; the side preference alternates with
// poke_index, and a blocked side flips to the opposite one.
inline PokePlan plan_poke(const ObjectProposal& p, int poke_index, const PlaneModel& plane,
                          double pusher_radius, double pusher_half_length,
                          const std::vector<OrientedBoundingBox>& obstacles,
                          const PlanOptions& opt = {}, double length_scale = 1.0) {
  require(p.status != ProposalStatus::pruned, ErrorClass::geometry,
          "plan_poke: proposal is pruned");
  detail::Footprint f = detail::footprint(p.obb);
  double tilt = opt.tilt_deg * M_PI / 180.0;
  double offset = f.half_short + pusher_radius + opt.start_slack;
  double z = plane.offset + opt.tip_clearance + pusher_half_length + pusher_radius;

  int first_side = (poke_index % 2 == 0) ? 1 : -1;
  for (int side : {first_side, -first_side}) {
    Vec2 start2 = f.center + side * offset * f.short_dir;
    Vec2 base = -side * f.short_dir;
    for (int s : {1, -1}) {
      double cs = std::cos(s * tilt), sn = std::sin(s * tilt);
      Vec2 u(cs * base.x() - sn * base.y(), sn * base.x() + cs * base.y());
      double t_face = detail::ray_rect_entry(start2, u, f, pusher_radius);
      if (t_face < 0) continue;
      Vec2 q = start2 + t_face * u;
      Vec2 lever = q - f.center;
      bool pick;
      if (opt.angle_sign_rule == "toward_center") {
        pick = (f.center - q).dot(u + side * f.short_dir) > 0;
      } else {
        pick = detail::cross2(lever, u) < -1e-12;  // clockwise from above
      }
      if (!pick) continue;

      Vec2 end2 = start2 + opt.push_length * length_scale * u;
      bool blocked = false;
      for (const auto& ob : obstacles)
        if (detail::segment_rect_dist(start2, end2, ob) <
            pusher_radius + opt.obstacle_margin) {
          blocked = true;
          break;
        }
      if (blocked) break;  // try the other side

      PokePlan plan;
      plan.proposal_id = p.id;
      Vec2 side_mid = f.center + side * f.half_short * f.short_dir;
      Vec2 e1 = side_mid - f.half_long * f.long_dir;
      Vec2 e2 = side_mid + f.half_long * f.long_dir;
      plan.p1 = Vec3(e1.x(), e1.y(), p.obb.center.z());
      plan.p2 = Vec3(e2.x(), e2.y(), p.obb.center.z());
      plan.approach_angle_deg =
          std::acos(std::clamp(u.dot(f.long_dir), -1.0, 1.0)) * 180.0 / M_PI;
      plan.command.start = Vec3(start2.x(), start2.y(), z);
      plan.command.end = Vec3(end2.x(), end2.y(), z);
      plan.command.duration_frames = opt.duration_frames;
      return plan;
    }
  }
  fail(ErrorClass::geometry,
       "plan_poke: no collision-free clockwise plan for proposal " + std::to_string(p.id));
}

// Fraction of the proposal's image-rectangle pixels whose flow exceeds the
// threshold; robot-covered and depthless pixels are left out of both counts.
inline double moving_fraction(const data::FrameRecord& a, const OrientedBoundingBox& obb,
                              double flow_threshold) {
  auto r = reg::obb_image_rect(obb, a.camera);
  int moving = 0, total = 0;
  for (int y = r[1]; y <= r[3]; ++y)
    for (int x = r[0]; x <= r[2]; ++x) {
      if (a.robot_at(x, y) || a.depth.at(x, y) <= 0) continue;
      ++total;
      double du = a.flow_to_next.at(x, y, 0);
      double dv = a.flow_to_next.at(x, y, 1);
      if (du * du + dv * dv > flow_threshold * flow_threshold) ++moving;
    }
  return total > 0 ? static_cast<double>(moving) / total : 0.0;
}

struct PokeTrackResult {
  OrientedBoundingBox obb;
  std::vector<Pose> motions;    // one per consecutive frame pair
  std::vector<bool> pair_ok;    // false = too few correspondences, obb kept
  int warnings = 0;
};

// Tracks the obb across one poke: per consecutive pair, foreground flow
// correspondences give a least-squares motion refined by ICP, and the obb is
// advanced by each pair's motion in order. seq needs flow_to_next filled.
inline PokeTrackResult update_obb(const OrientedBoundingBox& obb0,
                                  const std::vector<data::FrameRecord>& seq,
                                  const PlaneModel& plane,
                                  const reg::TrackOptions& topt = {}) {
  PokeTrackResult out;
  out.obb = obb0;
  for (size_t i = 0; i + 1 < seq.size(); ++i) {
    reg::PairTrack t =
        reg::track_pair(seq[i], seq[i + 1], out.obb, plane.normal, plane.offset, topt);
    out.pair_ok.push_back(t.ok);
    if (!t.ok) {
      ++out.warnings;
      out.motions.push_back(Pose{});
      continue;
    }
    out.motions.push_back(t.motion);
    out.obb = out.obb.transformed(t.motion);
  }
  return out;
}

}  // namespace poke::discover

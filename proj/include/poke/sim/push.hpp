// SPDX-License-Identifier: Apache-2.0
#pragma once

#include "poke/sim/scene.hpp"

namespace poke::sim {

struct PokeCommand {
  Vec3 start = Vec3::Zero();
  Vec3 end = Vec3::Zero();
  int duration_frames = 10;
};

struct PokeResult {
  std::vector<std::vector<Pose>> frame_poses;  // per frame, all object poses
  bool contacted = false;
};

namespace detail {

// Deepest penetration of the pusher capsule into object k; returns
// (penetration depth, axis point of deepest contact).
inline std::pair<double, Vec3> pusher_penetration(const SceneState& s, int k) {
  const int samples = 17;
  double best = -1e9;
  Vec3 at = s.pusher_center;
  for (int i = 0; i < samples; ++i) {
    double z = s.pusher_center.z() +
               s.cfg.pusher_half_length * (2.0 * i / (samples - 1) - 1.0);
    Vec3 p(s.pusher_center.x(), s.pusher_center.y(), z);
    double pen = s.cfg.pusher_radius - s.object_sdf(k, p);
    if (pen > best) {
      best = pen;
      at = p;
    }
  }
  return {best, at};
}

// Rotational compliance proxy: second moment of a uniform slab with the
// object's horizontal extents.
inline double yaw_compliance(const SceneState& s, int k) {
  const Shape& shape = s.cfg.objects[k].shape;
  const Mat3& R = s.poses[k].rotation;
  double hx = shape.support(R.transpose() * Vec3(1, 0, 0));
  double hy = shape.support(R.transpose() * Vec3(0, 1, 0));
  return (hx * hx + hy * hy) / 3.0;
}

// One micro-step: translate along u and yaw about the vertical axis through
// the centroid, sign from the contact lever arm. Keeps motion horizontal so
// resting objects stay resting.
inline void push_step(SceneState& s, int k, const Vec3& u, const Vec3& contact_axis_pt,
                      double step) {
  double d = s.object_sdf(k, contact_axis_pt);
  Vec3 grad;
  const double h = 1e-6;
  for (int i = 0; i < 3; ++i) {
    Vec3 dp = contact_axis_pt, dm = contact_axis_pt;
    dp(i) += h;
    dm(i) -= h;
    grad(i) = (s.object_sdf(k, dp) - s.object_sdf(k, dm)) / (2.0 * h);
  }
  Vec3 q = contact_axis_pt - grad.normalized() * d;
  Vec3 centroid = s.poses[k].translation;
  Vec3 lever = q - centroid;
  double dpsi = (lever.x() * u.y() - lever.y() * u.x()) * step / yaw_compliance(s, k);

  s.poses[k].translation += u * step;
  Vec3 pivot = s.poses[k].translation;
  s.poses[k] = yaw_about(dpsi, pivot) * s.poses[k];
}

// Push overlapping neighbors apart horizontally (no torque transfer).
inline void separate_objects(SceneState& s, int mover) {
  auto mover_pts = s.cfg.objects[mover].shape.surface_points(64);
  for (size_t j = 0; j < s.poses.size(); ++j) {
    if (static_cast<int>(j) == mover || !s.cfg.objects[j].movable) continue;
    for (int iter = 0; iter < 64; ++iter) {
      double min_d = 1e9;
      for (const auto& p : mover_pts)
        min_d = std::min(min_d, s.object_sdf(static_cast<int>(j),
                                             s.poses[mover].apply(p)));
      if (min_d > -1e-6) break;
      Vec3 dir = s.poses[j].translation - s.poses[mover].translation;
      dir.z() = 0;
      if (dir.norm() < 1e-9) dir = Vec3(1, 0, 0);
      dir.normalize();
      s.poses[j].translation += dir * std::min(-min_d, 0.001);
    }
  }
}

}  // namespace detail

// Quasi-static poke: the pusher advances along the segment over
// duration_frames; contacted movable objects translate along the push
// direction and yaw about their vertical axis by the lever-arm rule.
// target >= 0 restricts pusher response to that object (others still get
// separating translations); target < 0 lets every movable object respond.
inline PokeResult apply_poke(SceneState& state, const PokeCommand& cmd, int target = -1) {
  require(std::abs(cmd.start.z() - cmd.end.z()) < 1e-9, ErrorClass::config,
          "poke segment must be horizontal");
  require(cmd.duration_frames >= 1, ErrorClass::config,
          "poke duration must be at least one frame");

  Vec3 u = cmd.end - cmd.start;
  u.z() = 0;
  if (u.norm() > 1e-12) u.normalize();

  PokeResult result;
  state.pusher_active = true;
  const int K = static_cast<int>(state.poses.size());
  for (int f = 1; f <= cmd.duration_frames; ++f) {
    double a = static_cast<double>(f) / cmd.duration_frames;
    state.pusher_center = cmd.start + a * (cmd.end - cmd.start);
    auto step_contact = [&](int k) {
      Vec3 save_u = u;  // push direction fixed by the segment
      if (!state.cfg.objects[k].movable) {
        auto [pen, at] = detail::pusher_penetration(state, k);
        if (pen > 0) result.contacted = true;
        return;
      }
      for (int iter = 0; iter < 400; ++iter) {
        auto [pen, at] = detail::pusher_penetration(state, k);
        if (pen <= 1e-6) break;
        if (save_u.norm() < 1e-9) {
          result.contacted = true;
          break;
        }
        result.contacted = true;
        detail::push_step(state, k, save_u, at, std::min(pen, 0.001));
        detail::separate_objects(state, k);
      }
    };
    if (target >= 0) {
      step_contact(target);
    } else {
      for (int k = 0; k < K; ++k) step_contact(k);
    }
    result.frame_poses.push_back(state.poses);
  }
  return result;
}

}  // namespace poke::sim

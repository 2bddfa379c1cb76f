// SPDX-License-Identifier: Apache-2.0
#pragma once

#include "poke/data/frame.hpp"
#include "poke/sim/scene.hpp"

namespace poke::sim {

struct RenderOptions {
  int max_steps = 128;
  double hit_tol = 1e-5;  // meters
  double t_near = 0.05;
  double t_far = 5.0;
  int threads = 1;
};

namespace detail {

// Component ids along a ray: -1 none, 0 plane, 1..K objects, K+1 pusher.
struct TraceScene {
  const SceneState* state;
  std::vector<Pose> inv_poses;
  std::vector<Vec3> centers;
  std::vector<double> radii;

  explicit TraceScene(const SceneState& s) : state(&s) {
    for (size_t k = 0; k < s.poses.size(); ++k) {
      inv_poses.push_back(s.poses[k].inverse());
      centers.push_back(s.poses[k].translation);
      radii.push_back(s.cfg.objects[k].shape.bounding_radius() + 1e-3);
    }
  }

  int object_count() const { return static_cast<int>(inv_poses.size()); }
  int pusher_id() const { return object_count() + 1; }

  double pusher_sdf(const Vec3& x) const {
    Vec3 p = x - state->pusher_center;
    p.z() -= std::clamp(p.z(), -state->cfg.pusher_half_length,
                        state->cfg.pusher_half_length);
    return p.norm() - state->cfg.pusher_radius;
  }

  double component_sdf(int id, const Vec3& x) const {
    if (id == 0) return x.z() - state->cfg.plane_height;
    if (id == pusher_id()) return pusher_sdf(x);
    return state->cfg.objects[id - 1].shape.sdf(inv_poses[id - 1].apply(x));
  }

  std::pair<double, int> nearest(const Vec3& x) const {
    double best = x.z() - state->cfg.plane_height;
    int id = 0;
    for (int k = 0; k < object_count(); ++k) {
      double r = (x - centers[k]).norm() - radii[k];
      double d = r > best ? r : component_sdf(k + 1, x);
      if (d < best) {
        best = d;
        id = k + 1;
      }
    }
    if (state->pusher_active) {
      double d = pusher_sdf(x);
      if (d < best) {
        best = d;
        id = pusher_id();
      }
    }
    return {best, id};
  }

  Vec3 normal(int id, const Vec3& x) const {
    const double h = 1e-6;
    Vec3 g;
    for (int i = 0; i < 3; ++i) {
      Vec3 dp = x, dm = x;
      dp(i) += h;
      dm(i) -= h;
      g(i) = component_sdf(id, dp) - component_sdf(id, dm);
    }
    double n = g.norm();
    return n > 0 ? Vec3(g / n) : Vec3(0, 0, 1);
  }
};

struct TraceHit {
  bool hit = false;
  int id = -1;
  double t = 0.0;
  Vec3 point = Vec3::Zero();
};

inline TraceHit trace(const TraceScene& scene, const Ray& ray, const RenderOptions& opt) {
  double t = ray.t_near;
  for (int step = 0; step < opt.max_steps; ++step) {
    Vec3 x = ray.origin + t * ray.direction;
    auto [d, id] = scene.nearest(x);
    if (d < opt.hit_tol) {
      // polish: keep marching with shrinking steps to pin the crossing
      for (int it = 0; it < 32 && std::abs(d) > 1e-9; ++it) {
        t += d;
        std::tie(d, id) = scene.nearest(ray.origin + t * ray.direction);
      }
      TraceHit h;
      h.hit = true;
      h.id = id;
      h.t = t;
      h.point = ray.origin + t * ray.direction;
      return h;
    }
    t += d;
    if (t > ray.t_far) break;
  }
  return {};
}

}  // namespace detail

// Fixed lighting baked into ground-truth color: one directional + ambient.
inline Vec3 shade(const Vec3& albedo, const Vec3& normal) {
  static const Vec3 light = Vec3(-0.35, 0.25, 1.0).normalized();
  double diffuse = std::max(0.0, normal.dot(light));
  Vec3 c = albedo * (0.6 + 0.4 * diffuse);
  return c.cwiseMin(1.0).cwiseMax(0.0);
}

inline data::FrameRecord render_frame(const SceneState& state,
                                      const RenderOptions& opt = {}) {
  const PinholeCamera& cam = state.cfg.camera;
  data::FrameRecord f;
  f.camera = cam;
  f.gt_poses = state.poses;
  f.rgb = ImageF(cam.width, cam.height, 3);
  f.depth = ImageF(cam.width, cam.height, 1);
  f.flow_to_next = ImageF(cam.width, cam.height, 2);
  f.robot_mask = ImageU8(cam.width, cam.height, 1);
  f.gt_labels = ImageU8(cam.width, cam.height, 1);

  detail::TraceScene scene(state);
  const Vec3 origin = cam.pose.translation;
  const Vec3 forward = cam.forward_world();
  const int pusher = scene.pusher_id();

  parallel_chunks(cam.height, opt.threads, [&](int, size_t y0, size_t y1) {
    for (size_t y = y0; y < y1; ++y) {
      for (int x = 0; x < cam.width; ++x) {
        Ray ray = pixel_ray(cam, static_cast<double>(x), static_cast<double>(y));
        ray.t_near = opt.t_near;
        ray.t_far = opt.t_far;
        auto hit = detail::trace(scene, ray, opt);
        if (!hit.hit) continue;
        Vec3 albedo;
        if (hit.id == 0) {
          albedo = state.cfg.plane_albedo.sample(hit.point);
        } else if (hit.id == pusher) {
          albedo = Vec3(0.15, 0.16, 0.18);
          f.robot_mask.at(x, static_cast<int>(y)) = 255;
        } else {
          const auto& obj = state.cfg.objects[hit.id - 1];
          albedo = obj.albedo.sample(scene.inv_poses[hit.id - 1].apply(hit.point));
          f.gt_labels.at(x, static_cast<int>(y)) = static_cast<uint8_t>(hit.id);
        }
        Vec3 rgb = shade(albedo, scene.normal(hit.id, hit.point));
        for (int c = 0; c < 3; ++c)
          f.rgb.at(x, static_cast<int>(y), c) = static_cast<float>(rgb(c));
        f.depth.at(x, static_cast<int>(y)) =
            static_cast<float>((hit.point - origin).dot(forward));
      }
    }
  });
  return f;
}

// Geometric flow from known rigid motion: object pixels move with their
// object's transform, everything else (background, plane, pusher) is zero
// under the static camera. Occluded-at-next pixels still get their
// geometric displacement.
inline ImageF ground_truth_flow(const data::FrameRecord& a, const data::FrameRecord& b) {
  ImageF flow(a.rgb.width, a.rgb.height, 2);
  std::vector<Pose> motion;
  std::vector<bool> moved;
  for (size_t k = 0; k < a.gt_poses.size(); ++k) {
    motion.push_back(b.gt_poses[k] * a.gt_poses[k].inverse());
    moved.push_back(
        (b.gt_poses[k].rotation - a.gt_poses[k].rotation).cwiseAbs().maxCoeff() != 0 ||
        (b.gt_poses[k].translation - a.gt_poses[k].translation).cwiseAbs().maxCoeff() != 0);
  }
  for (int y = 0; y < flow.height; ++y)
    for (int x = 0; x < flow.width; ++x) {
      int label = a.label_at(x, y);
      if (label == 0 || !moved[label - 1]) continue;
      double z = a.depth.at(x, y);
      if (z <= 0) continue;
      Vec3 world = a.camera.backproject(x, y, z);
      Vec3 moved = motion[label - 1].apply(world);
      Vec3 uvz = b.camera.project(moved);
      if (uvz.z() <= 0) continue;
      flow.at(x, y, 0) = static_cast<float>(uvz.x() - x);
      flow.at(x, y, 1) = static_cast<float>(uvz.y() - y);
    }
  return flow;
}

}  // namespace poke::sim

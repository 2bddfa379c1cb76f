// SPDX-License-Identifier: Apache-2.0
#pragma once

#include "poke/core/se3.hpp"

namespace poke {

// Pinhole camera, +z forward / +x right / +y down in the camera frame.
// pose maps camera coordinates to world coordinates.
struct PinholeCamera {
  double fx = 0, fy = 0, cx = 0, cy = 0;
  int width = 0, height = 0;
  Pose pose;  // camera-to-world

  Vec3 forward_world() const { return pose.rotation.col(2); }

  // (u, v) in pixels, z in meters along the camera z axis; returns world point.
  Vec3 backproject(double u, double v, double z) const {
    require(z > 0, ErrorClass::geometry, "backproject: depth must be positive");
    Vec3 cam((u - cx) * z / fx, (v - cy) * z / fy, z);
    return pose.apply(cam);
  }

  // Projects a world point; returns (u, v) and the camera-frame depth.
  // Points at or behind the camera plane get depth <= 0 and must be culled
  // by the caller.
  Vec3 project(const Vec3& world) const {
    Vec3 cam = pose.inverse().apply(world);
    double z = cam.z();
    if (z <= 0) return Vec3(0, 0, z);
    return Vec3(fx * cam.x() / z + cx, fy * cam.y() / z + cy, z);
  }

  bool in_image(double u, double v) const {
    return u >= 0 && v >= 0 && u <= width - 1 && v <= height - 1;
  }
};

struct Ray {
  Vec3 origin = Vec3::Zero();
  Vec3 direction = Vec3::UnitZ();  // unit length
  double t_near = 0, t_far = 0;
};

// Ray through pixel (u, v); direction normalized, t range left to the caller.
inline Ray pixel_ray(const PinholeCamera& cam, double u, double v) {
  Vec3 dir_cam((u - cam.cx) / cam.fx, (v - cam.cy) / cam.fy, 1.0);
  Ray r;
  r.origin = cam.pose.translation;
  r.direction = (cam.pose.rotation * dir_cam).normalized();
  return r;
}

// Scale factor turning ray parameter t into camera z-depth for this pixel.
inline double ray_depth_scale(const PinholeCamera& cam, const Ray& r) {
  return r.direction.dot(cam.forward_world());
}

}  // namespace poke

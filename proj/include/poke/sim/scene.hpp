// SPDX-License-Identifier: Apache-2.0
#pragma once

#include <nlohmann/json.hpp>
#include <string>
#include <vector>

#include "poke/core/camera.hpp"
#include "poke/sim/sdf.hpp"

namespace poke::sim {

using nlohmann::json;

struct ObjectSpec {
  std::string name;
  Shape shape;
  Texture albedo;
  Pose initial_pose;
  bool movable = true;
  double friction_angle = 30.0;  // degrees; kept for config echo, the
                                 // kinematic push model does not use it
};

struct SceneConfig {
  double plane_height = 0.0;
  Texture plane_albedo;
  std::vector<ObjectSpec> objects;
  PinholeCamera camera;
  double pusher_radius = 0.008;
  double pusher_half_length = 0.08;
  std::uint64_t seed = 0;
};

// Mutable simulation state. Object poses are world-from-object; the pusher
// is a vertical capsule around pusher_center when active, hidden otherwise.
struct SceneState {
  SceneConfig cfg;
  std::vector<Pose> poses;
  bool pusher_active = false;
  Vec3 pusher_center = Vec3::Zero();

  static SceneState initial(const SceneConfig& cfg) {
    SceneState s;
    s.cfg = cfg;
    for (const auto& o : cfg.objects) s.poses.push_back(o.initial_pose);
    return s;
  }

  double object_sdf(int k, const Vec3& world) const {
    return cfg.objects[k].shape.sdf(poses[k].inverse().apply(world));
  }
};

inline Pose look_at(const Vec3& position, const Vec3& target) {
  Vec3 forward = (target - position).normalized();
  Vec3 right = forward.cross(Vec3(0, 0, 1)).normalized();
  Vec3 down = forward.cross(right);
  Pose p;
  p.rotation.col(0) = right;
  p.rotation.col(1) = down;
  p.rotation.col(2) = forward;
  p.translation = position;
  return p;
}

// ---- JSON (de)serialization -------------------------------------------

inline json pose_to_json(const Pose& p) {
  json r = json::array();
  for (int i = 0; i < 3; ++i)
    r.push_back({p.rotation(i, 0), p.rotation(i, 1), p.rotation(i, 2)});
  return json{{"rotation", r},
              {"translation", {p.translation.x(), p.translation.y(), p.translation.z()}}};
}

inline Pose pose_from_json(const json& j) {
  Pose p;
  for (int i = 0; i < 3; ++i)
    for (int c = 0; c < 3; ++c) p.rotation(i, c) = j.at("rotation").at(i).at(c);
  for (int i = 0; i < 3; ++i) p.translation(i) = j.at("translation").at(i);
  return p;
}

inline json vec3_to_json(const Vec3& v) { return json{v.x(), v.y(), v.z()}; }
inline Vec3 vec3_from_json(const json& j) { return Vec3(j.at(0), j.at(1), j.at(2)); }

inline json texture_to_json(const Texture& t) {
  return json{{"type", to_string(t.type)}, {"rgb_a", vec3_to_json(t.rgb_a)},
              {"rgb_b", vec3_to_json(t.rgb_b)}, {"scale", t.scale}, {"seed", t.seed}};
}

inline Texture texture_from_json(const json& j) {
  Texture t;
  t.type = texture_from_string(j.at("type"));
  t.rgb_a = vec3_from_json(j.at("rgb_a"));
  t.rgb_b = vec3_from_json(j.at("rgb_b"));
  t.scale = j.at("scale");
  t.seed = j.at("seed");
  return t;
}

inline json shape_to_json(const Shape& s) {
  return json{{"type", to_string(s.type)}, {"half", vec3_to_json(s.half)},
              {"radius", s.radius}, {"half_length", s.half_length},
              {"exponent", s.exponent}};
}

inline Shape shape_from_json(const json& j) {
  Shape s;
  s.type = shape_from_string(j.at("type"));
  s.half = vec3_from_json(j.at("half"));
  s.radius = j.at("radius");
  s.half_length = j.at("half_length");
  s.exponent = j.at("exponent");
  return s;
}

inline json camera_to_json(const PinholeCamera& c) {
  return json{{"fx", c.fx}, {"fy", c.fy}, {"cx", c.cx}, {"cy", c.cy},
              {"width", c.width}, {"height", c.height}, {"pose", pose_to_json(c.pose)}};
}

inline PinholeCamera camera_from_json(const json& j) {
  PinholeCamera c;
  c.fx = j.at("fx");
  c.fy = j.at("fy");
  c.cx = j.at("cx");
  c.cy = j.at("cy");
  c.width = j.at("width");
  c.height = j.at("height");
  c.pose = pose_from_json(j.at("pose"));
  return c;
}

inline json object_to_json(const ObjectSpec& o) {
  return json{{"name", o.name}, {"shape", shape_to_json(o.shape)},
              {"albedo", texture_to_json(o.albedo)},
              {"initial_pose", pose_to_json(o.initial_pose)},
              {"movable", o.movable}, {"friction_angle", o.friction_angle}};
}

inline ObjectSpec object_from_json(const json& j) {
  ObjectSpec o;
  o.name = j.at("name");
  o.shape = shape_from_json(j.at("shape"));
  o.albedo = texture_from_json(j.at("albedo"));
  o.initial_pose = pose_from_json(j.at("initial_pose"));
  o.movable = j.at("movable");
  o.friction_angle = j.at("friction_angle");
  return o;
}

inline json scene_to_json(const SceneConfig& s) {
  json objs = json::array();
  for (const auto& o : s.objects) objs.push_back(object_to_json(o));
  return json{{"plane_height", s.plane_height},
              {"plane_albedo", texture_to_json(s.plane_albedo)},
              {"objects", objs},
              {"camera", camera_to_json(s.camera)},
              {"pusher_radius", s.pusher_radius},
              {"pusher_half_length", s.pusher_half_length},
              {"seed", s.seed}};
}

inline SceneConfig scene_from_json(const json& j) {
  SceneConfig s;
  s.plane_height = j.at("plane_height");
  s.plane_albedo = texture_from_json(j.at("plane_albedo"));
  for (const auto& o : j.at("objects")) s.objects.push_back(object_from_json(o));
  s.camera = camera_from_json(j.at("camera"));
  s.pusher_radius = j.at("pusher_radius");
  s.pusher_half_length = j.at("pusher_half_length");
  s.seed = j.at("seed");
  return s;
}

// ---- Validation ---------------------------------------------------------

inline void validate_scene(const SceneConfig& cfg) {
  std::vector<std::string> errors;
  auto check = [&](bool ok, const std::string& msg) {
    if (!ok) errors.push_back(msg);
  };

  check(cfg.camera.fx > 0 && cfg.camera.fy > 0, "camera focal lengths must be positive");
  check(cfg.camera.width > 0 && cfg.camera.height > 0, "image size must be positive");
  check(cfg.pusher_radius > 0, "pusher_radius must be positive");

  auto tex_ok = [](const Texture& t) {
    auto in01 = [](const Vec3& v) {
      return v.minCoeff() >= 0.0 && v.maxCoeff() <= 1.0;
    };
    return in01(t.rgb_a) && in01(t.rgb_b) && t.scale > 0;
  };
  check(tex_ok(cfg.plane_albedo), "plane albedo out of [0,1]");

  for (size_t k = 0; k < cfg.objects.size(); ++k) {
    const auto& o = cfg.objects[k];
    const std::string tag = "object " + o.name + ": ";
    check(tex_ok(o.albedo), tag + "albedo out of [0,1]");
    check(o.shape.half.minCoeff() > 0 && o.shape.radius > 0 && o.shape.half_length > 0,
          tag + "size parameters must be positive");
    if (o.shape.type == ShapeType::superellipsoid)
      check(o.shape.exponent >= 2.0, tag + "superellipsoid exponent must be >= 2");
    double low = lowest_point_z(o.shape, o.initial_pose);
    check(std::abs(low - cfg.plane_height) <= 1e-4,
          tag + "does not rest on the plane (lowest point off by " +
              std::to_string(low - cfg.plane_height) + " m)");
  }

  // pairwise interpenetration via sampled surfaces
  for (size_t a = 0; a < cfg.objects.size(); ++a) {
    auto pts = cfg.objects[a].shape.surface_points(128);
    for (size_t b = 0; b < cfg.objects.size(); ++b) {
      if (a == b) continue;
      Pose b_inv = cfg.objects[b].initial_pose.inverse();
      double min_d = 1e9;
      for (const auto& p : pts) {
        Vec3 world = cfg.objects[a].initial_pose.apply(p);
        min_d = std::min(min_d, cfg.objects[b].shape.sdf(b_inv.apply(world)));
      }
      if (min_d < -1e-6)
        errors.push_back("objects " + cfg.objects[a].name + " and " +
                         cfg.objects[b].name + " interpenetrate");
    }
  }

  if (!errors.empty()) {
    std::string all = "scene validation failed:";
    for (const auto& e : errors) all += "\n  - " + e;
    fail(ErrorClass::config, all);
  }
}

// ---- Presets ------------------------------------------------------------

namespace detail {

inline PinholeCamera desk_camera(int width = 336, int height = 162) {
  PinholeCamera cam;
  cam.width = width;
  cam.height = height;
  cam.fx = cam.fy = 280.0 * width / 336.0;
  cam.cx = width / 2.0;
  cam.cy = height / 2.0;
  cam.pose = look_at(Vec3(0.0, -0.55, 0.45), Vec3(0.0, 0.06, 0.0));
  return cam;
}

inline ObjectSpec make_box(const std::string& name, const Vec3& half, const Vec3& xy,
                           double yaw, const Texture& tex) {
  ObjectSpec o;
  o.name = name;
  o.shape.type = ShapeType::box;
  o.shape.half = half;
  o.albedo = tex;
  o.initial_pose = yaw_about(yaw, Vec3::Zero());
  o.initial_pose.translation = Vec3(xy.x(), xy.y(), half.z());
  return o;
}

}  // namespace detail

inline SceneConfig preset_one_object(std::uint64_t seed, int width = 336, int height = 162) {
  SceneConfig s;
  s.seed = seed;
  s.camera = detail::desk_camera(width, height);
  s.plane_albedo = Texture{TextureType::checker, Vec3(0.62, 0.60, 0.57),
                           Vec3(0.44, 0.43, 0.41), 0.08, 0};
  Texture box_tex{TextureType::checker, Vec3(0.85, 0.30, 0.25), Vec3(0.95, 0.86, 0.32),
                  0.02, 0};
  s.objects.push_back(
      detail::make_box("box", Vec3(0.03, 0.04, 0.025), Vec3(0.0, 0.06, 0), 0.26, box_tex));
  return s;
}

inline SceneConfig preset_three_objects(std::uint64_t seed, int width = 336,
                                        int height = 162) {
  SceneConfig s = preset_one_object(seed, width, height);
  s.objects[0].initial_pose.translation.head<2>() = Eigen::Vector2d(-0.13, 0.04);

  ObjectSpec ball;
  ball.name = "ball";
  ball.shape.type = ShapeType::sphere;
  ball.shape.radius = 0.035;
  ball.albedo = Texture{TextureType::noise, Vec3(0.20, 0.42, 0.85), Vec3(0.92, 0.94, 0.97),
                        0.014, 3};
  ball.initial_pose.translation = Vec3(0.01, 0.14, 0.035);
  s.objects.push_back(ball);

  ObjectSpec se;
  se.name = "loaf";
  se.shape.type = ShapeType::superellipsoid;
  se.shape.half = Vec3(0.05, 0.03, 0.03);
  se.shape.exponent = 4.0;
  se.albedo = Texture{TextureType::checker, Vec3(0.22, 0.65, 0.35), Vec3(0.93, 0.95, 0.90),
                      0.016, 0};
  se.initial_pose = yaw_about(-0.6, Vec3::Zero());
  se.initial_pose.translation = Vec3(0.13, 0.00, 0.03);
  s.objects.push_back(se);
  return s;
}

inline SceneConfig preset_textureless(std::uint64_t seed, int width = 336,
                                      int height = 162) {
  SceneConfig s = preset_three_objects(seed, width, height);
  s.plane_albedo = Texture{TextureType::solid, Vec3(0.55, 0.55, 0.55), Vec3::Zero(), 0.08, 0};
  const Vec3 colors[3] = {Vec3(0.80, 0.35, 0.30), Vec3(0.25, 0.45, 0.80),
                          Vec3(0.30, 0.68, 0.38)};
  for (size_t k = 0; k < s.objects.size(); ++k)
    s.objects[k].albedo = Texture{TextureType::solid, colors[k % 3], Vec3::Zero(), 0.02, 0};
  return s;
}

// Procedural scene with n movable objects at collision-free spots; used by
// discovery robustness checks. Deterministic in (seed, n).
inline SceneConfig preset_random(std::uint64_t seed, int n, int width = 336,
                                 int height = 162) {
  SceneConfig s;
  s.seed = seed;
  s.camera = detail::desk_camera(width, height);
  s.plane_albedo = Texture{TextureType::checker, Vec3(0.62, 0.60, 0.57),
                           Vec3(0.44, 0.43, 0.41), 0.08, 0};
  auto rng = make_rng(seed, 0xa11ce);
  std::uniform_real_distribution<double> ux(-0.16, 0.16), uy(-0.02, 0.16),
      uyaw(-M_PI, M_PI), usz(0.024, 0.04), uc(0.15, 0.95);
  for (int k = 0; k < n; ++k) {
    ObjectSpec o;
    o.name = "obj" + std::to_string(k);
    int kind = static_cast<int>(rng() % 3);
    if (kind == 0) {
      o.shape.type = ShapeType::sphere;
      o.shape.radius = usz(rng);
    } else if (kind == 1) {
      o.shape.type = ShapeType::box;
      o.shape.half = Vec3(usz(rng), usz(rng), usz(rng) * 0.8);
    } else {
      o.shape.type = ShapeType::superellipsoid;
      o.shape.half = Vec3(usz(rng) * 1.3, usz(rng), usz(rng) * 0.9);
      o.shape.exponent = 4.0;
    }
    o.albedo = Texture{TextureType::checker, Vec3(uc(rng), uc(rng), uc(rng)),
                       Vec3(uc(rng), uc(rng), uc(rng)), 0.016, seed + k};
    for (int attempt = 0; attempt < 256; ++attempt) {
      double yaw = o.shape.type == ShapeType::sphere ? 0.0 : uyaw(rng);
      o.initial_pose = yaw_about(yaw, Vec3::Zero());
      o.initial_pose.translation =
          Vec3(ux(rng), uy(rng), -lowest_point_z(o.shape, yaw_about(yaw, Vec3::Zero())));
      bool clear = true;
      for (const auto& other : s.objects) {
        double d = (other.initial_pose.translation - o.initial_pose.translation).norm();
        if (d < other.shape.bounding_radius() + o.shape.bounding_radius() + 0.03)
          clear = false;
      }
      if (clear) break;
      require(attempt < 255, ErrorClass::config, "could not place random objects");
    }
    s.objects.push_back(o);
  }
  return s;
}

inline std::vector<std::string> scene_preset_names() {
  return {"one_object", "three_objects", "textureless", "random2", "random3", "random4"};
}

inline SceneConfig scene_preset(const std::string& name, std::uint64_t seed,
                                int width = 336, int height = 162) {
  if (name == "one_object") return preset_one_object(seed, width, height);
  if (name == "three_objects") return preset_three_objects(seed, width, height);
  if (name == "textureless") return preset_textureless(seed, width, height);
  if (name == "random2") return preset_random(seed, 2, width, height);
  if (name == "random3") return preset_random(seed, 3, width, height);
  if (name == "random4") return preset_random(seed, 4, width, height);
  std::string valid;
  for (const auto& n : scene_preset_names()) valid += " " + n;
  fail(ErrorClass::config, "unknown scene preset '" + name + "'; valid presets:" + valid);
}

}  // namespace poke::sim

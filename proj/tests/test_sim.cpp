// SPDX-License-Identifier: Apache-2.0
#include <gtest/gtest.h>

#include <filesystem>

#include "poke/data/dataset.hpp"
#include "poke/sim/push.hpp"
#include "poke/sim/record.hpp"
#include "poke/sim/render.hpp"

using namespace poke;
using namespace poke::sim;

namespace {

SceneConfig empty_scene() {
  SceneConfig s;
  s.camera = sim::detail::desk_camera();
  s.plane_albedo = Texture{TextureType::checker, Vec3(0.6, 0.6, 0.6),
                           Vec3(0.4, 0.4, 0.4), 0.08, 0};
  return s;
}

double ray_plane_depth(const PinholeCamera& cam, int x, int y, double plane_z) {
  Ray r = pixel_ray(cam, x, y);
  double denom = r.direction.z();
  if (std::abs(denom) < 1e-12) return 0.0;
  double t = (plane_z - r.origin.z()) / denom;
  if (t <= 0) return 0.0;
  Vec3 p = r.origin + t * r.direction;
  return (p - cam.pose.translation).dot(cam.forward_world());
}

}  // namespace

TEST(Sdf, SphereExact) {
  Shape s;
  s.type = ShapeType::sphere;
  s.radius = 0.05;
  EXPECT_NEAR(s.sdf(Vec3(0.1, 0, 0)), 0.05, 1e-12);
  EXPECT_NEAR(s.sdf(Vec3::Zero()), -0.05, 1e-12);
}

TEST(Sdf, BoxExactOutsideCorner) {
  Shape s;
  s.type = ShapeType::box;
  s.half = Vec3(0.03, 0.04, 0.025);
  Vec3 corner(0.03, 0.04, 0.025);
  Vec3 p = corner + Vec3(0.01, 0.01, 0.01);
  EXPECT_NEAR(s.sdf(p), std::sqrt(3.0) * 0.01, 1e-12);
  EXPECT_NEAR(s.sdf(Vec3::Zero()), -0.025, 1e-12);
}

TEST(Sdf, SuperellipsoidSignAndBound) {
  Shape s;
  s.type = ShapeType::superellipsoid;
  s.half = Vec3(0.05, 0.03, 0.03);
  s.exponent = 4.0;
  // axis endpoints lie exactly on the surface
  EXPECT_NEAR(s.sdf(Vec3(0.05, 0, 0)), 0.0, 1e-9);
  EXPECT_NEAR(s.sdf(Vec3(0, 0.03, 0)), 0.0, 1e-9);
  EXPECT_LT(s.sdf(Vec3::Zero()), 0.0);
  // conservative: reported distance never exceeds true distance outside
  auto rng = make_rng(3);
  std::uniform_real_distribution<double> u(-0.15, 0.15);
  for (int i = 0; i < 500; ++i) {
    Vec3 p(u(rng), u(rng), u(rng));
    double d = s.sdf(p);
    if (d <= 0) continue;
    Vec3 q = s.surface_point(p.normalized());
    // distance to the nearest surface point is at least the reported value
    double true_d = (p - q).norm();
    EXPECT_GE(true_d + 1e-9, d);
  }
}

TEST(Sdf, CapsuleExact) {
  Shape s;
  s.type = ShapeType::capsule;
  s.radius = 0.01;
  s.half_length = 0.05;
  EXPECT_NEAR(s.sdf(Vec3(0.03, 0, 0.02)), 0.02, 1e-12);
  EXPECT_NEAR(s.sdf(Vec3(0, 0, 0.08)), 0.02, 1e-12);
}

TEST(Sdf, SupportMatchesSurface) {
  Shape shapes[3];
  shapes[0].type = ShapeType::sphere;
  shapes[0].radius = 0.04;
  shapes[1].type = ShapeType::box;
  shapes[1].half = Vec3(0.03, 0.05, 0.02);
  shapes[2].type = ShapeType::superellipsoid;
  shapes[2].half = Vec3(0.05, 0.03, 0.03);
  shapes[2].exponent = 4.0;
  auto rng = make_rng(5);
  std::uniform_real_distribution<double> u(-1, 1);
  for (const auto& s : shapes) {
    auto pts = s.surface_points(256);
    for (int i = 0; i < 200; ++i) {
      Vec3 d(u(rng), u(rng), u(rng));
      if (d.norm() < 1e-3) continue;
      d.normalize();
      double h = s.support(d);
      // support dominates every sampled surface point
      for (const auto& p : pts) EXPECT_LE(p.dot(d), h + 1e-9);
      // and is attained exactly at the analytic maximizer
      Vec3 star;
      if (s.type == ShapeType::sphere) {
        star = s.radius * d;
      } else if (s.type == ShapeType::box) {
        for (int a = 0; a < 3; ++a) star(a) = (d(a) < 0 ? -1 : 1) * s.half(a);
      } else {
        double q = s.exponent / (s.exponent - 1.0);
        double sum = 0.0;
        for (int a = 0; a < 3; ++a) sum += std::pow(s.half(a) * std::abs(d(a)), q);
        double norm = std::pow(sum, (q - 1.0) / q);
        for (int a = 0; a < 3; ++a)
          star(a) = s.half(a) * (d(a) < 0 ? -1 : 1) *
                    std::pow(s.half(a) * std::abs(d(a)), q - 1.0) / norm;
      }
      EXPECT_NEAR(star.dot(d), h, 1e-9);
      EXPECT_LT(std::abs(s.sdf(star)), 1e-7);
    }
  }
}

TEST(Sdf, LowestPointOfRestingShapes) {
  Shape box;
  box.type = ShapeType::box;
  box.half = Vec3(0.03, 0.04, 0.025);
  Pose p = yaw_about(0.3, Vec3::Zero());
  p.translation = Vec3(0.1, -0.05, 0.025);
  EXPECT_NEAR(lowest_point_z(box, p), 0.0, 1e-12);

  Shape ball;
  ball.type = ShapeType::sphere;
  ball.radius = 0.035;
  Pose q;
  q.translation = Vec3(0, 0, 0.035);
  EXPECT_NEAR(lowest_point_z(ball, q), 0.0, 1e-12);
}

TEST(Texture, CheckerAndNoiseDeterministic) {
  Texture t{TextureType::checker, Vec3(1, 0, 0), Vec3(0, 1, 0), 0.02, 0};
  EXPECT_EQ(t.sample(Vec3(0.01, 0.01, 0.01)), t.sample(Vec3(0.01, 0.01, 0.01)));
  EXPECT_NE(t.sample(Vec3(0.01, 0.01, 0.01)), t.sample(Vec3(0.03, 0.01, 0.01)));
  Texture n{TextureType::noise, Vec3(0, 0, 0), Vec3(1, 1, 1), 0.02, 42};
  Vec3 a = n.sample(Vec3(0.013, -0.004, 0.021));
  Vec3 b = n.sample(Vec3(0.013, -0.004, 0.021));
  EXPECT_EQ(a, b);
  EXPECT_GE(a.minCoeff(), 0.0);
  EXPECT_LE(a.maxCoeff(), 1.0);
}

TEST(Render, EmptyScenePlaneDepthMatchesClosedForm) {
  SceneConfig cfg = empty_scene();
  SceneState st = SceneState::initial(cfg);
  auto f = render_frame(st);
  int checked = 0;
  for (int y = 0; y < f.height(); y += 7)
    for (int x = 0; x < f.width(); x += 11) {
      double expect = ray_plane_depth(cfg.camera, x, y, 0.0);
      if (expect <= 0 || expect > 4.9) continue;
      EXPECT_NEAR(f.depth.at(x, y), expect, 1e-4) << "pixel " << x << "," << y;
      ++checked;
    }
  EXPECT_GT(checked, 300);
}

TEST(Render, SphereMaskAreaMatchesProjection) {
  SceneConfig cfg = empty_scene();
  ObjectSpec ball;
  ball.name = "ball";
  ball.shape.type = ShapeType::sphere;
  ball.shape.radius = 0.05;
  ball.albedo = Texture{TextureType::solid, Vec3(0.8, 0.2, 0.2), Vec3::Zero(), 0.02, 0};
  // centered on the optical axis
  const PinholeCamera& cam = cfg.camera;
  double dist = 0.5;
  Vec3 center = cam.pose.translation + dist * cam.forward_world();
  ball.initial_pose.translation = center;
  cfg.objects.push_back(ball);

  SceneState st = SceneState::initial(cfg);
  auto f = render_frame(st);
  long count = 0;
  for (size_t i = 0; i < f.gt_labels.data.size(); ++i) count += f.gt_labels.data[i] == 1;
  // silhouette of a sphere: half-angle asin(r/d), pixel radius f*tan(theta)
  double tan_theta = ball.shape.radius / std::sqrt(dist * dist - ball.shape.radius * ball.shape.radius);
  double expected = M_PI * (cam.fx * tan_theta) * (cam.fy * tan_theta);
  EXPECT_NEAR(static_cast<double>(count), expected, 0.03 * expected);
}

TEST(Render, PusherOcclusionSetsRobotMaskOnly) {
  SceneConfig cfg = empty_scene();
  ObjectSpec ball;
  ball.name = "ball";
  ball.shape.type = ShapeType::sphere;
  ball.shape.radius = 0.04;
  ball.albedo = Texture{TextureType::solid, Vec3(0.8, 0.2, 0.2), Vec3::Zero(), 0.02, 0};
  ball.initial_pose.translation = Vec3(0, 0.06, 0.04);
  cfg.objects.push_back(ball);

  SceneState st = SceneState::initial(cfg);
  Vec3 uvz = cfg.camera.project(ball.initial_pose.translation);
  int px = static_cast<int>(std::lround(uvz.x()));
  int py = static_cast<int>(std::lround(uvz.y()));

  auto before = render_frame(st);
  ASSERT_EQ(before.label_at(px, py), 1);
  ASSERT_FALSE(before.robot_at(px, py));

  // park the pusher on the camera-to-ball line, in front of the ball
  st.pusher_active = true;
  Vec3 dir = (ball.initial_pose.translation - cfg.camera.pose.translation).normalized();
  st.pusher_center = ball.initial_pose.translation - 0.15 * dir;
  auto after = render_frame(st);
  EXPECT_TRUE(after.robot_at(px, py));
  EXPECT_EQ(after.label_at(px, py), 0);
}

TEST(Render, DepthMaskConsistency) {
  SceneConfig cfg = preset_three_objects(7);
  SceneState st = SceneState::initial(cfg);
  auto f = render_frame(st);
  int checked = 0;
  for (int y = 0; y < f.height(); y += 3)
    for (int x = 0; x < f.width(); x += 3) {
      int k = f.label_at(x, y);
      if (k == 0) continue;
      Vec3 world = cfg.camera.backproject(x, y, f.depth.at(x, y));
      EXPECT_LT(std::abs(st.object_sdf(k - 1, world)), 1e-4);
      ++checked;
    }
  EXPECT_GT(checked, 50);
}

TEST(Render, DeterministicAcrossCalls) {
  SceneConfig cfg = preset_three_objects(7);
  SceneState st = SceneState::initial(cfg);
  auto a = render_frame(st);
  auto b = render_frame(st);
  EXPECT_EQ(a.rgb.data, b.rgb.data);
  EXPECT_EQ(a.depth.data, b.depth.data);
  EXPECT_EQ(a.gt_labels.data, b.gt_labels.data);
}

TEST(Flow, StaticSceneZero) {
  SceneConfig cfg = preset_one_object(1);
  SceneState st = SceneState::initial(cfg);
  auto a = render_frame(st);
  auto b = render_frame(st);
  auto flow = ground_truth_flow(a, b);
  for (float v : flow.data) EXPECT_EQ(v, 0.0f);
}

TEST(Flow, LateralTranslationMagnitudeOracle) {
  // object translated 1 cm parallel to the image plane at depth 1 m with
  // fx = 500 must flow by 5 px
  SceneConfig cfg = empty_scene();
  cfg.camera.fx = cfg.camera.fy = 500;
  cfg.camera.cx = 168;
  cfg.camera.cy = 81;
  cfg.camera.pose = Pose::identity();  // +z forward, world == camera frame
  cfg.plane_height = -10;              // plane far away below

  ObjectSpec ball;
  ball.name = "ball";
  ball.shape.type = ShapeType::sphere;
  ball.shape.radius = 0.05;
  ball.albedo = Texture{TextureType::solid, Vec3(0.8, 0.2, 0.2), Vec3::Zero(), 0.02, 0};
  ball.initial_pose.translation = Vec3(0, 0, 1.0);
  cfg.objects.push_back(ball);

  SceneState st = SceneState::initial(cfg);
  auto a = render_frame(st);
  st.poses[0].translation += Vec3(0.01, 0, 0);  // 1 cm along camera x
  auto b = render_frame(st);
  auto flow = ground_truth_flow(a, b);

  int cx = 168, cy = 81;
  ASSERT_EQ(a.label_at(cx, cy), 1);
  double du = flow.at(cx, cy, 0);
  double dv = flow.at(cx, cy, 1);
  // depth at the sphere front face is 0.95, so the pinhole predicts
  // fx * 0.01 / z there; the oracle checks the center pixel against it
  double z = a.depth.at(cx, cy);
  EXPECT_NEAR(du, 500 * 0.01 / z, 0.1);
  EXPECT_NEAR(dv, 0.0, 0.1);
}

TEST(Flow, WarpedMaskIoU) {
  // consecutive frames of an actual poke: per-frame motion is a few mm,
  // the scale the retention contract applies to
  SceneConfig cfg = preset_one_object(3);
  SceneState st = SceneState::initial(cfg);
  Vec3 c = st.poses[0].translation;
  auto a = render_frame(st);
  PokeCommand cmd;
  cmd.start = Vec3(c.x(), c.y() - 0.115, c.z());
  cmd.end = Vec3(c.x() + 0.004, c.y() - 0.015, c.z());
  cmd.duration_frames = 10;
  apply_poke(st, cmd, 0);
  st.pusher_active = false;
  auto b = render_frame(st);
  // one poke frame's worth of motion between a and b: re-render mid-poke
  SceneState st2 = SceneState::initial(cfg);
  PokeCommand part = cmd;
  part.end = cmd.start + 0.92 * (cmd.end - cmd.start);
  apply_poke(st2, part, 0);
  st2.pusher_active = false;
  a = render_frame(st2);
  auto flow = ground_truth_flow(a, b);

  ImageU8 warped(a.rgb.width, a.rgb.height, 1);
  for (int y = 0; y < a.height(); ++y)
    for (int x = 0; x < a.width(); ++x) {
      if (a.label_at(x, y) != 1) continue;
      int nx = static_cast<int>(std::lround(x + flow.at(x, y, 0)));
      int ny = static_cast<int>(std::lround(y + flow.at(x, y, 1)));
      if (nx >= 0 && ny >= 0 && nx < a.width() && ny < a.height())
        warped.at(nx, ny) = 255;
    }
  long inter = 0, uni = 0;
  for (int y = 0; y < a.height(); ++y)
    for (int x = 0; x < a.width(); ++x) {
      bool w = warped.at(x, y) != 0;
      bool g = b.label_at(x, y) == 1;
      inter += w && g;
      uni += w || g;
    }
  ASSERT_GT(uni, 0);
  EXPECT_GE(static_cast<double>(inter) / uni, 0.95);
}

TEST(Push, ImmovableObjectStaysPut) {
  SceneConfig cfg = preset_one_object(1);
  cfg.objects[0].movable = false;
  SceneState st = SceneState::initial(cfg);
  Pose before = st.poses[0];

  Vec3 c = before.translation;
  PokeCommand cmd;
  cmd.start = Vec3(c.x(), c.y() - 0.12, 0.025);
  cmd.end = Vec3(c.x(), c.y() + 0.02, 0.025);
  cmd.duration_frames = 10;
  auto res = apply_poke(st, cmd, 0);
  for (const auto& frame : res.frame_poses) {
    auto [ang, tr] = pose_delta(before, frame[0]);
    EXPECT_EQ(ang, 0.0);
    EXPECT_EQ(tr, 0.0);
  }
}

TEST(Push, CenterPokeIsPureTranslation) {
  SceneConfig cfg = preset_one_object(1);
  cfg.objects[0].initial_pose = Pose::identity();
  cfg.objects[0].initial_pose.translation = Vec3(0, 0.06, 0.025);
  SceneState st = SceneState::initial(cfg);
  Vec3 c = st.poses[0].translation;

  // straight through the center, perpendicular to the -y face
  PokeCommand cmd;
  cmd.start = Vec3(c.x(), c.y() - 0.10, c.z());
  cmd.end = Vec3(c.x(), c.y() - 0.02, c.z());
  cmd.duration_frames = 10;
  auto res = apply_poke(st, cmd, 0);
  EXPECT_TRUE(res.contacted);
  double yaw = rotation_angle_rad(st.poses[0].rotation);
  EXPECT_LT(yaw, 1e-6);
  EXPECT_GT(st.poses[0].translation.y() - c.y(), 0.005);
  EXPECT_NEAR(st.poses[0].translation.z(), c.z(), 1e-12);
}

TEST(Push, OffsetPokeYawSign) {
  SceneConfig cfg = preset_one_object(1);
  cfg.objects[0].initial_pose = Pose::identity();
  cfg.objects[0].initial_pose.translation = Vec3(0, 0.06, 0.025);
  SceneState st = SceneState::initial(cfg);
  Vec3 c = st.poses[0].translation;

  // long side is y (half extents 0.03, 0.04, 0.025); poke the +y end of the
  // box pushing along +x: lever arm (0, +ly) crossed with u=+x gives
  // negative yaw, i.e. clockwise from above
  PokeCommand cmd;
  cmd.start = Vec3(c.x() - 0.10, c.y() + 0.03, c.z());
  cmd.end = Vec3(c.x() - 0.02, c.y() + 0.03, c.z());
  cmd.duration_frames = 10;
  auto res = apply_poke(st, cmd, 0);
  EXPECT_TRUE(res.contacted);

  double yaw = std::atan2(st.poses[0].rotation(1, 0), st.poses[0].rotation(0, 0));
  EXPECT_LT(yaw, -1e-4);
}

TEST(Push, MissReportsNoContact) {
  SceneConfig cfg = preset_one_object(1);
  SceneState st = SceneState::initial(cfg);
  PokeCommand cmd;
  cmd.start = Vec3(0.3, 0.3, 0.025);
  cmd.end = Vec3(0.35, 0.3, 0.025);
  cmd.duration_frames = 5;
  Pose before = st.poses[0];
  auto res = apply_poke(st, cmd, 0);
  EXPECT_FALSE(res.contacted);
  auto [ang, tr] = pose_delta(before, st.poses[0]);
  EXPECT_EQ(ang + tr, 0.0);
}

TEST(Push, RestingInvariantAfterPokes) {
  SceneConfig cfg = preset_three_objects(11);
  SceneState st = SceneState::initial(cfg);
  auto rng = make_rng(11, 1);
  std::uniform_real_distribution<double> ur(-1, 1);
  for (int poke = 0; poke < 6; ++poke) {
    int k = static_cast<int>(rng() % st.poses.size());
    Vec3 c = st.poses[k].translation;
    Vec3 dir(ur(rng), ur(rng), 0);
    if (dir.norm() < 1e-3) dir = Vec3(1, 0, 0);
    dir.normalize();
    PokeCommand cmd;
    double z = c.z();
    cmd.start = c - dir * 0.12;
    cmd.start.z() = z;
    cmd.end = c - dir * 0.01;
    cmd.end.z() = z;
    cmd.duration_frames = 8;
    apply_poke(st, cmd, -1);
    for (size_t j = 0; j < st.poses.size(); ++j) {
      double low = lowest_point_z(cfg.objects[j].shape, st.poses[j]);
      EXPECT_NEAR(low, cfg.plane_height, 1e-3) << "object " << j << " poke " << poke;
    }
  }
}

TEST(Record, NullPolicyKeepsInitialFrameOnly) {
  SceneConfig cfg = preset_one_object(5, 84, 42);
  NullPolicy policy;
  auto rec = record_sequence(cfg, policy);
  EXPECT_EQ(rec.retained.size(), 1u);
  EXPECT_EQ(rec.retained[0].index, 0);
  for (float v : rec.retained[0].flow_to_next.data) EXPECT_EQ(v, 0.0f);
}

namespace {

// scripted policy poking the single object twice, used to exercise the
// recorder without the discovery stack
struct ScriptedPolicy : PokingPolicy {
  std::vector<PokeCommand> script;
  size_t cursor = 0;
  void observe_initial(const data::FrameRecord&) override {}
  std::optional<PokeCommand> next_poke(const data::FrameRecord&) override {
    if (cursor >= script.size()) return std::nullopt;
    return script[cursor++];
  }
  void observe_poke(const std::vector<data::FrameRecord>&, bool) override {}
};

}  // namespace

TEST(Record, RetainedFramesAllMoveAndRoundTrip) {
  SceneConfig cfg = preset_one_object(5, 168, 81);
  Vec3 c = cfg.objects[0].initial_pose.translation;
  ScriptedPolicy policy;
  PokeCommand cmd;
  cmd.start = Vec3(c.x(), c.y() - 0.12, c.z());
  cmd.end = Vec3(c.x(), c.y() - 0.02, c.z());
  cmd.duration_frames = 8;
  policy.script.push_back(cmd);
  auto rec = record_sequence(cfg, policy);
  ASSERT_GT(rec.retained.size(), 1u);
  for (size_t i = 1; i < rec.retained.size(); ++i) {
    double delta = sim::detail::max_pose_delta(rec.retained[i - 1].gt_poses,
                                               rec.retained[i].gt_poses);
    EXPECT_GE(delta, 1e-5) << "frame " << i;
  }

  auto dir = std::filesystem::temp_directory_path() / "pokerec_test_ds";
  std::filesystem::remove_all(dir);
  data::save_dataset(dir, cfg, rec.retained);
  auto ds = data::load_dataset(dir);
  ASSERT_EQ(ds.frames.size(), rec.retained.size());
  EXPECT_EQ(ds.scene.objects.size(), cfg.objects.size());
  // quantization bounds: color to 1/255, depth to 1 mm
  const auto& a = rec.retained[2];
  const auto& b = ds.frames[2];
  for (size_t i = 0; i < a.rgb.data.size(); i += 97)
    EXPECT_NEAR(a.rgb.data[i], b.rgb.data[i], 0.5 / 255.0 + 1e-6);
  for (size_t i = 0; i < a.depth.data.size(); i += 97)
    EXPECT_NEAR(a.depth.data[i], b.depth.data[i], 5.5e-4);
  EXPECT_EQ(a.robot_mask.data, b.robot_mask.data);
  EXPECT_EQ(a.gt_labels.data, b.gt_labels.data);
  EXPECT_EQ(a.flow_to_next.data, b.flow_to_next.data);
  for (size_t k = 0; k < a.gt_poses.size(); ++k) {
    // json metadata round-trips doubles bit-exactly
    EXPECT_EQ((a.gt_poses[k].rotation - b.gt_poses[k].rotation).cwiseAbs().maxCoeff(), 0.0);
    EXPECT_EQ((a.gt_poses[k].translation - b.gt_poses[k].translation).cwiseAbs().maxCoeff(),
              0.0);
  }
  std::filesystem::remove_all(dir);
}

TEST(Record, DeterministicBytes) {
  SceneConfig cfg = preset_one_object(9, 84, 42);
  Vec3 c = cfg.objects[0].initial_pose.translation;
  auto run = [&](const std::filesystem::path& dir) {
    ScriptedPolicy policy;
    PokeCommand cmd;
    cmd.start = Vec3(c.x(), c.y() - 0.12, c.z());
    cmd.end = Vec3(c.x(), c.y() - 0.03, c.z());
    cmd.duration_frames = 5;
    policy.script.push_back(cmd);
    auto rec = record_sequence(cfg, policy);
    std::filesystem::remove_all(dir);
    data::save_dataset(dir, cfg, rec.retained);
  };
  auto base = std::filesystem::temp_directory_path();
  run(base / "pokerec_det_a");
  run(base / "pokerec_det_b");
  for (const auto& entry :
       std::filesystem::recursive_directory_iterator(base / "pokerec_det_a")) {
    if (!entry.is_regular_file()) continue;
    auto rel = std::filesystem::relative(entry.path(), base / "pokerec_det_a");
    std::ifstream fa(entry.path(), std::ios::binary);
    std::ifstream fb(base / "pokerec_det_b" / rel, std::ios::binary);
    ASSERT_TRUE(fb.good()) << rel;
    std::string sa((std::istreambuf_iterator<char>(fa)), {});
    std::string sb((std::istreambuf_iterator<char>(fb)), {});
    EXPECT_EQ(sa, sb) << rel;
  }
  std::filesystem::remove_all(base / "pokerec_det_a");
  std::filesystem::remove_all(base / "pokerec_det_b");
}

TEST(Scene, ValidationCatchesFloatingAndOverlap) {
  SceneConfig cfg = preset_three_objects(1);
  EXPECT_NO_THROW(validate_scene(cfg));
  SceneConfig bad = cfg;
  bad.objects[0].initial_pose.translation.z() += 0.01;
  EXPECT_THROW(validate_scene(bad), Error);
  SceneConfig overlap = cfg;
  overlap.objects[1].initial_pose.translation =
      overlap.objects[0].initial_pose.translation;
  EXPECT_THROW(validate_scene(overlap), Error);
}

TEST(Scene, JsonRoundTrip) {
  SceneConfig cfg = preset_three_objects(21);
  json j = scene_to_json(cfg);
  SceneConfig back = scene_from_json(j);
  EXPECT_EQ(scene_to_json(back).dump(), j.dump());
}

TEST(Scene, PresetsValidateAndUnknownRejected) {
  for (const auto& name : scene_preset_names())
    EXPECT_NO_THROW(validate_scene(scene_preset(name, 7))) << name;
  EXPECT_THROW(scene_preset("none", 7), Error);
}

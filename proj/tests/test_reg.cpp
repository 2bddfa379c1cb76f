// SPDX-License-Identifier: Apache-2.0
#include <gtest/gtest.h>

#include "poke/discover/policy.hpp"
#include "poke/reg/init.hpp"
#include "poke/reg/registration.hpp"
#include "poke/reg/track.hpp"
#include "poke/sim/record.hpp"
#include "poke/sim/render.hpp"

namespace {

using namespace poke;
using nlohmann::json;

data::FrameRecord flat_frame(int w, int h, double depth) {
  data::FrameRecord f;
  f.rgb = ImageF(w, h, 3);
  f.depth = ImageF(w, h, 1);
  f.flow_to_next = ImageF(w, h, 2);
  f.robot_mask = ImageU8(w, h, 1);
  f.gt_labels = ImageU8(w, h, 1);
  f.camera.fx = f.camera.fy = 100.0;
  f.camera.cx = w / 2.0;
  f.camera.cy = h / 2.0;
  f.camera.width = w;
  f.camera.height = h;
  for (int i = 0; i < w * h; ++i) f.depth.data[i] = static_cast<float>(depth);
  return f;
}

ImageU8 full_mask(int w, int h) {
  ImageU8 m(w, h, 1);
  std::fill(m.data.begin(), m.data.end(), 255);
  return m;
}

ImageU8 erode(const ImageU8& m, int r) {
  ImageU8 out(m.width, m.height, 1);
  for (int y = 0; y < m.height; ++y)
    for (int x = 0; x < m.width; ++x) {
      bool keep = true;
      for (int dy = -r; dy <= r && keep; ++dy)
        for (int dx = -r; dx <= r && keep; ++dx) {
          int px = x + dx, py = y + dy;
          if (px < 0 || py < 0 || px >= m.width || py >= m.height || m.at(px, py) == 0)
            keep = false;
        }
      if (keep) out.at(x, y) = 255;
    }
  return out;
}

Pose random_pose(std::mt19937_64& rng, double rot_scale, double tr_scale) {
  std::normal_distribution<double> n(0.0, 1.0);
  Twist t;
  t.omega = Vec3(n(rng), n(rng), n(rng)) * rot_scale;
  t.v = Vec3(n(rng), n(rng), n(rng)) * tr_scale;
  return se3_exp(t);
}

double pose_gap_deg(const Pose& a, const Pose& b) {
  auto [ang, tr] = pose_delta(a, b);
  return ang * 180.0 / M_PI;
}

TEST(FlowCorr, ZeroFlowIdentity) {
  auto a = flat_frame(32, 24, 0.8);
  auto b = a;
  auto c = reg::flow_to_correspondences(a, b, full_mask(32, 24));
  // the bilinear target stencil leaves the image on the last row/column
  ASSERT_EQ(c.size(), 31u * 23u);
  for (size_t i = 0; i < c.size(); ++i) {
    EXPECT_LT((c.target[i] - c.source[i]).norm(), 1e-12);
  }
}

TEST(FlowCorr, SimulatorTranslationOracle) {
  auto cfg = sim::preset_one_object(7);
  auto state = sim::SceneState::initial(cfg);
  state.pusher_active = false;
  state.pusher_center = Vec3(5, 5, 1);
  sim::RenderOptions ropt;
  auto a = sim::render_frame(state, ropt);
  state.poses[0].translation += Vec3(0.01, 0.0, 0.0);
  auto b = sim::render_frame(state, ropt);
  a.flow_to_next = sim::ground_truth_flow(a, b);

  // restrict to the object's flat top face, where bilinear depth is smooth
  double top_z = cfg.plane_height + 2.0 * cfg.objects[0].shape.half.z();
  ImageU8 top(a.width(), a.height(), 1);
  for (int y = 0; y < a.height(); ++y)
    for (int x = 0; x < a.width(); ++x) {
      if (a.label_at(x, y) != 1) continue;
      Vec3 p = a.camera.backproject(x, y, a.depth.at(x, y));
      if (std::abs(p.z() - top_z) < 5e-4) top.at(x, y) = 255;
    }
  ImageU8 mask = erode(top, 3);
  auto c = reg::flow_to_correspondences(a, b, mask);
  ASSERT_GE(c.size(), 10u);
  for (size_t i = 0; i < c.size(); ++i) {
    Vec3 d = c.target[i] - c.source[i];
    EXPECT_NEAR(d.x(), 0.01, 1e-4);
    EXPECT_NEAR(d.y(), 0.0, 1e-4);
    EXPECT_NEAR(d.z(), 0.0, 1e-4);
  }
}

TEST(FlowCorr, InvalidDepthAndRobotDropped) {
  auto a = flat_frame(16, 16, 0.7);
  auto b = a;
  size_t all = reg::flow_to_correspondences(a, b, full_mask(16, 16)).size();
  ASSERT_EQ(all, 15u * 15u);

  auto a2 = a;
  a2.depth.at(5, 5) = 0.0f;      // invalid source depth
  a2.robot_mask.at(6, 6) = 255;  // pusher over the source pixel
  auto b2 = b;
  b2.depth.at(8, 8) = 0.0f;      // invalid depth inside four target stencils
  b2.robot_mask.at(9, 9) = 255;  // pusher inside three more target stencils
  auto c = reg::flow_to_correspondences(a2, b2, full_mask(16, 16));
  EXPECT_EQ(c.size(), all - 9u);
}

TEST(FlowCorr, OutOfBoundsTargetDropped) {
  auto a = flat_frame(16, 16, 0.7);
  auto b = a;
  for (int i = 0; i < 16 * 16; ++i) a.flow_to_next.data[2 * i] = 40.0f;
  EXPECT_THROW(
      {
        try {
          reg::flow_to_correspondences(a, b, full_mask(16, 16));
        } catch (const Error& e) {
          EXPECT_EQ(e.error_class(), ErrorClass::data);
          throw;
        }
      },
      Error);
}

TEST(Ls, IdentityOnEqualClouds) {
  auto rng = make_rng(11);
  std::uniform_real_distribution<double> u(-0.2, 0.2);
  reg::CorrespondenceSet c;
  for (int i = 0; i < 50; ++i) {
    Vec3 p(u(rng), u(rng), u(rng));
    c.source.push_back(p);
    c.target.push_back(p);
  }
  Pose p = reg::rigid_least_squares(c);
  EXPECT_LT((p.rotation - Mat3::Identity()).cwiseAbs().maxCoeff(), 1e-12);
  EXPECT_LT(p.translation.norm(), 1e-12);
}

TEST(Ls, ExactRecoveryKnownMotion) {
  Pose truth;
  truth.rotation << 0, -1, 0, 1, 0, 0, 0, 0, 1;  // 90 degrees about z
  truth.translation = Vec3(0.1, 0, 0);
  std::vector<Vec3> pts = {Vec3(0, 0, 0), Vec3(1, 0, 0), Vec3(0, 1, 0), Vec3(0, 0, 1)};
  reg::CorrespondenceSet c;
  for (const auto& p : pts) {
    c.source.push_back(p);
    c.target.push_back(truth.apply(p));
  }
  Pose est = reg::rigid_least_squares(c);
  EXPECT_LT((est.rotation - truth.rotation).cwiseAbs().maxCoeff(), 1e-9);
  EXPECT_LT((est.translation - truth.translation).norm(), 1e-9);
}

TEST(Ls, CollinearDegenerate) {
  reg::CorrespondenceSet c;
  for (int i = 0; i < 5; ++i) {
    Vec3 p(0.01 * i, 0.02 * i, -0.005 * i);
    c.source.push_back(p);
    c.target.push_back(p + Vec3(0.1, 0, 0));
  }
  EXPECT_THROW(
      {
        try {
          reg::rigid_least_squares(c);
        } catch (const Error& e) {
          EXPECT_EQ(e.error_class(), ErrorClass::geometry);
          throw;
        }
      },
      Error);
}

TEST(Ls, LeftInvariance) {
  auto rng = make_rng(12);
  std::uniform_real_distribution<double> u(-0.3, 0.3);
  reg::CorrespondenceSet c;
  for (int i = 0; i < 30; ++i) {
    c.source.push_back(Vec3(u(rng), u(rng), u(rng)));
    c.target.push_back(Vec3(u(rng), u(rng), u(rng)));
    c.weights.push_back(0.5 + i * 0.05);
  }
  Pose p = reg::rigid_least_squares(c);

  Pose q = random_pose(rng, 0.8, 0.4);
  reg::CorrespondenceSet moved;
  for (size_t i = 0; i < c.size(); ++i) {
    moved.source.push_back(q.apply(c.source[i]));
    moved.target.push_back(q.apply(c.target[i]));
    moved.weights.push_back(c.weights[i]);
  }
  Pose expected = q * p * q.inverse();
  Pose got = reg::rigid_least_squares(moved);
  EXPECT_LT((got.rotation - expected.rotation).cwiseAbs().maxCoeff(), 1e-9);
  EXPECT_LT((got.translation - expected.translation).norm(), 1e-9);
}

TEST(Ls, WeightTwoEqualsDuplicatedPair) {
  auto rng = make_rng(13);
  std::uniform_real_distribution<double> u(-0.3, 0.3);
  Pose truth = random_pose(rng, 0.5, 0.2);
  reg::CorrespondenceSet weighted, duplicated;
  for (int i = 0; i < 12; ++i) {
    Vec3 s(u(rng), u(rng), u(rng));
    Vec3 g = truth.apply(s) + Vec3(u(rng), u(rng), u(rng)) * 0.01;
    weighted.source.push_back(s);
    weighted.target.push_back(g);
    weighted.weights.push_back(i == 4 ? 2.0 : 1.0);
    duplicated.source.push_back(s);
    duplicated.target.push_back(g);
    if (i == 4) {
      duplicated.source.push_back(s);
      duplicated.target.push_back(g);
    }
  }
  Pose a = reg::rigid_least_squares(weighted);
  Pose b = reg::rigid_least_squares(duplicated);
  EXPECT_LT((a.rotation - b.rotation).cwiseAbs().maxCoeff(), 1e-12);
  EXPECT_LT((a.translation - b.translation).norm(), 1e-12);
}

TEST(Icp, IdenticalCloudsFixedPoint) {
  auto rng = make_rng(14);
  std::uniform_real_distribution<double> u(-0.1, 0.1);
  PointCloud cloud;
  for (int i = 0; i < 200; ++i) cloud.points.push_back(Vec3(u(rng), u(rng), u(rng)));
  Pose est = reg::icp_refine(cloud, cloud, Pose{});
  EXPECT_LT((est.rotation - Mat3::Identity()).cwiseAbs().maxCoeff(), 1e-12);
  EXPECT_LT(est.translation.norm(), 1e-12);
}

TEST(Icp, SphereRotationRecovery) {
  auto rng = make_rng(21);
  std::normal_distribution<double> n(0.0, 1.0);
  Vec3 center(0.05, 0.02, 0.03);
  PointCloud src;
  for (int i = 0; i < 1000; ++i) {
    Vec3 d(n(rng), n(rng), n(rng));
    src.points.push_back(center + 0.05 * d.normalized());
  }
  Pose truth = yaw_about(5.0 * M_PI / 180.0, center);
  PointCloud dst = src.transformed(truth);

  Pose est = reg::icp_refine(src, dst, Pose{});
  EXPECT_LT(pose_gap_deg(est, truth), 0.1);
  EXPECT_LT((est.translation - truth.translation).norm(), 2e-4);
}

TEST(Icp, OptimalInitUnchanged) {
  auto rng = make_rng(15);
  std::uniform_real_distribution<double> u(-0.1, 0.1);
  PointCloud src;
  for (int i = 0; i < 300; ++i) src.points.push_back(Vec3(u(rng), u(rng), u(rng)));
  Pose truth = random_pose(rng, 0.3, 0.05);
  PointCloud dst = src.transformed(truth);
  Pose est = reg::icp_refine(src, dst, truth);
  auto [ang, tr] = pose_delta(est, truth);
  EXPECT_LT(ang, 1e-9);
  EXPECT_LT(tr, 1e-9);
}

double trimmed_rms(const PointCloud& src, const PointCloud& dst, const Pose& p,
                   double trim_ratio) {
  std::vector<double> d2;
  for (const auto& s : src.points) {
    Vec3 moved = p.apply(s);
    double best = 1e30;
    for (const auto& g : dst.points) best = std::min(best, (g - moved).squaredNorm());
    d2.push_back(best);
  }
  size_t keep = std::max<size_t>(3, static_cast<size_t>(d2.size() * trim_ratio));
  std::nth_element(d2.begin(), d2.begin() + keep - 1, d2.end());
  double sum = 0.0;
  for (size_t i = 0; i < keep; ++i) sum += d2[i];
  return std::sqrt(sum / keep);
}

TEST(Icp, NeverWorseThanInitAndImprovesNoisyStart) {
  auto rng = make_rng(16);
  std::uniform_real_distribution<double> u(-0.1, 0.1);
  std::normal_distribution<double> n(0.0, 0.001);
  PointCloud src;
  for (int i = 0; i < 300; ++i) src.points.push_back(Vec3(u(rng), u(rng), u(rng)));
  Pose truth = random_pose(rng, 0.2, 0.03);
  PointCloud dst = src.transformed(truth);
  for (auto& p : dst.points) p += Vec3(n(rng), n(rng), n(rng));

  Pose init = truth * random_pose(rng, 0.05, 0.01);  // ~3 degrees, ~1 cm off
  Pose est = reg::icp_refine(src, dst, init);

  double rms_init = trimmed_rms(src, dst, init, 0.9);
  double rms_est = trimmed_rms(src, dst, est, 0.9);
  EXPECT_LE(rms_est, rms_init + 1e-12);
  EXPECT_LT(pose_gap_deg(est, truth), pose_gap_deg(init, truth));
}

TEST(GridNN, MatchesBruteForce) {
  auto rng = make_rng(17);
  std::uniform_real_distribution<double> u(-0.2, 0.2);
  std::vector<Vec3> pts;
  for (int i = 0; i < 500; ++i) pts.push_back(Vec3(u(rng), u(rng), u(rng)));
  reg::GridNN nn(pts);
  for (int q = 0; q < 200; ++q) {
    Vec3 query(u(rng) * 1.5, u(rng) * 1.5, u(rng) * 1.5);
    int got = nn.nearest(query);
    int want = 0;
    double best = 1e30;
    for (size_t i = 0; i < pts.size(); ++i) {
      double d = (pts[i] - query).squaredNorm();
      if (d < best) {
        best = d;
        want = static_cast<int>(i);
      }
    }
    ASSERT_GE(got, 0);
    EXPECT_DOUBLE_EQ((pts[got] - query).squaredNorm(), (pts[want] - query).squaredNorm());
  }
}

TEST(Track, SimulatorPairPureTranslation) {
  auto cfg = sim::preset_one_object(7);
  auto state = sim::SceneState::initial(cfg);
  state.pusher_active = false;
  state.pusher_center = Vec3(5, 5, 1);
  sim::RenderOptions ropt;
  auto a = sim::render_frame(state, ropt);
  state.poses[0].translation += Vec3(0.008, -0.003, 0.0);
  auto b = sim::render_frame(state, ropt);
  a.flow_to_next = sim::ground_truth_flow(a, b);

  PointCloud obj;
  for (int y = 0; y < a.height(); ++y)
    for (int x = 0; x < a.width(); ++x)
      if (a.label_at(x, y) == 1)
        obj.points.push_back(a.camera.backproject(x, y, a.depth.at(x, y)));
  OrientedBoundingBox obb = fit_obb(obj);

  reg::TrackOptions topt;
  auto t = reg::track_pair(a, b, obb, Vec3::UnitZ(), cfg.plane_height, topt);
  ASSERT_TRUE(t.ok);
  EXPECT_LT((t.motion.translation - Vec3(0.008, -0.003, 0.0)).norm(), 1.5e-3);
  EXPECT_LT(rotation_angle_rad(t.motion.rotation) * 180.0 / M_PI, 0.5);
}

int mask_pixels(const ImageU8& m) {
  int n = 0;
  for (uint8_t v : m.data) n += v != 0;
  return n;
}

json static_report() {
  return json{{"plane", {{"normal", {0.0, 0.0, 1.0}}, {"offset", 0.0}}},
              {"proposals", json::array({{{"id", 0}, {"status", "candidate"}}})},
              {"pokes", json::array()}};
}

TEST(Init, NoPokesAllIdentity) {
  std::vector<data::FrameRecord> frames(3, flat_frame(32, 24, 0.8));
  auto r = reg::init_masks_and_poses(frames, static_report());
  ASSERT_EQ(r.objects.size(), 1u);
  EXPECT_EQ(r.warnings, 0);
  const auto& o = r.objects[0];
  ASSERT_EQ(o.poses.size(), 3u);
  for (const auto& p : o.poses) {
    EXPECT_LT((p.rotation - Mat3::Identity()).cwiseAbs().maxCoeff(), 1e-15);
    EXPECT_LT(p.translation.norm(), 1e-15);
  }
  for (const auto& m : o.masks) EXPECT_EQ(mask_pixels(m), 0);
}

// Matches a proposal to the simulator object whose position is nearest to the
// event's pre-poke box center.
int matched_object(const json& event, const data::FrameRecord& pre) {
  Vec3 center = sim::vec3_from_json(event["obb_before"]["center"]);
  int best_k = 0;
  double best = 1e30;
  for (size_t k = 0; k < pre.gt_poses.size(); ++k) {
    double d = (pre.gt_poses[k].translation - center).norm();
    if (d < best) {
      best = d;
      best_k = static_cast<int>(k);
    }
  }
  return best_k;
}

TEST(Init, SinglePokeCumulativeAndPairDrift) {
  auto cfg = sim::preset_one_object(7);
  discover::DiscoverOptions dopt;
  dopt.pokes_per_object = 1;
  dopt.flow_threshold = 0.1;
  discover::DiscoveryPolicy policy(dopt);
  auto rr = sim::record_sequence(cfg, policy);
  ASSERT_EQ(rr.report["confirmed_count"], 1);

  reg::InitOptions iopt;
  iopt.track.flow_threshold = 0.1;
  auto r = reg::init_masks_and_poses(rr.retained, rr.report, iopt);
  ASSERT_EQ(r.objects.size(), 1u);
  const auto& o = r.objects[0];
  ASSERT_EQ(o.poses.size(), rr.retained.size());

  const auto& ev = rr.report["pokes"][0];
  ASSERT_TRUE(ev.contains("retained_begin"));
  int rb = ev["retained_begin"], re = ev["retained_end"];
  ASSERT_GE(rb, 1);
  ASSERT_GT(re, rb);

  // per-pair drift bound on tracked pairs
  int tracked_pairs = 0;
  for (int t = rb - 1; t + 1 < re; ++t) {
    if (!o.pair_tracked[t]) continue;
    ++tracked_pairs;
    Pose gt = rr.retained[t + 1].gt_poses[0] * rr.retained[t].gt_poses[0].inverse();
    Pose est = o.poses[t + 1] * o.poses[t].inverse();
    auto [ang, tr] = pose_delta(est, gt);
    EXPECT_LT(ang * 180.0 / M_PI, 0.1);
    EXPECT_LT(tr, 5e-4);
  }
  EXPECT_GE(tracked_pairs, 3);

  // cumulative pose across the whole sequence
  int last = static_cast<int>(rr.retained.size()) - 1;
  Pose gt_total = rr.retained[last].gt_poses[0] * rr.retained[0].gt_poses[0].inverse();
  auto [ang, tr] = pose_delta(o.poses[last], gt_total);
  EXPECT_LT(ang * 180.0 / M_PI, 2.0);
  EXPECT_LT(tr, 0.01);

  // evidence masks exist on the poke frames, including the warped last one
  for (int t = rb - 1; t < re && t <= last; ++t) EXPECT_GT(mask_pixels(o.masks[t]), 0);

  // twist serialization round-trips the pose track
  auto back = reg::init_result_from_json(reg::init_poses_json(r));
  ASSERT_EQ(back.objects.size(), 1u);
  ASSERT_EQ(back.objects[0].poses.size(), o.poses.size());
  for (size_t t = 0; t < o.poses.size(); ++t) {
    auto [a2, t2] = pose_delta(back.objects[0].poses[t], o.poses[t]);
    EXPECT_LT(a2, 1e-12);
    EXPECT_LT(t2, 1e-12);
  }
}

TEST(Init, UntouchedObjectsHeldAndMasksEmpty) {
  auto cfg = sim::preset_three_objects(3);
  discover::DiscoverOptions dopt;
  dopt.pokes_per_object = 1;
  dopt.flow_threshold = 0.1;
  discover::DiscoveryPolicy policy(dopt);
  auto rr = sim::record_sequence(cfg, policy);
  ASSERT_EQ(rr.report["confirmed_count"], 3);

  reg::InitOptions iopt;
  iopt.track.flow_threshold = 0.1;
  auto r = reg::init_masks_and_poses(rr.retained, rr.report, iopt);
  ASSERT_EQ(r.objects.size(), 3u);

  std::map<int, int> slot;
  for (size_t i = 0; i < r.objects.size(); ++i) slot[r.objects[i].proposal_id] = i;

  for (const auto& ev : rr.report["pokes"]) {
    int rb = ev["retained_begin"], re = ev["retained_end"];
    if (rb < 1) continue;
    int owner = slot.at(ev["proposal"].get<int>());
    for (int i = 0; i < static_cast<int>(r.objects.size()); ++i) {
      if (i == owner) continue;
      const auto& o = r.objects[i];
      // Adjacent events share boundary frames, so only strictly interior
      // frames are guaranteed free of other objects' evidence.
      for (int t = rb; t < re - 1; ++t) EXPECT_EQ(mask_pixels(o.masks[t]), 0);
      for (int t = rb - 1; t + 1 < re; ++t) {
        auto [ang, tr] = pose_delta(o.poses[t + 1], o.poses[t]);
        EXPECT_LT(ang, 1e-15);
        EXPECT_LT(tr, 1e-15);
      }
    }
    EXPECT_GT(mask_pixels(r.objects[owner].masks[rb - 1]), 0);
  }

  // each confirmed object's cumulative pose tracks its simulator ground truth
  int last = static_cast<int>(rr.retained.size()) - 1;
  for (const auto& ev : rr.report["pokes"]) {
    if (ev["outcome"] != "confirmed_update") continue;
    int k = matched_object(ev, rr.retained[0]);
    const auto& o = r.objects.at(slot.at(ev["proposal"].get<int>()));
    Pose gt_total = rr.retained[last].gt_poses[k] * rr.retained[0].gt_poses[k].inverse();
    auto [ang, tr] = pose_delta(o.poses[last], gt_total);
    EXPECT_LT(ang * 180.0 / M_PI, 2.0);
    EXPECT_LT(tr, 0.01);
  }
}

}  // namespace

// SPDX-License-Identifier: Apache-2.0
#pragma once

#include <map>
#include <string>

#include "poke/data/dataset.hpp"
#include "poke/discover/proposals.hpp"
#include "poke/reg/track.hpp"

namespace poke::reg {

struct InitOptions {
  TrackOptions track;
};

struct ObjectInit {
  int proposal_id = -1;
  std::string status;
  std::vector<ImageU8> masks;      // per frame, 255 = initialized object pixel
  std::vector<Pose> poses;         // cumulative world motion since frame 0
  std::vector<bool> pair_tracked;  // pair (t, t+1) produced a motion estimate
};

struct InitResult {
  std::vector<ObjectInit> objects;  // discovery-report proposal order
  int warnings = 0;                 // pairs held for lack of correspondences
};

// Initializes per-object masks and pose tracks from the recorded sequence and
// the discovery report. The poked proposal owns the foreground: for each poke
// event, every frame pair whose second frame falls in the event's retained
// range is tracked with that proposal's obb, the moving-pixel evidence becomes
// the object's mask on the pair's first frame, and the last poke frame gets
// the evidence warped forward along the flow. Pose tracks compose the pair
// motions in order; frames outside an object's pokes and untrackable pairs
// contribute identity, so the pose is held.
inline InitResult init_masks_and_poses(const std::vector<data::FrameRecord>& frames,
                                       const json& report, const InitOptions& opt = {}) {
  require(!frames.empty(), ErrorClass::data, "init_masks_and_poses: no frames");
  const int n = static_cast<int>(frames.size());
  const int w = frames[0].width(), h = frames[0].height();

  Vec3 plane_normal = sim::vec3_from_json(report.at("plane").at("normal"));
  double plane_offset = report.at("plane").at("offset");

  InitResult out;
  std::map<int, int> slot;
  for (const auto& pj : report.at("proposals")) {
    ObjectInit oi;
    oi.proposal_id = pj.at("id");
    oi.status = pj.at("status");
    oi.masks.assign(n, ImageU8(w, h, 1));
    oi.poses.assign(n, Pose{});
    oi.pair_tracked.assign(n > 0 ? n - 1 : 0, false);
    slot[oi.proposal_id] = static_cast<int>(out.objects.size());
    out.objects.push_back(std::move(oi));
  }

  std::vector<std::vector<Pose>> rel(out.objects.size(),
                                     std::vector<Pose>(n > 0 ? n - 1 : 0));
  for (const auto& ev : report.at("pokes")) {
    if (!ev.contains("retained_begin")) continue;
    int rb = ev.at("retained_begin"), re = ev.at("retained_end");
    if (rb < 1 || re <= rb) continue;  // poke left no retained motion frames
    auto it = slot.find(ev.at("proposal").get<int>());
    require(it != slot.end(), ErrorClass::data,
            "init_masks_and_poses: poke references unknown proposal");
    ObjectInit& oi = out.objects[it->second];

    OrientedBoundingBox obb = discover::obb_from_json(ev.at("obb_before"));
    int last = std::min(re - 1, n - 1);
    for (int t = rb - 1; t < last; ++t) {
      PairTrack pt = track_pair(frames[t], frames[t + 1], obb, plane_normal,
                                plane_offset, opt.track);
      oi.masks[t] = std::move(pt.mask_a);
      if (pt.ok) {
        oi.pair_tracked[t] = true;
        rel[it->second][t] = pt.motion;
        obb = obb.transformed(pt.motion);
      } else {
        ++out.warnings;
      }
    }
    if (last >= 1) oi.masks[last] = warp_mask_forward(oi.masks[last - 1], frames[last - 1]);
  }

  for (size_t k = 0; k < out.objects.size(); ++k)
    for (int t = 0; t + 1 < n; ++t)
      out.objects[k].poses[t + 1] = rel[k][t] * out.objects[k].poses[t];
  return out;
}

inline json init_poses_json(const InitResult& r) {
  json objs = json::array();
  for (const auto& o : r.objects) {
    json twists = json::array();
    for (const auto& p : o.poses) {
      Vec6 c = se3_log(p).coeffs();
      twists.push_back({c(0), c(1), c(2), c(3), c(4), c(5)});
    }
    json tracked = json::array();
    for (bool b : o.pair_tracked) tracked.push_back(b);
    objs.push_back({{"proposal", o.proposal_id},
                    {"status", o.status},
                    {"twists", std::move(twists)},
                    {"pair_tracked", std::move(tracked)}});
  }
  return json{{"objects", std::move(objs)}};
}

// Pose tracks from a serialized init file; masks are stored as images and
// loaded separately.
inline InitResult init_result_from_json(const json& j) {
  InitResult out;
  for (const auto& oj : j.at("objects")) {
    ObjectInit oi;
    oi.proposal_id = oj.at("proposal");
    oi.status = oj.at("status");
    for (const auto& tw : oj.at("twists")) {
      Vec6 c;
      for (int i = 0; i < 6; ++i) c(i) = tw.at(i).get<double>();
      oi.poses.push_back(se3_exp(Twist::from_coeffs(c)));
    }
    for (const auto& b : oj.at("pair_tracked")) oi.pair_tracked.push_back(b.get<bool>());
    out.objects.push_back(std::move(oi));
  }
  return out;
}

}  // namespace poke::reg

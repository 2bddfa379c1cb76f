// SPDX-License-Identifier: Apache-2.0
#pragma once

#include "poke/discover/poking.hpp"
#include "poke/sim/record.hpp"

namespace poke::discover {

struct DiscoverOptions {
  int ransac_iterations = 256;
  double inlier_threshold = 0.005;
  double linkage_radius = 0.015;
  int min_cluster_points = 80;
  double flow_threshold = 1.0;  // px
  double move_fraction = 0.2;
  int pokes_per_object = 4;
  double pusher_radius = 0.008;
  double pusher_half_length = 0.08;
  PlanOptions plan;
  reg::TrackOptions track;
  std::uint64_t seed = 0;
};

// Drives discovery over a recorded interaction: segment the plane, cluster
// proposals, visit them by corner distance, poke to separate movable objects
// from clutter, and keep each confirmed proposal's obb registered to its
// motion. Misses without contact are retried once with doubled push length.
class DiscoveryPolicy : public sim::PokingPolicy {
 public:
  explicit DiscoveryPolicy(const DiscoverOptions& opt) : opt_(opt) {
    opt_.track.flow_threshold = opt_.flow_threshold;
    opt_.track.plane_threshold = opt_.inlier_threshold;
  }

  void observe_initial(const data::FrameRecord& frame) override {
    PointCloud cloud = cloud_from_frame(frame);
    plane_ = segment_plane(cloud, frame.camera.pose.translation, opt_.ransac_iterations,
                           opt_.inlier_threshold, opt_.seed);
    corner_ = right_down_corner(cloud, plane_);
    proposals_ = cluster_proposals(points_above_plane(cloud, plane_),
                                   opt_.linkage_radius, opt_.min_cluster_points);
    for (auto& p : proposals_) p.obb = completed_obb(p.points, plane_);
    order_ = order_proposals(proposals_, corner_);
    prev_frame_ = frame;
  }

  std::optional<sim::PokeCommand> next_poke(const data::FrameRecord& current) override {
    prev_frame_ = current;
    while (cursor_ < static_cast<int>(order_.size())) {
      ObjectProposal& p = proposals_[order_[cursor_]];
      bool done = p.status == ProposalStatus::pruned || p.unreachable ||
                  (p.status == ProposalStatus::confirmed &&
                   p.pokes_done >= opt_.pokes_per_object);
      if (done) {
        ++cursor_;
        continue;
      }
      double scale = retry_pending_ == p.id ? 2.0 : 1.0;
      std::vector<OrientedBoundingBox> obstacles;
      for (const auto& other : proposals_)
        if (other.id != p.id) obstacles.push_back(other.obb);
      try {
        pending_plan_ = plan_poke(p, p.pokes_done, plane_, opt_.pusher_radius,
                                  opt_.pusher_half_length, obstacles, opt_.plan, scale);
      } catch (const Error& e) {
        p.unreachable = true;
        events_.push_back({{"proposal", p.id}, {"outcome", "unreachable"},
                           {"detail", e.what()}});
        ++cursor_;
        continue;
      }
      if (retry_pending_ == p.id) retry_pending_ = -1;
      pending_proposal_ = p.id;
      return pending_plan_.command;
    }
    return std::nullopt;
  }

  void observe_poke(const std::vector<data::FrameRecord>& frames,
                    bool contacted) override {
    ObjectProposal& p = *proposal_by_id(pending_proposal_);
    std::vector<data::FrameRecord> seq = with_flow(prev_frame_, frames);

    double max_fraction = 0.0;
    for (size_t i = 0; i + 1 < seq.size(); ++i)
      max_fraction =
          std::max(max_fraction, moving_fraction(seq[i], p.obb, opt_.flow_threshold));
    bool moved = max_fraction > opt_.move_fraction;

    json event{{"proposal", p.id},
               {"raw_begin", raw_cursor_},
               {"raw_end", raw_cursor_ + static_cast<int>(frames.size())},
               {"contacted", contacted},
               {"max_moving_fraction", max_fraction},
               {"obb_before", obb_to_json(p.obb)},
               {"plan", plan_to_json(pending_plan_)}};
    raw_cursor_ += static_cast<int>(frames.size());

    if (!moved) {
      if (!contacted && !p.retried) {
        p.retried = true;
        retry_pending_ = p.id;
        event["outcome"] = "miss_retry";
      } else if (p.status == ProposalStatus::candidate) {
        p.status = ProposalStatus::pruned;
        event["outcome"] = "pruned";
      } else {
        p.pokes_done += 1;  // contacted but nothing moved; spend the poke
        event["outcome"] = "no_motion";
      }
      events_.push_back(std::move(event));
      return;
    }

    p.status = ProposalStatus::confirmed;
    PokeTrackResult track = update_obb(p.obb, seq, plane_, opt_.track);
    p.obb = track.obb;
    p.pokes_done += 1;
    json motions = json::array();
    for (size_t i = 0; i < track.motions.size(); ++i)
      motions.push_back({{"ok", static_cast<bool>(track.pair_ok[i])},
                         {"motion", sim::pose_to_json(track.motions[i])}});
    event["outcome"] = "confirmed_update";
    event["registration_warnings"] = track.warnings;
    event["motions"] = std::move(motions);
    event["obb_after"] = obb_to_json(p.obb);
    events_.push_back(std::move(event));
  }

  json report() const override {
    json props = json::array();
    for (const auto& p : proposals_)
      props.push_back({{"id", p.id},
                       {"status", to_string(p.status)},
                       {"pokes_done", p.pokes_done},
                       {"retried", p.retried},
                       {"unreachable", p.unreachable},
                       {"point_count", p.points.points.size()},
                       {"obb", obb_to_json(p.obb)}});
    int confirmed = 0;
    for (const auto& p : proposals_)
      confirmed += p.status == ProposalStatus::confirmed;
    return json{{"plane",
                 {{"normal", sim::vec3_to_json(plane_.normal)},
                  {"offset", plane_.offset},
                  {"inlier_threshold", plane_.inlier_threshold},
                  {"inlier_count", plane_.inlier_count}}},
                {"corner", sim::vec3_to_json(corner_)},
                {"visit_order", order_},
                {"proposals", props},
                {"pokes", events_},
                {"confirmed_count", confirmed}};
  }

  const std::vector<ObjectProposal>& proposals() const { return proposals_; }
  const PlaneModel& plane() const { return plane_; }

  static json plan_to_json(const PokePlan& plan) {
    return json{{"proposal", plan.proposal_id},
                {"p1", sim::vec3_to_json(plan.p1)},
                {"p2", sim::vec3_to_json(plan.p2)},
                {"approach_angle_deg", plan.approach_angle_deg},
                {"start", sim::vec3_to_json(plan.command.start)},
                {"end", sim::vec3_to_json(plan.command.end)},
                {"duration_frames", plan.command.duration_frames}};
  }

 private:
  ObjectProposal* proposal_by_id(int id) {
    for (auto& p : proposals_)
      if (p.id == id) return &p;
    fail(ErrorClass::data, "unknown proposal id " + std::to_string(id));
  }

  // Copies prev + frames and fills flow_to_next between consecutive entries.
  std::vector<data::FrameRecord> with_flow(const data::FrameRecord& prev,
                                           const std::vector<data::FrameRecord>& frames) {
    std::vector<data::FrameRecord> seq;
    seq.push_back(prev);
    for (const auto& f : frames) seq.push_back(f);
    for (size_t i = 0; i + 1 < seq.size(); ++i)
      seq[i].flow_to_next = sim::ground_truth_flow(seq[i], seq[i + 1]);
    return seq;
  }

  DiscoverOptions opt_;
  PlaneModel plane_;
  Vec3 corner_ = Vec3::Zero();
  std::vector<ObjectProposal> proposals_;
  std::vector<int> order_;
  std::vector<json> events_;
  data::FrameRecord prev_frame_;
  PokePlan pending_plan_;
  int pending_proposal_ = -1;
  int cursor_ = 0;
  int retry_pending_ = -1;
  int raw_cursor_ = 1;  // raw frame 0 is the initial observation
};

}  // namespace poke::discover

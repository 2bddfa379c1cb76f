// SPDX-License-Identifier: Apache-2.0
#pragma once

#include <optional>

#include "poke/data/dataset.hpp"
#include "poke/sim/push.hpp"
#include "poke/sim/render.hpp"

namespace poke::sim {

// Interaction policy driving the recorder. Implementations see every
// rendered frame and decide where to poke next; the recorder owns the
// simulation and rendering.
struct PokingPolicy {
  virtual ~PokingPolicy() = default;
  virtual void observe_initial(const data::FrameRecord& frame) = 0;
  virtual std::optional<PokeCommand> next_poke(const data::FrameRecord& current) = 0;
  // contacted reports whether the pusher touched anything (force sensing).
  virtual void observe_poke(const std::vector<data::FrameRecord>& poke_frames,
                            bool contacted) = 0;
  virtual json report() const { return json::object(); }
};

// Pokes nothing; records just the initial frame.
struct NullPolicy : PokingPolicy {
  void observe_initial(const data::FrameRecord&) override {}
  std::optional<PokeCommand> next_poke(const data::FrameRecord&) override {
    return std::nullopt;
  }
  void observe_poke(const std::vector<data::FrameRecord>&, bool) override {}
};

namespace detail {

inline double max_pose_delta(const std::vector<Pose>& a, const std::vector<Pose>& b) {
  double m = 0.0;
  for (size_t k = 0; k < a.size(); ++k) {
    auto [ang, tr] = pose_delta(a[k], b[k]);
    m = std::max(m, std::max(ang, tr));
  }
  return m;
}

}  // namespace detail

struct RecordResult {
  std::vector<data::FrameRecord> retained;
  json report;
  int raw_frame_count = 0;
  std::vector<int> retained_of_raw;  // raw index -> retained index, -1 if dropped
};

// Runs the interaction loop: render, ask the policy for a poke, simulate it
// frame by frame, repeat until the policy stops. Frames without object
// motion (max pose delta < 1e-5 vs the previous raw frame) are dropped,
// except the initial frame. Flow is recomputed between retained neighbors.
inline RecordResult record_sequence(const SceneConfig& cfg, PokingPolicy& policy,
                                    const RenderOptions& ropt = {},
                                    int max_pokes = 64) {
  validate_scene(cfg);
  SceneState state = SceneState::initial(cfg);
  state.pusher_active = false;
  state.pusher_center = Vec3(5.0, 5.0, 1.0);  // parked far outside the frustum

  RecordResult out;
  std::vector<data::FrameRecord> raw;
  raw.push_back(render_frame(state, ropt));
  policy.observe_initial(raw.front());

  for (int poke = 0; poke < max_pokes; ++poke) {
    state.pusher_active = false;
    data::FrameRecord current = render_frame(state, ropt);
    auto cmd = policy.next_poke(current);
    if (!cmd) break;

    state.pusher_active = true;
    std::vector<data::FrameRecord> poke_frames;
    bool contacted = false;
    for (int f = 1; f <= cmd->duration_frames; ++f) {
      PokeCommand sub = *cmd;
      sub.duration_frames = 1;
      double a0 = static_cast<double>(f - 1) / cmd->duration_frames;
      double a1 = static_cast<double>(f) / cmd->duration_frames;
      sub.start = cmd->start + a0 * (cmd->end - cmd->start);
      sub.end = cmd->start + a1 * (cmd->end - cmd->start);
      contacted = apply_poke(state, sub, -1).contacted || contacted;
      poke_frames.push_back(render_frame(state, ropt));
    }
    state.pusher_active = false;
    policy.observe_poke(poke_frames, contacted);
    for (auto& f : poke_frames) raw.push_back(std::move(f));
  }

  out.raw_frame_count = static_cast<int>(raw.size());
  out.report = policy.report();

  // retention: initial frame plus every frame where something moved
  std::vector<bool> keep(raw.size(), false);
  for (size_t i = 0; i < raw.size(); ++i)
    keep[i] = i == 0 ||
              detail::max_pose_delta(raw[i - 1].gt_poses, raw[i].gt_poses) >= 1e-5;
  std::vector<data::FrameRecord> kept;
  out.retained_of_raw.assign(raw.size(), -1);
  for (size_t i = 0; i < raw.size(); ++i)
    if (keep[i]) {
      out.retained_of_raw[i] = static_cast<int>(kept.size());
      kept.push_back(std::move(raw[i]));
    }
  for (size_t i = 0; i < kept.size(); ++i) {
    kept[i].index = static_cast<int>(i);
    kept[i].flow_to_next = i + 1 < kept.size()
                               ? ground_truth_flow(kept[i], kept[i + 1])
                               : ImageF(kept[i].width(), kept[i].height(), 2);
  }
  out.retained = std::move(kept);

  // Policies reporting poke events with raw frame ranges get the matching
  // retained ranges added, so dataset consumers can ignore raw indexing.
  if (out.report.contains("pokes"))
    for (auto& ev : out.report["pokes"]) {
      if (!ev.contains("raw_begin")) continue;
      int rb = ev["raw_begin"], re = ev["raw_end"];
      int first = -1, last = -1;
      for (int i = std::max(rb, 0); i < re && i < static_cast<int>(out.retained_of_raw.size()); ++i)
        if (out.retained_of_raw[i] >= 0) {
          if (first < 0) first = out.retained_of_raw[i];
          last = out.retained_of_raw[i];
        }
      ev["retained_begin"] = first;
      ev["retained_end"] = first < 0 ? -1 : last + 1;
    }
  return out;
}

}  // namespace poke::sim

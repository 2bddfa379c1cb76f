// SPDX-License-Identifier: Apache-2.0
#pragma once

#include <cmath>
#include <cstdint>
#include <filesystem>
#include <fstream>
#include <sstream>
#include <string>
#include <vector>

#include <nlohmann/json.hpp>

#include "poke/data/frame.hpp"
#include "poke/discover/proposals.hpp"
#include "poke/field/checkpoint.hpp"
#include "poke/train/adam.hpp"
#include "poke/train/losses.hpp"

namespace poke::train {

using nlohmann::json;

struct StageSchedule {
  int stage1_iters = 10000;
  int stage2_iters = 10000;
  int stage3_iters = 50000;
  double lr_fields = 5e-4;
  double lr_poses = 1e-3;
  double lr_decay_to = 0.1;  // exponential decay to this fraction over each stage
  int batch_rays = 1024;
  int samples_per_ray = 192;
  int eikonal_per_object = 128;
};

// Scaled-down preset for tests and the synthetic desk scenes.
inline StageSchedule desk_schedule() {
  StageSchedule s;
  s.stage1_iters = 1000;
  s.stage2_iters = 1000;
  s.stage3_iters = 5000;
  s.batch_rays = 512;
  return s;
}

enum class Ablation {
  none,
  no_sparsity,     // sparsity weight forced to zero
  no_fg_sampling,  // image-wide sampling instead of the foreground strategy
  no_stagewise,    // one joint stage with the summed iteration budget
};

struct TrainOptions {
  LossWeights weights;
  StageSchedule schedule;
  Ablation ablation = Ablation::none;
  bool sparsity_foreground_only = false;
  uint64_t seed = 17;
  int threads = 1;
  int log_every = 100;
  std::string log_path;        // line-delimited records, appended on resume
  std::string checkpoint_dir;  // per-stage scene checkpoints when non-empty
  std::string resume_save;     // training state written after each stage
  std::string resume_load;     // training state read at startup if present
  int stop_after_stage = 0;    // 0 = run the whole plan
};

struct StageReport {
  int stage = 0;  // 1-based index in the executed plan
  std::string name;
  long long iters = 0;
  LossTerms final_terms;
  double final_total = 0;
};

struct TrainReport {
  std::vector<StageReport> stages;
  long long global_iters = 0;
  int empty_mask_batches = 0;
  int all_invalid_depth_batches = 0;
  bool finished = false;  // every stage in the plan completed
};

struct FieldBuildOptions {
  int background_res = 64;
  int object_res = 64;
  double background_margin = 0.05;     // around the union of unprojected depths
  double object_margin_scale = 0.5;    // fraction of the obb's largest half-extent
  double object_margin_min = 0.03;
  double sdf_shrink = 0.7;             // initial surface box relative to the obb
  double init_beta = 0.01;
  int depth_stride = 2;                // pixel subsampling for the scene bounds
};

struct SceneBuild {
  field::SceneFields fields;
  std::vector<int> proposal_ids;  // confirmed proposals in report order, one per object
};

namespace detail {

inline void put_f64(std::ostream& os, double v) {
  uint64_t u;
  std::memcpy(&u, &v, 8);
  field::detail::put_u32(os, static_cast<uint32_t>(u));
  field::detail::put_u32(os, static_cast<uint32_t>(u >> 32));
}

inline double get_f64(std::istream& is) {
  uint64_t lo = field::detail::get_u32(is);
  uint64_t hi = field::detail::get_u32(is);
  uint64_t u = lo | (hi << 32);
  double v;
  std::memcpy(&v, &u, 8);
  return v;
}

inline double box_sdf(const Vec3& q, const Vec3& half) {
  Vec3 d = q.cwiseAbs() - half;
  Vec3 outside = d.cwiseMax(0.0);
  double inside = std::min(0.0, d.maxCoeff());
  return outside.norm() + inside;
}

}  // namespace detail

// Background volume: axis-aligned bounds of every unprojected valid depth
// pixel, padded by a margin. Object volumes: padded axis-aligned bounds of the
// first-poke obb (the canonical, frame-0 placement), with the signed distance
// initialized to a shrunk box and a mid-gray color.
inline SceneBuild build_scene_fields(const std::vector<data::FrameRecord>& frames,
                                     const json& report, const FieldBuildOptions& opt = {}) {
  require(!frames.empty(), ErrorClass::data, "build_scene_fields: no frames");
  Vec3 lo = Vec3::Constant(1e30), hi = Vec3::Constant(-1e30);
  int stride = std::max(1, opt.depth_stride);
  for (const auto& f : frames)
    for (int y = 0; y < f.height(); y += stride)
      for (int x = 0; x < f.width(); x += stride) {
        double z = f.depth.at(x, y);
        if (z <= 0) continue;
        Vec3 p = f.camera.backproject(x, y, z);
        lo = lo.cwiseMin(p);
        hi = hi.cwiseMax(p);
      }
  require(lo[0] < hi[0] && lo[1] < hi[1] && lo[2] < hi[2], ErrorClass::data,
          "build_scene_fields: no valid depth in the sequence");
  lo -= Vec3::Constant(opt.background_margin);
  hi += Vec3::Constant(opt.background_margin);

  SceneBuild out;
  out.fields.background = field::BackgroundField(lo, hi, opt.background_res);

  for (const auto& pj : report.at("proposals")) {
    if (pj.at("status") != "confirmed") continue;
    int id = pj.at("id");
    discover::OrientedBoundingBox obb;
    bool found = false;
    for (const auto& ev : report.at("pokes"))
      if (ev.contains("obb_before") && ev.at("proposal") == id) {
        obb = discover::obb_from_json(ev.at("obb_before"));
        found = true;
        break;
      }
    if (!found) obb = discover::obb_from_json(pj.at("obb"));

    Vec3 olo = Vec3::Constant(1e30), ohi = Vec3::Constant(-1e30);
    for (int c = 0; c < 8; ++c) {
      Vec3 s((c & 1) ? 1 : -1, (c & 2) ? 1 : -1, (c & 4) ? 1 : -1);
      Vec3 corner = obb.center + obb.axes * s.cwiseProduct(obb.half_extents);
      olo = olo.cwiseMin(corner);
      ohi = ohi.cwiseMax(corner);
    }
    double margin =
        std::max(opt.object_margin_min, opt.object_margin_scale * obb.half_extents.maxCoeff());
    olo -= Vec3::Constant(margin);
    ohi += Vec3::Constant(margin);

    field::ObjectField f(olo, ohi, opt.object_res);
    f.log_beta = std::log(opt.init_beta);
    Vec3 shrunk = opt.sdf_shrink * obb.half_extents;
    for (int z = 0; z < f.grid.nz; ++z)
      for (int y = 0; y < f.grid.ny; ++y)
        for (int x = 0; x < f.grid.nx; ++x) {
          Vec3 p = olo + Vec3(x * f.grid.cell_size()[0], y * f.grid.cell_size()[1],
                              z * f.grid.cell_size()[2]);
          Vec3 q = obb.axes.transpose() * (p - obb.center);
          f.grid.at(x, y, z, field::kShapeChannel) = detail::box_sdf(q, shrunk);
        }
    out.fields.objects.push_back(std::move(f));
    out.proposal_ids.push_back(id);
  }
  return out;
}

// Pose tracks from per-object cumulative world motions (frame 0 = canonical).
inline field::PoseTrack make_pose_track(const std::vector<std::vector<Pose>>& poses_by_object) {
  field::PoseTrack track;
  track.twists.resize(poses_by_object.size());
  for (size_t k = 0; k < poses_by_object.size(); ++k) {
    track.twists[k].reserve(poses_by_object[k].size());
    for (const Pose& p : poses_by_object[k]) track.twists[k].push_back(se3_log(p));
  }
  return track;
}

namespace detail {

struct StagePlanEntry {
  std::string name;
  long long iters = 0;
  SampleMode mode = SampleMode::full;
  field::ComposeSelect select;
  bool train_background = false;
  bool train_objects = false;
  bool train_poses = false;
};

inline std::vector<StagePlanEntry> build_plan(const TrainOptions& opt, int object_count) {
  const StageSchedule& s = opt.schedule;
  uint32_t all = object_count >= 32 ? ~0u : (1u << object_count) - 1u;
  SampleMode joint_mode =
      opt.ablation == Ablation::no_fg_sampling ? SampleMode::image_wide : SampleMode::full;
  StagePlanEntry joint{"joint", s.stage3_iters, joint_mode,
                       field::ComposeSelect{true, all}, true, true, true};
  if (opt.ablation == Ablation::no_stagewise) {
    joint.iters = static_cast<long long>(s.stage1_iters) + s.stage2_iters + s.stage3_iters;
    return {joint};
  }
  StagePlanEntry background{"background", s.stage1_iters, SampleMode::background_only,
                            field::ComposeSelect{true, 0u}, true, false, false};
  StagePlanEntry objects{"objects",
                         object_count > 0 ? s.stage2_iters : 0,
                         SampleMode::foreground_only,
                         field::ComposeSelect{false, all},
                         false,
                         true,
                         false};
  return {background, objects, joint};
}

// Training state across stage boundaries: completed-stage count, iteration
// counter, rng state, and full-precision parameters. Grid shapes are owned by
// the caller's fields, so only sizes are validated on load.
inline void save_train_state(const std::string& path, int completed, long long global_iter,
                             const std::mt19937_64& rng, const field::SceneFields& fields,
                             const field::PoseTrack& poses) {
  std::ofstream os(path, std::ios::binary);
  require(os.good(), ErrorClass::io, "save_train_state: cannot open " + path);
  os.write("PKRS", 4);
  field::detail::put_u32(os, 1);
  field::detail::put_u32(os, static_cast<uint32_t>(completed));
  put_f64(os, static_cast<double>(global_iter));
  std::ostringstream rs;
  rs << rng;
  std::string rstr = rs.str();
  field::detail::put_u32(os, static_cast<uint32_t>(rstr.size()));
  os.write(rstr.data(), static_cast<std::streamsize>(rstr.size()));
  field::detail::put_u32(os, static_cast<uint32_t>(fields.objects.size()));
  field::detail::put_u32(os, static_cast<uint32_t>(poses.frame_count()));
  field::detail::put_u32(os, static_cast<uint32_t>(fields.background.grid.data.size()));
  for (double v : fields.background.grid.data) put_f64(os, v);
  for (const auto& f : fields.objects) {
    field::detail::put_u32(os, static_cast<uint32_t>(f.grid.data.size()));
    for (double v : f.grid.data) put_f64(os, v);
    put_f64(os, f.log_beta);
  }
  for (const auto& per_frame : poses.twists)
    for (const Twist& tw : per_frame) {
      Vec6 c = tw.coeffs();
      for (int j = 0; j < 6; ++j) put_f64(os, c[j]);
    }
  require(os.good(), ErrorClass::io, "save_train_state: write failed for " + path);
}

inline void load_train_state(const std::string& path, int& completed, long long& global_iter,
                             std::mt19937_64& rng, field::SceneFields& fields,
                             field::PoseTrack& poses) {
  std::ifstream is(path, std::ios::binary);
  require(is.good(), ErrorClass::io, "load_train_state: cannot open " + path);
  char magic[4] = {};
  is.read(magic, 4);
  require(is.good() && std::string(magic, 4) == "PKRS", ErrorClass::data,
          "load_train_state: bad magic in " + path);
  require(field::detail::get_u32(is) == 1, ErrorClass::data,
          "load_train_state: unsupported version in " + path);
  completed = static_cast<int>(field::detail::get_u32(is));
  global_iter = static_cast<long long>(get_f64(is));
  uint32_t rlen = field::detail::get_u32(is);
  require(is.good() && rlen < (1u << 20), ErrorClass::data,
          "load_train_state: bad rng block in " + path);
  std::string rstr(rlen, '\0');
  is.read(rstr.data(), rlen);
  std::istringstream rs(rstr);
  rs >> rng;
  require(!rs.fail(), ErrorClass::data, "load_train_state: bad rng state in " + path);
  require(field::detail::get_u32(is) == fields.objects.size(), ErrorClass::data,
          "load_train_state: object count mismatch in " + path);
  require(field::detail::get_u32(is) == static_cast<uint32_t>(poses.frame_count()),
          ErrorClass::data, "load_train_state: frame count mismatch in " + path);
  require(field::detail::get_u32(is) == fields.background.grid.data.size(), ErrorClass::data,
          "load_train_state: background size mismatch in " + path);
  for (double& v : fields.background.grid.data) v = get_f64(is);
  for (auto& f : fields.objects) {
    require(field::detail::get_u32(is) == f.grid.data.size(), ErrorClass::data,
            "load_train_state: object grid size mismatch in " + path);
    for (double& v : f.grid.data) v = get_f64(is);
    f.log_beta = get_f64(is);
  }
  for (auto& per_frame : poses.twists)
    for (Twist& tw : per_frame) {
      Vec6 c;
      for (int j = 0; j < 6; ++j) c[j] = get_f64(is);
      tw = Twist::from_coeffs(c);
    }
  require(is.good(), ErrorClass::io, "load_train_state: truncated file " + path);
}

inline void check_finite(const LossTerms& t, const std::string& name, long long iter) {
  auto bad = [&](double v, const char* term) {
    require(std::isfinite(v), ErrorClass::numeric,
            "non-finite " + std::string(term) + " loss at stage " + name + " iteration " +
                std::to_string(iter));
    return false;
  };
  bad(t.color, "color");
  bad(t.depth, "depth");
  bad(t.eikonal, "eikonal");
  bad(t.sparsity, "sparsity");
}

}  // namespace detail

// Stage-wise optimization of the decomposed scene. masks is indexed
// [object][frame] with 255 marking initialized object pixels. Stage 1 trains
// the background on rays outside every mask, stage 2 trains object fields on
// foreground rays with poses frozen, stage 3 trains everything jointly.
inline TrainReport run_stages(const std::vector<data::FrameRecord>& frames,
                              const std::vector<std::vector<ImageU8>>& masks,
                              field::SceneFields& fields, field::PoseTrack& poses,
                              const TrainOptions& opt) {
  const int T = static_cast<int>(frames.size());
  const int K = fields.object_count();
  require(T > 0, ErrorClass::data, "run_stages: no frames");
  require(static_cast<int>(masks.size()) == K, ErrorClass::config,
          "run_stages: mask count != object count");
  for (const auto& per_frame : masks)
    require(static_cast<int>(per_frame.size()) == T, ErrorClass::config,
            "run_stages: mask frame count mismatch");
  require(poses.object_count() == K && (K == 0 || poses.frame_count() == T),
          ErrorClass::config, "run_stages: pose track shape mismatch");
  require(K <= 32, ErrorClass::config, "run_stages: more than 32 objects unsupported");

  MaxDepthMap zmax = MaxDepthMap::build(frames);
  std::vector<std::vector<ImageU8>> masks_by_frame(T);
  for (int t = 0; t < T; ++t) {
    masks_by_frame[t].reserve(K);
    for (int k = 0; k < K; ++k) masks_by_frame[t].push_back(masks[k][t]);
  }
  std::vector<int> foreground_frames;
  for (int t = 0; t < T; ++t) {
    bool any = false;
    for (int k = 0; k < K && !any; ++k)
      for (unsigned char v : masks[k][t].data)
        if (v != 0) {
          any = true;
          break;
        }
    if (any) foreground_frames.push_back(t);
  }

  auto plan = detail::build_plan(opt, K);
  int stop = opt.stop_after_stage > 0
                 ? std::min<int>(opt.stop_after_stage, static_cast<int>(plan.size()))
                 : static_cast<int>(plan.size());

  std::mt19937_64 rng = make_rng(opt.seed);
  int completed = 0;
  long long global_iter = 0;
  if (!opt.resume_load.empty() && std::filesystem::exists(opt.resume_load))
    detail::load_train_state(opt.resume_load, completed, global_iter, rng, fields, poses);

  std::ofstream log;
  if (!opt.log_path.empty()) {
    log.open(opt.log_path, completed > 0 ? std::ios::app : std::ios::out);
    require(log.good(), ErrorClass::io, "run_stages: cannot open log " + opt.log_path);
  }

  TrainReport report;
  report.global_iters = global_iter;

  field::FieldGradients grads;
  LossScratch scratch;
  std::vector<double> beta_params(K), beta_grads(K), update;
  std::vector<Pose> frame_poses(K);
  std::vector<double> pose_grad_dense, pose_update;

  std::uniform_int_distribution<int> uframe(0, T - 1);
  std::uniform_int_distribution<size_t> ufg(
      0, foreground_frames.empty() ? 0 : foreground_frames.size() - 1);

  for (int si = completed; si < stop; ++si) {
    const detail::StagePlanEntry& cfg = plan[si];
    AdamOptions aopt;
    AdamState st_bg, st_betas, st_poses;
    std::vector<AdamState> st_obj(K);
    if (cfg.train_background) st_bg.init(fields.background.grid.data.size());
    if (cfg.train_objects) {
      for (int k = 0; k < K; ++k) st_obj[k].init(fields.objects[k].grid.data.size());
      st_betas.init(K);
    }
    if (cfg.train_poses && K > 0) {
      st_poses.init(static_cast<size_t>(K) * T * 6);
      pose_grad_dense.assign(static_cast<size_t>(K) * T * 6, 0.0);
    }

    TotalLossOptions lopt;
    lopt.select = cfg.select;
    lopt.samples_per_ray = opt.schedule.samples_per_ray;
    lopt.enable_sparsity = opt.ablation != Ablation::no_sparsity && cfg.train_objects;
    lopt.sparsity_foreground_only = opt.sparsity_foreground_only;
    lopt.pose_grads = cfg.train_poses;

    bool restrict_fg = cfg.mode == SampleMode::foreground_only && !foreground_frames.empty();
    LossTerms terms;
    for (long long iter = 0; iter < cfg.iters; ++iter, ++global_iter) {
      double lr_f = decayed_lr(opt.schedule.lr_fields, opt.schedule.lr_decay_to, iter, cfg.iters);
      double lr_p = decayed_lr(opt.schedule.lr_poses, opt.schedule.lr_decay_to, iter, cfg.iters);

      int t = restrict_fg ? foreground_frames[ufg(rng)] : uframe(rng);
      RayBatch batch = sample_rays(frames[t], masks_by_frame[t], opt.schedule.batch_rays,
                                   cfg.mode, fields.background.grid, zmax, rng);
      if (batch.empty_mask_fallback) ++report.empty_mask_batches;
      for (int k = 0; k < K; ++k) frame_poses[k] = poses.pose(k, t);

      EikonalPoints eik;
      if (cfg.train_objects && K > 0)
        eik = sample_eikonal_points(fields, batch, frame_poses, opt.schedule.eikonal_per_object,
                                    rng);

      grads.init(fields);
      terms = total_loss(batch, fields, frame_poses, opt.weights, eik, lopt, &grads, scratch,
                         opt.threads);
      detail::check_finite(terms, cfg.name, iter);
      if (terms.depth_all_invalid) ++report.all_invalid_depth_batches;

      if (cfg.train_background)
        adam_step(fields.background.grid.data, grads.background, st_bg, lr_f, aopt, update);
      if (cfg.train_objects) {
        for (int k = 0; k < K; ++k)
          adam_step(fields.objects[k].grid.data, grads.objects[k], st_obj[k], lr_f, aopt, update);
        for (int k = 0; k < K; ++k) {
          beta_params[k] = fields.objects[k].log_beta;
          beta_grads[k] = grads.log_beta[k];
        }
        adam_step(beta_params, beta_grads, st_betas, lr_f, aopt, update);
        for (int k = 0; k < K; ++k)
          fields.objects[k].log_beta = std::clamp(beta_params[k], -7.0, 2.0);
      }
      if (cfg.train_poses && K > 0) {
        std::fill(pose_grad_dense.begin(), pose_grad_dense.end(), 0.0);
        for (int k = 0; k < K; ++k) {
          size_t base = (static_cast<size_t>(k) * T + t) * 6;
          for (int j = 0; j < 6; ++j) pose_grad_dense[base + j] = grads.pose[k][j];
        }
        adam_update(st_poses, pose_grad_dense, lr_p, aopt, pose_update);
        for (int k = 0; k < K; ++k)
          for (int tf = 0; tf < T; ++tf) {
            size_t base = (static_cast<size_t>(k) * T + tf) * 6;
            Vec6 u;
            bool moved = false;
            for (int j = 0; j < 6; ++j) {
              u[j] = pose_update[base + j];
              moved = moved || u[j] != 0.0;
            }
            if (!moved) continue;
            poses.twists[k][tf] =
                se3_log(se3_exp(Twist::from_coeffs(u)) * se3_exp(poses.twists[k][tf]));
          }
      }

      if (log.is_open() && (iter % opt.log_every == 0 || iter + 1 == cfg.iters)) {
        json line{{"iter", global_iter},       {"stage", si + 1},
                  {"name", cfg.name},          {"color", terms.color},
                  {"depth", terms.depth},      {"eikonal", terms.eikonal},
                  {"sparsity", terms.sparsity}, {"total", terms.total(opt.weights)},
                  {"lr_fields", lr_f},         {"lr_poses", lr_p}};
        log << line.dump() << "\n";
      }
    }

    StageReport sr;
    sr.stage = si + 1;
    sr.name = cfg.name;
    sr.iters = cfg.iters;
    sr.final_terms = terms;
    sr.final_total = terms.total(opt.weights);
    report.stages.push_back(sr);
    report.global_iters = global_iter;

    if (!opt.checkpoint_dir.empty()) {
      std::filesystem::create_directories(opt.checkpoint_dir);
      field::save_checkpoint(opt.checkpoint_dir + "/stage" + std::to_string(si + 1) + ".pkrc",
                             fields, poses);
    }
    if (!opt.resume_save.empty())
      detail::save_train_state(opt.resume_save, si + 1, global_iter, rng, fields, poses);
  }

  report.finished = stop == static_cast<int>(plan.size());
  return report;
}

}  // namespace poke::train

// SPDX-License-Identifier: Apache-2.0
#pragma once

#include <algorithm>
#include <cmath>
#include <random>
#include <vector>

#include "poke/field/render.hpp"
#include "poke/train/sampling.hpp"

namespace poke::train {

struct LossWeights {
  double w1 = 1.0;    // color
  double w2 = 1.0;    // depth
  double w3 = 0.1;    // eikonal
  double w4 = 2e-5;   // sparsity
  double w = 200.0;   // sparsity depth decay, 1/m
};

struct LossTerms {
  double color = 0, depth = 0, eikonal = 0, sparsity = 0;
  int depth_rays = 0;
  bool depth_all_invalid = false;

  double total(const LossWeights& w) const {
    return w.w1 * color + w.w2 * depth + w.w3 * eikonal + w.w4 * sparsity;
  }
};

inline double color_loss(const std::vector<Vec3>& rendered, const std::vector<Vec3>& gt) {
  require(rendered.size() == gt.size() && !rendered.empty(), ErrorClass::config,
          "color_loss: size mismatch or empty");
  double sum = 0;
  for (size_t i = 0; i < rendered.size(); ++i)
    sum += (rendered[i] - gt[i]).cwiseAbs().sum();
  return sum / rendered.size();
}

// Mean absolute depth error over rays with valid (positive) ground truth.
inline double depth_loss(const std::vector<double>& rendered, const std::vector<double>& gt,
                         int* valid_out = nullptr) {
  require(rendered.size() == gt.size() && !rendered.empty(), ErrorClass::config,
          "depth_loss: size mismatch or empty");
  double sum = 0;
  int valid = 0;
  for (size_t i = 0; i < rendered.size(); ++i) {
    if (gt[i] <= 0) continue;
    sum += std::abs(rendered[i] - gt[i]);
    ++valid;
  }
  if (valid_out) *valid_out = valid;
  return valid == 0 ? 0.0 : sum / valid;
}

inline double sparsity_weight(double z_m, double z_i, double w) {
  return std::exp(-w * std::max(z_m - z_i, 0.0));
}

// Canonical-frame points for the Eikonal term, one set per object.
struct EikonalPoints {
  std::vector<std::vector<Vec3>> points;
};

// Half uniform in each canonical volume, half from ray samples transformed
// into the canonical frame (kept only when they land inside the volume).
inline EikonalPoints sample_eikonal_points(const field::SceneFields& fields,
                                           const RayBatch& batch,
                                           const std::vector<Pose>& frame_poses,
                                           int per_object, std::mt19937_64& rng) {
  EikonalPoints out;
  out.points.resize(fields.objects.size());
  std::uniform_real_distribution<double> u01(0.0, 1.0);
  for (size_t k = 0; k < fields.objects.size(); ++k) {
    const field::VoxelGrid& g = fields.objects[k].grid;
    Pose inv = frame_poses[k].inverse();
    auto& pts = out.points[k];
    pts.reserve(per_object);
    int uniform_quota = (per_object + 1) / 2;
    for (int i = 0; i < uniform_quota; ++i) {
      Vec3 p;
      for (int a = 0; a < 3; ++a) p[a] = g.lo[a] + u01(rng) * (g.hi[a] - g.lo[a]);
      pts.push_back(p);
    }
    if (!batch.rays.empty()) {
      std::uniform_int_distribution<size_t> uray(0, batch.rays.size() - 1);
      for (int i = uniform_quota; i < per_object; ++i) {
        const RayDatum& r = batch.rays[uray(rng)];
        double t = r.t0 + u01(rng) * (r.t1 - r.t0);
        Vec3 p = inv.apply(r.ray.origin + t * r.ray.dir);
        if (!g.inside(p))
          for (int a = 0; a < 3; ++a) p[a] = g.lo[a] + u01(rng) * (g.hi[a] - g.lo[a]);
        pts.push_back(p);
      }
    }
  }
  return out;
}

// Mean over all points of (|grad d| - 1)^2. When grads is given, accumulates
// weight * d(mean)/d(sdf nodes).
inline double eikonal_loss(const field::SceneFields& fields, const EikonalPoints& eik,
                           double weight = 0.0, field::FieldGradients* grads = nullptr) {
  size_t total = 0;
  for (const auto& pts : eik.points) total += pts.size();
  if (total == 0) return 0.0;
  double sum = 0;
  for (size_t k = 0; k < eik.points.size(); ++k) {
    const field::VoxelGrid& g = fields.objects[k].grid;
    for (const Vec3& p : eik.points[k]) {
      field::TrilerpStencil st = field::make_stencil(g, field::clamp_to_volume(g, p));
      Vec3 grad = st.gradient(g, field::kShapeChannel);
      double norm = grad.norm();
      double r = norm - 1.0;
      sum += r * r;
      if (grads && norm > 0) {
        Vec3 up = (weight * 2.0 * r / (static_cast<double>(total) * norm)) * grad;
        for (int j = 0; j < 8; ++j)
          for (int a = 0; a < 3; ++a)
            grads->objects[k][st.node[j] * g.channels + field::kShapeChannel] +=
                up[a] * st.dw[j][a];
      }
    }
  }
  return sum / static_cast<double>(total);
}

struct TotalLossOptions {
  field::ComposeSelect select;
  int samples_per_ray = 192;
  bool enable_sparsity = true;
  bool sparsity_foreground_only = false;
  bool pose_grads = true;  // false while poses are frozen, keeps buffers zero
};

struct LossScratch {
  struct Slot {
    field::RenderContext ctx;
    field::RaySamples samples;
    std::vector<double> sigma_upstream;
    field::FieldGradients grads;  // used only by worker threads
    double sparsity_sum = 0;
  };
  std::vector<Slot> slots;
  std::vector<Vec3> rendered_color, gt_color;
  std::vector<double> rendered_depth, gt_depth;
};

// Weighted multi-term loss over one ray batch with analytic gradients into
// every unfrozen parameter class. Eikonal points are taken as a fixed input
// so the sampling distribution carries no gradient. Rays parallelize across
// threads with per-thread gradient buffers reduced in thread order, which is
// deterministic for a fixed thread count.
inline LossTerms total_loss(const RayBatch& batch, const field::SceneFields& fields,
                            const std::vector<Pose>& frame_poses, const LossWeights& weights,
                            const EikonalPoints& eik, const TotalLossOptions& opt,
                            field::FieldGradients* grads, LossScratch& scratch,
                            int threads = 1) {
  const int n_rays = static_cast<int>(batch.rays.size());
  require(n_rays > 0, ErrorClass::config, "total_loss: empty batch");
  const int K = fields.object_count();
  const int N = opt.samples_per_ray;

  int valid_depth = 0;
  int sparsity_rays = 0;
  int selected_objects = 0;
  for (int k = 0; k < K; ++k) selected_objects += opt.select.object(k) ? 1 : 0;
  for (const RayDatum& r : batch.rays) {
    if (r.gt_depth > 0) ++valid_depth;
    if (!opt.sparsity_foreground_only || r.mask_bits != 0) ++sparsity_rays;
  }
  bool sparsity_on = opt.enable_sparsity && selected_objects > 0 && sparsity_rays > 0;
  double sparsity_count =
      sparsity_on ? static_cast<double>(sparsity_rays) * selected_objects * N : 1.0;

  LossTerms terms;
  terms.depth_rays = valid_depth;
  terms.depth_all_invalid = valid_depth == 0;

  scratch.rendered_color.resize(n_rays);
  scratch.gt_color.resize(n_rays);
  scratch.rendered_depth.resize(n_rays);
  scratch.gt_depth.resize(n_rays);
  int workers = std::max(1, std::min(threads, n_rays));
  scratch.slots.resize(workers);

  auto process_ray = [&](int ri, LossScratch::Slot& slot, field::FieldGradients* out_grads) {
    const RayDatum& r = batch.rays[ri];
    field::RaySamples& samples = slot.samples;
    double step = (r.t1 - r.t0) / N;
    samples.t.resize(N);
    samples.delta.assign(N, step);
    for (int i = 0; i < N; ++i) samples.t[i] = r.t0 + (i + 0.5) * step;
    field::compose_render_forward(r.ray, samples, fields, frame_poses, slot.ctx, opt.select);

    scratch.rendered_color[ri] = slot.ctx.color;
    scratch.gt_color[ri] = r.gt_color;
    scratch.rendered_depth[ri] = slot.ctx.depth;
    scratch.gt_depth[ri] = r.gt_depth;

    bool ray_sparse = sparsity_on && (!opt.sparsity_foreground_only || r.mask_bits != 0);
    if (!ray_sparse && !out_grads) return;
    if (out_grads)
      slot.sigma_upstream.assign(static_cast<size_t>(K) * N, 0.0);
    if (ray_sparse) {
      for (int k = 0; k < K; ++k) {
        if (!opt.select.object(k)) continue;
        for (int i = 0; i < N; ++i) {
          double sigma = slot.ctx.sigma_obj[static_cast<size_t>(k) * N + i];
          double e = std::exp(-sigma);
          double wsp = sparsity_weight(r.z_max, samples.t[i] * r.ray.z_scale, weights.w);
          slot.sparsity_sum += wsp * std::abs(1.0 - e);
          if (out_grads)
            slot.sigma_upstream[static_cast<size_t>(k) * N + i] =
                weights.w4 * wsp * e / sparsity_count;
        }
      }
    }
    if (out_grads) {
      Vec3 gc;
      for (int c = 0; c < 3; ++c) {
        double res = slot.ctx.color[c] - r.gt_color[c];
        gc[c] = weights.w1 * (res > 0 ? 1.0 : res < 0 ? -1.0 : 0.0) / n_rays;
      }
      double gd = 0;
      if (r.gt_depth > 0 && valid_depth > 0) {
        double res = slot.ctx.depth - r.gt_depth;
        gd = weights.w2 * (res > 0 ? 1.0 : res < 0 ? -1.0 : 0.0) / valid_depth;
      }
      field::compose_render_backward(slot.ctx, fields, gc, gd, *out_grads,
                                     &slot.sigma_upstream, opt.pose_grads);
    }
  };

  double sparsity_sum = 0;
  if (workers == 1) {
    scratch.slots[0].sparsity_sum = 0;
    for (int ri = 0; ri < n_rays; ++ri) process_ray(ri, scratch.slots[0], grads);
    sparsity_sum = scratch.slots[0].sparsity_sum;
  } else {
    for (auto& slot : scratch.slots) {
      slot.sparsity_sum = 0;
      if (grads) slot.grads.init(fields);
    }
    parallel_chunks(n_rays, workers, [&](int tid, size_t begin, size_t end) {
      auto& slot = scratch.slots[tid];
      for (size_t ri = begin; ri < end; ++ri)
        process_ray(static_cast<int>(ri), slot, grads ? &slot.grads : nullptr);
    });
    for (auto& slot : scratch.slots) {
      sparsity_sum += slot.sparsity_sum;
      if (grads) grads->add(slot.grads);
    }
  }

  terms.color = color_loss(scratch.rendered_color, scratch.gt_color);
  terms.depth = depth_loss(scratch.rendered_depth, scratch.gt_depth);
  if (sparsity_on) terms.sparsity = sparsity_sum / sparsity_count;
  terms.eikonal = eikonal_loss(fields, eik, weights.w3, grads);
  return terms;
}

}  // namespace poke::train

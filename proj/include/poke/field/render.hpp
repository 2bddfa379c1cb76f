// SPDX-License-Identifier: Apache-2.0
#pragma once

#include <cmath>
#include <vector>

#include "poke/field/fields.hpp"

namespace poke::field {

struct Ray {
  Vec3 origin = Vec3::Zero();
  Vec3 dir = Vec3::UnitZ();  // unit length
  // Depth per unit ray parameter: dot(dir, camera forward) gives camera
  // z-depth, 1.0 gives ray distance.
  double z_scale = 1.0;
};

// Strictly increasing sample positions along the ray with positive spacings.
// delta has one entry per sample; for uniform sampling all spacings equal the
// stratum width.
struct RaySamples {
  std::vector<double> t;
  std::vector<double> delta;

  int count() const { return static_cast<int>(t.size()); }
};

inline RaySamples make_uniform_samples(double t_near, double t_far, int n) {
  require(n >= 1, ErrorClass::config, "make_uniform_samples: need n >= 1");
  require(t_far > t_near, ErrorClass::config, "make_uniform_samples: empty interval");
  RaySamples s;
  double step = (t_far - t_near) / n;
  s.t.resize(n);
  s.delta.assign(n, step);
  for (int i = 0; i < n; ++i) s.t[i] = t_near + (i + 0.5) * step;
  return s;
}

struct SceneFields {
  BackgroundField background;
  std::vector<ObjectField> objects;

  int object_count() const { return static_cast<int>(objects.size()); }
};

struct RenderResult {
  Vec3 color = Vec3::Zero();
  double depth = 0;
  double opacity = 0;  // accumulated alpha, sum of T_i * alpha_i
  std::vector<double> alpha;
  std::vector<double> trans;
  std::vector<double> alpha_bg;
  std::vector<std::vector<double>> alpha_obj;  // [object][sample]
};

// Selects which fields participate in a composition. Excluded fields are
// treated as empty space, so neither values nor gradients ever touch them.
struct ComposeSelect {
  bool background = true;
  uint32_t objects = ~0u;  // bit k enables object k

  bool object(int k) const { return (objects >> k) & 1u; }
};

// Everything the backward pass needs, retained per sample. Reused across rays
// to avoid reallocation in the training loop.
struct RenderContext {
  Ray ray;
  RaySamples samples;
  int K = 0;
  ComposeSelect select;
  std::vector<Pose> poses;      // world-from-object per object
  std::vector<Pose> inv_poses;
  std::vector<BackgroundSample> bg;  // per sample
  std::vector<ObjectSample> obj;     // [k * N + i]
  std::vector<double> sigma_obj;     // activated density, [k * N + i]
  std::vector<double> sbar, ealpha, alpha, trans;  // per sample
  Vec3 color = Vec3::Zero();
  double depth = 0;
  double opacity = 0;
};

// Composed volume rendering over the background and all object fields.
inline void compose_render_forward(const Ray& ray, const RaySamples& samples,
                                   const SceneFields& fields, const std::vector<Pose>& poses,
                                   RenderContext& ctx, const ComposeSelect& select = {}) {
  const int n = samples.count();
  const int K = fields.object_count();
  require(static_cast<int>(poses.size()) == K, ErrorClass::config,
          "compose_render: pose count != object count");
  ctx.ray = ray;
  ctx.samples = samples;
  ctx.K = K;
  ctx.select = select;
  ctx.poses = poses;
  ctx.inv_poses.clear();
  for (const Pose& p : poses) ctx.inv_poses.push_back(p.inverse());
  ctx.bg.resize(n);
  ctx.obj.resize(static_cast<size_t>(K) * n);
  ctx.sigma_obj.assign(static_cast<size_t>(K) * n, 0.0);
  ctx.sbar.resize(n);
  ctx.ealpha.resize(n);
  ctx.alpha.resize(n);
  ctx.trans.resize(n);

  Vec3 color = Vec3::Zero();
  double depth = 0, opacity = 0, T = 1.0;
  for (int i = 0; i < n; ++i) {
    Vec3 x = ray.origin + samples.t[i] * ray.dir;
    ctx.bg[i] = select.background ? query_background(fields.background, x) : BackgroundSample{};
    double sbar = ctx.bg[i].sigma;
    for (int k = 0; k < K; ++k) {
      ObjectSample& os = ctx.obj[static_cast<size_t>(k) * n + i];
      if (!select.object(k)) {
        os = ObjectSample{};
        os.sdf = 1e9;  // excluded: empty space, no gradient paths
        continue;
      }
      os = query_object_canonical(fields.objects[k], ctx.inv_poses[k].apply(x));
      double s = sdf_to_density(os.sdf, fields.objects[k].beta());
      ctx.sigma_obj[static_cast<size_t>(k) * n + i] = s;
      sbar += s;
    }
    double e = std::exp(-sbar * samples.delta[i]);
    double a = 1.0 - e;
    ctx.sbar[i] = sbar;
    ctx.ealpha[i] = e;
    ctx.alpha[i] = a;
    ctx.trans[i] = T;
    if (sbar > 0) {
      double wa = T * a / sbar;
      Vec3 mixed = ctx.bg[i].sigma * ctx.bg[i].color;
      for (int k = 0; k < K; ++k)
        mixed += ctx.sigma_obj[static_cast<size_t>(k) * n + i] *
                 ctx.obj[static_cast<size_t>(k) * n + i].color;
      color += wa * mixed;
    }
    depth += T * a * samples.t[i] * ray.z_scale;
    opacity += T * a;
    T *= e;
  }
  ctx.color = color;
  ctx.depth = depth;
  ctx.opacity = opacity;
}

inline RenderResult compose_render(const Ray& ray, const RaySamples& samples,
                                   const SceneFields& fields, const std::vector<Pose>& poses) {
  RenderContext ctx;
  compose_render_forward(ray, samples, fields, poses, ctx);
  const int n = samples.count();
  RenderResult r;
  r.color = ctx.color;
  r.depth = ctx.depth;
  r.opacity = ctx.opacity;
  r.alpha = ctx.alpha;
  r.trans = ctx.trans;
  r.alpha_bg.assign(n, 0.0);
  r.alpha_obj.assign(ctx.K, std::vector<double>(n, 0.0));
  for (int i = 0; i < n; ++i) {
    if (ctx.sbar[i] <= 0) continue;  // 0/0 convention: all per-field alphas 0
    double scale = ctx.alpha[i] / ctx.sbar[i];
    r.alpha_bg[i] = ctx.bg[i].sigma * scale;
    for (int k = 0; k < ctx.K; ++k)
      r.alpha_obj[k][i] = ctx.sigma_obj[static_cast<size_t>(k) * n + i] * scale;
  }
  return r;
}

// Gradient buffers shaped like the scene parameters. Pose gradients are with
// respect to a left-increment twist (omega, v) composed onto the current
// world-from-object pose.
struct FieldGradients {
  std::vector<double> background;
  std::vector<std::vector<double>> objects;
  std::vector<double> log_beta;
  std::vector<Vec6> pose;

  void init(const SceneFields& fields) {
    background.assign(fields.background.grid.data.size(), 0.0);
    objects.resize(fields.objects.size());
    for (size_t k = 0; k < fields.objects.size(); ++k)
      objects[k].assign(fields.objects[k].grid.data.size(), 0.0);
    log_beta.assign(fields.objects.size(), 0.0);
    pose.assign(fields.objects.size(), Vec6::Zero());
  }

  void add(const FieldGradients& o) {
    for (size_t i = 0; i < background.size(); ++i) background[i] += o.background[i];
    for (size_t k = 0; k < objects.size(); ++k)
      for (size_t i = 0; i < objects[k].size(); ++i) objects[k][i] += o.objects[k][i];
    for (size_t k = 0; k < log_beta.size(); ++k) log_beta[k] += o.log_beta[k];
    for (size_t k = 0; k < pose.size(); ++k) pose[k] += o.pose[k];
  }
};

// Backward pass of compose_render. dL_dsigma_obj optionally adds an upstream
// gradient directly on each object sample's activated density (used by the
// sparsity loss), laid out [k * N + i].
inline void compose_render_backward(const RenderContext& ctx, const SceneFields& fields,
                                    const Vec3& dL_dcolor, double dL_ddepth,
                                    FieldGradients& grads,
                                    const std::vector<double>* dL_dsigma_obj = nullptr,
                                    bool pose_grads = true) {
  const int n = ctx.samples.count();
  const int K = ctx.K;

  // Per sample: gamma_f = dL_dcolor . c_f, m = density-weighted mean gamma,
  // q = dL_ddepth * z + m. The transmittance chain contributes
  // delta_i * (T_i e_i q_i - S_{i+1}) to every field density at sample i,
  // with S the suffix sum of T alpha q.
  std::vector<double> q(n), suffix(n + 1, 0.0);
  std::vector<double> gamma_bg(n);
  std::vector<double> gamma_obj(static_cast<size_t>(K) * n);
  for (int i = 0; i < n; ++i) {
    gamma_bg[i] = dL_dcolor.dot(ctx.bg[i].color);
    double num = ctx.bg[i].sigma * gamma_bg[i];
    for (int k = 0; k < K; ++k) {
      size_t id = static_cast<size_t>(k) * n + i;
      gamma_obj[id] = dL_dcolor.dot(ctx.obj[id].color);
      num += ctx.sigma_obj[id] * gamma_obj[id];
    }
    double m = ctx.sbar[i] > 0 ? num / ctx.sbar[i] : 0.0;
    q[i] = dL_ddepth * ctx.samples.t[i] * ctx.ray.z_scale + m;
  }
  for (int i = n - 1; i >= 0; --i)
    suffix[i] = suffix[i + 1] + ctx.trans[i] * ctx.alpha[i] * q[i];

  for (int i = 0; i < n; ++i) {
    double chain = ctx.samples.delta[i] * (ctx.trans[i] * ctx.ealpha[i] * q[i] - suffix[i + 1]);
    double w = ctx.trans[i] * ctx.alpha[i];
    double m = q[i] - dL_ddepth * ctx.samples.t[i] * ctx.ray.z_scale;

    // Background parameters.
    if (ctx.bg[i].inside) {
      double dL_dsig = chain + (ctx.sbar[i] > 0
                                    ? w * (gamma_bg[i] - m) / ctx.sbar[i]
                                    : ctx.trans[i] * ctx.samples.delta[i] * gamma_bg[i]);
      double weight_c = ctx.sbar[i] > 0 ? w * ctx.bg[i].sigma / ctx.sbar[i] : 0.0;
      ctx.bg[i].stencil.scatter(fields.background.grid, kShapeChannel,
                                dL_dsig * softplus_derivative(ctx.bg[i].raw_sigma),
                                grads.background);
      for (int c = 0; c < 3; ++c) {
        double col = ctx.bg[i].color[c];
        ctx.bg[i].stencil.scatter(fields.background.grid, kColorChannel + c,
                                  dL_dcolor[c] * weight_c * col * (1.0 - col),
                                  grads.background);
      }
    }

    // Object parameters and poses.
    for (int k = 0; k < K; ++k) {
      if (!ctx.select.object(k)) continue;
      size_t id = static_cast<size_t>(k) * n + i;
      const ObjectSample& os = ctx.obj[id];
      const ObjectField& f = fields.objects[k];
      double dL_dsig = chain + (ctx.sbar[i] > 0
                                    ? w * (gamma_obj[id] - m) / ctx.sbar[i]
                                    : ctx.trans[i] * ctx.samples.delta[i] * gamma_obj[id]);
      if (dL_dsigma_obj) dL_dsig += (*dL_dsigma_obj)[id];
      double beta = f.beta();
      double dL_dsdf = dL_dsig * sdf_to_density_dd(os.sdf, beta);
      grads.log_beta[k] += dL_dsig * sdf_to_density_dbeta(os.sdf, beta) * beta;
      os.stencil.scatter(f.grid, kShapeChannel, dL_dsdf, grads.objects[k]);

      double weight_c = ctx.sbar[i] > 0 ? w * ctx.sigma_obj[id] / ctx.sbar[i] : 0.0;
      Vec3 dL_draw = Vec3::Zero();
      for (int c = 0; c < 3; ++c) {
        double col = os.color[c];
        dL_draw[c] = dL_dcolor[c] * weight_c * col * (1.0 - col);
        os.stencil.scatter(f.grid, kColorChannel + c, dL_draw[c], grads.objects[k]);
      }

      if (!pose_grads) continue;
      // Spatial path into the pose: the canonical query point moves with the
      // left-increment twist. Clamped axes freeze the interpolant, leaving
      // only the boundary-distance direction for the sdf.
      Vec3 g_sdf = os.stencil.gradient(f.grid, kShapeChannel);
      Vec3 g_col = Vec3::Zero();
      for (int c = 0; c < 3; ++c) g_col += dL_draw[c] * os.stencil.gradient(f.grid, kColorChannel + c);
      if (!os.inside)
        for (int a = 0; a < 3; ++a)
          if (os.outward[a] != 0) {
            g_sdf[a] = os.outward[a];
            g_col[a] = 0.0;
          }
      Vec3 dL_dxo = dL_dsdf * g_sdf + g_col;
      Vec3 h = ctx.poses[k].rotation * dL_dxo;
      Vec3 x_world = ctx.ray.origin + ctx.samples.t[i] * ctx.ray.dir;
      grads.pose[k].head<3>() += h.cross(x_world);
      grads.pose[k].tail<3>() -= h;
    }
  }
}

// Soft mask of object k: radiance of k set to 1, all other densities zeroed,
// which reduces to the accumulated opacity of object k rendered alone.
inline double render_mask(const Ray& ray, const RaySamples& samples, const SceneFields& fields,
                          int k, const std::vector<Pose>& poses) {
  require(k >= 0 && k < fields.object_count(), ErrorClass::config, "render_mask: bad object index");
  const ObjectField& f = fields.objects[k];
  Pose inv = poses[k].inverse();
  double T = 1.0, acc = 0.0;
  for (int i = 0; i < samples.count(); ++i) {
    Vec3 x = ray.origin + samples.t[i] * ray.dir;
    ObjectSample os = query_object_canonical(f, inv.apply(x));
    double a = 1.0 - std::exp(-sdf_to_density(os.sdf, f.beta()) * samples.delta[i]);
    acc += T * a;
    T *= 1.0 - a;
  }
  return acc;
}

}  // namespace poke::field

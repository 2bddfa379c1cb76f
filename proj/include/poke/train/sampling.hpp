// SPDX-License-Identifier: Apache-2.0
#pragma once

#include <random>
#include <vector>

#include "poke/data/frame.hpp"
#include "poke/field/render.hpp"

namespace poke::train {

// Per-pixel maximum ground-truth depth across all frames; pixels never seen
// with valid depth stay zero.
struct MaxDepthMap {
  ImageF z;

  static MaxDepthMap build(const std::vector<data::FrameRecord>& frames) {
    require(!frames.empty(), ErrorClass::data, "MaxDepthMap: no frames");
    MaxDepthMap m;
    m.z = ImageF(frames[0].width(), frames[0].height(), 1);
    for (const auto& f : frames)
      for (int i = 0; i < f.depth.width * f.depth.height; ++i)
        if (f.depth.data[i] > m.z.data[i]) m.z.data[i] = f.depth.data[i];
    return m;
  }
};

struct RayDatum {
  field::Ray ray;
  double t0 = 0, t1 = 0;  // sampling interval from the scene volume
  int px = 0, py = 0, frame = 0;
  Vec3 gt_color = Vec3::Zero();
  double gt_depth = 0;  // camera z-depth, 0 = invalid
  double z_max = 0;
  uint32_t mask_bits = 0;
};

struct RayBatch {
  int frame = -1;
  std::vector<RayDatum> rays;
  bool empty_mask_fallback = false;  // foreground pool was empty, drew image-wide
};

enum class SampleMode {
  background_only,  // outside robot mask and outside every object mask
  foreground_only,  // within the union of object masks
  full,             // half from the mask union, half image-wide
  image_wide,       // uniform over the image (foreground-sampling ablation)
};

namespace detail {

inline bool ray_volume_interval(const field::VoxelGrid& vol, const poke::Ray& r, double& t0,
                                double& t1) {
  t0 = 1e-4;
  t1 = 1e30;
  for (int a = 0; a < 3; ++a) {
    double o = r.origin[a], d = r.direction[a];
    if (std::abs(d) < 1e-12) {
      if (o < vol.lo[a] || o > vol.hi[a]) return false;
      continue;
    }
    double ta = (vol.lo[a] - o) / d, tb = (vol.hi[a] - o) / d;
    if (ta > tb) std::swap(ta, tb);
    t0 = std::max(t0, ta);
    t1 = std::min(t1, tb);
  }
  return t1 > t0;
}

}  // namespace detail

// Draws n rays from one frame with replacement. Robot-mask pixels and rays
// missing the scene volume are rejected and redrawn. masks holds one image
// per trained object (255 = object).
inline RayBatch sample_rays(const data::FrameRecord& frame, const std::vector<ImageU8>& masks,
                            int n, SampleMode mode, const field::VoxelGrid& volume,
                            const MaxDepthMap& zmax, std::mt19937_64& rng) {
  const int w = frame.width(), h = frame.height();
  require(w > 0 && h > 0, ErrorClass::data, "sample_rays: empty frame");
  RayBatch batch;
  batch.frame = frame.index;
  batch.rays.reserve(n);

  auto mask_bits_at = [&](int x, int y) {
    uint32_t bits = 0;
    for (size_t k = 0; k < masks.size(); ++k)
      if (masks[k].at(x, y) != 0) bits |= 1u << k;
    return bits;
  };

  std::vector<int> pool;  // foreground pixel indices, robot excluded
  if (mode == SampleMode::foreground_only || mode == SampleMode::full) {
    for (int y = 0; y < h; ++y)
      for (int x = 0; x < w; ++x)
        if (mask_bits_at(x, y) != 0 && !frame.robot_at(x, y)) pool.push_back(y * w + x);
    if (pool.empty()) batch.empty_mask_fallback = true;
  }

  std::uniform_int_distribution<int> ux(0, w - 1), uy(0, h - 1);
  std::uniform_int_distribution<size_t> upool(0, pool.empty() ? 0 : pool.size() - 1);

  int foreground_quota = 0;
  if (!pool.empty()) {
    if (mode == SampleMode::foreground_only) foreground_quota = n;
    if (mode == SampleMode::full) foreground_quota = n / 2;
  }

  for (int i = 0; i < n; ++i) {
    bool from_pool = i < foreground_quota;
    for (int attempt = 0;; ++attempt) {
      require(attempt < 10000, ErrorClass::numeric, "sample_rays: rejection sampling stalled");
      int x, y;
      if (from_pool) {
        int p = pool[upool(rng)];
        x = p % w;
        y = p / w;
      } else {
        x = ux(rng);
        y = uy(rng);
      }
      if (frame.robot_at(x, y)) continue;
      uint32_t bits = mask_bits_at(x, y);
      if (mode == SampleMode::background_only && bits != 0) continue;

      poke::Ray pr = pixel_ray(frame.camera, x, y);
      double t0, t1;
      if (!detail::ray_volume_interval(volume, pr, t0, t1)) continue;

      RayDatum d;
      d.ray.origin = pr.origin;
      d.ray.dir = pr.direction;
      d.ray.z_scale = ray_depth_scale(frame.camera, pr);
      d.t0 = t0;
      d.t1 = t1;
      d.px = x;
      d.py = y;
      d.frame = frame.index;
      for (int c = 0; c < 3; ++c) d.gt_color[c] = frame.rgb.at(x, y, c);
      d.gt_depth = frame.depth.at(x, y);
      d.z_max = zmax.z.at(x, y);
      d.mask_bits = bits;
      batch.rays.push_back(d);
      break;
    }
  }
  return batch;
}

}  // namespace poke::train

// SPDX-License-Identifier: Apache-2.0
#pragma once

#include <cstdint>
#include <cstring>
#include <fstream>
#include <string>
#include <vector>

#include "poke/field/render.hpp"

namespace poke::field {

// Scene checkpoint: magic PKRC, version, K, frame count, then per field a
// grid header followed by raw little-endian f32 data, then pose twists.
// save(load(file)) reproduces the file byte for byte.
namespace detail {

inline void put_u32(std::ostream& os, uint32_t v) {
  unsigned char b[4] = {static_cast<unsigned char>(v), static_cast<unsigned char>(v >> 8),
                        static_cast<unsigned char>(v >> 16), static_cast<unsigned char>(v >> 24)};
  os.write(reinterpret_cast<const char*>(b), 4);
}

inline uint32_t get_u32(std::istream& is) {
  unsigned char b[4];
  is.read(reinterpret_cast<char*>(b), 4);
  return static_cast<uint32_t>(b[0]) | static_cast<uint32_t>(b[1]) << 8 |
         static_cast<uint32_t>(b[2]) << 16 | static_cast<uint32_t>(b[3]) << 24;
}

inline void put_f32(std::ostream& os, float v) {
  uint32_t u;
  std::memcpy(&u, &v, 4);
  put_u32(os, u);
}

inline float get_f32(std::istream& is) {
  uint32_t u = get_u32(is);
  float v;
  std::memcpy(&v, &u, 4);
  return v;
}

inline void put_grid(std::ostream& os, const VoxelGrid& g) {
  put_u32(os, static_cast<uint32_t>(g.nx));
  put_u32(os, static_cast<uint32_t>(g.ny));
  put_u32(os, static_cast<uint32_t>(g.nz));
  put_u32(os, static_cast<uint32_t>(g.channels));
  for (int a = 0; a < 3; ++a) put_f32(os, static_cast<float>(g.lo[a]));
  for (int a = 0; a < 3; ++a) put_f32(os, static_cast<float>(g.hi[a]));
  for (double v : g.data) put_f32(os, static_cast<float>(v));
}

inline VoxelGrid get_grid(std::istream& is) {
  int nx = static_cast<int>(get_u32(is));
  int ny = static_cast<int>(get_u32(is));
  int nz = static_cast<int>(get_u32(is));
  int ch = static_cast<int>(get_u32(is));
  require(is.good() && nx >= 2 && ny >= 2 && nz >= 2 && ch >= 1 && ch <= 16,
          ErrorClass::data, "checkpoint: corrupt grid header");
  Vec3 lo, hi;
  for (int a = 0; a < 3; ++a) lo[a] = get_f32(is);
  for (int a = 0; a < 3; ++a) hi[a] = get_f32(is);
  VoxelGrid g(lo, hi, nx, ny, nz, ch);
  for (double& v : g.data) v = get_f32(is);
  require(is.good(), ErrorClass::data, "checkpoint: truncated grid data");
  return g;
}

}  // namespace detail

inline void save_checkpoint(const std::string& path, const SceneFields& fields,
                            const PoseTrack& poses) {
  std::ofstream os(path, std::ios::binary);
  require(os.good(), ErrorClass::io, "save_checkpoint: cannot open " + path);
  os.write("PKRC", 4);
  detail::put_u32(os, 1);
  detail::put_u32(os, static_cast<uint32_t>(fields.objects.size()));
  detail::put_u32(os, static_cast<uint32_t>(poses.frame_count()));
  detail::put_grid(os, fields.background.grid);
  for (const ObjectField& f : fields.objects) {
    detail::put_grid(os, f.grid);
    detail::put_f32(os, static_cast<float>(f.log_beta));
  }
  require(poses.object_count() == 0 ||
              poses.object_count() == static_cast<int>(fields.objects.size()),
          ErrorClass::config, "save_checkpoint: pose-track object count mismatch");
  for (const auto& track : poses.twists)
    for (const Twist& tw : track) {
      Vec6 c = tw.coeffs();
      for (int a = 0; a < 6; ++a) detail::put_f32(os, static_cast<float>(c[a]));
    }
  require(os.good(), ErrorClass::io, "save_checkpoint: write failed for " + path);
}

inline void load_checkpoint(const std::string& path, SceneFields& fields, PoseTrack& poses) {
  std::ifstream is(path, std::ios::binary);
  require(is.good(), ErrorClass::io, "load_checkpoint: cannot open " + path);
  char magic[4];
  is.read(magic, 4);
  require(is.good() && std::memcmp(magic, "PKRC", 4) == 0, ErrorClass::data,
          "load_checkpoint: bad magic");
  uint32_t version = detail::get_u32(is);
  require(version == 1, ErrorClass::data, "load_checkpoint: unsupported version");
  uint32_t K = detail::get_u32(is);
  uint32_t frames = detail::get_u32(is);
  require(K <= 4096, ErrorClass::data, "load_checkpoint: implausible object count");
  fields.background.grid = detail::get_grid(is);
  fields.objects.assign(K, ObjectField{});
  for (uint32_t k = 0; k < K; ++k) {
    fields.objects[k].grid = detail::get_grid(is);
    fields.objects[k].log_beta = detail::get_f32(is);
  }
  poses.twists.assign(K, std::vector<Twist>(frames));
  for (uint32_t k = 0; k < K; ++k)
    for (uint32_t t = 0; t < frames; ++t) {
      Vec6 c;
      for (int a = 0; a < 6; ++a) c[a] = detail::get_f32(is);
      poses.twists[k][t] = Twist::from_coeffs(c);
    }
  require(is.good(), ErrorClass::data, "load_checkpoint: truncated file");
}

}  // namespace poke::field

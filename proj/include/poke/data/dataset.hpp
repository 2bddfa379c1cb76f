// SPDX-License-Identifier: Apache-2.0
#pragma once

#include <filesystem>
#include <fstream>

#include "poke/data/frame.hpp"
#include "poke/sim/scene.hpp"

namespace poke::data {

namespace fs = std::filesystem;
using nlohmann::json;

struct Dataset {
  sim::SceneConfig scene;
  std::vector<FrameRecord> frames;
  json meta;  // full scene.json, including any discovery echo

  int object_count() const { return static_cast<int>(scene.objects.size()); }
};

namespace detail {

inline std::string frame_stem(const fs::path& dir, int index) {
  char buf[16];
  std::snprintf(buf, sizeof(buf), "%06d", index);
  return (dir / "frames" / buf).string();
}

}  // namespace detail

inline void write_json_file(const fs::path& path, const json& j) {
  std::ofstream out(path);
  if (!out) fail(ErrorClass::io, "cannot open for writing: " + path.string());
  out << j.dump(2) << "\n";
  if (!out) fail(ErrorClass::io, "short write: " + path.string());
}

inline json read_json_file(const fs::path& path) {
  std::ifstream in(path);
  if (!in) fail(ErrorClass::io, "cannot open for reading: " + path.string());
  json j;
  try {
    in >> j;
  } catch (const json::parse_error& e) {
    fail(ErrorClass::data, "malformed json in " + path.string() + ": " + e.what());
  }
  return j;
}

inline void save_dataset(const fs::path& dir, const sim::SceneConfig& scene,
                         const std::vector<FrameRecord>& frames,
                         const json& extra = json::object()) {
  std::error_code ec;
  fs::create_directories(dir / "frames", ec);
  if (ec) fail(ErrorClass::io, "cannot create " + (dir / "frames").string());

  json frame_meta = json::array();
  for (const auto& f : frames) {
    std::string stem = detail::frame_stem(dir, f.index);
    write_png8(stem + ".rgb.png", to_u8(f.rgb));
    write_png16(stem + ".depth.png", depth_to_u16mm(f.depth));
    write_raw_f32(stem + ".flow.f32", f.flow_to_next);
    write_png8(stem + ".robot.png", f.robot_mask);
    write_png8(stem + ".gtmask.png", f.gt_labels);
    json poses = json::array();
    for (const auto& p : f.gt_poses) poses.push_back(sim::pose_to_json(p));
    frame_meta.push_back({{"index", f.index}, {"gt_poses", poses}});
  }

  json root{{"scene", sim::scene_to_json(scene)}, {"frames", frame_meta}};
  for (auto it = extra.begin(); it != extra.end(); ++it) root[it.key()] = it.value();
  write_json_file(dir / "scene.json", root);
}

inline Dataset load_dataset(const fs::path& dir) {
  if (!fs::exists(dir / "scene.json"))
    fail(ErrorClass::io, "missing dataset manifest: " + (dir / "scene.json").string());
  Dataset ds;
  ds.meta = read_json_file(dir / "scene.json");
  ds.scene = sim::scene_from_json(ds.meta.at("scene"));

  std::vector<std::string> missing;
  for (const auto& fm : ds.meta.at("frames")) {
    FrameRecord f;
    f.index = fm.at("index");
    f.camera = ds.scene.camera;
    for (const auto& p : fm.at("gt_poses")) f.gt_poses.push_back(sim::pose_from_json(p));

    std::string stem = detail::frame_stem(dir, f.index);
    for (const char* suffix :
         {".rgb.png", ".depth.png", ".flow.f32", ".robot.png", ".gtmask.png"})
      if (!fs::exists(stem + suffix)) missing.push_back(stem + suffix);
    if (!missing.empty()) continue;

    f.rgb = to_float(read_png8(stem + ".rgb.png"));
    f.depth = u16mm_to_depth(read_png16(stem + ".depth.png"));
    f.flow_to_next = read_raw_f32(stem + ".flow.f32", ds.scene.camera.width,
                                  ds.scene.camera.height, 2);
    f.robot_mask = read_png8(stem + ".robot.png");
    f.gt_labels = read_png8(stem + ".gtmask.png");
    require(f.rgb.width == ds.scene.camera.width && f.rgb.height == ds.scene.camera.height,
            ErrorClass::data, "frame size mismatch in " + stem);
    ds.frames.push_back(std::move(f));
  }
  if (!missing.empty()) {
    std::string all = "dataset is missing files:";
    for (const auto& m : missing) all += "\n  " + m;
    fail(ErrorClass::io, all);
  }
  require(!ds.frames.empty(), ErrorClass::data, "dataset has no frames: " + dir.string());
  return ds;
}

}  // namespace poke::data

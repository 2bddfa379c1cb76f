// SPDX-License-Identifier: Apache-2.0
#pragma once

#include <vector>

#include "poke/core/camera.hpp"
#include "poke/io/image.hpp"

namespace poke::data {

// One observation: RGB-D, ground-truth masks/poses, and flow to the next
// retained frame. Labels are 1-based object ids; 0 is background. Pixels
// where the pusher is the nearest hit carry label 0 and robot_mask 255.
struct FrameRecord {
  int index = 0;
  ImageF rgb;           // H x W x 3, [0,1]
  ImageF depth;         // H x W x 1, meters, 0 = invalid
  ImageF flow_to_next;  // H x W x 2, pixels (du, dv); zero for the last frame
  ImageU8 robot_mask;   // H x W x 1, 255 = pusher
  ImageU8 gt_labels;    // H x W x 1, 0 = background, k = object k
  std::vector<Pose> gt_poses;  // world-from-object, one per object
  PinholeCamera camera;

  int width() const { return rgb.width; }
  int height() const { return rgb.height; }
  bool robot_at(int x, int y) const { return robot_mask.at(x, y) != 0; }
  int label_at(int x, int y) const { return gt_labels.at(x, y); }

  ImageU8 object_mask(int k) const {  // k is 1-based
    ImageU8 m(gt_labels.width, gt_labels.height, 1);
    for (size_t i = 0; i < m.data.size(); ++i)
      m.data[i] = gt_labels.data[i] == k ? 255 : 0;
    return m;
  }
};

}  // namespace poke::data

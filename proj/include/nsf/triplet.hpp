#pragma once

#include <string>

#include "nsf/image.hpp"

namespace nsf {

/// Rectified left/center/right renders with center-aligned disparity.
struct Triplet {
  Image left;       // H x W x 3
  Image center;     // H x W x 3
  Image right;      // H x W x 3
  Image disparity;  // H x W, pixels; 0 where invalid
  Image depth;      // H x W, camera-frame z of the center render
  Image ao;         // H x W in [0,1]
  Mask valid;       // H x W
  double baseline = 0.0;
  double focal = 0.0;
  int pose_id = 0;
  std::string scene_id;

  int width() const { return center.width; }
  int height() const { return center.height; }
  /// Throws ShapeError when maps disagree in extent or channel count.
  void validate() const;
};

}  // namespace nsf

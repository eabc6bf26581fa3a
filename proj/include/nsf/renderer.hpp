#pragma once

#include <random>
#include <vector>

#include "nsf/field.hpp"
#include "nsf/geometry.hpp"
#include "nsf/image.hpp"

namespace nsf {

/// Rays whose accumulated opacity falls below this are background: no depth.
inline constexpr double kBackgroundAo = 1e-3;

struct QuadratureSamples {
  std::vector<double> t;
  std::vector<double> delta;
  std::vector<double> sigma;
  std::vector<Vec3> color;
};

struct CompositeResult {
  Vec3 color = Vec3::Zero();
  double depth = 0.0;  // sum_i T_i alpha_i t_i, unnormalized
  double ao = 0.0;     // sum_i T_i alpha_i
  double transmittance = 1.0;
};

struct RenderOutput {
  Image color;  // H x W x 3
  Image depth;  // camera-frame z (ray-distance estimate times the ray's forward cosine)
  Image ao;
  Mask valid;
};

/// N evenly spaced bins over [t_near, t_far]; midpoints, or one uniform draw
/// per bin when rng is given.
QuadratureSamples sample_bins(const Ray& ray, int n, std::mt19937_64* rng = nullptr);

CompositeResult composite(const QuadratureSamples& s);

struct RenderOptions {
  int samples = 512;
  int rows_per_batch = 4;  // rays are queried in row blocks
};

/// Deterministic; parallel over row blocks.
RenderOutput render_image(const RadianceField& field, const Intrinsics& intr, const Pose& pose,
                          const RenderOptions& opts = {});
inline RenderOutput render_image(const RadianceField& field, const Intrinsics& intr, const Pose& pose,
                                 int samples) {
  return render_image(field, intr, pose, RenderOptions{samples});
}

}  // namespace nsf

#pragma once

// Plain serial implementations written directly from the defining formulas.
// They share no code with the parallel kernels and serve as test oracles and
// as the baseline in bench/.

#include <vector>

#include "nsf/field.hpp"
#include "nsf/geometry.hpp"
#include "nsf/image.hpp"
#include "nsf/kernels.hpp"
#include "nsf/renderer.hpp"
#include "nsf/stereo.hpp"

namespace nsf::reference {

/// Product-form transmittance T_i = prod_{j<i} (1 - alpha_j).
CompositeResult composite(const QuadratureSamples& s);

/// One ray at a time, one field query per ray.
RenderOutput render_image(const RadianceField& field, const Intrinsics& intr, const Pose& pose, int samples);

/// Per-pixel window sums with reflected indices, channel-averaged.
std::vector<double> ssim(const std::vector<double>& a, const std::vector<double>& b, const kernels::ImageExtent& ext,
                         int window);

std::vector<double> hash_encode(const std::vector<double>& positions, const std::vector<double>& table,
                                const kernels::HashEncodingConfig& cfg);

void warp(const std::vector<double>& target, const std::vector<double>& disp, const kernels::ImageExtent& ext,
          kernels::WarpSide side, std::vector<double>& out, std::vector<std::uint8_t>& inbounds);

BlockMatchResult block_match(const Image& left, const Image& right, const MatcherConfig& cfg);

}  // namespace nsf::reference

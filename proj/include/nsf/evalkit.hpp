#pragma once

#include <cstdint>
#include <string>
#include <string_view>
#include <vector>

#include "nsf/image.hpp"

namespace nsf {

struct EvalMask {
  Mask valid;  // ground truth present
  Mask noc;    // non-occluded, subset of valid
};

enum class Region { all, noc };

/// 100 * |{p in region : |pred - gt| > tau}| / |region|.
/// Throws DomainError on an empty region or tau <= 0.
double bad_tau(const Image& pred, const Image& gt, double tau, const EvalMask& mask, Region region);

/// Non-occluded iff |gt_left(x,y) - gt_right(x - gt_left(x,y), y)| <= 1, with
/// linear lookup along the row. Samples outside [0, W-1] count as occluded.
Mask occlusion_mask(const Image& gt_left, const Image& gt_right);

/// valid plus noc restricted to valid.
EvalMask make_eval_mask(const Mask& valid, const Image& gt_left, const Image& gt_right);

/// 3 for KITTI-style data, 2 for Middlebury-style, 1 for ETH3D-style.
double default_tau(std::string_view dataset);

struct EvalRecord {
  std::string dataset;
  double tau = 2.0;
  double bad_all = 0.0;
  double bad_noc = 0.0;
  std::uint64_t pixels_all = 0;
  std::uint64_t pixels_noc = 0;

  bool operator==(const EvalRecord&) const = default;
};

EvalRecord evaluate(const std::string& dataset, const Image& pred, const Image& gt, const EvalMask& mask,
                    double tau);

std::string report_text(const std::vector<EvalRecord>& records);
std::string report_csv(const std::vector<EvalRecord>& records);
std::vector<EvalRecord> parse_report_csv(const std::string& csv);

}  // namespace nsf

#pragma once

#include <vector>

#include "nsf/image.hpp"
#include "nsf/nsloss.hpp"
#include "nsf/triplet.hpp"

namespace nsf {

enum class MatchCost { sad, ssim };

struct MatcherConfig {
  int d_max = 64;
  int window = 5;
  MatchCost cost = MatchCost::sad;

  void validate() const;
};

struct BlockMatchResult {
  Image disparity;  // left-aligned, integer valued
  Mask valid;       // passes the left-right check and the uniqueness test
};

/// Winner-take-all over d in [0, d_max]: left(x) against right(x - d).
/// A pixel is valid when the right-view match maps back within 1 px and its
/// best cost is strictly below every cost more than 1 px away from it.
BlockMatchResult block_match(const Image& left, const Image& right, const MatcherConfig& cfg);

struct OptimizeConfig {
  int steps = 500;
  double lr = 0.05;
  double d_max = 64.0;
  MatcherConfig matcher;
  double trace_tau = 2.0;
};

struct TraceRow {
  int step = 0;
  double lns = 0.0;
  double bad = 0.0;  // bad-tau (percent) against the rendered disparity on valid pixels
};

struct OptimizeResult {
  Image disparity;
  Image initial;
  std::vector<TraceRow> trace;  // entry k is measured after k updates
  LossReport final_report;
};

/// d_hat starts from block_match(center, right) where valid and 0 elsewhere,
/// then follows Adam on the scalar NS loss, clamped to [0, d_max] each step.
/// Throws DivergenceError on a non-finite loss.
OptimizeResult optimize_disparity(const Triplet& triplet, const LossConfig& loss, const OptimizeConfig& cfg);

/// Same loop from a caller-supplied starting disparity.
OptimizeResult optimize_disparity_from(const Triplet& triplet, const Image& init, const LossConfig& loss,
                                       const OptimizeConfig& cfg);

}  // namespace nsf

#pragma once

#include <cstdint>
#include <utility>
#include <vector>

#include "nsf/diff.hpp"
#include "nsf/image.hpp"
#include "nsf/kernels.hpp"
#include "nsf/triplet.hpp"

namespace nsf {

enum class PhotometricMode { triplet, single_pair };

/// How eta is derived from AO.
///   ao:     eta = 0 if AO < th else AO
///   binary: eta = 0 if AO < th else 1
///   none:   eta = 1 on every valid pixel
enum class AoGate { ao, binary, none };

struct LossConfig {
  double beta = 0.85;
  double th = 0.5;
  double gamma_3rho = 0.1;
  double gamma_disp = 1.0;
  int window = 3;
  PhotometricMode photometric = PhotometricMode::triplet;
  bool disparity_term = true;  // false: eta is 0 everywhere (photometric-only rows)
  AoGate gate = AoGate::ao;

  void validate() const;

  /// Ablation rows: 'A' single pair, 'C' triplet, 'E' disparity only,
  /// 'F' thresholded disparity, 'G' single pair + F, 'H' triplet + F,
  /// 'I' full loss.
  static LossConfig row(char id);
};

/// Per-pixel maps are H x W single-channel images.
struct LossReport {
  Image rho_left;             // L_rho(I_c, I_l warped by +d)
  Image rho_right;            // L_rho(I_c, I_r warped by -d)
  Image rho_identity_left;    // L_rho(I_c, I_l)
  Image rho_identity_right;   // L_rho(I_c, I_r)
  Image l3rho;
  Image mu;
  Image eta;
  Image ldisp;
  Image lns;
  Mask active;

  double lns_mean = 0.0;  // scalar objective
  double l3rho_mean = 0.0;
  double ldisp_mean = 0.0;
  std::size_t active_pixels = 0;
};

// --------------------------------------------------------------- standalone ops

Image ssim(const Image& a, const Image& b, int window = 3);

struct WarpResult {
  Image image;
  Mask inbounds;
};
WarpResult warp_horizontal(const Image& target, const Image& disp, kernels::WarpSide side);

Image photometric_loss(const Image& center, const Image& reconstructed, const LossConfig& cfg);

struct TripletLoss {
  Image l3rho;
  Image mu;
};
TripletLoss triplet_loss(const Image& left, const Image& center, const Image& right, const Image& disp,
                         const LossConfig& cfg);

struct MaskedMap {
  Image map;   // 0 on excluded pixels
  double mean = 0.0;  // over included pixels only
  std::size_t count = 0;
};
MaskedMap disparity_loss(const Image& rendered, const Image& predicted, const Mask& valid);

/// eta for one pixel under the given gate.
double ao_gate(double ao, bool valid, const LossConfig& cfg);

LossReport ns_loss(const Triplet& triplet, const Image& d_hat, const LossConfig& cfg);

struct LossWithGradient {
  LossReport report;
  std::vector<double> grad;  // d(lns_mean)/d(d_hat), one entry per pixel
};
LossWithGradient ns_loss_with_gradient(const Triplet& triplet, const Image& d_hat, const LossConfig& cfg);

/// Records the scalar NS loss on a tape with d_hat (pixels x 1) as input.
/// Images are flattened H x W x C in row-major order; report may be null.
template <class T>
diff::Var ns_loss_graph(diff::Tape<T>& tape, diff::Var d_hat, const Triplet& triplet, const LossConfig& cfg,
                        LossReport* report = nullptr);

}  // namespace nsf

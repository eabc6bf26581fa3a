#pragma once

// Data-parallel inner loops shared by the forward renderers and the reverse-mode
// primitives. Every kernel here is OpenMP-parallel over disjoint outputs and
// deterministic for a fixed input; the straightforward serial versions used as
// test oracles live in nsf/reference.hpp.

#include <array>
#include <cstdint>
#include <span>

namespace nsf::kernels {

// ---------------------------------------------------------------- hashing

struct HashEncodingConfig {
  int levels = 8;
  int features = 2;
  int log2_table_size = 14;
  int base_resolution = 16;
  double growth = 1.5;
  std::array<std::uint64_t, 3> primes{1ull, 2654435761ull, 805459861ull};

  std::uint64_t table_size() const { return std::uint64_t{1} << log2_table_size; }
  int resolution(int level) const;
  int output_width() const { return levels * features; }
  std::size_t parameter_count() const {
    return static_cast<std::size_t>(levels) * table_size() * features;
  }
  void validate() const;
};

/// (x*p1 XOR y*p2 XOR z*p3) mod table_size, in wrap-around 64-bit arithmetic.
/// table_size must be a power of two.
std::uint64_t hash_index(const std::array<std::uint64_t, 3>& cell, std::uint64_t table_size,
                         const std::array<std::uint64_t, 3>& primes);

/// positions: n x 3 in [0,1] (clamped); table: levels x T x F; out: n x (L*F).
template <class T>
void hash_encode_forward(std::span<const T> positions, std::span<const T> table,
                         const HashEncodingConfig& cfg, std::span<T> out);

/// Accumulates into grad_table. Parallel over levels, whose table slices are disjoint.
template <class T>
void hash_encode_backward(std::span<const T> positions, std::span<const T> grad_out,
                          const HashEncodingConfig& cfg, std::span<T> grad_table);

// ------------------------------------------------------------- dense grid

struct DenseGridShape {
  int resolution = 32;  // vertices per axis
  int channels = 1;
  std::size_t parameter_count() const {
    return static_cast<std::size_t>(resolution) * resolution * resolution * channels;
  }
};

template <class T>
void grid_interp_forward(std::span<const T> positions, std::span<const T> grid,
                         const DenseGridShape& shape, std::span<T> out);
template <class T>
void grid_interp_backward(std::span<const T> positions, std::span<const T> grad_out,
                          const DenseGridShape& shape, std::span<T> grad_grid);

// ------------------------------------------------------------ compositing

/// Rays own contiguous sample ranges [offsets[r], offsets[r+1]).
/// Output per ray (5 values): r, g, b, raw expected depth sum(w t), ao = sum(w).
inline constexpr int kCompositeWidth = 5;

template <class T>
void composite_forward(std::span<const T> sigma, std::span<const T> color, std::span<const T> t,
                       std::span<const T> delta, std::span<const int> offsets, std::span<T> out);

template <class T>
void composite_backward(std::span<const T> sigma, std::span<const T> color, std::span<const T> t,
                        std::span<const T> delta, std::span<const int> offsets,
                        std::span<const T> grad_out, std::span<T> grad_sigma,
                        std::span<T> grad_color);

// ------------------------------------------------------------------ image

struct ImageExtent {
  int width = 0;
  int height = 0;
  int channels = 1;
  std::size_t pixels() const { return static_cast<std::size_t>(width) * height; }
};

inline constexpr double kSsimC1 = 0.01 * 0.01;
inline constexpr double kSsimC2 = 0.03 * 0.03;

/// Channel-averaged SSIM map (one value per pixel) from box-filtered local
/// statistics over an odd window with reflective padding.
template <class T>
void ssim_forward(std::span<const T> a, std::span<const T> b, const ImageExtent& ext, int window,
                  std::span<T> out);

/// Accumulates d(sum g*ssim)/da and /db. Either gradient span may be empty.
template <class T>
void ssim_backward(std::span<const T> a, std::span<const T> b, const ImageExtent& ext, int window,
                   std::span<const T> grad_out, std::span<T> grad_a, std::span<T> grad_b);

enum class WarpSide { left, right };

/// Backward warp along rows. right: out(x,y) = target(x - d, y);
/// left: out(x,y) = target(x + d, y). Linear interpolation; samples outside
/// [0, W-1] are border-clamped and flagged 0 in inbounds.
template <class T>
void warp_forward(std::span<const T> target, std::span<const T> disp, const ImageExtent& ext,
                  WarpSide side, std::span<T> out, std::span<std::uint8_t> inbounds);

template <class T>
void warp_backward(std::span<const T> target, std::span<const T> disp, const ImageExtent& ext,
                   WarpSide side, std::span<const T> grad_out, std::span<T> grad_disp);

}  // namespace nsf::kernels

#include <algorithm>
#include <cmath>
#include <vector>

#include "nsf/errors.hpp"
#include "nsf/kernels.hpp"

namespace nsf::kernels {

namespace {

int reflect(int i, int n) {
  if (n == 1) return 0;
  while (i < 0 || i >= n) i = i < 0 ? -i : 2 * n - 2 - i;
  return i;
}

void check_window(int window, const ImageExtent& ext) {
  if (window < 1 || window % 2 == 0) throw DomainError("ssim: window must be odd and positive");
  if (ext.width < 1 || ext.height < 1 || ext.channels < 1) throw ShapeError("ssim: empty image");
}

// Separable box mean with reflective padding: out = cols(rows(in)). All planes
// are width*height scalars.
template <class T>
void box_mean(const std::vector<T>& in, std::vector<T>& out, std::vector<T>& tmp, int w, int h,
              int window) {
  const int rad = window / 2;
  const T inv = T(1) / static_cast<T>(window);
  tmp.resize(in.size());
  out.resize(in.size());
#pragma omp parallel for schedule(static)
  for (int y = 0; y < h; ++y) {
    for (int x = 0; x < w; ++x) {
      T s = 0;
      for (int o = -rad; o <= rad; ++o) s += in[static_cast<std::size_t>(y) * w + reflect(x + o, w)];
      tmp[static_cast<std::size_t>(y) * w + x] = s * inv;
    }
  }
#pragma omp parallel for schedule(static)
  for (int y = 0; y < h; ++y) {
    for (int x = 0; x < w; ++x) {
      T s = 0;
      for (int o = -rad; o <= rad; ++o) s += tmp[static_cast<std::size_t>(reflect(y + o, h)) * w + x];
      out[static_cast<std::size_t>(y) * w + x] = s * inv;
    }
  }
}

// Adjoint of box_mean: in_grad = rows^T(cols^T(g)).
template <class T>
void box_mean_adjoint(const std::vector<T>& g, std::vector<T>& in_grad, std::vector<T>& tmp, int w,
                      int h, int window) {
  const int rad = window / 2;
  const T inv = T(1) / static_cast<T>(window);
  tmp.assign(g.size(), T(0));
  in_grad.assign(g.size(), T(0));
#pragma omp parallel for schedule(static)
  for (int x = 0; x < w; ++x) {
    for (int y = 0; y < h; ++y) {
      const T v = g[static_cast<std::size_t>(y) * w + x] * inv;
      for (int o = -rad; o <= rad; ++o) tmp[static_cast<std::size_t>(reflect(y + o, h)) * w + x] += v;
    }
  }
#pragma omp parallel for schedule(static)
  for (int y = 0; y < h; ++y) {
    for (int x = 0; x < w; ++x) {
      const T v = tmp[static_cast<std::size_t>(y) * w + x] * inv;
      for (int o = -rad; o <= rad; ++o) in_grad[static_cast<std::size_t>(y) * w + reflect(x + o, w)] += v;
    }
  }
}

template <class T>
struct Moments {
  std::vector<T> mu_a, mu_b, e_aa, e_bb, e_ab;
};

template <class T>
Moments<T> channel_moments(std::span<const T> a, std::span<const T> b, const ImageExtent& ext,
                           int c, int window) {
  const std::size_t n = ext.pixels();
  const int C = ext.channels;
  std::vector<T> pa(n), pb(n), paa(n), pbb(n), pab(n), tmp;
  for (std::size_t i = 0; i < n; ++i) {
    const T va = a[i * C + c], vb = b[i * C + c];
    pa[i] = va;
    pb[i] = vb;
    paa[i] = va * va;
    pbb[i] = vb * vb;
    pab[i] = va * vb;
  }
  Moments<T> m;
  box_mean(pa, m.mu_a, tmp, ext.width, ext.height, window);
  box_mean(pb, m.mu_b, tmp, ext.width, ext.height, window);
  box_mean(paa, m.e_aa, tmp, ext.width, ext.height, window);
  box_mean(pbb, m.e_bb, tmp, ext.width, ext.height, window);
  box_mean(pab, m.e_ab, tmp, ext.width, ext.height, window);
  return m;
}

}  // namespace

template <class T>
void ssim_forward(std::span<const T> a, std::span<const T> b, const ImageExtent& ext, int window,
                  std::span<T> out) {
  check_window(window, ext);
  const std::size_t n = ext.pixels();
  if (a.size() != n * ext.channels || b.size() != a.size() || out.size() != n) {
    throw ShapeError("ssim: shape mismatch");
  }
  const T c1 = static_cast<T>(kSsimC1), c2 = static_cast<T>(kSsimC2);
  const T inv_c = T(1) / static_cast<T>(ext.channels);
  std::fill(out.begin(), out.end(), T(0));
  for (int c = 0; c < ext.channels; ++c) {
    const auto m = channel_moments(a, b, ext, c, window);
#pragma omp parallel for schedule(static)
    for (std::ptrdiff_t i = 0; i < static_cast<std::ptrdiff_t>(n); ++i) {
      const T ma = m.mu_a[i], mb = m.mu_b[i];
      const T va = m.e_aa[i] - ma * ma, vb = m.e_bb[i] - mb * mb, cov = m.e_ab[i] - ma * mb;
      const T num = (2 * ma * mb + c1) * (2 * cov + c2);
      const T den = (ma * ma + mb * mb + c1) * (va + vb + c2);
      out[i] += inv_c * num / den;
    }
  }
}

template <class T>
void ssim_backward(std::span<const T> a, std::span<const T> b, const ImageExtent& ext, int window,
                   std::span<const T> grad_out, std::span<T> grad_a, std::span<T> grad_b) {
  check_window(window, ext);
  const std::size_t n = ext.pixels();
  const int C = ext.channels;
  const T c1 = static_cast<T>(kSsimC1), c2 = static_cast<T>(kSsimC2);
  const T inv_c = T(1) / static_cast<T>(C);
  std::vector<T> g_ma(n), g_mb(n), g_aa(n), g_bb(n), g_ab(n);
  std::vector<T> adj_ma, adj_mb, adj_aa, adj_bb, adj_ab, tmp;
  for (int c = 0; c < C; ++c) {
    const auto m = channel_moments(a, b, ext, c, window);
#pragma omp parallel for schedule(static)
    for (std::ptrdiff_t i = 0; i < static_cast<std::ptrdiff_t>(n); ++i) {
      const T ma = m.mu_a[i], mb = m.mu_b[i];
      const T va = m.e_aa[i] - ma * ma, vb = m.e_bb[i] - mb * mb, cov = m.e_ab[i] - ma * mb;
      const T n1 = 2 * ma * mb + c1, n2 = 2 * cov + c2;
      const T d1 = ma * ma + mb * mb + c1, d2 = va + vb + c2;
      const T s = n1 * n2 / (d1 * d2);
      const T g = grad_out[i] * inv_c;
      // Partials with respect to the raw moments (mu_a, mu_b, E[aa], E[bb], E[ab]).
      g_ab[i] = g * 2 * s / n2;
      g_aa[i] = -g * s / d2;
      g_bb[i] = -g * s / d2;
      g_ma[i] = g * (2 * mb * s / n1 - 2 * ma * s / d1 - 2 * mb * s / n2 + 2 * ma * s / d2);
      g_mb[i] = g * (2 * ma * s / n1 - 2 * mb * s / d1 - 2 * ma * s / n2 + 2 * mb * s / d2);
    }
    const int w = ext.width, h = ext.height;
    box_mean_adjoint(g_ma, adj_ma, tmp, w, h, window);
    box_mean_adjoint(g_mb, adj_mb, tmp, w, h, window);
    box_mean_adjoint(g_aa, adj_aa, tmp, w, h, window);
    box_mean_adjoint(g_bb, adj_bb, tmp, w, h, window);
    box_mean_adjoint(g_ab, adj_ab, tmp, w, h, window);
#pragma omp parallel for schedule(static)
    for (std::ptrdiff_t i = 0; i < static_cast<std::ptrdiff_t>(n); ++i) {
      const T va = a[i * C + c], vb = b[i * C + c];
      if (!grad_a.empty()) grad_a[i * C + c] += adj_ma[i] + 2 * va * adj_aa[i] + vb * adj_ab[i];
      if (!grad_b.empty()) grad_b[i * C + c] += adj_mb[i] + 2 * vb * adj_bb[i] + va * adj_ab[i];
    }
  }
}

namespace {

template <class T>
T sample_coord(int x, T d, WarpSide side) {
  return side == WarpSide::right ? static_cast<T>(x) - d : static_cast<T>(x) + d;
}

}  // namespace

template <class T>
void warp_forward(std::span<const T> target, std::span<const T> disp, const ImageExtent& ext,
                  WarpSide side, std::span<T> out, std::span<std::uint8_t> inbounds) {
  const int W = ext.width, H = ext.height, C = ext.channels;
  if (target.size() != ext.pixels() * C || disp.size() != ext.pixels() || out.size() != target.size() ||
      inbounds.size() != ext.pixels()) {
    throw ShapeError("warp: shape mismatch");
  }
  const T max_coord = static_cast<T>(W - 1);
#pragma omp parallel for schedule(static)
  for (int y = 0; y < H; ++y) {
    for (int x = 0; x < W; ++x) {
      const std::size_t p = static_cast<std::size_t>(y) * W + x;
      const T s = sample_coord(x, disp[p], side);
      inbounds[p] = (s >= T(0) && s <= max_coord) ? 1 : 0;
      const T sc = std::clamp(s, T(0), max_coord);
      const int x0 = W > 1 ? std::min(static_cast<int>(std::floor(sc)), W - 2) : 0;
      const T f = W > 1 ? sc - static_cast<T>(x0) : T(0);
      const int x1 = W > 1 ? x0 + 1 : 0;
      const T* row = target.data() + static_cast<std::size_t>(y) * W * C;
      for (int c = 0; c < C; ++c) {
        out[p * C + c] = (T(1) - f) * row[x0 * C + c] + f * row[x1 * C + c];
      }
    }
  }
}

template <class T>
void warp_backward(std::span<const T> target, std::span<const T> disp, const ImageExtent& ext,
                   WarpSide side, std::span<const T> grad_out, std::span<T> grad_disp) {
  const int W = ext.width, H = ext.height, C = ext.channels;
  if (W < 2) return;
  const T max_coord = static_cast<T>(W - 1);
  const T ds_dd = side == WarpSide::right ? T(-1) : T(1);
#pragma omp parallel for schedule(static)
  for (int y = 0; y < H; ++y) {
    for (int x = 0; x < W; ++x) {
      const std::size_t p = static_cast<std::size_t>(y) * W + x;
      const T s = sample_coord(x, disp[p], side);
      if (!(s >= T(0) && s <= max_coord)) continue;  // clamped: locally constant
      const int x0 = std::min(static_cast<int>(std::floor(s)), W - 2);
      const T* row = target.data() + static_cast<std::size_t>(y) * W * C;
      T acc = 0;
      for (int c = 0; c < C; ++c) acc += grad_out[p * C + c] * (row[(x0 + 1) * C + c] - row[x0 * C + c]);
      grad_disp[p] += ds_dd * acc;
    }
  }
}

#define NSF_INSTANTIATE(T)                                                                       \
  template void ssim_forward<T>(std::span<const T>, std::span<const T>, const ImageExtent&, int, \
                                std::span<T>);                                                   \
  template void ssim_backward<T>(std::span<const T>, std::span<const T>, const ImageExtent&, int,\
                                 std::span<const T>, std::span<T>, std::span<T>);                \
  template void warp_forward<T>(std::span<const T>, std::span<const T>, const ImageExtent&,      \
                                WarpSide, std::span<T>, std::span<std::uint8_t>);                \
  template void warp_backward<T>(std::span<const T>, std::span<const T>, const ImageExtent&,     \
                                 WarpSide, std::span<const T>, std::span<T>);
NSF_INSTANTIATE(float)
NSF_INSTANTIATE(double)
#undef NSF_INSTANTIATE

}  // namespace nsf::kernels

#include <cmath>
#include <vector>

#include "nsf/errors.hpp"
#include "nsf/kernels.hpp"

namespace nsf::kernels {

namespace {

void check_layout(std::size_t n_sigma, std::size_t n_color, std::size_t n_t, std::size_t n_delta,
                  std::span<const int> offsets) {
  if (offsets.empty()) throw ShapeError("composite: empty ray offsets");
  const std::size_t n = static_cast<std::size_t>(offsets.back());
  if (n_sigma != n || n_color != 3 * n || n_t != n || n_delta != n) {
    throw ShapeError("composite: sample arrays do not match ray layout");
  }
}

}  // namespace

template <class T>
void composite_forward(std::span<const T> sigma, std::span<const T> color, std::span<const T> t,
                       std::span<const T> delta, std::span<const int> offsets, std::span<T> out) {
  check_layout(sigma.size(), color.size(), t.size(), delta.size(), offsets);
  const std::ptrdiff_t rays = static_cast<std::ptrdiff_t>(offsets.size()) - 1;
  if (out.size() != static_cast<std::size_t>(rays) * kCompositeWidth) {
    throw ShapeError("composite: output size mismatch");
  }
#pragma omp parallel for schedule(static)
  for (std::ptrdiff_t r = 0; r < rays; ++r) {
    T acc[kCompositeWidth] = {0, 0, 0, 0, 0};
    T optical = 0;  // sum_{j<i} sigma_j delta_j
    for (int i = offsets[r]; i < offsets[r + 1]; ++i) {
      const T tau = sigma[i] * delta[i];
      const T trans = std::exp(-optical);
      const T w = trans * (T(1) - std::exp(-tau));
      acc[0] += w * color[3 * i];
      acc[1] += w * color[3 * i + 1];
      acc[2] += w * color[3 * i + 2];
      acc[3] += w * t[i];
      acc[4] += w;
      optical += tau;
    }
    for (int k = 0; k < kCompositeWidth; ++k) out[r * kCompositeWidth + k] = acc[k];
  }
}

template <class T>
void composite_backward(std::span<const T> sigma, std::span<const T> color, std::span<const T> t,
                        std::span<const T> delta, std::span<const int> offsets,
                        std::span<const T> grad_out, std::span<T> grad_sigma,
                        std::span<T> grad_color) {
  check_layout(sigma.size(), color.size(), t.size(), delta.size(), offsets);
  const std::ptrdiff_t rays = static_cast<std::ptrdiff_t>(offsets.size()) - 1;
#pragma omp parallel
  {
    std::vector<T> w, trans_next, s;
#pragma omp for schedule(static)
    for (std::ptrdiff_t r = 0; r < rays; ++r) {
      const int begin = offsets[r], end = offsets[r + 1];
      const int m = end - begin;
      if (m == 0) continue;
      const T* g = grad_out.data() + r * kCompositeWidth;
      w.resize(m);
      trans_next.resize(m);
      s.resize(m);
      T optical = 0;
      for (int k = 0; k < m; ++k) {
        const int i = begin + k;
        const T tau = sigma[i] * delta[i];
        const T trans = std::exp(-optical);
        optical += tau;
        trans_next[k] = std::exp(-optical);
        w[k] = trans * (T(1) - std::exp(-tau));
        // g . (c_i, t_i, 1)
        s[k] = g[0] * color[3 * i] + g[1] * color[3 * i + 1] + g[2] * color[3 * i + 2] +
               g[3] * t[i] + g[4];
      }
      // d out / d sigma_k = delta_k (T_{k+1} s_k - sum_{i>k} w_i s_i)
      T suffix = 0;
      for (int k = m - 1; k >= 0; --k) {
        const int i = begin + k;
        if (!grad_sigma.empty()) grad_sigma[i] += delta[i] * (trans_next[k] * s[k] - suffix);
        suffix += w[k] * s[k];
        if (!grad_color.empty()) {
          grad_color[3 * i] += w[k] * g[0];
          grad_color[3 * i + 1] += w[k] * g[1];
          grad_color[3 * i + 2] += w[k] * g[2];
        }
      }
    }
  }
}

#define NSF_INSTANTIATE(T)                                                                       \
  template void composite_forward<T>(std::span<const T>, std::span<const T>, std::span<const T>, \
                                     std::span<const T>, std::span<const int>, std::span<T>);    \
  template void composite_backward<T>(std::span<const T>, std::span<const T>,                    \
                                      std::span<const T>, std::span<const T>,                    \
                                      std::span<const int>, std::span<const T>, std::span<T>,    \
                                      std::span<T>);
NSF_INSTANTIATE(float)
NSF_INSTANTIATE(double)
#undef NSF_INSTANTIATE

}  // namespace nsf::kernels

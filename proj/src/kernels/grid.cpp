#include <algorithm>
#include <cmath>
#include <vector>

#include "nsf/errors.hpp"
#include "nsf/kernels.hpp"

namespace nsf::kernels {

int HashEncodingConfig::resolution(int level) const {
  return static_cast<int>(std::floor(base_resolution * std::pow(growth, level)));
}

void HashEncodingConfig::validate() const {
  if (levels < 1 || features < 1) throw DomainError("hash encoding: levels and features must be >= 1");
  if (log2_table_size < 1 || log2_table_size > 30) throw DomainError("hash encoding: bad table size");
  if (base_resolution < 1 || !(growth > 1.0)) {
    throw DomainError("hash encoding: base resolution >= 1 and growth > 1 required");
  }
}

std::uint64_t hash_index(const std::array<std::uint64_t, 3>& cell, std::uint64_t table_size,
                         const std::array<std::uint64_t, 3>& primes) {
  const std::uint64_t h = (cell[0] * primes[0]) ^ (cell[1] * primes[1]) ^ (cell[2] * primes[2]);
  // Table sizes are powers of two, so the mask equals h mod table_size.
  return h & (table_size - 1);
}

namespace {

// Corner c of the cell around p (bit a of c selects +1 along axis a).
template <class T>
struct CellCoords {
  std::array<std::uint64_t, 3> base;
  std::array<T, 3> frac;
};

template <class T>
CellCoords<T> locate(const T* p, int res) {
  CellCoords<T> out;
  for (int a = 0; a < 3; ++a) {
    const T x = std::clamp(p[a], T(0), T(1)) * static_cast<T>(res);
    int i = static_cast<int>(std::floor(x));
    i = std::clamp(i, 0, res - 1);
    out.base[a] = static_cast<std::uint64_t>(i);
    out.frac[a] = x - static_cast<T>(i);
  }
  return out;
}

std::vector<int> level_resolutions(const HashEncodingConfig& cfg) {
  std::vector<int> r(static_cast<std::size_t>(cfg.levels));
  for (int l = 0; l < cfg.levels; ++l) r[static_cast<std::size_t>(l)] = cfg.resolution(l);
  return r;
}

template <class T>
T corner_weight(const std::array<T, 3>& f, int corner) {
  T w = 1;
  for (int a = 0; a < 3; ++a) w *= (corner >> a & 1) ? f[a] : T(1) - f[a];
  return w;
}

}  // namespace

template <class T>
void hash_encode_forward(std::span<const T> positions, std::span<const T> table,
                         const HashEncodingConfig& cfg, std::span<T> out) {
  const std::size_t n = positions.size() / 3;
  const int L = cfg.levels, F = cfg.features;
  const std::uint64_t ts = cfg.table_size();
  if (table.size() != cfg.parameter_count() || out.size() != n * L * F) {
    throw ShapeError("hash_encode_forward: size mismatch");
  }
  const std::vector<int> res = level_resolutions(cfg);
#pragma omp parallel for schedule(static)
  for (std::ptrdiff_t i = 0; i < static_cast<std::ptrdiff_t>(n); ++i) {
    const T* p = positions.data() + 3 * i;
    T* o = out.data() + static_cast<std::size_t>(i) * L * F;
    for (int l = 0; l < L; ++l) {
      const auto cc = locate(p, res[static_cast<std::size_t>(l)]);
      const T* level_table = table.data() + static_cast<std::size_t>(l) * ts * F;
      for (int f = 0; f < F; ++f) o[l * F + f] = 0;
      for (int c = 0; c < 8; ++c) {
        const std::array<std::uint64_t, 3> cell{cc.base[0] + (c & 1), cc.base[1] + (c >> 1 & 1),
                                                cc.base[2] + (c >> 2 & 1)};
        const T w = corner_weight(cc.frac, c);
        const T* e = level_table + hash_index(cell, ts, cfg.primes) * F;
        for (int f = 0; f < F; ++f) o[l * F + f] += w * e[f];
      }
    }
  }
}

template <class T>
void hash_encode_backward(std::span<const T> positions, std::span<const T> grad_out,
                          const HashEncodingConfig& cfg, std::span<T> grad_table) {
  const std::size_t n = positions.size() / 3;
  const int L = cfg.levels, F = cfg.features;
  const std::uint64_t ts = cfg.table_size();
  if (grad_table.size() != cfg.parameter_count() || grad_out.size() != n * L * F) {
    throw ShapeError("hash_encode_backward: size mismatch");
  }
#pragma omp parallel for schedule(dynamic, 1)
  for (int l = 0; l < L; ++l) {
    const int res = cfg.resolution(l);
    T* level_grad = grad_table.data() + static_cast<std::size_t>(l) * ts * F;
    for (std::size_t i = 0; i < n; ++i) {
      const auto cc = locate(positions.data() + 3 * i, res);
      const T* g = grad_out.data() + i * L * F + l * F;
      for (int c = 0; c < 8; ++c) {
        const std::array<std::uint64_t, 3> cell{cc.base[0] + (c & 1), cc.base[1] + (c >> 1 & 1),
                                                cc.base[2] + (c >> 2 & 1)};
        const T w = corner_weight(cc.frac, c);
        T* e = level_grad + hash_index(cell, ts, cfg.primes) * F;
        for (int f = 0; f < F; ++f) e[f] += w * g[f];
      }
    }
  }
}

namespace {

template <class T>
CellCoords<T> locate_dense(const T* p, int res) {
  // res vertices span [0,1]; cells are indexed 0..res-2.
  CellCoords<T> out;
  for (int a = 0; a < 3; ++a) {
    const T x = std::clamp(p[a], T(0), T(1)) * static_cast<T>(res - 1);
    int i = std::clamp(static_cast<int>(std::floor(x)), 0, res - 2);
    out.base[a] = static_cast<std::uint64_t>(i);
    out.frac[a] = x - static_cast<T>(i);
  }
  return out;
}

std::size_t dense_index(const std::array<std::uint64_t, 3>& v, int res) {
  return (static_cast<std::size_t>(v[2]) * res + v[1]) * res + v[0];
}

}  // namespace

template <class T>
void grid_interp_forward(std::span<const T> positions, std::span<const T> grid,
                         const DenseGridShape& shape, std::span<T> out) {
  const std::size_t n = positions.size() / 3;
  const int C = shape.channels, R = shape.resolution;
  if (R < 2) throw DomainError("dense grid: resolution must be >= 2");
  if (grid.size() != shape.parameter_count() || out.size() != n * C) {
    throw ShapeError("grid_interp_forward: size mismatch");
  }
#pragma omp parallel for schedule(static)
  for (std::ptrdiff_t i = 0; i < static_cast<std::ptrdiff_t>(n); ++i) {
    const auto cc = locate_dense(positions.data() + 3 * i, R);
    T* o = out.data() + static_cast<std::size_t>(i) * C;
    for (int ch = 0; ch < C; ++ch) o[ch] = 0;
    for (int c = 0; c < 8; ++c) {
      const std::array<std::uint64_t, 3> v{cc.base[0] + (c & 1), cc.base[1] + (c >> 1 & 1),
                                           cc.base[2] + (c >> 2 & 1)};
      const T w = corner_weight(cc.frac, c);
      const T* e = grid.data() + dense_index(v, R) * C;
      for (int ch = 0; ch < C; ++ch) o[ch] += w * e[ch];
    }
  }
}

template <class T>
void grid_interp_backward(std::span<const T> positions, std::span<const T> grad_out,
                          const DenseGridShape& shape, std::span<T> grad_grid) {
  const std::size_t n = positions.size() / 3;
  const int C = shape.channels, R = shape.resolution;
  if (grad_grid.size() != shape.parameter_count() || grad_out.size() != n * C) {
    throw ShapeError("grid_interp_backward: size mismatch");
  }
#pragma omp parallel for schedule(static)
  for (int ch = 0; ch < C; ++ch) {
    for (std::size_t i = 0; i < n; ++i) {
      const auto cc = locate_dense(positions.data() + 3 * i, R);
      const T g = grad_out[i * C + ch];
      for (int c = 0; c < 8; ++c) {
        const std::array<std::uint64_t, 3> v{cc.base[0] + (c & 1), cc.base[1] + (c >> 1 & 1),
                                             cc.base[2] + (c >> 2 & 1)};
        grad_grid[dense_index(v, R) * C + ch] += corner_weight(cc.frac, c) * g;
      }
    }
  }
}

#define NSF_INSTANTIATE(T)                                                                      \
  template void hash_encode_forward<T>(std::span<const T>, std::span<const T>,                 \
                                       const HashEncodingConfig&, std::span<T>);               \
  template void hash_encode_backward<T>(std::span<const T>, std::span<const T>,                \
                                        const HashEncodingConfig&, std::span<T>);              \
  template void grid_interp_forward<T>(std::span<const T>, std::span<const T>,                 \
                                       const DenseGridShape&, std::span<T>);                   \
  template void grid_interp_backward<T>(std::span<const T>, std::span<const T>,                \
                                        const DenseGridShape&, std::span<T>);
NSF_INSTANTIATE(float)
NSF_INSTANTIATE(double)
#undef NSF_INSTANTIATE

}  // namespace nsf::kernels

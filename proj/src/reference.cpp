#include "nsf/reference.hpp"

#include <algorithm>
#include <cmath>
#include <limits>

namespace nsf::reference {

CompositeResult composite(const QuadratureSamples& s) {
  const std::size_t n = s.t.size();
  if (s.delta.size() != n || s.sigma.size() != n || s.color.size() != n) {
    throw ShapeError("reference composite: sample arrays differ in length");
  }
  CompositeResult r;
  double trans = 1.0;
  for (std::size_t i = 0; i < n; ++i) {
    const double alpha = 1.0 - std::exp(-s.sigma[i] * s.delta[i]);
    const double w = trans * alpha;
    r.color += w * s.color[i];
    r.depth += w * s.t[i];
    r.ao += w;
    trans *= 1.0 - alpha;
  }
  r.transmittance = trans;
  return r;
}

RenderOutput render_image(const RadianceField& field, const Intrinsics& intr, const Pose& pose, int samples) {
  intr.validate();
  const int W = intr.width, H = intr.height;
  RenderOutput out{Image(W, H, 3), Image(W, H, 1), Image(W, H, 1), Mask(W, H, 1)};
  const Aabb box = field.bounds();
  for (int y = 0; y < H; ++y) {
    for (int x = 0; x < W; ++x) {
      Ray ray = make_ray(intr, pose, x + 0.5, y + 0.5);
      if (!box.clip(ray)) continue;
      QuadratureSamples s = sample_bins(ray, samples);
      std::vector<Vec3> pts(s.t.size()), dirs(s.t.size(), ray.direction);
      for (std::size_t i = 0; i < s.t.size(); ++i) pts[i] = ray.at(s.t[i]);
      s.sigma.resize(pts.size());
      s.color.resize(pts.size());
      field.query_batch(pts, dirs, s.sigma, s.color);
      const CompositeResult c = reference::composite(s);
      for (int k = 0; k < 3; ++k) out.color.at(x, y, k) = static_cast<float>(c.color[k]);
      out.ao.at(x, y) = static_cast<float>(c.ao);
      const bool valid = c.ao >= kBackgroundAo;
      out.valid.at(x, y) = valid ? 1 : 0;
      out.depth.at(x, y) = valid ? static_cast<float>(c.depth * ray.direction.dot(pose.rotation.col(2))) : 0.0f;
    }
  }
  return out;
}

namespace {

int mirror(int i, int n) {
  if (n == 1) return 0;
  const int period = 2 * (n - 1);
  i = ((i % period) + period) % period;
  return i < n ? i : period - i;
}

}  // namespace

std::vector<double> ssim(const std::vector<double>& a, const std::vector<double>& b, const kernels::ImageExtent& ext,
                         int window) {
  const int W = ext.width, H = ext.height, C = ext.channels, r = window / 2;
  const double n = static_cast<double>(window) * window;
  std::vector<double> out(ext.pixels(), 0.0);
  for (int y = 0; y < H; ++y) {
    for (int x = 0; x < W; ++x) {
      double total = 0.0;
      for (int c = 0; c < C; ++c) {
        double sa = 0, sb = 0, saa = 0, sbb = 0, sab = 0;
        for (int j = -r; j <= r; ++j) {
          for (int i = -r; i <= r; ++i) {
            const std::size_t k = (static_cast<std::size_t>(mirror(y + j, H)) * W + mirror(x + i, W)) * C + c;
            sa += a[k];
            sb += b[k];
            saa += a[k] * a[k];
            sbb += b[k] * b[k];
            sab += a[k] * b[k];
          }
        }
        const double ma = sa / n, mb = sb / n;
        const double va = saa / n - ma * ma, vb = sbb / n - mb * mb, cov = sab / n - ma * mb;
        total += ((2 * ma * mb + kernels::kSsimC1) * (2 * cov + kernels::kSsimC2)) /
                 ((ma * ma + mb * mb + kernels::kSsimC1) * (va + vb + kernels::kSsimC2));
      }
      out[static_cast<std::size_t>(y) * W + x] = total / C;
    }
  }
  return out;
}

std::vector<double> hash_encode(const std::vector<double>& positions, const std::vector<double>& table,
                                const kernels::HashEncodingConfig& cfg) {
  const std::size_t n = positions.size() / 3;
  const int L = cfg.levels, F = cfg.features;
  const std::uint64_t T = cfg.table_size();
  std::vector<double> out(n * L * F, 0.0);
  for (std::size_t p = 0; p < n; ++p) {
    for (int l = 0; l < L; ++l) {
      const int res = static_cast<int>(std::floor(cfg.base_resolution * std::pow(cfg.growth, l)));
      std::uint64_t base[3];
      double frac[3];
      for (int a = 0; a < 3; ++a) {
        const double x = std::clamp(positions[3 * p + a], 0.0, 1.0) * res;
        const int i = std::min(static_cast<int>(std::floor(x)), res - 1);
        base[a] = static_cast<std::uint64_t>(i);
        frac[a] = x - i;
      }
      for (int dz = 0; dz < 2; ++dz)
        for (int dy = 0; dy < 2; ++dy)
          for (int dx = 0; dx < 2; ++dx) {
            const double w = (dx ? frac[0] : 1 - frac[0]) * (dy ? frac[1] : 1 - frac[1]) * (dz ? frac[2] : 1 - frac[2]);
            const std::uint64_t h = ((base[0] + dx) * cfg.primes[0]) ^ ((base[1] + dy) * cfg.primes[1]) ^
                                    ((base[2] + dz) * cfg.primes[2]);
            const std::size_t e = (static_cast<std::size_t>(l) * T + h % T) * F;
            for (int f = 0; f < F; ++f) out[(p * L + l) * F + f] += w * table[e + f];
          }
    }
  }
  return out;
}

void warp(const std::vector<double>& target, const std::vector<double>& disp, const kernels::ImageExtent& ext,
          kernels::WarpSide side, std::vector<double>& out, std::vector<std::uint8_t>& inbounds) {
  const int W = ext.width, H = ext.height, C = ext.channels;
  out.assign(target.size(), 0.0);
  inbounds.assign(ext.pixels(), 0);
  for (int y = 0; y < H; ++y) {
    for (int x = 0; x < W; ++x) {
      const std::size_t p = static_cast<std::size_t>(y) * W + x;
      const double s = side == kernels::WarpSide::right ? x - disp[p] : x + disp[p];
      inbounds[p] = (s >= 0.0 && s <= W - 1) ? 1 : 0;
      const double sc = std::clamp(s, 0.0, static_cast<double>(W - 1));
      const int x0 = static_cast<int>(std::floor(sc));
      const int x1 = std::min(x0 + 1, W - 1);
      const double f = sc - x0;
      for (int c = 0; c < C; ++c) {
        const double v0 = target[(static_cast<std::size_t>(y) * W + x0) * C + c];
        const double v1 = target[(static_cast<std::size_t>(y) * W + x1) * C + c];
        out[p * C + c] = (1.0 - f) * v0 + f * v1;
      }
    }
  }
}

BlockMatchResult block_match(const Image& left, const Image& right, const MatcherConfig& cfg) {
  cfg.validate();
  if (!left.same_shape(right)) throw ShapeError("block_match: images differ in shape");
  const int W = left.width, H = left.height, C = left.channels, r = cfg.window / 2;
  const double inf = std::numeric_limits<double>::infinity();

  std::vector<double> ssim_cost;
  if (cfg.cost == MatchCost::ssim) {
    const kernels::ImageExtent ext{W, H, C};
    const std::vector<double> a(left.data.begin(), left.data.end());
    ssim_cost.resize(static_cast<std::size_t>(cfg.d_max + 1) * ext.pixels());
    for (int d = 0; d <= cfg.d_max; ++d) {
      std::vector<double> shifted(a.size());
      for (int y = 0; y < H; ++y)
        for (int x = 0; x < W; ++x)
          for (int c = 0; c < C; ++c) shifted[left.index(x, y, c)] = right.at(std::clamp(x - d, 0, W - 1), y, c);
      const auto s = ssim(a, shifted, ext, 3);
      for (std::size_t p = 0; p < s.size(); ++p) ssim_cost[static_cast<std::size_t>(d) * ext.pixels() + p] = (1.0 - s[p]) / 2.0;
    }
  }
  const auto pixel_cost = [&](int x, int y, int d) {
    if (cfg.cost == MatchCost::ssim) return ssim_cost[(static_cast<std::size_t>(d) * H + y) * W + x];
    const int xr = std::clamp(x - d, 0, W - 1);
    double s = 0.0;
    for (int c = 0; c < C; ++c) s += std::abs(double(left.at(x, y, c)) - right.at(xr, y, c));
    return s / C;
  };
  // Aggregated cost of left pixel (x, y) at disparity d.
  const auto cost = [&](int x, int y, int d) {
    if (x - d < 0) return inf;
    double s = 0.0;
    for (int j = -r; j <= r; ++j)
      for (int i = -r; i <= r; ++i) s += pixel_cost(std::clamp(x + i, 0, W - 1), std::clamp(y + j, 0, H - 1), d);
    return s;
  };

  BlockMatchResult out{Image(W, H, 1), Mask(W, H, 1)};
  for (int y = 0; y < H; ++y) {
    for (int x = 0; x < W; ++x) {
      int best_d = -1;
      double best = inf;
      for (int d = 0; d <= std::min(cfg.d_max, x); ++d) {
        if (cost(x, y, d) < best) {
          best = cost(x, y, d);
          best_d = d;
        }
      }
      if (best_d < 0) continue;
      double second = inf;
      for (int d = 0; d <= std::min(cfg.d_max, x); ++d)
        if (std::abs(d - best_d) > 1) second = std::min(second, cost(x, y, d));
      // Best match of the right pixel back in the left image.
      const int xr = x - best_d;
      int back = -1;
      double back_cost = inf;
      for (int d = 0; d <= cfg.d_max && xr + d < W; ++d) {
        if (cost(xr + d, y, d) < back_cost) {
          back_cost = cost(xr + d, y, d);
          back = d;
        }
      }
      out.disparity.at(x, y) = static_cast<float>(best_d);
      out.valid.at(x, y) = (back >= 0 && std::abs(back - best_d) <= 1 && best < second) ? 1 : 0;
    }
  }
  return out;
}

}  // namespace nsf::reference

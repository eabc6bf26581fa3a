#include "nsf/stereo.hpp"

#include <algorithm>
#include <cmath>
#include <limits>

#include "nsf/kernels.hpp"
#include "nsf/optim.hpp"

namespace nsf {

void MatcherConfig::validate() const {
  if (d_max < 1) throw DomainError("matcher: d_max must be >= 1");
  if (window < 3 || window % 2 == 0) throw DomainError("matcher: window must be odd and >= 3");
}

namespace {

constexpr double kInf = std::numeric_limits<double>::infinity();

// Per-pixel matching cost of left(x) against right(x - d) before aggregation.
std::vector<double> pixel_costs(const Image& left, const Image& right, const MatcherConfig& cfg) {
  const int W = left.width, H = left.height, C = left.channels, D = cfg.d_max + 1;
  std::vector<double> raw(static_cast<std::size_t>(D) * W * H, 0.0);
  if (cfg.cost == MatchCost::sad) {
#pragma omp parallel for collapse(2) schedule(static)
    for (int d = 0; d < D; ++d) {
      for (int y = 0; y < H; ++y) {
        for (int x = 0; x < W; ++x) {
          const int xr = std::clamp(x - d, 0, W - 1);
          double s = 0.0;
          for (int c = 0; c < C; ++c) s += std::abs(double(left.at(x, y, c)) - right.at(xr, y, c));
          raw[(static_cast<std::size_t>(d) * H + y) * W + x] = s / C;
        }
      }
    }
    return raw;
  }
  const kernels::ImageExtent ext{W, H, C};
  std::vector<double> a(left.data.begin(), left.data.end());
#pragma omp parallel for schedule(static)
  for (int d = 0; d < D; ++d) {
    std::vector<double> shifted(a.size()), s(ext.pixels());
    for (int y = 0; y < H; ++y)
      for (int x = 0; x < W; ++x)
        for (int c = 0; c < C; ++c)
          shifted[left.index(x, y, c)] = right.at(std::clamp(x - d, 0, W - 1), y, c);
    kernels::ssim_forward<double>(a, shifted, ext, 3, s);
    for (std::size_t p = 0; p < s.size(); ++p) raw[static_cast<std::size_t>(d) * ext.pixels() + p] = (1.0 - s[p]) / 2.0;
  }
  return raw;
}

}  // namespace

BlockMatchResult block_match(const Image& left, const Image& right, const MatcherConfig& cfg) {
  cfg.validate();
  if (!left.same_shape(right)) throw ShapeError("block_match: images differ in shape");
  const int W = left.width, H = left.height, D = cfg.d_max + 1, r = cfg.window / 2;
  const std::vector<double> raw = pixel_costs(left, right, cfg);

  // Aggregated cost, +inf where x - d leaves the image.
  std::vector<double> cost(raw.size(), kInf);
#pragma omp parallel for collapse(2) schedule(static)
  for (int d = 0; d < D; ++d) {
    for (int y = 0; y < H; ++y) {
      const double* plane = raw.data() + static_cast<std::size_t>(d) * H * W;
      for (int x = d; x < W; ++x) {
        double s = 0.0;
        for (int j = -r; j <= r; ++j) {
          const int yy = std::clamp(y + j, 0, H - 1);
          for (int i = -r; i <= r; ++i) s += plane[static_cast<std::size_t>(yy) * W + std::clamp(x + i, 0, W - 1)];
        }
        cost[(static_cast<std::size_t>(d) * H + y) * W + x] = s;
      }
    }
  }
  const auto at = [&](int d, int y, int x) { return cost[(static_cast<std::size_t>(d) * H + y) * W + x]; };

  BlockMatchResult out{Image(W, H, 1), Mask(W, H, 1)};
#pragma omp parallel for schedule(static)
  for (int y = 0; y < H; ++y) {
    std::vector<int> right_best(W, -1);
    for (int xr = 0; xr < W; ++xr) {
      double best = kInf;
      for (int d = 0; d <= cfg.d_max && xr + d < W; ++d) {
        const double c = at(d, y, xr + d);
        if (c < best) {
          best = c;
          right_best[xr] = d;
        }
      }
    }
    for (int x = 0; x < W; ++x) {
      double best = kInf;
      int best_d = -1;
      for (int d = 0; d <= cfg.d_max && d <= x; ++d) {
        const double c = at(d, y, x);
        if (c < best) {
          best = c;
          best_d = d;
        }
      }
      if (best_d < 0) continue;
      double second = kInf;
      for (int d = 0; d <= cfg.d_max && d <= x; ++d)
        if (std::abs(d - best_d) > 1) second = std::min(second, at(d, y, x));
      const int back = right_best[x - best_d];
      const bool consistent = back >= 0 && std::abs(back - best_d) <= 1;
      out.disparity.at(x, y) = static_cast<float>(best_d);
      out.valid.at(x, y) = (consistent && best < second) ? 1 : 0;
    }
  }
  return out;
}

OptimizeResult optimize_disparity(const Triplet& triplet, const LossConfig& loss, const OptimizeConfig& cfg) {
  triplet.validate();
  MatcherConfig m = cfg.matcher;
  m.d_max = std::min(m.d_max, std::max(1, triplet.width() - 1));
  const BlockMatchResult bm = block_match(triplet.center, triplet.right, m);
  Image init = bm.disparity;
  for (std::size_t i = 0; i < init.data.size(); ++i)
    if (!bm.valid.data[i]) init.data[i] = 0.0f;
  return optimize_disparity_from(triplet, init, loss, cfg);
}

OptimizeResult optimize_disparity_from(const Triplet& triplet, const Image& init, const LossConfig& loss,
                                       const OptimizeConfig& cfg) {
  triplet.validate();
  loss.validate();
  require_same_extent(triplet.center, init, "optimize_disparity");
  if (cfg.steps < 0) throw DomainError("optimize_disparity: steps must be >= 0");
  if (!(cfg.lr > 0.0) || !(cfg.d_max > 0.0)) throw DomainError("optimize_disparity: lr and d_max must be positive");

  const std::size_t n = init.data.size();
  diff::ParamSet<double> ps;
  auto& d = ps.add("disparity", "disparity", {n});
  for (std::size_t i = 0; i < n; ++i) d.value[i] = std::clamp<double>(init.data[i], 0.0, cfg.d_max);
  auto state = diff::OptState<double>::init(ps, [&] { diff::AdamConfig a; a.lr = cfg.lr; return a; }());

  const auto bad_vs_rendered = [&](const std::vector<double>& v) {
    std::size_t bad = 0, count = 0;
    for (std::size_t i = 0; i < n; ++i) {
      if (!triplet.valid.data[i]) continue;
      ++count;
      if (std::abs(v[i] - triplet.disparity.data[i]) > cfg.trace_tau) ++bad;
    }
    return count ? 100.0 * static_cast<double>(bad) / static_cast<double>(count) : 0.0;
  };

  OptimizeResult out;
  out.initial = Image(init.width, init.height, 1);
  for (std::size_t i = 0; i < n; ++i) out.initial.data[i] = static_cast<float>(ps.at(0).value[i]);

  for (int step = 0;; ++step) {
    diff::Tape<double> tape(step < cfg.steps);
    const diff::Var dv = tape.parameter(ps, "disparity", static_cast<int>(n), 1);
    LossReport report;
    const diff::Var l = ns_loss_graph<double>(tape, dv, triplet, loss, &report);
    const double value = tape.scalar(l);
    out.trace.push_back({step, value, bad_vs_rendered(ps.at(0).value)});
    if (!std::isfinite(value)) {
      throw DivergenceError("optimize_disparity: non-finite loss at step " + std::to_string(step) +
                            " (last finite value " +
                            (step > 0 ? std::to_string(out.trace[step - 1].lns) : std::string("none")) + ")");
    }
    if (step == cfg.steps) {
      out.final_report = std::move(report);
      break;
    }
    auto grads = ps.zeros_like();
    tape.backward(l, grads);
    diff::adam_step(ps, grads, state);
    for (auto& v : ps.at(0).value) v = std::clamp(v, 0.0, cfg.d_max);
  }
  out.disparity = Image(init.width, init.height, 1);
  for (std::size_t i = 0; i < n; ++i) out.disparity.data[i] = static_cast<float>(ps.at(0).value[i]);
  return out;
}

}  // namespace nsf

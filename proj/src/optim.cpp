#include "nsf/optim.hpp"

#include <algorithm>
#include <cmath>
#include <random>

namespace nsf::diff {

template <class T>
GradientResult<T> gradient(const Objective<T>& objective, const ParamSet<T>& params) {
  Tape<T> tape(true);
  const Var out = objective(tape, params);
  GradientResult<T> r{tape.scalar(out), params.zeros_like()};
  tape.backward(out, r.grads);
  return r;
}

template <class T>
T evaluate(const Objective<T>& objective, const ParamSet<T>& params) {
  Tape<T> tape(false);
  return tape.scalar(objective(tape, params));
}

FdReport fd_check_at(const Objective<double>& objective, const ParamSet<double>& params,
                     std::span<const std::size_t> indices, double h) {
  const auto analytic = gradient(objective, params);
  FdReport rep;
  ParamSet<double> probe = params;
  for (const std::size_t idx : indices) {
    const double orig = probe.flat(idx);
    probe.flat(idx) = orig + h;
    const double fp = evaluate(objective, probe);
    probe.flat(idx) = orig - h;
    const double fm = evaluate(objective, probe);
    probe.flat(idx) = orig;
    const double g_fd = (fp - fm) / (2.0 * h);
    const double g_ad = analytic.grads.flat(idx);
    const double err = std::abs(g_ad - g_fd) / std::max({std::abs(g_ad), std::abs(g_fd), 1e-12});
    if (err > rep.max_relative_error) {
      rep.max_relative_error = err;
      rep.worst_index = idx;
    }
    ++rep.probes;
  }
  return rep;
}

FdReport fd_check(const Objective<double>& objective, const ParamSet<double>& params,
                  std::size_t probe_count, double h, std::uint64_t seed) {
  const std::size_t n = params.total_size();
  if (n == 0) return {};
  std::mt19937_64 rng(seed);
  std::uniform_int_distribution<std::size_t> pick(0, n - 1);
  const std::size_t count = std::min(probe_count, n);
  std::vector<std::size_t> indices(count);
  for (std::size_t k = 0; k < count; ++k) indices[k] = count == n ? k : pick(rng);
  return fd_check_at(objective, params, indices, h);
}

template <class T>
void adam_step(ParamSet<T>& params, const ParamSet<T>& grads, OptState<T>& state) {
  if (!params.same_layout(grads) || !params.same_layout(state.m) || !params.same_layout(state.v)) {
    throw ShapeError("adam_step: parameter, gradient and moment layouts differ");
  }
  const auto& cfg = state.config;
  ++state.step;
  const double bc1 = 1.0 - std::pow(cfg.beta1, static_cast<double>(state.step));
  const double bc2 = 1.0 - std::pow(cfg.beta2, static_cast<double>(state.step));
  for (std::size_t k = 0; k < params.count(); ++k) {
    auto& p = params.at(k).value;
    const auto& g = grads.at(k).value;
    auto& m = state.m.at(k).value;
    auto& v = state.v.at(k).value;
    const double lr = cfg.lr_for(params.at(k).group);
    const T b1 = static_cast<T>(cfg.beta1), b2 = static_cast<T>(cfg.beta2);
#pragma omp parallel for schedule(static)
    for (std::ptrdiff_t i = 0; i < static_cast<std::ptrdiff_t>(p.size()); ++i) {
      m[i] = b1 * m[i] + (T(1) - b1) * g[i];
      v[i] = b2 * v[i] + (T(1) - b2) * g[i] * g[i];
      const double m_hat = static_cast<double>(m[i]) / bc1;
      const double v_hat = static_cast<double>(v[i]) / bc2;
      p[i] -= static_cast<T>(lr * m_hat / (std::sqrt(v_hat) + cfg.eps));
    }
  }
}

template GradientResult<float> gradient<float>(const Objective<float>&, const ParamSet<float>&);
template GradientResult<double> gradient<double>(const Objective<double>&, const ParamSet<double>&);
template float evaluate<float>(const Objective<float>&, const ParamSet<float>&);
template double evaluate<double>(const Objective<double>&, const ParamSet<double>&);
template void adam_step<float>(ParamSet<float>&, const ParamSet<float>&, OptState<float>&);
template void adam_step<double>(ParamSet<double>&, const ParamSet<double>&, OptState<double>&);

}  // namespace nsf::diff

#pragma once

#include <cstdint>
#include <functional>
#include <map>
#include <string>

#include "nsf/diff.hpp"

namespace nsf::diff {

/// A scalar objective recorded onto the given tape from the given parameters.
template <class T>
using Objective = std::function<Var(Tape<T>&, const ParamSet<T>&)>;

template <class T>
struct GradientResult {
  T value = 0;
  ParamSet<T> grads;
};

template <class T>
GradientResult<T> gradient(const Objective<T>& objective, const ParamSet<T>& params);

/// Objective value without recording closures.
template <class T>
T evaluate(const Objective<T>& objective, const ParamSet<T>& params);

struct FdReport {
  double max_relative_error = 0.0;
  std::size_t probes = 0;
  std::size_t worst_index = 0;
};

/// Central differences on probe_count randomly chosen flat coordinates; the
/// error is |g_ad - g_fd| / max(|g_ad|, |g_fd|, 1e-12).
FdReport fd_check(const Objective<double>& objective, const ParamSet<double>& params,
                  std::size_t probe_count, double h, std::uint64_t seed = 7);
/// Same measure on the given flat coordinates.
FdReport fd_check_at(const Objective<double>& objective, const ParamSet<double>& params,
                     std::span<const std::size_t> indices, double h);

struct AdamConfig {
  double lr = 1e-2;
  double beta1 = 0.9;
  double beta2 = 0.99;
  double eps = 1e-15;
  std::map<std::string, double> group_lr;  // overrides lr per parameter group

  double lr_for(const std::string& group) const {
    auto it = group_lr.find(group);
    return it == group_lr.end() ? lr : it->second;
  }
};

template <class T>
struct OptState {
  ParamSet<T> m;
  ParamSet<T> v;
  std::int64_t step = 0;
  AdamConfig config;

  static OptState init(const ParamSet<T>& params, AdamConfig cfg) {
    return OptState{params.zeros_like(), params.zeros_like(), 0, std::move(cfg)};
  }
};

/// Bias-corrected adaptive-moment update in place. Throws ShapeError when
/// grads or state do not share the parameter layout.
template <class T>
void adam_step(ParamSet<T>& params, const ParamSet<T>& grads, OptState<T>& state);

}  // namespace nsf::diff

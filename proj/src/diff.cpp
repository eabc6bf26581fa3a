#include "nsf/diff.hpp"

#include <Eigen/Core>
#include <algorithm>
#include <array>
#include <cmath>
#include <memory>
#include <numeric>

namespace nsf::diff {

// ---------------------------------------------------------------- ParamSet

template <class T>
Param<T>& ParamSet<T>::add(std::string name, std::string group, std::vector<std::size_t> shape, T fill) {
  if (contains(name)) throw DomainError("duplicate parameter '" + name + "'");
  const std::size_t n = std::accumulate(shape.begin(), shape.end(), std::size_t{1}, std::multiplies<>());
  params_.push_back(Param<T>{std::move(name), std::move(group), std::move(shape), std::vector<T>(n, fill)});
  return params_.back();
}

template <class T>
std::size_t ParamSet<T>::total_size() const {
  std::size_t n = 0;
  for (const auto& p : params_) n += p.value.size();
  return n;
}

template <class T>
std::size_t ParamSet<T>::index_of(std::string_view name) const {
  for (std::size_t i = 0; i < params_.size(); ++i) {
    if (params_[i].name == name) return i;
  }
  throw DomainError("no parameter named '" + std::string(name) + "'");
}

template <class T>
bool ParamSet<T>::contains(std::string_view name) const {
  return std::any_of(params_.begin(), params_.end(), [&](const auto& p) { return p.name == name; });
}

template <class T>
ParamSet<T> ParamSet<T>::zeros_like() const {
  ParamSet out;
  for (const auto& p : params_) out.add(p.name, p.group, p.shape);
  return out;
}

template <class T>
bool ParamSet<T>::same_layout(const ParamSet& other) const {
  if (other.params_.size() != params_.size()) return false;
  for (std::size_t i = 0; i < params_.size(); ++i) {
    if (params_[i].name != other.params_[i].name || params_[i].shape != other.params_[i].shape) return false;
  }
  return true;
}

template <class T>
T& ParamSet<T>::flat(std::size_t k) {
  for (auto& p : params_) {
    if (k < p.value.size()) return p.value[k];
    k -= p.value.size();
  }
  throw DomainError("flat parameter index out of range");
}

template <class T>
const T& ParamSet<T>::flat(std::size_t k) const {
  return const_cast<ParamSet*>(this)->flat(k);
}

// -------------------------------------------------------------------- Tape

template <class T>
Var Tape<T>::constant(std::vector<T> value, int rows, int cols) {
  if (value.size() != static_cast<std::size_t>(rows) * cols) throw ShapeError("constant: size mismatch");
  Node n;
  n.value = std::move(value);
  n.rows = rows;
  n.cols = cols;
  nodes_.push_back(std::move(n));
  return Var{static_cast<int>(nodes_.size()) - 1};
}

template <class T>
Var Tape<T>::parameter(const ParamSet<T>& params, std::string_view name, int rows, int cols) {
  const std::size_t idx = params.index_of(name);
  const auto& p = params.at(idx);
  if (p.value.size() != static_cast<std::size_t>(rows) * cols) {
    throw ShapeError("parameter '" + p.name + "': requested view does not match its size");
  }
  Node n;
  n.value = p.value;
  n.rows = rows;
  n.cols = cols;
  n.requires_grad = record_;
  n.param = static_cast<int>(idx);
  nodes_.push_back(std::move(n));
  return Var{static_cast<int>(nodes_.size()) - 1};
}

template <class T>
T Tape<T>::scalar(Var v) const {
  const auto& n = node(v);
  if (n.value.size() != 1) throw ShapeError("scalar(): value is not 1x1");
  return n.value[0];
}

template <class T>
Var Tape<T>::emit(std::vector<T> value, int rows, int cols, std::initializer_list<Var> inputs, Backward fn) {
  if (value.size() != static_cast<std::size_t>(rows) * cols) throw ShapeError("emit: size mismatch");
  Node n;
  n.value = std::move(value);
  n.rows = rows;
  n.cols = cols;
  if (record_) {
    n.requires_grad = std::any_of(inputs.begin(), inputs.end(), [&](Var v) { return node(v).requires_grad; });
    if (n.requires_grad) n.backward = std::move(fn);
  }
  nodes_.push_back(std::move(n));
  return Var{static_cast<int>(nodes_.size()) - 1};
}

template <class T>
std::vector<T>& Tape<T>::grad(Var v) {
  auto& n = node(v);
  if (n.grad.size() != n.value.size()) n.grad.assign(n.value.size(), T(0));
  return n.grad;
}

template <class T>
void Tape<T>::backward(Var out, ParamSet<T>& grads) {
  if (!record_) throw DomainError("backward() on a non-recording tape");
  if (node(out).value.size() != 1) throw ShapeError("backward(): output must be 1x1");
  for (auto& n : nodes_) n.grad.clear();
  grad(out)[0] = T(1);
  for (int i = out.id; i >= 0; --i) {
    Node& n = nodes_[static_cast<std::size_t>(i)];
    if (n.grad.empty() || !n.requires_grad) continue;
    if (n.backward) n.backward(*this);
    if (n.param >= 0) {
      auto& g = grads.at(static_cast<std::size_t>(n.param)).value;
      if (g.size() != n.grad.size()) throw ShapeError("backward(): gradient layout mismatch");
      for (std::size_t k = 0; k < g.size(); ++k) g[k] += n.grad[k];
    }
  }
}

// -------------------------------------------------------------- primitives

namespace {

template <class T>
using RowMat = Eigen::Matrix<T, Eigen::Dynamic, Eigen::Dynamic, Eigen::RowMajor>;
template <class T>
using CMap = Eigen::Map<const RowMat<T>>;
template <class T>
using MMap = Eigen::Map<RowMat<T>>;

template <class T>
void require_same(const Tape<T>& t, Var a, Var b, const char* op) {
  if (t.rows(a) != t.rows(b) || t.cols(a) != t.cols(b)) {
    throw ShapeError(std::string(op) + ": operand shapes differ");
  }
}

// Elementwise unary op with derivative expressed from (input, output).
template <class T, class F, class D>
Var unary(Tape<T>& t, Var a, F f, D dfdx) {
  auto in = t.value(a);
  std::vector<T> out(in.size());
  for (std::size_t i = 0; i < in.size(); ++i) out[i] = f(in[i]);
  Var o{static_cast<int>(t.size())};
  return t.emit(std::move(out), t.rows(a), t.cols(a), {a}, [a, o, dfdx](Tape<T>& tp) {
    auto x = tp.value(a);
    auto y = tp.value(o);
    auto g = tp.grad_view(o);
    auto& ga = tp.grad(a);
    for (std::size_t i = 0; i < x.size(); ++i) ga[i] += g[i] * dfdx(x[i], y[i]);
  });
}

}  // namespace

template <class T>
Var matmul(Tape<T>& t, Var a, Var b) {
  const int n = t.rows(a), k = t.cols(a), m = t.cols(b);
  if (t.rows(b) != k) throw ShapeError("matmul: inner dimensions differ");
  std::vector<T> out(static_cast<std::size_t>(n) * m);
  MMap<T>(out.data(), n, m).noalias() = CMap<T>(t.value(a).data(), n, k) * CMap<T>(t.value(b).data(), k, m);
  Var o{static_cast<int>(t.size())};
  return t.emit(std::move(out), n, m, {a, b}, [a, b, o, n, k, m](Tape<T>& tp) {
    CMap<T> g(tp.grad_view(o).data(), n, m);
    if (tp.requires_grad(a)) {
      MMap<T>(tp.grad(a).data(), n, k).noalias() += g * CMap<T>(tp.value(b).data(), k, m).transpose();
    }
    if (tp.requires_grad(b)) {
      MMap<T>(tp.grad(b).data(), k, m).noalias() += CMap<T>(tp.value(a).data(), n, k).transpose() * g;
    }
  });
}

template <class T>
Var add_row(Tape<T>& t, Var a, Var row) {
  const int n = t.rows(a), m = t.cols(a);
  if (t.rows(row) != 1 || t.cols(row) != m) throw ShapeError("add_row: bias must be 1 x cols");
  std::vector<T> out(t.value(a).begin(), t.value(a).end());
  auto r = t.value(row);
  for (int i = 0; i < n; ++i)
    for (int j = 0; j < m; ++j) out[static_cast<std::size_t>(i) * m + j] += r[j];
  Var o{static_cast<int>(t.size())};
  return t.emit(std::move(out), n, m, {a, row}, [a, row, o, n, m](Tape<T>& tp) {
    auto g = tp.grad_view(o);
    if (tp.requires_grad(a)) {
      auto& ga = tp.grad(a);
      for (std::size_t i = 0; i < g.size(); ++i) ga[i] += g[i];
    }
    if (tp.requires_grad(row)) {
      auto& gr = tp.grad(row);
      for (int i = 0; i < n; ++i)
        for (int j = 0; j < m; ++j) gr[j] += g[static_cast<std::size_t>(i) * m + j];
    }
  });
}

template <class T>
Var add(Tape<T>& t, Var a, Var b) {
  require_same(t, a, b, "add");
  auto va = t.value(a), vb = t.value(b);
  std::vector<T> out(va.size());
  for (std::size_t i = 0; i < va.size(); ++i) out[i] = va[i] + vb[i];
  Var o{static_cast<int>(t.size())};
  return t.emit(std::move(out), t.rows(a), t.cols(a), {a, b}, [a, b, o](Tape<T>& tp) {
    auto g = tp.grad_view(o);
    for (Var v : {a, b}) {
      if (!tp.requires_grad(v)) continue;
      auto& gv = tp.grad(v);
      for (std::size_t i = 0; i < g.size(); ++i) gv[i] += g[i];
    }
  });
}

template <class T>
Var sub(Tape<T>& t, Var a, Var b) {
  require_same(t, a, b, "sub");
  auto va = t.value(a), vb = t.value(b);
  std::vector<T> out(va.size());
  for (std::size_t i = 0; i < va.size(); ++i) out[i] = va[i] - vb[i];
  Var o{static_cast<int>(t.size())};
  return t.emit(std::move(out), t.rows(a), t.cols(a), {a, b}, [a, b, o](Tape<T>& tp) {
    auto g = tp.grad_view(o);
    if (tp.requires_grad(a)) {
      auto& ga = tp.grad(a);
      for (std::size_t i = 0; i < g.size(); ++i) ga[i] += g[i];
    }
    if (tp.requires_grad(b)) {
      auto& gb = tp.grad(b);
      for (std::size_t i = 0; i < g.size(); ++i) gb[i] -= g[i];
    }
  });
}

template <class T>
Var mul(Tape<T>& t, Var a, Var b) {
  require_same(t, a, b, "mul");
  auto va = t.value(a), vb = t.value(b);
  std::vector<T> out(va.size());
  for (std::size_t i = 0; i < va.size(); ++i) out[i] = va[i] * vb[i];
  Var o{static_cast<int>(t.size())};
  return t.emit(std::move(out), t.rows(a), t.cols(a), {a, b}, [a, b, o](Tape<T>& tp) {
    auto g = tp.grad_view(o);
    auto va = tp.value(a), vb = tp.value(b);
    if (tp.requires_grad(a)) {
      auto& ga = tp.grad(a);
      for (std::size_t i = 0; i < g.size(); ++i) ga[i] += g[i] * vb[i];
    }
    if (tp.requires_grad(b)) {
      auto& gb = tp.grad(b);
      for (std::size_t i = 0; i < g.size(); ++i) gb[i] += g[i] * va[i];
    }
  });
}

template <class T>
Var scale(Tape<T>& t, Var a, T s) {
  return unary(t, a, [s](T x) { return s * x; }, [s](T, T) { return s; });
}

template <class T>
Var add_scalar(Tape<T>& t, Var a, T s) {
  return unary(t, a, [s](T x) { return x + s; }, [](T, T) { return T(1); });
}

template <class T>
Var square(Tape<T>& t, Var a) {
  return unary(t, a, [](T x) { return x * x; }, [](T x, T) { return 2 * x; });
}

template <class T>
Var abs(Tape<T>& t, Var a) {
  return unary(t, a, [](T x) { return std::abs(x); },
               [](T x, T) { return x > 0 ? T(1) : (x < 0 ? T(-1) : T(0)); });
}

template <class T>
Var exp(Tape<T>& t, Var a, T lo, T hi) {
  return unary(t, a, [lo, hi](T x) { return std::exp(std::clamp(x, lo, hi)); },
               [lo, hi](T x, T y) { return (x > lo && x < hi) ? y : T(0); });
}

template <class T>
Var relu(Tape<T>& t, Var a) {
  return unary(t, a, [](T x) { return x > 0 ? x : T(0); }, [](T x, T) { return x > 0 ? T(1) : T(0); });
}

template <class T>
Var sigmoid(Tape<T>& t, Var a) {
  return unary(t, a, [](T x) { return T(1) / (T(1) + std::exp(-x)); },
               [](T, T y) { return y * (T(1) - y); });
}

template <class T>
Var softplus(Tape<T>& t, Var a) {
  // log(1 + e^x) evaluated without overflow.
  return unary(t, a, [](T x) { return x > 0 ? x + std::log1p(std::exp(-x)) : std::log1p(std::exp(x)); },
               [](T x, T) { return T(1) / (T(1) + std::exp(-x)); });
}

template <class T>
Var concat_cols(Tape<T>& t, Var a, Var b) {
  const int n = t.rows(a), ca = t.cols(a), cb = t.cols(b);
  if (t.rows(b) != n) throw ShapeError("concat_cols: row counts differ");
  std::vector<T> out(static_cast<std::size_t>(n) * (ca + cb));
  auto va = t.value(a), vb = t.value(b);
  for (int i = 0; i < n; ++i) {
    std::copy_n(va.data() + static_cast<std::size_t>(i) * ca, ca, out.data() + static_cast<std::size_t>(i) * (ca + cb));
    std::copy_n(vb.data() + static_cast<std::size_t>(i) * cb, cb,
                out.data() + static_cast<std::size_t>(i) * (ca + cb) + ca);
  }
  Var o{static_cast<int>(t.size())};
  return t.emit(std::move(out), n, ca + cb, {a, b}, [a, b, o, n, ca, cb](Tape<T>& tp) {
    auto g = tp.grad_view(o);
    const int w = ca + cb;
    if (tp.requires_grad(a)) {
      auto& ga = tp.grad(a);
      for (int i = 0; i < n; ++i)
        for (int j = 0; j < ca; ++j) ga[static_cast<std::size_t>(i) * ca + j] += g[static_cast<std::size_t>(i) * w + j];
    }
    if (tp.requires_grad(b)) {
      auto& gb = tp.grad(b);
      for (int i = 0; i < n; ++i)
        for (int j = 0; j < cb; ++j)
          gb[static_cast<std::size_t>(i) * cb + j] += g[static_cast<std::size_t>(i) * w + ca + j];
    }
  });
}

template <class T>
Var slice_cols(Tape<T>& t, Var a, int begin, int count) {
  const int n = t.rows(a), c = t.cols(a);
  if (begin < 0 || count < 1 || begin + count > c) throw ShapeError("slice_cols: range out of bounds");
  std::vector<T> out(static_cast<std::size_t>(n) * count);
  auto va = t.value(a);
  for (int i = 0; i < n; ++i)
    for (int j = 0; j < count; ++j) out[static_cast<std::size_t>(i) * count + j] = va[static_cast<std::size_t>(i) * c + begin + j];
  Var o{static_cast<int>(t.size())};
  return t.emit(std::move(out), n, count, {a}, [a, o, n, c, begin, count](Tape<T>& tp) {
    auto g = tp.grad_view(o);
    auto& ga = tp.grad(a);
    for (int i = 0; i < n; ++i)
      for (int j = 0; j < count; ++j) ga[static_cast<std::size_t>(i) * c + begin + j] += g[static_cast<std::size_t>(i) * count + j];
  });
}

template <class T>
Var row_mean(Tape<T>& t, Var a) {
  const int n = t.rows(a), c = t.cols(a);
  auto va = t.value(a);
  std::vector<T> out(n, T(0));
  for (int i = 0; i < n; ++i) {
    T s = 0;
    for (int j = 0; j < c; ++j) s += va[static_cast<std::size_t>(i) * c + j];
    out[i] = s / static_cast<T>(c);
  }
  Var o{static_cast<int>(t.size())};
  return t.emit(std::move(out), n, 1, {a}, [a, o, n, c](Tape<T>& tp) {
    auto g = tp.grad_view(o);
    auto& ga = tp.grad(a);
    for (int i = 0; i < n; ++i)
      for (int j = 0; j < c; ++j) ga[static_cast<std::size_t>(i) * c + j] += g[i] / static_cast<T>(c);
  });
}

template <class T>
Var sum(Tape<T>& t, Var a) {
  auto va = t.value(a);
  T s = 0;
  for (T v : va) s += v;
  Var o{static_cast<int>(t.size())};
  return t.emit({s}, 1, 1, {a}, [a, o](Tape<T>& tp) {
    const T g = tp.grad_view(o)[0];
    for (auto& x : tp.grad(a)) x += g;
  });
}

template <class T>
Var mean(Tape<T>& t, Var a) {
  const auto n = static_cast<T>(t.value(a).size());
  return scale(t, sum(t, a), T(1) / n);
}

template <class T>
Var masked_mean(Tape<T>& t, Var a, const std::vector<std::uint8_t>& mask) {
  auto va = t.value(a);
  if (mask.size() != va.size()) throw ShapeError("masked_mean: mask size mismatch");
  T s = 0;
  std::size_t count = 0;
  for (std::size_t i = 0; i < va.size(); ++i) {
    if (mask[i]) {
      s += va[i];
      ++count;
    }
  }
  const T inv = count ? T(1) / static_cast<T>(count) : T(0);
  Var o{static_cast<int>(t.size())};
  return t.emit({s * inv}, 1, 1, {a}, [a, o, mask, inv](Tape<T>& tp) {
    const T g = tp.grad_view(o)[0] * inv;
    auto& ga = tp.grad(a);
    for (std::size_t i = 0; i < ga.size(); ++i)
      if (mask[i]) ga[i] += g;
  });
}

template <class T>
Var select(Tape<T>& t, Var a, Var b, const std::vector<std::uint8_t>& choose_a) {
  require_same(t, a, b, "select");
  auto va = t.value(a), vb = t.value(b);
  if (choose_a.size() != va.size()) throw ShapeError("select: mask size mismatch");
  std::vector<T> out(va.size());
  for (std::size_t i = 0; i < va.size(); ++i) out[i] = choose_a[i] ? va[i] : vb[i];
  Var o{static_cast<int>(t.size())};
  return t.emit(std::move(out), t.rows(a), t.cols(a), {a, b}, [a, b, o, choose_a](Tape<T>& tp) {
    auto g = tp.grad_view(o);
    if (tp.requires_grad(a)) {
      auto& ga = tp.grad(a);
      for (std::size_t i = 0; i < g.size(); ++i)
        if (choose_a[i]) ga[i] += g[i];
    }
    if (tp.requires_grad(b)) {
      auto& gb = tp.grad(b);
      for (std::size_t i = 0; i < g.size(); ++i)
        if (!choose_a[i]) gb[i] += g[i];
    }
  });
}

namespace {

constexpr std::array<std::string_view, 15> kNamedPrimitives = {
    "add", "sub", "mul", "square", "abs", "exp", "relu", "sigmoid",
    "softplus", "sum", "mean", "row_mean", "matmul", "concat_cols", "neg"};

}  // namespace

bool is_supported_primitive(std::string_view primitive) {
  return std::find(kNamedPrimitives.begin(), kNamedPrimitives.end(), primitive) != kNamedPrimitives.end();
}

template <class T>
Var apply(Tape<T>& t, std::string_view p, std::span<const Var> in) {
  if (!is_supported_primitive(p)) {
    throw UnsupportedPrimitive("unsupported primitive '" + std::string(p) + "'");
  }
  const bool binary = p == "add" || p == "sub" || p == "mul" || p == "matmul" || p == "concat_cols";
  if (in.size() != (binary ? 2u : 1u)) {
    throw ShapeError("primitive '" + std::string(p) + "' got the wrong number of inputs");
  }
  if (p == "add") return add(t, in[0], in[1]);
  if (p == "sub") return sub(t, in[0], in[1]);
  if (p == "mul") return mul(t, in[0], in[1]);
  if (p == "matmul") return matmul(t, in[0], in[1]);
  if (p == "concat_cols") return concat_cols(t, in[0], in[1]);
  if (p == "square") return square(t, in[0]);
  if (p == "abs") return abs(t, in[0]);
  if (p == "exp") return exp(t, in[0]);
  if (p == "relu") return relu(t, in[0]);
  if (p == "sigmoid") return sigmoid(t, in[0]);
  if (p == "softplus") return softplus(t, in[0]);
  if (p == "sum") return sum(t, in[0]);
  if (p == "mean") return mean(t, in[0]);
  if (p == "row_mean") return row_mean(t, in[0]);
  return scale(t, in[0], T(-1));  // neg
}

template <class T>
Var hash_encode(Tape<T>& t, std::span<const T> positions, Var table, const kernels::HashEncodingConfig& cfg) {
  const std::size_t n = positions.size() / 3;
  const int width = cfg.output_width();
  std::vector<T> out(n * width);
  kernels::hash_encode_forward<T>(positions, t.value(table), cfg, out);
  auto pos = std::make_shared<std::vector<T>>(positions.begin(), positions.end());
  Var o{static_cast<int>(t.size())};
  return t.emit(std::move(out), static_cast<int>(n), width, {table}, [pos, table, o, cfg](Tape<T>& tp) {
    kernels::hash_encode_backward<T>(*pos, tp.grad_view(o), cfg, tp.grad(table));
  });
}

template <class T>
Var grid_interp(Tape<T>& t, std::span<const T> positions, Var grid, const kernels::DenseGridShape& shape) {
  const std::size_t n = positions.size() / 3;
  std::vector<T> out(n * shape.channels);
  kernels::grid_interp_forward<T>(positions, t.value(grid), shape, out);
  auto pos = std::make_shared<std::vector<T>>(positions.begin(), positions.end());
  Var o{static_cast<int>(t.size())};
  return t.emit(std::move(out), static_cast<int>(n), shape.channels, {grid}, [pos, grid, o, shape](Tape<T>& tp) {
    kernels::grid_interp_backward<T>(*pos, tp.grad_view(o), shape, tp.grad(grid));
  });
}

template <class T>
Var composite(Tape<T>& t, Var sigma, Var color, std::span<const T> t_values, std::span<const T> deltas,
              std::span<const int> offsets) {
  if (t.cols(sigma) != 1 || t.cols(color) != 3 || t.rows(sigma) != t.rows(color)) {
    throw ShapeError("composite: expected sigma n x 1 and color n x 3");
  }
  const int rays = static_cast<int>(offsets.size()) - 1;
  std::vector<T> out(static_cast<std::size_t>(rays) * kernels::kCompositeWidth);
  kernels::composite_forward<T>(t.value(sigma), t.value(color), t_values, deltas, offsets, out);
  auto tv = std::make_shared<std::vector<T>>(t_values.begin(), t_values.end());
  auto dv = std::make_shared<std::vector<T>>(deltas.begin(), deltas.end());
  auto ov = std::make_shared<std::vector<int>>(offsets.begin(), offsets.end());
  Var o{static_cast<int>(t.size())};
  return t.emit(std::move(out), rays, kernels::kCompositeWidth, {sigma, color},
                [sigma, color, o, tv, dv, ov](Tape<T>& tp) {
                  std::span<T> gs, gc;
                  if (tp.requires_grad(sigma)) gs = tp.grad(sigma);
                  if (tp.requires_grad(color)) gc = tp.grad(color);
                  kernels::composite_backward<T>(tp.value(sigma), tp.value(color), *tv, *dv, *ov,
                                                 tp.grad_view(o), gs, gc);
                });
}

template <class T>
std::pair<Var, std::vector<std::uint8_t>> warp_horizontal(Tape<T>& t, std::span<const T> target, Var disp,
                                                          const kernels::ImageExtent& ext,
                                                          kernels::WarpSide side) {
  if (t.value(disp).size() != ext.pixels()) throw ShapeError("warp_horizontal: disparity size mismatch");
  std::vector<T> out(target.size());
  std::vector<std::uint8_t> inb(ext.pixels());
  kernels::warp_forward<T>(target, t.value(disp), ext, side, out, inb);
  auto tgt = std::make_shared<std::vector<T>>(target.begin(), target.end());
  Var o{static_cast<int>(t.size())};
  Var w = t.emit(std::move(out), static_cast<int>(ext.pixels()), ext.channels, {disp},
                 [tgt, disp, o, ext, side](Tape<T>& tp) {
                   kernels::warp_backward<T>(*tgt, tp.value(disp), ext, side, tp.grad_view(o), tp.grad(disp));
                 });
  return {w, std::move(inb)};
}

template <class T>
Var ssim(Tape<T>& t, Var a, Var b, const kernels::ImageExtent& ext, int window) {
  require_same(t, a, b, "ssim");
  if (t.value(a).size() != ext.pixels() * ext.channels) throw ShapeError("ssim: extent mismatch");
  std::vector<T> out(ext.pixels());
  kernels::ssim_forward<T>(t.value(a), t.value(b), ext, window, out);
  Var o{static_cast<int>(t.size())};
  return t.emit(std::move(out), static_cast<int>(ext.pixels()), 1, {a, b}, [a, b, o, ext, window](Tape<T>& tp) {
    std::span<T> ga, gb;
    if (tp.requires_grad(a)) ga = tp.grad(a);
    if (tp.requires_grad(b)) gb = tp.grad(b);
    kernels::ssim_backward<T>(tp.value(a), tp.value(b), ext, window, tp.grad_view(o), ga, gb);
  });
}

#define NSF_INSTANTIATE(T)                                                                               \
  template class ParamSet<T>;                                                                            \
  template class Tape<T>;                                                                                \
  template Var matmul<T>(Tape<T>&, Var, Var);                                                            \
  template Var add_row<T>(Tape<T>&, Var, Var);                                                           \
  template Var add<T>(Tape<T>&, Var, Var);                                                               \
  template Var sub<T>(Tape<T>&, Var, Var);                                                               \
  template Var mul<T>(Tape<T>&, Var, Var);                                                               \
  template Var scale<T>(Tape<T>&, Var, T);                                                               \
  template Var add_scalar<T>(Tape<T>&, Var, T);                                                          \
  template Var square<T>(Tape<T>&, Var);                                                                 \
  template Var abs<T>(Tape<T>&, Var);                                                                    \
  template Var exp<T>(Tape<T>&, Var, T, T);                                                              \
  template Var relu<T>(Tape<T>&, Var);                                                                   \
  template Var sigmoid<T>(Tape<T>&, Var);                                                                \
  template Var softplus<T>(Tape<T>&, Var);                                                               \
  template Var concat_cols<T>(Tape<T>&, Var, Var);                                                       \
  template Var slice_cols<T>(Tape<T>&, Var, int, int);                                                   \
  template Var row_mean<T>(Tape<T>&, Var);                                                               \
  template Var sum<T>(Tape<T>&, Var);                                                                    \
  template Var mean<T>(Tape<T>&, Var);                                                                   \
  template Var masked_mean<T>(Tape<T>&, Var, const std::vector<std::uint8_t>&);                          \
  template Var select<T>(Tape<T>&, Var, Var, const std::vector<std::uint8_t>&);                          \
  template Var apply<T>(Tape<T>&, std::string_view, std::span<const Var>);                               \
  template Var hash_encode<T>(Tape<T>&, std::span<const T>, Var, const kernels::HashEncodingConfig&);    \
  template Var grid_interp<T>(Tape<T>&, std::span<const T>, Var, const kernels::DenseGridShape&);        \
  template Var composite<T>(Tape<T>&, Var, Var, std::span<const T>, std::span<const T>,                  \
                            std::span<const int>);                                                       \
  template std::pair<Var, std::vector<std::uint8_t>> warp_horizontal<T>(                                 \
      Tape<T>&, std::span<const T>, Var, const kernels::ImageExtent&, kernels::WarpSide);                \
  template Var ssim<T>(Tape<T>&, Var, Var, const kernels::ImageExtent&, int);
NSF_INSTANTIATE(float)
NSF_INSTANTIATE(double)
#undef NSF_INSTANTIATE

}  // namespace nsf::diff

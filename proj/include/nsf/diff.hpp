#pragma once

// Reverse-mode differentiation over a closed set of coarse primitives
// (matrix layers, activations, hash/grid interpolation, compositing, warping,
// SSIM, elementwise ops and reductions). Values are dense row-major matrices.

#include <cstdint>
#include <functional>
#include <span>
#include <string>
#include <string_view>
#include <utility>
#include <vector>

#include "nsf/errors.hpp"
#include "nsf/kernels.hpp"

namespace nsf::diff {

template <class T>
struct Param {
  std::string name;
  std::string group;  // optimizer group, e.g. "grid" or "mlp"
  std::vector<std::size_t> shape;
  std::vector<T> value;
};

template <class T>
class ParamSet {
 public:
  Param<T>& add(std::string name, std::string group, std::vector<std::size_t> shape, T fill = T(0));

  std::size_t count() const { return params_.size(); }
  std::size_t total_size() const;
  std::size_t index_of(std::string_view name) const;
  bool contains(std::string_view name) const;

  Param<T>& operator[](std::string_view name) { return params_[index_of(name)]; }
  const Param<T>& operator[](std::string_view name) const { return params_[index_of(name)]; }
  Param<T>& at(std::size_t i) { return params_.at(i); }
  const Param<T>& at(std::size_t i) const { return params_.at(i); }

  auto begin() { return params_.begin(); }
  auto end() { return params_.end(); }
  auto begin() const { return params_.begin(); }
  auto end() const { return params_.end(); }

  ParamSet zeros_like() const;
  bool same_layout(const ParamSet& other) const;

  /// Flat view across all parameters in declaration order.
  T& flat(std::size_t k);
  const T& flat(std::size_t k) const;

  template <class U>
  ParamSet<U> cast() const {
    ParamSet<U> out;
    for (const auto& p : params_) {
      auto& q = out.add(p.name, p.group, p.shape);
      for (std::size_t i = 0; i < p.value.size(); ++i) q.value[i] = static_cast<U>(p.value[i]);
    }
    return out;
  }

 private:
  std::vector<Param<T>> params_;
};

struct Var {
  int id = -1;
  bool valid() const { return id >= 0; }
};

template <class T>
class Tape {
 public:
  using Backward = std::function<void(Tape&)>;

  /// With record = false the tape only evaluates; no closures are kept.
  explicit Tape(bool record = true) : record_(record) {}

  Var constant(std::vector<T> value, int rows, int cols);
  Var scalar_constant(T v) { return constant({v}, 1, 1); }
  /// Leaf bound to a parameter; its gradient lands in the ParamSet passed to backward().
  Var parameter(const ParamSet<T>& params, std::string_view name, int rows, int cols);

  int rows(Var v) const { return node(v).rows; }
  int cols(Var v) const { return node(v).cols; }
  std::span<const T> value(Var v) const { return node(v).value; }
  T scalar(Var v) const;
  bool requires_grad(Var v) const { return node(v).requires_grad; }
  bool recording() const { return record_; }
  std::size_t size() const { return nodes_.size(); }

  /// Seeds d(out)/d(out) = 1 for a 1x1 output and accumulates parameter
  /// gradients into grads (which must share the parameter layout).
  void backward(Var out, ParamSet<T>& grads);

  // --- primitive-author interface
  Var emit(std::vector<T> value, int rows, int cols, std::initializer_list<Var> inputs,
           Backward fn);
  std::vector<T>& grad(Var v);
  std::span<const T> grad_view(Var v) const { return node(v).grad; }

 private:
  struct Node {
    std::vector<T> value;
    std::vector<T> grad;
    int rows = 0;
    int cols = 0;
    bool requires_grad = false;
    int param = -1;
    Backward backward;
  };
  Node& node(Var v) { return nodes_.at(static_cast<std::size_t>(v.id)); }
  const Node& node(Var v) const { return nodes_.at(static_cast<std::size_t>(v.id)); }

  bool record_;
  std::vector<Node> nodes_;
};

// ------------------------------------------------------------- primitives

template <class T> Var matmul(Tape<T>& t, Var a, Var b);
template <class T> Var add_row(Tape<T>& t, Var a, Var row);  // broadcast 1 x m over rows
template <class T> Var add(Tape<T>& t, Var a, Var b);
template <class T> Var sub(Tape<T>& t, Var a, Var b);
template <class T> Var mul(Tape<T>& t, Var a, Var b);
template <class T> Var scale(Tape<T>& t, Var a, T s);
template <class T> Var add_scalar(Tape<T>& t, Var a, T s);
template <class T> Var square(Tape<T>& t, Var a);
template <class T> Var abs(Tape<T>& t, Var a);
/// exp with the input clamped to [lo, hi]; zero gradient where clamped.
template <class T> Var exp(Tape<T>& t, Var a, T lo = T(-15), T hi = T(15));
template <class T> Var relu(Tape<T>& t, Var a);
template <class T> Var sigmoid(Tape<T>& t, Var a);
template <class T> Var softplus(Tape<T>& t, Var a);
template <class T> Var concat_cols(Tape<T>& t, Var a, Var b);
template <class T> Var slice_cols(Tape<T>& t, Var a, int begin, int count);
template <class T> Var row_mean(Tape<T>& t, Var a);
template <class T> Var sum(Tape<T>& t, Var a);
template <class T> Var mean(Tape<T>& t, Var a);
/// Sum over entries with mask != 0 divided by their count (0 when empty).
template <class T> Var masked_mean(Tape<T>& t, Var a, const std::vector<std::uint8_t>& mask);
/// Elementwise: choose_a[i] ? a[i] : b[i].
template <class T> Var select(Tape<T>& t, Var a, Var b, const std::vector<std::uint8_t>& choose_a);

/// Generic dispatch by primitive name for elementwise/reduction primitives.
/// Throws UnsupportedPrimitive for names outside the supported set.
template <class T> Var apply(Tape<T>& t, std::string_view primitive, std::span<const Var> inputs);
bool is_supported_primitive(std::string_view primitive);

template <class T>
Var hash_encode(Tape<T>& t, std::span<const T> positions, Var table,
                const kernels::HashEncodingConfig& cfg);
template <class T>
Var grid_interp(Tape<T>& t, std::span<const T> positions, Var grid, const kernels::DenseGridShape& shape);

/// sigma: n x 1, color: n x 3 -> rays x 5 (rgb, raw depth sum, ao).
template <class T>
Var composite(Tape<T>& t, Var sigma, Var color, std::span<const T> t_values,
              std::span<const T> deltas, std::span<const int> offsets);

/// target: constant image (pixels x channels); disp: pixels x 1.
template <class T>
std::pair<Var, std::vector<std::uint8_t>> warp_horizontal(Tape<T>& t, std::span<const T> target,
                                                          Var disp, const kernels::ImageExtent& ext,
                                                          kernels::WarpSide side);
/// a, b: pixels x channels -> pixels x 1.
template <class T>
Var ssim(Tape<T>& t, Var a, Var b, const kernels::ImageExtent& ext, int window);

}  // namespace nsf::diff

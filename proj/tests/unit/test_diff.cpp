#include <doctest.h>

#include <cmath>
#include <random>

#include "helpers.hpp"
#include "nsf/optim.hpp"

using namespace nsf;
using namespace nsf::diff;

namespace {

ParamSet<double> single(const std::string& name, std::vector<double> v) {
  ParamSet<double> ps;
  ps.add(name, "mlp", {v.size()}).value = std::move(v);
  return ps;
}

std::vector<double> randn(std::size_t n, std::uint64_t seed, double sd = 1.0) {
  std::mt19937_64 rng(seed);
  std::normal_distribution<double> g(0.0, sd);
  std::vector<double> v(n);
  for (auto& x : v) x = g(rng);
  return v;
}

// L_rho of a 16x16 center image against the right image warped by d.
Objective<double> photometric_objective(const std::vector<double>& center, const std::vector<double>& right,
                                        const kernels::ImageExtent& ext) {
  return [=](Tape<double>& t, const ParamSet<double>& ps) {
    const int n = static_cast<int>(ext.pixels());
    const Var d = t.parameter(ps, "d", n, 1);
    const Var c = t.constant(center, n, ext.channels);
    const Var w = warp_horizontal<double>(t, right, d, ext, kernels::WarpSide::right).first;
    const Var s = ssim(t, c, w, ext, 3);
    const Var ssim_term = scale(t, add_scalar(t, scale(t, s, -1.0), 1.0), 0.425);
    const Var l1 = scale(t, row_mean(t, abs(t, sub(t, c, w))), 0.15);
    return mean(t, add(t, ssim_term, l1));
  };
}

}  // namespace

TEST_SUITE("diffengine") {

TEST_CASE("square at three has slope six") {
  const auto ps = single("p", {3.0});
  const auto r = gradient<double>([](Tape<double>& t, const ParamSet<double>& q) {
    return sum(t, square(t, t.parameter(q, "p", 1, 1)));
  }, ps);
  CHECK(r.value == 9.0);
  CHECK(r.grads["p"].value[0] == 6.0);
}

TEST_CASE("least squares gradient matches the normal-equation form") {
  const int n = 12, m = 4;
  const auto X = randn(n * m, 1), y = randn(n, 2);
  const auto ps = single("p", randn(m, 3));
  const Objective<double> f = [&](Tape<double>& t, const ParamSet<double>& q) {
    const Var r = sub(t, matmul(t, t.constant(X, n, m), t.parameter(q, "p", m, 1)), t.constant(y, n, 1));
    return sum(t, square(t, r));
  };
  const auto g = gradient(f, ps);
  const auto& p = ps["p"].value;
  for (int j = 0; j < m; ++j) {
    double expect = 0.0;
    for (int i = 0; i < n; ++i) {
      double r = -y[i];
      for (int k = 0; k < m; ++k) r += X[i * m + k] * p[k];
      expect += 2.0 * X[i * m + j] * r;
    }
    CHECK(std::abs(g.grads["p"].value[j] - expect) < 1e-10);
  }
}

TEST_CASE("finite differences agree on a quadratic") {
  const auto ps = single("p", randn(30, 4));
  const Objective<double> f = [](Tape<double>& t, const ParamSet<double>& q) {
    const Var p = t.parameter(q, "p", 30, 1);
    return add(t, sum(t, square(t, p)), scale(t, sum(t, p), 0.3));
  };
  CHECK(fd_check(f, ps, 30, 1e-4).max_relative_error < 1e-8);
}

TEST_CASE("finite differences agree on the SSIM photometric loss") {
  const kernels::ImageExtent ext{16, 16, 3};
  const Image c = test::smooth_image(16, 16, 1);
  const Image r = test::smooth_image(16, 16, 2);
  const std::vector<double> cv(c.data.begin(), c.data.end()), rv(r.data.begin(), r.data.end());
  std::mt19937_64 rng(5);
  std::uniform_real_distribution<double> u(0.2, 4.0);
  std::vector<double> d(256);
  // Keep every disparity away from integer kinks of the linear interpolation.
  for (auto& x : d) x = std::floor(u(rng)) + 0.2 + 0.6 * (u(rng) - 0.2) / 3.8;
  const auto report = fd_check(photometric_objective(cv, rv, ext), single("d", d), 120, 1e-6);
  CHECK(report.probes == 120);
  CHECK(report.max_relative_error < 1e-4);
}

TEST_CASE("finite differences agree on compositing densities") {
  const int rays = 6, per = 10, n = rays * per;
  std::mt19937_64 rng(9);
  std::uniform_real_distribution<double> u(0.0, 1.0);
  std::vector<double> tv, dv, col;
  std::vector<int> off{0};
  for (int r = 0; r < rays; ++r) {
    for (int i = 0; i < per; ++i) {
      tv.push_back(1.0 + 0.1 * i);
      dv.push_back(0.1);
      for (int c = 0; c < 3; ++c) col.push_back(u(rng));
    }
    off.push_back((r + 1) * per);
  }
  std::vector<double> sig(n);
  for (auto& s : sig) s = 8.0 * u(rng);
  const auto weights = randn(rays * 5, 11);
  const Objective<double> f = [&](Tape<double>& t, const ParamSet<double>& q) {
    const Var s = t.parameter(q, "sigma", n, 1);
    const Var out = composite<double>(t, s, t.constant(col, n, 3), tv, dv, off);
    return sum(t, mul(t, out, t.constant(weights, rays, 5)));
  };
  CHECK(fd_check(f, single("sigma", sig), n, 1e-6).max_relative_error < 1e-4);
}

TEST_CASE("gradient of a sum is the sum of gradients") {
  std::mt19937_64 rng(21);
  for (int trial = 0; trial < 10; ++trial) {
    const auto ps = single("p", randn(8, 100 + trial));
    const auto a = randn(8 * 3, 200 + trial);
    const std::vector<std::string_view> unary{"square", "sigmoid", "softplus", "relu", "exp", "abs"};
    const auto op1 = unary[rng() % unary.size()], op2 = unary[rng() % unary.size()];
    const auto f = [&](std::string_view op) {
      return Objective<double>([&, op](Tape<double>& t, const ParamSet<double>& q) {
        const Var h = matmul(t, t.parameter(q, "p", 1, 8), t.constant(a, 8, 3));
        const Var in[1] = {h};
        const Var o = apply<double>(t, op, in);
        const Var out[1] = {o};
        return apply<double>(t, "sum", out);
      });
    };
    const Objective<double> both = [&](Tape<double>& t, const ParamSet<double>& q) {
      return add(t, f(op1)(t, q), f(op2)(t, q));
    };
    const auto g1 = gradient(f(op1), ps), g2 = gradient(f(op2), ps), g = gradient(both, ps);
    for (int i = 0; i < 8; ++i)
      CHECK(g.grads["p"].value[i] == doctest::Approx(g1.grads["p"].value[i] + g2.grads["p"].value[i]).epsilon(1e-12));
  }
}

TEST_CASE("unknown primitives are rejected") {
  Tape<double> t;
  const Var x = t.scalar_constant(1.0);
  const Var in[1] = {x};
  CHECK_THROWS_AS(apply<double>(t, "fft", in), UnsupportedPrimitive);
  CHECK_FALSE(is_supported_primitive("fft"));
  CHECK(is_supported_primitive("matmul"));
}

TEST_CASE("identical views give zero gradient at zero disparity") {
  const kernels::ImageExtent ext{16, 16, 3};
  const Image c = test::smooth_image(16, 16, 3);
  const std::vector<double> cv(c.data.begin(), c.data.end());
  const auto g = gradient(photometric_objective(cv, cv, ext), single("d", std::vector<double>(256, 0.0)));
  CHECK(g.value == doctest::Approx(0.0));
  for (double v : g.grads["d"].value) CHECK(std::abs(v) < 1e-12);
}

TEST_CASE("repeated gradient evaluations are bit-identical") {
  const kernels::ImageExtent ext{16, 16, 3};
  const Image c = test::smooth_image(16, 16, 4), r = test::smooth_image(16, 16, 5);
  const std::vector<double> cv(c.data.begin(), c.data.end()), rv(r.data.begin(), r.data.end());
  const auto ps = single("d", std::vector<double>(256, 1.3));
  const auto a = gradient(photometric_objective(cv, rv, ext), ps);
  const auto b = gradient(photometric_objective(cv, rv, ext), ps);
  CHECK(a.value == b.value);
  CHECK(a.grads["d"].value == b.grads["d"].value);
}

TEST_CASE("adam leaves parameters alone under zero gradient") {
  auto ps = single("p", {1.0, -2.0, 3.0});
  auto st = OptState<double>::init(ps, AdamConfig{});
  const auto before = ps["p"].value;
  adam_step(ps, ps.zeros_like(), st);
  CHECK(ps["p"].value == before);
}

TEST_CASE("adam first step moves each coordinate by about lr") {
  auto ps = single("p", {1.0, -2.0, 3.0});
  AdamConfig cfg;
  cfg.lr = 0.01;
  auto st = OptState<double>::init(ps, cfg);
  auto g = ps.zeros_like();
  g["p"].value = {0.5, -3.0, 1e-3};
  adam_step(ps, g, st);
  CHECK(ps["p"].value[0] == doctest::Approx(1.0 - 0.01).epsilon(1e-9));
  CHECK(ps["p"].value[1] == doctest::Approx(-2.0 + 0.01).epsilon(1e-9));
  CHECK(ps["p"].value[2] == doctest::Approx(3.0 - 0.01).epsilon(1e-9));
}

TEST_CASE("adam honours per-group learning rates") {
  ParamSet<double> ps;
  ps.add("a", "grid", {1}, 0.0);
  ps.add("b", "mlp", {1}, 0.0);
  AdamConfig cfg;
  cfg.group_lr = {{"grid", 1e-2}, {"mlp", 1e-3}};
  auto st = OptState<double>::init(ps, cfg);
  auto g = ps.zeros_like();
  g["a"].value[0] = 1.0;
  g["b"].value[0] = 1.0;
  adam_step(ps, g, st);
  CHECK(ps["a"].value[0] == doctest::Approx(-1e-2));
  CHECK(ps["b"].value[0] == doctest::Approx(-1e-3));
}

TEST_CASE("adam under constant gradient moves monotonically downhill") {
  auto ps = single("p", {0.0});
  auto st = OptState<double>::init(ps, AdamConfig{});
  auto g = ps.zeros_like();
  g["p"].value[0] = 2.0;
  double prev = 0.0;
  for (int i = 0; i < 50; ++i) {
    adam_step(ps, g, st);
    CHECK(ps["p"].value[0] < prev);
    prev = ps["p"].value[0];
  }
  CHECK(st.step == 50);
}

TEST_CASE("adam rejects mismatched gradients") {
  auto ps = single("p", {0.0, 1.0});
  auto st = OptState<double>::init(ps, AdamConfig{});
  auto g = single("p", {0.0});
  CHECK_THROWS_AS(adam_step(ps, g, st), ShapeError);
}

}

// Times the OpenMP kernels against the serial reference implementations.
//
//   nsf_bench [--reps 5] [--threads N] [--csv out.csv]
//
// Prints one row per kernel: median wall time of each path and the ratio.
#include <omp.h>

#include <algorithm>
#include <chrono>
#include <cstdio>
#include <fstream>
#include <functional>
#include <random>
#include <string>
#include <vector>

#include <CLI11.hpp>

#include "nsf/kernels.hpp"
#include "nsf/reference.hpp"
#include "nsf/renderer.hpp"
#include "nsf/scenegen.hpp"
#include "nsf/stereo.hpp"

using namespace nsf;

namespace {

double median_ms(int reps, const std::function<void()>& fn) {
  std::vector<double> t;
  for (int r = 0; r < reps; ++r) {
    const auto t0 = std::chrono::steady_clock::now();
    fn();
    t.push_back(std::chrono::duration<double, std::milli>(std::chrono::steady_clock::now() - t0).count());
  }
  std::nth_element(t.begin(), t.begin() + t.size() / 2, t.end());
  return t[t.size() / 2];
}

std::vector<double> uniform(std::size_t n, std::uint64_t seed, double lo = 0.0, double hi = 1.0) {
  std::mt19937_64 rng(seed);
  std::uniform_real_distribution<double> u(lo, hi);
  std::vector<double> v(n);
  for (auto& x : v) x = u(rng);
  return v;
}

Image random_image(int w, int h, std::uint64_t seed) {
  Image im(w, h, 3);
  const auto v = uniform(im.data.size(), seed);
  std::copy(v.begin(), v.end(), im.data.begin());
  return im;
}

struct Row {
  std::string kernel;
  std::string size;
  double serial_ms;
  double parallel_ms;
};

}  // namespace

int main(int argc, char** argv) {
  CLI::App app("kernel benchmark: OpenMP vs serial reference");
  int reps = 5;
  int threads = omp_get_max_threads();
  std::string csv;
  app.add_option("--reps", reps)->check(CLI::PositiveNumber);
  app.add_option("--threads", threads)->check(CLI::PositiveNumber);
  app.add_option("--csv", csv);
  CLI11_PARSE(app, argc, argv);
  omp_set_num_threads(threads);

  std::vector<Row> rows;

  {  // compositing: 4096 rays x 128 samples
    const int rays = 4096, n = 128;
    std::vector<int> off(rays + 1);
    for (int r = 0; r <= rays; ++r) off[r] = r * n;
    std::vector<double> t(rays * n), d(rays * n, 1.0 / n);
    for (int i = 0; i < rays * n; ++i) t[i] = (i % n + 0.5) / n;
    const auto s = uniform(t.size(), 1, 0.0, 20.0), c = uniform(3 * t.size(), 2);
    std::vector<QuadratureSamples> q(rays);
    for (int r = 0; r < rays; ++r) {
      for (int i = off[r]; i < off[r + 1]; ++i) {
        q[r].t.push_back(t[i]);
        q[r].delta.push_back(d[i]);
        q[r].sigma.push_back(s[i]);
        q[r].color.push_back(Vec3(c[3 * i], c[3 * i + 1], c[3 * i + 2]));
      }
    }
    std::vector<double> out(rays * kernels::kCompositeWidth);
    rows.push_back({"composite", "4096x128",
                    median_ms(reps, [&] { for (const auto& x : q) (void)reference::composite(x); }),
                    median_ms(reps, [&] { kernels::composite_forward<double>(s, c, t, d, off, out); })});
  }

  {  // SSIM: 256 x 256 x 3
    const kernels::ImageExtent ext{256, 256, 3};
    const auto a = uniform(ext.pixels() * 3, 3), b = uniform(ext.pixels() * 3, 4);
    std::vector<double> out(ext.pixels());
    rows.push_back({"ssim", "256x256x3", median_ms(reps, [&] { (void)reference::ssim(a, b, ext, 3); }),
                    median_ms(reps, [&] { kernels::ssim_forward<double>(a, b, ext, 3, out); })});
  }

  {  // horizontal warp: 512 x 512 x 3
    const kernels::ImageExtent ext{512, 512, 3};
    const auto img = uniform(ext.pixels() * 3, 5), disp = uniform(ext.pixels(), 6, 0.0, 40.0);
    std::vector<double> out(img.size());
    std::vector<std::uint8_t> in(ext.pixels());
    rows.push_back({"warp", "512x512x3",
                    median_ms(reps, [&] { reference::warp(img, disp, ext, kernels::WarpSide::right, out, in); }),
                    median_ms(reps, [&] { kernels::warp_forward<double>(img, disp, ext, kernels::WarpSide::right,
                                                                        out, in); })});
  }

  {  // hash encoding: 2^16 points, 8 levels x 2 features, 2^14 entries
    const kernels::HashEncodingConfig cfg;
    const auto pos = uniform(3 * 65536, 7), table = uniform(cfg.parameter_count(), 8, -1e-4, 1e-4);
    std::vector<double> out(65536 * cfg.output_width());
    rows.push_back({"hash_encode", "65536 pts", median_ms(reps, [&] { (void)reference::hash_encode(pos, table, cfg); }),
                    median_ms(reps, [&] { kernels::hash_encode_forward<double>(pos, table, cfg, out); })});
  }

  {  // block matching: 128 x 96, d_max 32
    const Image l = random_image(128, 96, 9), r = random_image(128, 96, 10);
    MatcherConfig m;
    m.d_max = 32;
    rows.push_back({"block_match", "128x96 d32", median_ms(reps, [&] { (void)reference::block_match(l, r, m); }),
                    median_ms(reps, [&] { (void)block_match(l, r, m); })});
  }

  {  // full image render of the occluder fixture: 64 x 64 x 256 samples
    const Fixture fx = make_fixture("occluder", 0);
    rows.push_back({"render_image", "64x64x256",
                    median_ms(reps, [&] { (void)reference::render_image(fx.scene, fx.intrinsics, fx.reference, 256); }),
                    median_ms(reps, [&] { (void)render_image(fx.scene, fx.intrinsics, fx.reference, 256); })});
  }

  std::printf("threads %d, median of %d runs\n", threads, reps);
  std::printf("%-13s %-12s %12s %12s %8s\n", "kernel", "size", "serial ms", "openmp ms", "ratio");
  for (const auto& r : rows) {
    std::printf("%-13s %-12s %12.2f %12.2f %8.2f\n", r.kernel.c_str(), r.size.c_str(), r.serial_ms, r.parallel_ms,
                r.serial_ms / r.parallel_ms);
  }
  if (!csv.empty()) {
    std::ofstream f(csv);
    f << "kernel,size,threads,serial_ms,openmp_ms\n";
    for (const auto& r : rows)
      f << r.kernel << ',' << r.size << ',' << threads << ',' << r.serial_ms << ',' << r.parallel_ms << '\n';
  }
  return 0;
}

#include "nsf/renderer.hpp"

#include <cmath>

#include "nsf/kernels.hpp"

namespace nsf {

QuadratureSamples sample_bins(const Ray& ray, int n, std::mt19937_64* rng) {
  if (n < 2) throw DomainError("sample_bins: need at least two samples");
  if (!std::isfinite(ray.t_near) || !std::isfinite(ray.t_far) || !(ray.t_near < ray.t_far)) {
    throw DomainError("sample_bins: ray needs finite t_near < t_far");
  }
  QuadratureSamples s;
  s.t.resize(n);
  s.delta.assign(n, (ray.t_far - ray.t_near) / n);
  const double step = s.delta[0];
  std::uniform_real_distribution<double> u(0.0, 1.0);
  for (int i = 0; i < n; ++i) {
    const double offset = rng ? u(*rng) : 0.5;
    s.t[i] = ray.t_near + (i + offset) * step;
  }
  return s;
}

CompositeResult composite(const QuadratureSamples& s) {
  const std::size_t n = s.t.size();
  if (s.delta.size() != n || s.sigma.size() != n || s.color.size() != n) {
    throw ShapeError("composite: sample arrays differ in length");
  }
  std::vector<double> color(3 * n);
  for (std::size_t i = 0; i < n; ++i)
    for (int c = 0; c < 3; ++c) color[3 * i + c] = s.color[i][c];
  const int offsets[2] = {0, static_cast<int>(n)};
  double out[kernels::kCompositeWidth];
  kernels::composite_forward<double>(s.sigma, color, s.t, s.delta, offsets, out);
  double optical = 0.0;
  for (std::size_t i = 0; i < n; ++i) optical += s.sigma[i] * s.delta[i];
  CompositeResult r;
  r.color = Vec3(out[0], out[1], out[2]);
  r.depth = out[3];
  r.ao = out[4];
  r.transmittance = std::exp(-optical);
  return r;
}

RenderOutput render_image(const RadianceField& field, const Intrinsics& intr, const Pose& pose,
                          const RenderOptions& opts) {
  intr.validate();
  if (opts.samples < 2) throw DomainError("render_image: need at least two samples per ray");
  const int W = intr.width, H = intr.height, N = opts.samples;
  RenderOutput out{Image(W, H, 3), Image(W, H, 1), Image(W, H, 1), Mask(W, H, 1)};
  const Aabb box = field.bounds();
  const Vec3 forward = pose.rotation.col(2);
  const int block = std::max(1, opts.rows_per_batch);
  const int blocks = (H + block - 1) / block;

#pragma omp parallel for schedule(dynamic, 1)
  for (int b = 0; b < blocks; ++b) {
    const int y0 = b * block, y1 = std::min(H, y0 + block);
    std::vector<Vec3> pts, dirs;
    std::vector<double> ts, deltas;
    std::vector<int> offsets{0};
    std::vector<int> pixel_of_ray;
    std::vector<double> cosines;
    for (int y = y0; y < y1; ++y) {
      for (int x = 0; x < W; ++x) {
        Ray ray = make_ray(intr, pose, x + 0.5, y + 0.5);
        if (!box.clip(ray)) continue;
        const auto s = sample_bins(ray, N);
        for (int i = 0; i < N; ++i) {
          pts.push_back(ray.at(s.t[i]));
          dirs.push_back(ray.direction);
        }
        ts.insert(ts.end(), s.t.begin(), s.t.end());
        deltas.insert(deltas.end(), s.delta.begin(), s.delta.end());
        offsets.push_back(static_cast<int>(ts.size()));
        pixel_of_ray.push_back(y * W + x);
        cosines.push_back(ray.direction.dot(forward));
      }
    }
    if (pixel_of_ray.empty()) continue;
    std::vector<double> sigma(pts.size());
    std::vector<Vec3> col(pts.size());
    field.query_batch(pts, dirs, sigma, col);
    std::vector<double> flat(3 * col.size());
    for (std::size_t i = 0; i < col.size(); ++i)
      for (int c = 0; c < 3; ++c) flat[3 * i + c] = col[i][c];
    std::vector<double> res(pixel_of_ray.size() * kernels::kCompositeWidth);
    kernels::composite_forward<double>(sigma, flat, ts, deltas, offsets, res);
    for (std::size_t r = 0; r < pixel_of_ray.size(); ++r) {
      const int p = pixel_of_ray[r];
      const double* o = res.data() + r * kernels::kCompositeWidth;
      for (int c = 0; c < 3; ++c) out.color.data[3 * p + c] = static_cast<float>(o[c]);
      const double ao = o[4];
      out.ao.data[p] = static_cast<float>(ao);
      const bool valid = ao >= kBackgroundAo;
      out.valid.data[p] = valid ? 1 : 0;
      out.depth.data[p] = valid ? static_cast<float>(o[3] * cosines[r]) : 0.0f;
    }
  }
  return out;
}

}  // namespace nsf

#include "nsf/scenegen.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <numbers>

namespace nsf {

namespace {

std::uint64_t splitmix64(std::uint64_t x) {
  x += 0x9e3779b97f4a7c15ull;
  x = (x ^ (x >> 30)) * 0xbf58476d1ce4e5b9ull;
  x = (x ^ (x >> 27)) * 0x94d049bb133111ebull;
  return x ^ (x >> 31);
}

double smoothstep(double t) { return t * t * (3.0 - 2.0 * t); }

}  // namespace

ValueNoise::ValueNoise(std::uint64_t seed, double frequency, int octaves)
    : seed_(seed), frequency_(frequency), octaves_(octaves) {}

double ValueNoise::lattice(std::int64_t x, std::int64_t y, std::int64_t z, int octave) const {
  std::uint64_t h = splitmix64(seed_ ^ (static_cast<std::uint64_t>(octave) * 0x632be59bd9b4e019ull));
  h = splitmix64(h ^ static_cast<std::uint64_t>(x));
  h = splitmix64(h ^ static_cast<std::uint64_t>(y));
  h = splitmix64(h ^ static_cast<std::uint64_t>(z));
  return static_cast<double>(h >> 11) * 0x1.0p-53;
}

double ValueNoise::operator()(const Vec3& p) const {
  double total = 0.0, norm = 0.0, amp = 1.0, freq = frequency_;
  for (int o = 0; o < octaves_; ++o) {
    const Vec3 q = p * freq;
    const double fx = std::floor(q.x()), fy = std::floor(q.y()), fz = std::floor(q.z());
    const auto ix = static_cast<std::int64_t>(fx), iy = static_cast<std::int64_t>(fy),
               iz = static_cast<std::int64_t>(fz);
    const double tx = smoothstep(q.x() - fx), ty = smoothstep(q.y() - fy), tz = smoothstep(q.z() - fz);
    double v = 0.0;
    for (int c = 0; c < 8; ++c) {
      const int dx = c & 1, dy = c >> 1 & 1, dz = c >> 2 & 1;
      const double w = (dx ? tx : 1 - tx) * (dy ? ty : 1 - ty) * (dz ? tz : 1 - tz);
      v += w * lattice(ix + dx, iy + dy, iz + dz, o);
    }
    total += amp * v;
    norm += amp;
    amp *= 0.5;
    freq *= 2.0;
  }
  return total / norm;
}

Vec3 Texture::operator()(const Vec3& p) const {
  const ValueNoise noise(seed, frequency, 3);
  const double n = std::clamp((noise(p) - 0.5) * 2.2 + 0.5, 0.0, 1.0);
  return accent + n * (base - accent);
}

bool Primitive::contains(const Vec3& p) const {
  if (kind == PrimitiveKind::sphere) return (p - center).squaredNorm() <= radius * radius;
  return (p.array() >= lo.array()).all() && (p.array() <= hi.array()).all();
}

std::optional<double> Primitive::intersect(const Ray& ray, double t_min) const {
  if (kind == PrimitiveKind::sphere) {
    const Vec3 oc = ray.origin - center;
    const double b = oc.dot(ray.direction);
    const double c = oc.squaredNorm() - radius * radius;
    const double disc = b * b - c;
    if (disc < 0.0) return std::nullopt;
    const double s = std::sqrt(disc);
    if (-b - s > t_min) return -b - s;
    if (-b + s > t_min) return t_min;  // origin inside
    return std::nullopt;
  }
  Ray r = ray;
  r.t_near = 0.0;
  r.t_far = std::numeric_limits<double>::infinity();
  if (!Aabb{lo, hi}.clip(r)) return std::nullopt;
  if (r.t_near > t_min) return r.t_near;
  if (r.t_far > t_min) return t_min;
  return std::nullopt;
}

Primitive Primitive::plane_slab(double z_front, double half_extent, double thickness, Texture tex,
                                Vec3 center_xy) {
  Primitive p;
  p.kind = PrimitiveKind::plane;
  p.lo = Vec3(center_xy.x() - half_extent, center_xy.y() - half_extent, z_front);
  p.hi = Vec3(center_xy.x() + half_extent, center_xy.y() + half_extent, z_front + thickness);
  p.texture = tex;
  return p;
}

Primitive Primitive::box(const Vec3& lo, const Vec3& hi, Texture tex) {
  Primitive p;
  p.kind = PrimitiveKind::box;
  p.lo = lo;
  p.hi = hi;
  p.texture = tex;
  return p;
}

Primitive Primitive::sphere(const Vec3& center, double radius, Texture tex) {
  Primitive p;
  p.kind = PrimitiveKind::sphere;
  p.center = center;
  p.radius = radius;
  p.texture = tex;
  return p;
}

AnalyticScene::AnalyticScene(std::vector<Primitive> prims, Aabb bounds, double sigma0)
    : prims_(std::move(prims)), bounds_(bounds), sigma0_(sigma0) {
  if (!(sigma0 > 0.0)) throw DomainError("analytic scene: sigma0 must be positive");
}

void AnalyticScene::query_batch(std::span<const Vec3> points, std::span<const Vec3>, std::span<double> sigma,
                                std::span<Vec3> color) const {
  for (std::size_t i = 0; i < points.size(); ++i) {
    sigma[i] = 0.0;
    color[i] = Vec3::Zero();
    for (const auto& p : prims_) {
      if (p.contains(points[i])) {
        sigma[i] = sigma0_ * p.density_scale;
        color[i] = p.texture(points[i]);
        break;
      }
    }
  }
}

std::optional<AnalyticScene::Hit> AnalyticScene::first_hit(const Ray& ray) const {
  std::optional<Hit> best;
  for (const auto& p : prims_) {
    const auto t = p.intersect(ray);
    if (t && (!best || *t < best->t)) best = Hit{*t, p.texture(ray.at(*t))};
  }
  return best;
}

AnalyticRender analytic_render(const AnalyticScene& scene, const Intrinsics& intr, const Pose& pose,
                               double baseline) {
  intr.validate();
  const int W = intr.width, H = intr.height;
  AnalyticRender out{RenderOutput{Image(W, H, 3), Image(W, H, 1), Image(W, H, 1), Mask(W, H, 1)},
                     Image(W, H, 1)};
  const Vec3 forward = pose.rotation.col(2);
#pragma omp parallel for schedule(static)
  for (int y = 0; y < H; ++y) {
    for (int x = 0; x < W; ++x) {
      const Ray ray = make_ray(intr, pose, x + 0.5, y + 0.5);
      const auto hit = scene.first_hit(ray);
      if (!hit) continue;
      const std::size_t p = static_cast<std::size_t>(y) * W + x;
      const double z = hit->t * ray.direction.dot(forward);
      for (int c = 0; c < 3; ++c) out.render.color.data[3 * p + c] = static_cast<float>(hit->color[c]);
      out.render.depth.data[p] = static_cast<float>(z);
      out.render.ao.data[p] = 1.0f;
      out.render.valid.data[p] = 1;
      if (baseline > 0.0) out.disparity.data[p] = static_cast<float>(baseline * intr.fx / z);
    }
  }
  return out;
}

std::vector<std::string> fixture_names() { return {"plane", "occluder", "textured_cube"}; }

namespace {

Pose orbit_pose(const Vec3& target, double radius, double yaw_deg, double pitch_deg) {
  const double yaw = yaw_deg * std::numbers::pi / 180.0;
  const double pitch = pitch_deg * std::numbers::pi / 180.0;
  // Yaw rotates about the down axis; positive pitch lifts the camera (towards -y).
  const Vec3 back(-std::sin(yaw) * std::cos(pitch), -std::sin(pitch), -std::cos(yaw) * std::cos(pitch));
  return Pose::look_at(target + radius * back, target);
}

}  // namespace

Fixture make_fixture(const std::string& name, std::uint64_t seed, int width, int height) {
  if (width < 8 || height < 8) throw DomainError("fixture resolution must be at least 8x8");
  Fixture f;
  f.name = name;
  f.seed = seed;
  const double focal = static_cast<double>(width);  // 64 px at the default 64x64
  f.intrinsics = Intrinsics{focal, focal, width / 2.0, height / 2.0, width, height};

  const Texture plane_tex{Vec3(0.85, 0.75, 0.55), Vec3(0.15, 0.25, 0.45), seed * 31 + 1, 6.0};
  const Texture box_tex{Vec3(0.9, 0.3, 0.25), Vec3(0.2, 0.6, 0.3), seed * 31 + 2, 5.0};
  const Texture cube_tex{Vec3(0.95, 0.85, 0.3), Vec3(0.2, 0.3, 0.8), seed * 31 + 3, 3.0};

  Vec3 target(0, 0, 2);
  double yaw_center = 0.0, yaw_half = 20.0, pitch_center = 0.0, pitch_step = 6.0;
  if (name == "plane") {
    f.scene = AnalyticScene({Primitive::plane_slab(2.0, 2.6, 0.1, plane_tex)},
                            Aabb{Vec3(-2.7, -2.7, 1.0), Vec3(2.7, 2.7, 2.2)}, 2000.0);
  } else if (name == "occluder") {
    // A faint patch of the background plane renders with AO near 0.35 and a
    // correspondingly biased depth, the kind of low-confidence region a fitted
    // field produces.
    Primitive faint = Primitive::box(Vec3(-0.6, 0.35, 2.0), Vec3(0.6, 0.85, 2.1), plane_tex);
    faint.density_scale = 0.00215;
    f.scene = AnalyticScene({Primitive::box(Vec3(-0.15, -0.3, 1.15), Vec3(0.35, 0.2, 1.45), box_tex), faint,
                             Primitive::plane_slab(2.0, 2.6, 0.1, plane_tex)},
                            Aabb{Vec3(-2.7, -2.7, 1.0), Vec3(2.7, 2.7, 2.2)}, 2000.0);
  } else if (name == "textured_cube") {
    f.scene = AnalyticScene({Primitive::box(Vec3(-0.5, -0.5, 1.5), Vec3(0.5, 0.5, 2.5), cube_tex)},
                            Aabb{Vec3(-0.6, -0.6, 1.4), Vec3(0.6, 0.6, 2.6)}, 2000.0);
    target = Vec3(0, 0, 2);
    yaw_center = 30.0;
    pitch_center = 15.0;
  } else {
    throw DomainError("unknown fixture '" + name + "' (expected plane, occluder or textured_cube)");
  }

  const double radius = 2.0;
  if (name == "textured_cube") {
    f.reference = orbit_pose(target, radius + 1.0, yaw_center, pitch_center);
  } else {
    f.reference = Pose{};  // identity at the origin, fronto-parallel to the plane at z = 2
  }
  for (int k = 0; k < kFixtureViews; ++k) {
    const double s = -1.0 + 2.0 * k / (kFixtureViews - 1);
    const double yaw = yaw_center + yaw_half * s;
    const double pitch = pitch_center + ((k % 2) ? pitch_step : -pitch_step);
    f.views.push_back(orbit_pose(target, name == "textured_cube" ? radius + 1.0 : radius, yaw, pitch));
  }
  for (const auto& v : f.views) f.images.push_back(analytic_render(f.scene, f.intrinsics, v).render.color);
  f.reference_image = analytic_render(f.scene, f.intrinsics, f.reference).render.color;
  return f;
}

}  // namespace nsf

#pragma once

#include <cstdint>
#include <optional>
#include <string>
#include <vector>

#include "nsf/field.hpp"
#include "nsf/geometry.hpp"
#include "nsf/renderer.hpp"

namespace nsf {

/// Seeded, band-limited value noise in [0,1]: a sum of octaves of trilinearly
/// blended lattice values with smoothstep fade.
class ValueNoise {
 public:
  ValueNoise(std::uint64_t seed, double frequency, int octaves = 3);
  double operator()(const Vec3& p) const;

 private:
  double lattice(std::int64_t x, std::int64_t y, std::int64_t z, int octave) const;
  std::uint64_t seed_;
  double frequency_;
  int octaves_;
};

struct Texture {
  Vec3 base = Vec3(0.8, 0.6, 0.4);
  Vec3 accent = Vec3(0.1, 0.2, 0.5);
  std::uint64_t seed = 1;
  double frequency = 6.0;

  Vec3 operator()(const Vec3& p) const;
};

enum class PrimitiveKind { plane, box, sphere };

/// Planes are thin boxes: the analytic surface is the slab face seen first.
struct Primitive {
  PrimitiveKind kind = PrimitiveKind::box;
  Vec3 lo = Vec3::Zero();  // box / plane slab
  Vec3 hi = Vec3::Ones();
  Vec3 center = Vec3::Zero();  // sphere
  double radius = 0.0;
  Texture texture;
  // Multiplies sigma_0 in the density version only; the analytic oracle
  // still reports this primitive as an opaque surface.
  double density_scale = 1.0;

  bool contains(const Vec3& p) const;
  /// Entry distance of the first intersection with t > t_min, if any.
  std::optional<double> intersect(const Ray& ray, double t_min = 1e-9) const;

  static Primitive plane_slab(double z_front, double half_extent, double thickness, Texture tex,
                              Vec3 center_xy = Vec3::Zero());
  static Primitive box(const Vec3& lo, const Vec3& hi, Texture tex);
  static Primitive sphere(const Vec3& center, double radius, Texture tex);
};

/// Analytic scene with exact first-hit geometry. As a RadianceField it is the
/// hard-slab density version: sigma_0 inside any primitive, zero elsewhere.
class AnalyticScene final : public RadianceField {
 public:
  AnalyticScene() = default;
  AnalyticScene(std::vector<Primitive> prims, Aabb bounds, double sigma0);

  Aabb bounds() const override { return bounds_; }
  void query_batch(std::span<const Vec3> points, std::span<const Vec3> dirs, std::span<double> sigma,
                   std::span<Vec3> color) const override;

  struct Hit {
    double t = 0.0;
    Vec3 color = Vec3::Zero();
  };
  std::optional<Hit> first_hit(const Ray& ray) const;

  const std::vector<Primitive>& primitives() const { return prims_; }
  double sigma0() const { return sigma0_; }

 private:
  std::vector<Primitive> prims_;
  Aabb bounds_;
  double sigma0_ = 1000.0;
};

struct AnalyticRender {
  RenderOutput render;  // ao is 1 on hits, 0 on misses
  Image disparity;      // b * fx / z on valid pixels, 0 elsewhere
};

/// Ray-primitive intersection per pixel center (not quadrature).
AnalyticRender analytic_render(const AnalyticScene& scene, const Intrinsics& intr, const Pose& pose,
                               double baseline = 0.0);

struct Fixture {
  std::string name;
  std::uint64_t seed = 0;
  AnalyticScene scene;
  Intrinsics intrinsics;
  std::vector<Pose> views;     // training views on a front-facing arc
  std::vector<Image> images;   // analytic renders of views
  Pose reference;              // centered view, not among the training views
  Image reference_image;
};

inline constexpr int kFixtureViews = 20;
inline constexpr int kFixtureResolution = 64;

/// name: "plane", "occluder" or "textured_cube".
Fixture make_fixture(const std::string& name, std::uint64_t seed, int width = kFixtureResolution,
                     int height = kFixtureResolution);
std::vector<std::string> fixture_names();

}  // namespace nsf

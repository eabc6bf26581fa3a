#include <doctest.h>

#include <cmath>
#include <limits>

#include "helpers.hpp"
#include "nsf/trainer.hpp"

using namespace nsf;

namespace {

// Cameras just outside a large box so every ray crosses it.
SceneDataset solid_color_scene(const Vec3& rgb) {
  SceneDataset s;
  s.intrinsics = Intrinsics{8, 8, 4, 4, 8, 8};
  s.bounds = Aabb{Vec3(-4, -4, 0), Vec3(4, 4, 4)};
  for (int i = 0; i < 4; ++i) {
    s.poses.push_back(Pose::look_at(Vec3(-0.3 + 0.2 * i, 0.1 * i, -0.5), Vec3(0, 0, 2)));
    Image im(8, 8, 3);
    for (int y = 0; y < 8; ++y)
      for (int x = 0; x < 8; ++x)
        for (int c = 0; c < 3; ++c) im.at(x, y, c) = static_cast<float>(rgb[c]);
    s.images.push_back(im);
  }
  return s;
}

}  // namespace

TEST_SUITE("nerf_trainer") {

TEST_CASE("rendering loss on direct colors") {
  const std::vector<double> c{0.2, 0.4, 0.6, 0.1, 0.9, 0.3};
  CHECK(rend_loss(c, c) == 0.0);
  std::vector<double> shifted = c;
  shifted[0] += 0.1;
  shifted[3] += 0.1;
  CHECK(rend_loss(shifted, c) == doctest::Approx(0.01).epsilon(1e-9));
  CHECK_THROWS_AS(rend_loss(std::vector<double>{1, 2}, std::vector<double>{1, 2}), ShapeError);
}

TEST_CASE("psnr examples") {
  Image a(4, 4, 3, 0.5f), b(4, 4, 3, 0.5f);
  CHECK(std::isinf(psnr(a, b)));
  CHECK(psnr(a, b) > 0);
  for (auto& v : b.data) v = 0.5f + 0.1f;
  CHECK(psnr(a, b) == doctest::Approx(20.0).epsilon(1e-5));
  for (auto& v : b.data) v = 0.5f + 0.01f;
  CHECK(psnr(a, b) == doctest::Approx(40.0).epsilon(1e-4));
  CHECK_THROWS_AS(psnr(a, Image(4, 4, 1)), ShapeError);
}

TEST_CASE("configs and datasets validate") {
  TrainConfig cfg;
  cfg.steps = 0;
  CHECK_THROWS_AS(cfg.validate(), DomainError);
  cfg = TrainConfig{};
  cfg.rays_per_batch = 0;
  CHECK_THROWS_AS(cfg.validate(), DomainError);
  SceneDataset s = solid_color_scene(Vec3(0.5, 0.5, 0.5));
  s.poses.pop_back();
  CHECK_THROWS(s.validate());
}

TEST_CASE("ray batches follow the scene layout") {
  const SceneDataset s = solid_color_scene(Vec3(0.1, 0.2, 0.3));
  const std::vector<PixelRef> px{{0, 0, 0}, {1, 3, 4}, {3, 7, 7}};
  const auto b = make_ray_batch<double>(s, px, 16, 4, nullptr);
  CHECK(b.rays() == 3);
  CHECK(b.offsets.back() == 48);
  CHECK(b.positions.size() == 48u * 3);
  CHECK(b.dir_features.size() == 48u * 24);
  CHECK(b.targets[4] == doctest::Approx(0.2));
}

TEST_CASE("a solid-color scene fits to near-zero loss") {
  const Vec3 rgb(0.3, 0.6, 0.2);
  const SceneDataset s = solid_color_scene(rgb);
  TrainConfig cfg;
  cfg.steps = 300;
  cfg.rays_per_batch = 64;
  cfg.samples = 16;
  cfg.holdout_every = 0;
  cfg.holdout_samples = 32;
  const auto r = fit(s, cfg);
  CHECK(r.trace.size() == 300u);
  CHECK(r.trace.back().loss < 1e-3);
  const NeuralField<float> field(r.model);
  const auto img = render_image(field, s.intrinsics, s.poses[1], RenderOptions{64});
  for (int c = 0; c < 3; ++c) CHECK(std::abs(img.color.at(4, 4, c) - rgb[c]) < 0.03);
}

TEST_CASE("same seed gives identical checkpoints") {
  const SceneDataset s = solid_color_scene(Vec3(0.7, 0.2, 0.4));
  TrainConfig cfg;
  cfg.steps = 20;
  cfg.rays_per_batch = 32;
  cfg.samples = 8;
  cfg.holdout_every = 0;
  cfg.seed = 3;
  const auto a = fit(s, cfg), b = fit(s, cfg);
  CHECK(encode_checkpoint(a.model) == encode_checkpoint(b.model));
  cfg.seed = 4;
  CHECK(encode_checkpoint(fit(s, cfg).model) != encode_checkpoint(a.model));
}

TEST_CASE("loss falls in trend on the textured cube") {
  const Fixture fx = make_fixture("textured_cube", 0, 32, 32);
  TrainConfig cfg;
  cfg.steps = 500;
  cfg.rays_per_batch = 256;
  cfg.samples = 32;
  cfg.holdout_every = 250;
  cfg.holdout_samples = 32;
  const auto r = fit(SceneDataset::from_fixture(fx), cfg, HoldoutView{fx.reference, fx.reference_image});
  std::vector<double> window;
  for (int w = 0; w < 10; ++w) {
    double s = 0.0;
    for (int i = 0; i < 50; ++i) s += r.trace[w * 50 + i].loss;
    window.push_back(s / 50);
  }
  for (int w = 1; w < 10; ++w) CHECK(window[w] <= window[w - 1] * 1.05);
  CHECK(window.back() < 0.5 * window.front());
  REQUIRE(r.trace.back().psnr_holdout.has_value());
  CHECK(r.trace[249].psnr_holdout.has_value());
  CHECK_FALSE(r.trace[10].psnr_holdout.has_value());
}

TEST_CASE("trace csv layout") {
  std::vector<TraceEntry> t{{1, 0.5, 7.78, std::nullopt}, {2, 0.25, 10.79, 9.5}};
  const std::string csv = trace_csv(t);
  CHECK(csv.rfind("step,loss,psnr_train,psnr_holdout\n", 0) == 0);
  CHECK(csv.find("\n1,0.5,7.780000,\n") != std::string::npos);
  CHECK(csv.find("\n2,0.25,10.790000,9.500000\n") != std::string::npos);
}

}

#include <doctest.h>

#include <bit>
#include <cstring>
#include <fstream>
#include <random>

#include "helpers.hpp"
#include "nsf/factory.hpp"
#include "nsf/imageio.hpp"
#include "nsf/nsloss.hpp"

using namespace nsf;
namespace fs = std::filesystem;

namespace {

SceneSource analytic_source(const std::string& fixture, int poses, int res) {
  auto fx = std::make_shared<Fixture>(make_fixture(fixture, 0, res, res));
  std::vector<Pose> p(fx->views.begin(), fx->views.begin() + poses);
  auto scene = std::shared_ptr<const AnalyticScene>(fx, &fx->scene);
  return SceneSource{fixture, fx->intrinsics, p, analytic_renderer(scene)};
}

std::string le_bytes(float v) {
  std::uint32_t u;
  std::memcpy(&u, &v, 4);
  std::string s(4, '\0');
  for (int i = 0; i < 4; ++i) s[i] = static_cast<char>((u >> (8 * i)) & 0xff);
  return s;
}

}  // namespace

TEST_SUITE("factory") {

TEST_CASE("rendered triplets have consistent shapes and geometry") {
  const Fixture fx = make_fixture("plane", 0, 24, 24);
  const Triplet t = render_triplet(fx.scene, fx.reference, fx.intrinsics, StereoRig{0.5}, 128);
  CHECK_NOTHROW(t.validate());
  for (const Image* im : {&t.left, &t.center, &t.right}) {
    CHECK(im->width == 24);
    CHECK(im->height == 24);
    CHECK(im->channels == 3);
  }
  CHECK(t.disparity.channels == 1);
  CHECK(t.ao.channels == 1);
  for (std::size_t i = 0; i < t.valid.data.size(); ++i) {
    CHECK(t.ao.data[i] >= 0.0f);
    CHECK(t.ao.data[i] <= 1.0f);
    if (!t.valid.data[i]) {
      CHECK(t.disparity.data[i] == 0.0f);
      continue;
    }
    CHECK(t.disparity.data[i] == static_cast<float>(0.5 * 24.0 / t.depth.data[i]));
  }
}

TEST_CASE("doubling the baseline doubles disparity") {
  const Fixture fx = make_fixture("occluder", 0, 24, 24);
  const Triplet a = render_triplet(fx.scene, fx.reference, fx.intrinsics, StereoRig{0.25}, 96);
  const Triplet b = render_triplet(fx.scene, fx.reference, fx.intrinsics, StereoRig{0.5}, 96);
  int n = 0;
  for (std::size_t i = 0; i < a.valid.data.size(); ++i) {
    if (!a.valid.data[i]) continue;
    ++n;
    CHECK(std::abs(b.disparity.data[i] - 2.0 * a.disparity.data[i]) <= 1e-4 * 2.0 * a.disparity.data[i]);
  }
  CHECK(n > 0);
}

TEST_CASE("warping the right view by the rendered disparity rebuilds the center") {
  const Fixture fx = make_fixture("plane", 0, 32, 32);
  const Triplet t = render_triplet(fx.scene, fx.reference, fx.intrinsics, StereoRig{0.25}, 256);
  const auto w = warp_horizontal(t.right, t.disparity, kernels::WarpSide::right);
  double err = 0.0;
  int n = 0;
  for (int y = 0; y < 32; ++y)
    for (int x = 0; x < 32; ++x) {
      if (!t.valid.at(x, y) || t.ao.at(x, y) <= 0.9f || !w.inbounds.at(x, y)) continue;
      for (int c = 0; c < 3; ++c) err += std::abs(w.image.at(x, y, c) - t.center.at(x, y, c));
      n += 3;
    }
  REQUIRE(n > 0);
  CHECK(err / n < 0.02);
}

TEST_CASE("dataset record counts and determinism") {
  const std::vector<SceneSource> scenes{analytic_source("plane", 10, 16), analytic_source("occluder", 10, 16)};
  BuildOptions opts;
  const fs::path a = test::temp_dir("factory_a"), b = test::temp_dir("factory_b");
  const auto m = build_dataset(scenes, opts, a);
  CHECK(m.records.size() == 60u);
  build_dataset(scenes, opts, b);
  CHECK(io::read_file(a / kManifestName) == io::read_file(b / kManifestName));
  CHECK(io::read_file(a / m.records[7].disparity) == io::read_file(b / m.records[7].disparity));

  const auto back = read_manifest(a / kManifestName);
  CHECK(back.records.size() == 60u);
  CHECK(back.histogram.counts == m.histogram.counts);
  CHECK(encode_manifest(back) == encode_manifest(m));

  const auto& rec = back.records[5];
  const Triplet t = load_triplet(rec, a);
  CHECK(t.width() == rec.width);
  CHECK(t.baseline == rec.baseline);
  for (std::size_t i = 0; i < t.valid.data.size(); ++i) {
    if (!t.valid.data[i]) continue;
    CHECK(t.disparity.data[i] >= 0.0f);
    CHECK(t.disparity.data[i] <= back.d_max);
  }
}

TEST_CASE("resolutions multiply the record count") {
  BuildOptions opts;
  opts.baselines = {0.3};
  opts.resolutions = {16, 8};
  const auto m = build_dataset({analytic_source("plane", 3, 16)}, opts, test::temp_dir("factory_res"));
  CHECK(m.records.size() == 6u);
  CHECK(m.records[1].width == 8);
  CHECK(m.records[1].focal == doctest::Approx(8.0));
}

TEST_CASE("histogram support widens as baselines are added") {
  const std::vector<SceneSource> scenes{analytic_source("occluder", 4, 24)};
  std::pair<int, int> prev{0, -1};
  std::vector<double> bs;
  for (double b : {0.3, 0.5, 0.1}) {
    bs.push_back(b);
    BuildOptions opts;
    opts.baselines = bs;
    const auto m = build_dataset(scenes, opts, test::temp_dir("factory_hist"));
    const auto s = m.histogram.support();
    if (prev.second >= prev.first) {
      CHECK(s.first <= prev.first);
      CHECK(s.second >= prev.second);
      CHECK(s.second - s.first >= prev.second - prev.first);
    }
    prev = s;
  }
  CHECK(prev.second - prev.first > 0);
}

TEST_CASE("disparity above d_max is exported as invalid") {
  BuildOptions opts;
  opts.baselines = {0.5};
  opts.d_max = 1.0;
  const auto m = build_dataset({analytic_source("plane", 1, 16)}, opts, test::temp_dir("factory_clip"));
  CHECK(m.records[0].clipped_pixels > 0);
  CHECK(m.records[0].valid_pixels == 0);
}

TEST_CASE("an unwritable output directory is an io error") {
  const fs::path dir = test::temp_dir("factory_unwritable");
  io::write_file(dir / "blocker", "x");
  CHECK_THROWS_AS(build_dataset({analytic_source("plane", 1, 8)}, BuildOptions{}, dir / "blocker" / "out"), IoError);
}

TEST_CASE("manifest decoding rejects damage") {
  CHECK_THROWS_AS(decode_manifest("{not json\n"), ParseError);
  CHECK_THROWS_AS(read_manifest(test::temp_dir("factory_missing") / kManifestName), IoError);
}

TEST_CASE("histogram bookkeeping") {
  DisparityHistogram h;
  CHECK(h.support() == std::pair<int, int>{0, -1});
  h.add(2.5);
  h.add(7.0);
  h.add(-1.0);
  CHECK(h.total() == 2u);
  CHECK(h.support() == std::pair<int, int>{2, 7});
  DisparityHistogram g;
  g.add(10.2);
  h.merge(g);
  CHECK(h.support().second == 10);
}

TEST_CASE("pfm encoding of a single pixel") {
  Image m(1, 1, 1);
  m.data[0] = 3.5f;
  CHECK(io::encode_pfm(m) == std::string("Pf\n1 1\n-1.0\n") + le_bytes(3.5f));
}

TEST_CASE("big-endian pfm files are byte-swapped on read") {
  std::string bytes = "Pf\n2 1\n1.0\n";
  for (float v : {1.25f, -7.0f}) {
    std::string le = le_bytes(v);
    bytes += std::string(le.rbegin(), le.rend());
  }
  const Image m = io::decode_pfm(bytes);
  CHECK(m.width == 2);
  CHECK(m.data[0] == 1.25f);
  CHECK(m.data[1] == -7.0f);
}

TEST_CASE("pfm rows are stored bottom to top") {
  Image m(1, 2, 1);
  m.data = {1.0f, 2.0f};
  CHECK(io::encode_pfm(m).substr(12) == le_bytes(2.0f) + le_bytes(1.0f));
}

TEST_CASE("pfm round trip is bit exact") {
  std::mt19937_64 rng(2);
  std::uniform_int_distribution<int> dim(1, 40);
  std::uniform_real_distribution<float> u(-1e6f, 1e6f);
  const fs::path dir = test::temp_dir("factory_pfm");
  for (int k = 0; k < 100; ++k) {
    Image m(dim(rng), dim(rng), 1);
    for (auto& v : m.data) v = u(rng);
    io::write_pfm(m, dir / "m.pfm");
    const Image back = io::read_pfm(dir / "m.pfm");
    REQUIRE(back.same_shape(m));
    CHECK(std::memcmp(back.data.data(), m.data.data(), m.data.size() * 4) == 0);
  }
}

TEST_CASE("malformed pfm headers") {
  CHECK_THROWS_AS(io::decode_pfm("P5\n1 1\n-1.0\n"), ParseError);
  CHECK_THROWS_AS(io::decode_pfm("Pf\n1\n-1.0\n"), ParseError);
  CHECK_THROWS_AS(io::decode_pfm("Pf\n2 2\n-1.0\n" + le_bytes(1.0f)), ParseError);
  CHECK_THROWS_AS(io::read_pfm("/nonexistent/x.pfm"), IoError);
}

TEST_CASE("color pfm is accepted") {
  std::string bytes = "PF\n1 1\n-1.0\n" + le_bytes(0.1f) + le_bytes(0.2f) + le_bytes(0.3f);
  const Image m = io::decode_pfm(bytes);
  CHECK(m.channels == 3);
  CHECK(m.data[2] == 0.3f);
}

TEST_CASE("png round trip quantizes to eight bits") {
  const Image img = test::random_image(7, 5, 3, 11);
  const fs::path p = test::temp_dir("factory_png") / "a.png";
  io::write_png(img, p);
  const Image back = io::read_png(p);
  REQUIRE(back.same_shape(img));
  for (std::size_t i = 0; i < img.data.size(); ++i) CHECK(std::abs(back.data[i] - img.data[i]) <= 0.5f / 255.0f + 1e-6f);
}

}

#include <doctest.h>

#include <cmath>
#include <random>
#include <sstream>

#include "nsf/geometry.hpp"

using namespace nsf;

namespace {

Mat3 rot_y(double deg) {
  const double a = deg * M_PI / 180.0;
  Mat3 r;
  r << std::cos(a), 0, std::sin(a), 0, 1, 0, -std::sin(a), 0, std::cos(a);
  return r;
}

Mat3 rot_z(double deg) {
  const double a = deg * M_PI / 180.0;
  Mat3 r;
  r << std::cos(a), -std::sin(a), 0, std::sin(a), std::cos(a), 0, 0, 0, 1;
  return r;
}

Pose random_pose(std::mt19937_64& rng) {
  std::normal_distribution<double> n(0.0, 1.0);
  Eigen::Quaterniond q(n(rng), n(rng), n(rng), n(rng));
  q.normalize();
  return Pose{q.toRotationMatrix(), Vec3(n(rng), n(rng), n(rng))};
}

}  // namespace

TEST_SUITE("geometry") {

TEST_CASE("principal ray is the optical axis") {
  const Intrinsics intr{100, 100, 50, 40, 100, 80};
  const Ray r = make_ray(intr, Pose{}, 50, 40);
  CHECK(r.direction.x() == doctest::Approx(0.0));
  CHECK(r.direction.y() == doctest::Approx(0.0));
  CHECK(r.direction.z() == doctest::Approx(1.0));
  CHECK(r.origin.norm() == 0.0);
}

TEST_CASE("pixel one focal length right of center looks 45 degrees off axis") {
  const Intrinsics intr{100, 100, 150, 100, 400, 200};
  const Ray r = make_ray(intr, Pose{}, 250, 100);
  const Vec3 expected = Vec3(1, 0, 1).normalized();
  CHECK((r.direction - expected).norm() < 1e-12);
}

TEST_CASE("camera turned 180 degrees about y looks down -z") {
  const Intrinsics intr{100, 100, 50, 50, 100, 100};
  const Ray r = make_ray(intr, Pose{rot_y(180), Vec3::Zero()}, 50, 50);
  CHECK((r.direction - Vec3(0, 0, -1)).norm() < 1e-12);
}

TEST_CASE("make_ray rejects pixels outside the raster") {
  const Intrinsics intr{100, 100, 50, 50, 100, 100};
  CHECK_THROWS_AS(make_ray(intr, Pose{}, 100.0, 10.0), DomainError);
  CHECK_THROWS_AS(make_ray(intr, Pose{}, -0.1, 10.0), DomainError);
}

TEST_CASE("ray directions are unit length") {
  std::mt19937_64 rng(3);
  std::uniform_real_distribution<double> u(0.0, 63.999);
  const Intrinsics intr{64, 64, 32, 32, 64, 64};
  for (int i = 0; i < 100; ++i) {
    const Ray r = make_ray(intr, random_pose(rng), u(rng), u(rng));
    CHECK(std::abs(r.direction.norm() - 1.0) < 1e-9);
  }
}

TEST_CASE("projection examples") {
  const Intrinsics intr{100, 100, 50, 50, 100, 100};
  const Projection p = project(Vec3(0, 0, 1), intr, Pose{});
  CHECK(p.u == doctest::Approx(50));
  CHECK(p.v == doctest::Approx(50));
  CHECK(p.depth == doctest::Approx(1));
  CHECK(project(Vec3(0.5, 0, 1), intr, Pose{}).u == doctest::Approx(100));
  CHECK_THROWS_AS(project(Vec3(0, 0, -1), intr, Pose{}), BehindCameraError);
}

TEST_CASE("project inverts make_ray") {
  std::mt19937_64 rng(11);
  std::uniform_real_distribution<double> u(0.0, 99.0), t(0.1, 20.0);
  const Intrinsics intr{80, 90, 48, 52, 100, 100};
  for (int i = 0; i < 200; ++i) {
    const Pose pose = random_pose(rng);
    const double px = u(rng), py = u(rng);
    const Ray r = make_ray(intr, pose, px, py);
    const Projection p = project(r.at(t(rng)), intr, pose);
    CHECK(std::abs(p.u - px) < 1e-6);
    CHECK(std::abs(p.v - py) < 1e-6);
  }
}

TEST_CASE("virtual stereo poses with identity rotation") {
  const StereoPoses s = virtual_stereo_poses(Pose{}, StereoRig{0.5});
  CHECK((s.left.center - Vec3(-0.5, 0, 0)).norm() < 1e-15);
  CHECK((s.right.center - Vec3(0.5, 0, 0)).norm() < 1e-15);
  CHECK(s.left.rotation == Mat3::Identity());
}

TEST_CASE("camera x axis along world y after 90 degrees about z") {
  const Pose c{rot_z(90), Vec3(1, 2, 3)};
  const StereoPoses s = virtual_stereo_poses(c, StereoRig{0.1});
  CHECK((s.right.center - (c.center + Vec3(0, 0.1, 0))).norm() < 1e-12);
  CHECK((s.right.rotation - c.rotation).norm() == 0.0);
}

TEST_CASE("rectified triplets share rows and shift columns by f*b/z") {
  std::mt19937_64 rng(5);
  std::uniform_real_distribution<double> u(-1.0, 1.0), z(1.0, 8.0);
  const Intrinsics intr{64, 64, 32, 32, 64, 64};
  for (int trial = 0; trial < 5; ++trial) {
    const Pose c = random_pose(rng);
    const double b = 0.1 + 0.1 * trial;
    const StereoPoses s = virtual_stereo_poses(c, StereoRig{b});
    for (int i = 0; i < 200; ++i) {
      const Vec3 pc(u(rng), u(rng), z(rng));
      const Vec3 world = c.to_world(pc);
      const Projection pl = project(world, intr, s.left), pm = project(world, intr, c),
                       pr = project(world, intr, s.right);
      CHECK(std::abs(pl.v - pm.v) <= 1e-9);
      CHECK(std::abs(pr.v - pm.v) <= 1e-9);
      CHECK(std::abs((pm.u - pr.u) - intr.fx * b / pc.z()) <= 1e-9);
      CHECK(std::abs((pl.u - pm.u) - intr.fx * b / pc.z()) <= 1e-9);
    }
  }
}

TEST_CASE("depth to disparity arithmetic") {
  CHECK(depth_to_disparity(50.0, 0.5, 100.0) == doctest::Approx(1.0));
  CHECK(depth_to_disparity(4.0, 0.1, 200.0) == doctest::Approx(5.0));
  CHECK(depth_to_disparity(1e300, 0.5, 100.0) < 1e-290);
  CHECK_THROWS_AS(depth_to_disparity(1.0, 0.0, 100.0), DomainError);
}

TEST_CASE("depth map conversion marks non-positive depth invalid") {
  Image z(3, 1, 1);
  z.data = {2.0f, 0.0f, -1.0f};
  Mask flagged(3, 1, 1, 1);
  const DisparityMap d = depth_to_disparity(z, 0.5, 64.0, &flagged);
  CHECK(d.disparity.data[0] == doctest::Approx(16.0));
  CHECK(d.valid.data[0] == 1);
  CHECK(d.valid.data[1] == 0);
  CHECK(d.valid.data[2] == 0);
  flagged.data[0] = 0;
  CHECK(depth_to_disparity(z, 0.5, 64.0, &flagged).valid.data[0] == 0);
}

TEST_CASE("COLMAP pinhole camera line") {
  std::istringstream cams("# Camera list\n1 PINHOLE 640 480 500 500 320 240\n");
  std::istringstream imgs("1 1 0 0 0 0 0 0 1 a.png\n\n");
  const auto recs = parse_colmap_text(cams, imgs);
  REQUIRE(recs.size() == 1);
  const Intrinsics& k = recs[0].intrinsics;
  CHECK(k.fx == 500);
  CHECK(k.fy == 500);
  CHECK(k.cx == 320);
  CHECK(k.cy == 240);
  CHECK(k.width == 640);
  CHECK(k.height == 480);
  CHECK((recs[0].pose.rotation - Mat3::Identity()).norm() < 1e-12);
  CHECK(recs[0].pose.center.norm() < 1e-12);
  CHECK(recs[0].name == "a.png");
}

TEST_CASE("COLMAP quaternion for 90 degrees about y") {
  const double h = 0.7071068;
  std::istringstream cams("1 SIMPLE_PINHOLE 100 100 50 50 50\n");
  std::istringstream imgs("7 0.7071068 0 0.7071068 0 1 2 3 1 b.png\n1.0 2.0 -1\n");
  const auto recs = parse_colmap_text(cams, imgs);
  REQUIRE(recs.size() == 1);
  // World-to-camera rotation from the quaternion formula, then inverted.
  Mat3 r_wc;
  r_wc << 1 - 2 * h * h, 0, 2 * h * h, 0, 1, 0, -2 * h * h, 0, 1 - 2 * h * h;
  CHECK((r_wc - rot_y(90)).norm() < 1e-6);
  CHECK((recs[0].pose.rotation - r_wc.transpose()).norm() < 1e-6);
  CHECK((recs[0].pose.center - (-r_wc.transpose() * Vec3(1, 2, 3))).norm() < 1e-6);
  CHECK(recs[0].intrinsics.fx == recs[0].intrinsics.fy);
}

TEST_CASE("COLMAP errors") {
  {
    std::istringstream cams("1 OPENCV 640 480 500 500 320 240 0 0 0 0\n");
    std::istringstream imgs("");
    CHECK_THROWS_AS(parse_colmap_text(cams, imgs), UnsupportedModelError);
  }
  {
    std::istringstream cams("# header\n1 PINHOLE 640 480 500 five 320 240\n");
    std::istringstream imgs("");
    try {
      parse_colmap_text(cams, imgs);
      FAIL("expected a parse error");
    } catch (const ParseError& e) {
      CHECK(e.line() == 2);
    }
  }
}

TEST_CASE("COLMAP serialize then parse is the identity") {
  std::mt19937_64 rng(9);
  std::vector<CameraRecord> recs;
  for (int i = 0; i < 6; ++i) {
    recs.push_back({i + 1, "img" + std::to_string(i) + ".png", Intrinsics{400.0 + i, 410.0 + i, 200, 150, 400, 300},
                    random_pose(rng)});
  }
  const ColmapText text = serialize_colmap_text(recs);
  std::istringstream c(text.cameras), m(text.images);
  const auto back = parse_colmap_text(c, m);
  REQUIRE(back.size() == recs.size());
  for (std::size_t i = 0; i < recs.size(); ++i) {
    CHECK(back[i].name == recs[i].name);
    CHECK(back[i].intrinsics.fx == doctest::Approx(recs[i].intrinsics.fx));
    CHECK((back[i].pose.rotation - recs[i].pose.rotation).norm() < 1e-9);
    CHECK((back[i].pose.center - recs[i].pose.center).norm() < 1e-9);
  }
}

TEST_CASE("pose file round trip") {
  std::mt19937_64 rng(21);
  std::vector<CameraRecord> recs;
  for (int i = 0; i < 4; ++i) recs.push_back({i, "", Intrinsics{64, 64, 32, 32, 64, 64}, random_pose(rng)});
  std::istringstream in(serialize_pose_file(recs));
  const auto back = parse_pose_file(in);
  REQUIRE(back.size() == 4);
  for (std::size_t i = 0; i < 4; ++i) {
    CHECK((back[i].pose.rotation - recs[i].pose.rotation).norm() < 1e-12);
    CHECK((back[i].pose.center - recs[i].pose.center).norm() < 1e-12);
    CHECK(back[i].intrinsics.width == 64);
  }
}

TEST_CASE("type invariants are enforced") {
  CHECK_THROWS_AS((Intrinsics{0, 1, 0, 0, 4, 4}).validate(), DomainError);
  CHECK_THROWS_AS((Intrinsics{1, 1, 4, 0, 4, 4}).validate(), DomainError);
  CHECK_NOTHROW((Intrinsics{1, 1, 0, 0, 4, 4}).validate());
  Pose p;
  p.rotation(0, 0) = 2.0;
  CHECK_THROWS_AS(p.validate(), DomainError);
  CHECK_THROWS_AS((Pose{-Mat3::Identity(), Vec3::Zero()}).validate(), DomainError);
  CHECK_THROWS_AS(StereoRig{0.0}.validate(), DomainError);
}

TEST_CASE("aabb clip") {
  Ray r{Vec3(0, 0, 0), Vec3(0, 0, 1)};
  CHECK(Aabb{Vec3(-1, -1, 2), Vec3(1, 1, 3)}.clip(r));
  CHECK(r.t_near == doctest::Approx(2.0));
  CHECK(r.t_far == doctest::Approx(3.0));
  Ray miss{Vec3(5, 0, 0), Vec3(0, 0, 1)};
  CHECK_FALSE(Aabb{Vec3(-1, -1, 2), Vec3(1, 1, 3)}.clip(miss));
}

}

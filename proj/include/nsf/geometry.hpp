#pragma once

#include <Eigen/Core>
#include <Eigen/Geometry>
#include <istream>
#include <limits>
#include <string>
#include <vector>

#include "nsf/image.hpp"

namespace nsf {

using Vec3 = Eigen::Vector3d;
using Mat3 = Eigen::Matrix3d;

struct Intrinsics {
  double fx = 1.0;
  double fy = 1.0;
  double cx = 0.0;
  double cy = 0.0;
  int width = 1;
  int height = 1;

  void validate() const;
  /// Same camera resampled to a new raster size (focal and principal point scale).
  Intrinsics resized(int new_width, int new_height) const;
};

// Camera-to-world. Camera frame is +x right, +y down, +z forward.
struct Pose {
  Mat3 rotation = Mat3::Identity();
  Vec3 center = Vec3::Zero();

  void validate() const;
  Vec3 to_camera(const Vec3& world) const { return rotation.transpose() * (world - center); }
  Vec3 to_world(const Vec3& cam) const { return rotation * cam + center; }

  static Pose look_at(const Vec3& eye, const Vec3& target, const Vec3& down = Vec3(0, 1, 0));
};

struct Ray {
  Vec3 origin = Vec3::Zero();
  Vec3 direction = Vec3::UnitZ();
  double t_near = 0.0;
  double t_far = std::numeric_limits<double>::infinity();

  Vec3 at(double t) const { return origin + t * direction; }
};

struct StereoRig {
  double baseline = 0.5;

  void validate() const;
};

struct StereoPoses {
  Pose left;
  Pose right;
};

struct Projection {
  double u = 0.0;
  double v = 0.0;
  double depth = 0.0;
};

struct Aabb {
  Vec3 lo = Vec3::Zero();
  Vec3 hi = Vec3::Ones();

  Vec3 extent() const { return hi - lo; }
  bool contains(const Vec3& p) const {
    return (p.array() >= lo.array()).all() && (p.array() <= hi.array()).all();
  }
  /// Clips the ray's [t_near, t_far] to the box. False when the ray misses.
  bool clip(Ray& ray) const;
};

/// Ray through pixel (u, v); pixel centers sit at integer + 0.5.
Ray make_ray(const Intrinsics& intr, const Pose& pose, double u, double v);

Projection project(const Vec3& point, const Intrinsics& intr, const Pose& pose);

/// Rectified left/right cameras sharing the center camera's rotation,
/// displaced by -b / +b along its x-axis.
StereoPoses virtual_stereo_poses(const Pose& center, const StereoRig& rig);

struct DisparityMap {
  Image disparity;
  Mask valid;
};

double depth_to_disparity(double z, double baseline, double focal);
DisparityMap depth_to_disparity(const Image& depth, double baseline, double focal,
                                const Mask* valid = nullptr);

// --- pose import/export -------------------------------------------------

struct CameraRecord {
  int id = 0;
  std::string name;
  Intrinsics intrinsics;
  Pose pose;
};

/// COLMAP text export (cameras.txt + images.txt). images.txt stores
/// world-to-camera quaternion + translation; converted to camera-to-world.
std::vector<CameraRecord> parse_colmap_text(std::istream& cameras_txt, std::istream& images_txt);

struct ColmapText {
  std::string cameras;
  std::string images;
};
ColmapText serialize_colmap_text(const std::vector<CameraRecord>& records);

/// Line-oriented pose file: "id qw qx qy qz cx cy cz fx fy px py w h" where
/// the quaternion is the camera-to-world rotation and (cx,cy,cz) the center.
std::string serialize_pose_file(const std::vector<CameraRecord>& records);
std::vector<CameraRecord> parse_pose_file(std::istream& in);

Mat3 quaternion_to_matrix(double qw, double qx, double qy, double qz);
Eigen::Quaterniond matrix_to_quaternion(const Mat3& r);

}  // namespace nsf

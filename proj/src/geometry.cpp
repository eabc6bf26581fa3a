#include "nsf/geometry.hpp"

#include <cmath>
#include <iomanip>
#include <map>
#include <sstream>

namespace nsf {

void Intrinsics::validate() const {
  if (!(fx > 0.0) || !(fy > 0.0)) throw DomainError("intrinsics: focal lengths must be positive");
  if (width <= 0 || height <= 0) throw DomainError("intrinsics: image size must be positive");
  if (!(cx >= 0.0 && cx < width) || !(cy >= 0.0 && cy < height)) {
    throw DomainError("intrinsics: principal point outside the image");
  }
}

Intrinsics Intrinsics::resized(int new_width, int new_height) const {
  const double sx = static_cast<double>(new_width) / width;
  const double sy = static_cast<double>(new_height) / height;
  return Intrinsics{fx * sx, fy * sy, cx * sx, cy * sy, new_width, new_height};
}

void Pose::validate() const {
  const double orth = (rotation.transpose() * rotation - Mat3::Identity()).cwiseAbs().maxCoeff();
  if (!(orth <= 1e-9)) throw DomainError("pose: rotation is not orthonormal");
  if (!(std::abs(rotation.determinant() - 1.0) <= 1e-9)) {
    throw DomainError("pose: rotation determinant is not +1");
  }
  if (!center.allFinite()) throw DomainError("pose: non-finite center");
}

Pose Pose::look_at(const Vec3& eye, const Vec3& target, const Vec3& down) {
  const Vec3 z = (target - eye).normalized();
  Vec3 x = down.cross(z);
  if (x.norm() < 1e-12) throw DomainError("look_at: view direction parallel to down vector");
  x.normalize();
  const Vec3 y = z.cross(x);
  Pose p;
  p.rotation.col(0) = x;
  p.rotation.col(1) = y;
  p.rotation.col(2) = z;
  p.center = eye;
  return p;
}

void StereoRig::validate() const {
  if (!(baseline > 0.0)) throw DomainError("stereo rig: baseline must be positive");
}

bool Aabb::clip(Ray& ray) const {
  double t0 = ray.t_near;
  double t1 = ray.t_far;
  for (int a = 0; a < 3; ++a) {
    const double inv = 1.0 / ray.direction[a];
    double ta = (lo[a] - ray.origin[a]) * inv;
    double tb = (hi[a] - ray.origin[a]) * inv;
    if (std::isnan(ta) || std::isnan(tb)) {
      // Direction component is zero and origin lies on a slab face.
      continue;
    }
    if (ta > tb) std::swap(ta, tb);
    t0 = std::max(t0, ta);
    t1 = std::min(t1, tb);
  }
  if (!(t0 < t1)) return false;
  ray.t_near = t0;
  ray.t_far = t1;
  return true;
}

Ray make_ray(const Intrinsics& intr, const Pose& pose, double u, double v) {
  if (!(u >= 0.0 && u < intr.width && v >= 0.0 && v < intr.height)) {
    throw DomainError("make_ray: pixel outside the image");
  }
  const Vec3 cam((u - intr.cx) / intr.fx, (v - intr.cy) / intr.fy, 1.0);
  Ray r;
  r.origin = pose.center;
  r.direction = (pose.rotation * cam).normalized();
  return r;
}

Projection project(const Vec3& point, const Intrinsics& intr, const Pose& pose) {
  const Vec3 pc = pose.to_camera(point);
  if (!(pc.z() > 0.0)) throw BehindCameraError("project: point is behind the camera");
  return Projection{intr.fx * pc.x() / pc.z() + intr.cx, intr.fy * pc.y() / pc.z() + intr.cy, pc.z()};
}

StereoPoses virtual_stereo_poses(const Pose& center, const StereoRig& rig) {
  rig.validate();
  const Vec3 x_axis = center.rotation.col(0);
  StereoPoses out;
  out.left.rotation = center.rotation;
  out.right.rotation = center.rotation;
  out.left.center = center.center - rig.baseline * x_axis;
  out.right.center = center.center + rig.baseline * x_axis;
  return out;
}

double depth_to_disparity(double z, double baseline, double focal) {
  if (!(baseline > 0.0) || !(focal > 0.0)) {
    throw DomainError("depth_to_disparity: baseline and focal must be positive");
  }
  if (!(z > 0.0)) return 0.0;
  return baseline * focal / z;
}

DisparityMap depth_to_disparity(const Image& depth, double baseline, double focal, const Mask* valid) {
  if (!(baseline > 0.0) || !(focal > 0.0)) {
    throw DomainError("depth_to_disparity: baseline and focal must be positive");
  }
  if (valid) require_same_extent(depth, *valid, "depth_to_disparity");
  DisparityMap out{Image(depth.width, depth.height, 1), Mask(depth.width, depth.height, 1)};
  for (std::size_t i = 0; i < depth.pixel_count(); ++i) {
    const double z = depth.data[i];
    const bool ok = z > 0.0 && std::isfinite(z) && (!valid || valid->data[i]);
    out.valid.data[i] = ok ? 1 : 0;
    out.disparity.data[i] = ok ? static_cast<float>(baseline * focal / z) : 0.0f;
  }
  return out;
}

Mat3 quaternion_to_matrix(double qw, double qx, double qy, double qz) {
  Eigen::Quaterniond q(qw, qx, qy, qz);
  if (q.norm() < 1e-12) throw DomainError("quaternion: zero norm");
  return q.normalized().toRotationMatrix();
}

Eigen::Quaterniond matrix_to_quaternion(const Mat3& r) {
  Eigen::Quaterniond q(r);
  q.normalize();
  // Canonical sign: qw >= 0.
  if (q.w() < 0.0) q.coeffs() *= -1.0;
  return q;
}

namespace {

// Non-comment lines with their 1-based line numbers. Blank lines are kept
// because images.txt may carry an empty 2D-point line.
struct NumberedLine {
  int number;
  std::string text;
};

std::vector<NumberedLine> content_lines(std::istream& in) {
  std::vector<NumberedLine> out;
  std::string line;
  int n = 0;
  while (std::getline(in, line)) {
    ++n;
    if (!line.empty() && line.back() == '\r') line.pop_back();
    const auto first = line.find_first_not_of(" \t");
    if (first != std::string::npos && line[first] == '#') continue;
    out.push_back({n, line});
  }
  // Trailing blank lines carry no records.
  while (!out.empty() && out.back().text.find_first_not_of(" \t") == std::string::npos) out.pop_back();
  return out;
}

bool blank(const std::string& s) { return s.find_first_not_of(" \t") == std::string::npos; }

template <class T>
T read_field(std::istringstream& ss, int line, const char* what) {
  T v;
  if (!(ss >> v)) throw ParseError(std::string("expected ") + what, line);
  return v;
}

std::string fmt17(double v) {
  std::ostringstream ss;
  ss << std::setprecision(17) << v;
  return ss.str();
}

}  // namespace

std::vector<CameraRecord> parse_colmap_text(std::istream& cameras_txt, std::istream& images_txt) {
  std::map<int, Intrinsics> cameras;
  for (const auto& [n, text] : content_lines(cameras_txt)) {
    if (blank(text)) continue;
    std::istringstream ss(text);
    const int id = read_field<int>(ss, n, "camera id");
    const std::string model = read_field<std::string>(ss, n, "camera model");
    Intrinsics k;
    k.width = read_field<int>(ss, n, "width");
    k.height = read_field<int>(ss, n, "height");
    if (model == "SIMPLE_PINHOLE") {
      k.fx = k.fy = read_field<double>(ss, n, "focal");
    } else if (model == "PINHOLE") {
      k.fx = read_field<double>(ss, n, "fx");
      k.fy = read_field<double>(ss, n, "fy");
    } else {
      throw UnsupportedModelError("unsupported camera model '" + model + "' (line " +
                                  std::to_string(n) + ")");
    }
    k.cx = read_field<double>(ss, n, "cx");
    k.cy = read_field<double>(ss, n, "cy");
    std::string extra;
    if (ss >> extra) throw ParseError("trailing fields in camera line", n);
    try {
      k.validate();
    } catch (const DomainError& e) {
      throw ParseError(e.what(), n);
    }
    cameras[id] = k;
  }

  std::vector<CameraRecord> out;
  const auto lines = content_lines(images_txt);
  for (std::size_t i = 0; i < lines.size(); i += 2) {
    const auto& [n, text] = lines[i];
    std::istringstream ss(text);
    CameraRecord rec;
    rec.id = read_field<int>(ss, n, "image id");
    const double qw = read_field<double>(ss, n, "qw");
    const double qx = read_field<double>(ss, n, "qx");
    const double qy = read_field<double>(ss, n, "qy");
    const double qz = read_field<double>(ss, n, "qz");
    Vec3 t;
    t.x() = read_field<double>(ss, n, "tx");
    t.y() = read_field<double>(ss, n, "ty");
    t.z() = read_field<double>(ss, n, "tz");
    const int cam_id = read_field<int>(ss, n, "camera id");
    rec.name = read_field<std::string>(ss, n, "image name");
    auto it = cameras.find(cam_id);
    if (it == cameras.end()) throw ParseError("unknown camera id " + std::to_string(cam_id), n);
    rec.intrinsics = it->second;
    Mat3 r_w2c;
    try {
      r_w2c = quaternion_to_matrix(qw, qx, qy, qz);
    } catch (const DomainError& e) {
      throw ParseError(e.what(), n);
    }
    rec.pose.rotation = r_w2c.transpose();
    rec.pose.center = -r_w2c.transpose() * t;
    out.push_back(std::move(rec));
    // lines[i + 1] holds the 2D point observations; skipped.
  }
  return out;
}

ColmapText serialize_colmap_text(const std::vector<CameraRecord>& records) {
  std::ostringstream cams, imgs;
  cams << "# Camera list with one line of data per camera:\n";
  imgs << "# Image list with two lines of data per image:\n";
  for (std::size_t i = 0; i < records.size(); ++i) {
    const auto& r = records[i];
    const auto& k = r.intrinsics;
    const int cam_id = static_cast<int>(i) + 1;
    cams << cam_id << " PINHOLE " << k.width << ' ' << k.height << ' ' << fmt17(k.fx) << ' '
         << fmt17(k.fy) << ' ' << fmt17(k.cx) << ' ' << fmt17(k.cy) << '\n';
    const Mat3 r_w2c = r.pose.rotation.transpose();
    const Vec3 t = -r_w2c * r.pose.center;
    const auto q = matrix_to_quaternion(r_w2c);
    imgs << r.id << ' ' << fmt17(q.w()) << ' ' << fmt17(q.x()) << ' ' << fmt17(q.y()) << ' '
         << fmt17(q.z()) << ' ' << fmt17(t.x()) << ' ' << fmt17(t.y()) << ' ' << fmt17(t.z()) << ' '
         << cam_id << ' ' << (r.name.empty() ? "image_" + std::to_string(r.id) + ".png" : r.name)
         << "\n\n";
  }
  return {cams.str(), imgs.str()};
}

std::string serialize_pose_file(const std::vector<CameraRecord>& records) {
  std::ostringstream out;
  out << "# id qw qx qy qz cx cy cz fx fy px py w h\n";
  for (const auto& r : records) {
    const auto q = matrix_to_quaternion(r.pose.rotation);
    const auto& k = r.intrinsics;
    out << r.id << ' ' << fmt17(q.w()) << ' ' << fmt17(q.x()) << ' ' << fmt17(q.y()) << ' '
        << fmt17(q.z()) << ' ' << fmt17(r.pose.center.x()) << ' ' << fmt17(r.pose.center.y()) << ' '
        << fmt17(r.pose.center.z()) << ' ' << fmt17(k.fx) << ' ' << fmt17(k.fy) << ' '
        << fmt17(k.cx) << ' ' << fmt17(k.cy) << ' ' << k.width << ' ' << k.height << '\n';
  }
  return out.str();
}

std::vector<CameraRecord> parse_pose_file(std::istream& in) {
  std::vector<CameraRecord> out;
  for (const auto& [n, text] : content_lines(in)) {
    if (blank(text)) continue;
    std::istringstream ss(text);
    CameraRecord r;
    r.id = read_field<int>(ss, n, "id");
    const double qw = read_field<double>(ss, n, "qw");
    const double qx = read_field<double>(ss, n, "qx");
    const double qy = read_field<double>(ss, n, "qy");
    const double qz = read_field<double>(ss, n, "qz");
    r.pose.center.x() = read_field<double>(ss, n, "cx");
    r.pose.center.y() = read_field<double>(ss, n, "cy");
    r.pose.center.z() = read_field<double>(ss, n, "cz");
    r.intrinsics.fx = read_field<double>(ss, n, "fx");
    r.intrinsics.fy = read_field<double>(ss, n, "fy");
    r.intrinsics.cx = read_field<double>(ss, n, "px");
    r.intrinsics.cy = read_field<double>(ss, n, "py");
    r.intrinsics.width = read_field<int>(ss, n, "w");
    r.intrinsics.height = read_field<int>(ss, n, "h");
    std::string extra;
    if (ss >> extra) throw ParseError("trailing fields in pose line", n);
    try {
      r.pose.rotation = quaternion_to_matrix(qw, qx, qy, qz);
      r.intrinsics.validate();
    } catch (const DomainError& e) {
      throw ParseError(e.what(), n);
    }
    r.name = "view_" + std::to_string(r.id) + ".png";
    out.push_back(std::move(r));
  }
  return out;
}

}  // namespace nsf

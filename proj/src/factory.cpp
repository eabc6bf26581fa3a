#include "nsf/factory.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <exception>
#include <fstream>
#include <json.hpp>
#include <sstream>

#include "nsf/imageio.hpp"
#include "nsf/renderer.hpp"

namespace nsf {

namespace fs = std::filesystem;
using nlohmann::ordered_json;

Triplet render_triplet(const RadianceField& field, const Pose& center, const Intrinsics& intr,
                       const StereoRig& rig, int samples) {
  const StereoPoses lr = virtual_stereo_poses(center, rig);
  const RenderOptions opts{samples};
  RenderOutput c = render_image(field, intr, center, opts);
  Triplet t;
  t.left = render_image(field, intr, lr.left, opts).color;
  t.right = render_image(field, intr, lr.right, opts).color;
  const DisparityMap d = depth_to_disparity(c.depth, rig.baseline, intr.fx, &c.valid);
  t.center = std::move(c.color);
  t.disparity = d.disparity;
  t.valid = d.valid;
  t.depth = std::move(c.depth);
  t.ao = std::move(c.ao);
  for (auto& a : t.ao.data) a = std::clamp(a, 0.0f, 1.0f);
  t.baseline = rig.baseline;
  t.focal = intr.fx;
  return t;
}

Triplet analytic_triplet(const AnalyticScene& scene, const Pose& center, const Intrinsics& intr,
                         const StereoRig& rig) {
  const StereoPoses lr = virtual_stereo_poses(center, rig);
  AnalyticRender c = analytic_render(scene, intr, center, rig.baseline);
  Triplet t;
  t.left = analytic_render(scene, intr, lr.left).render.color;
  t.right = analytic_render(scene, intr, lr.right).render.color;
  t.center = std::move(c.render.color);
  t.disparity = std::move(c.disparity);
  t.depth = std::move(c.render.depth);
  t.ao = std::move(c.render.ao);
  t.valid = std::move(c.render.valid);
  t.baseline = rig.baseline;
  t.focal = intr.fx;
  return t;
}

TripletRenderer field_renderer(std::shared_ptr<const RadianceField> field, int samples) {
  return [field, samples](const Pose& p, const Intrinsics& intr, const StereoRig& rig) {
    return render_triplet(*field, p, intr, rig, samples);
  };
}

TripletRenderer analytic_renderer(std::shared_ptr<const AnalyticScene> scene) {
  return [scene](const Pose& p, const Intrinsics& intr, const StereoRig& rig) {
    return analytic_triplet(*scene, p, intr, rig);
  };
}

// -------------------------------------------------------------- histogram

void DisparityHistogram::add(double disparity) {
  if (!std::isfinite(disparity) || disparity < 0.0) return;
  const auto k = static_cast<std::size_t>(disparity / bin_width);
  if (k >= counts.size()) counts.resize(k + 1, 0);
  ++counts[k];
}

void DisparityHistogram::merge(const DisparityHistogram& other) {
  if (other.counts.size() > counts.size()) counts.resize(other.counts.size(), 0);
  for (std::size_t k = 0; k < other.counts.size(); ++k) counts[k] += other.counts[k];
}

std::uint64_t DisparityHistogram::total() const {
  std::uint64_t s = 0;
  for (auto c : counts) s += c;
  return s;
}

std::pair<int, int> DisparityHistogram::support() const {
  int lo = -1, hi = -1;
  for (std::size_t k = 0; k < counts.size(); ++k) {
    if (!counts[k]) continue;
    if (lo < 0) lo = static_cast<int>(k);
    hi = static_cast<int>(k);
  }
  return lo < 0 ? std::pair{0, -1} : std::pair{lo, hi};
}

// ---------------------------------------------------------------- dataset

namespace {

struct Job {
  std::size_t scene;
  int pose;
  double baseline;
  int width;
};

std::string stem_for(const Job& j, int width) {
  char buf[96];
  std::snprintf(buf, sizeof buf, "p%03d_b%.3f_w%d", j.pose, j.baseline, width);
  return buf;
}

void ensure_writable(const fs::path& dir) {
  std::error_code ec;
  fs::create_directories(dir, ec);
  if (ec || !fs::is_directory(dir)) throw IoError("cannot create output directory " + dir.string());
  const fs::path probe = dir / ".nsf_write_probe";
  {
    std::ofstream f(probe);
    if (!f) throw IoError("output directory is not writable: " + dir.string());
  }
  fs::remove(probe, ec);
}

}  // namespace

DatasetManifest build_dataset(const std::vector<SceneSource>& scenes, const BuildOptions& opts,
                              const fs::path& out_dir) {
  if (scenes.empty()) throw DomainError("build_dataset: no scenes");
  if (opts.baselines.empty()) throw DomainError("build_dataset: no baselines");
  if (!(opts.d_max > 0.0)) throw DomainError("build_dataset: d_max must be positive");
  ensure_writable(out_dir);

  std::vector<Job> jobs;
  for (std::size_t s = 0; s < scenes.size(); ++s) {
    if (!scenes[s].render) throw DomainError("build_dataset: scene '" + scenes[s].id + "' has no renderer");
    const std::vector<int> widths =
        opts.resolutions.empty() ? std::vector<int>{scenes[s].intrinsics.width} : opts.resolutions;
    for (int p = 0; p < static_cast<int>(scenes[s].poses.size()); ++p)
      for (double b : opts.baselines)
        for (int w : widths) jobs.push_back({s, p, b, w});
  }

  std::vector<ManifestRecord> records(jobs.size());
  std::vector<DisparityHistogram> hists(jobs.size());
  std::exception_ptr failure;

#pragma omp parallel for schedule(dynamic, 1)
  for (std::size_t i = 0; i < jobs.size(); ++i) {
    try {
      const Job& j = jobs[i];
      const SceneSource& sc = scenes[j.scene];
      const int h = std::max(1, static_cast<int>(std::lround(static_cast<double>(j.width) *
                                                             sc.intrinsics.height / sc.intrinsics.width)));
      const Intrinsics intr = sc.intrinsics.resized(j.width, h);
      Triplet t = sc.render(sc.poses[static_cast<std::size_t>(j.pose)], intr, StereoRig{j.baseline});

      ManifestRecord& r = records[i];
      for (std::size_t p = 0; p < t.valid.data.size(); ++p) {
        if (!t.valid.data[p]) continue;
        if (t.disparity.data[p] > opts.d_max) {
          t.valid.data[p] = 0;
          t.disparity.data[p] = 0.0f;
          ++r.clipped_pixels;
          continue;
        }
        ++r.valid_pixels;
        hists[i].add(t.disparity.data[p]);
      }

      const fs::path dir = out_dir / sc.id;
      fs::create_directories(dir);
      const std::string stem = stem_for(j, j.width);
      const auto rel = [&](const char* suffix) { return (fs::path(sc.id) / (stem + suffix)).generic_string(); };
      r.scene_id = sc.id;
      r.pose_id = j.pose;
      r.baseline = j.baseline;
      r.focal = intr.fx;
      r.width = intr.width;
      r.height = intr.height;
      r.left = rel("_left.png");
      r.center = rel("_center.png");
      r.right = rel("_right.png");
      r.disparity = rel("_disp.pfm");
      r.ao = rel("_ao.pfm");
      r.valid = rel("_valid.png");
      io::write_png(t.left, out_dir / r.left);
      io::write_png(t.center, out_dir / r.center);
      io::write_png(t.right, out_dir / r.right);
      io::write_pfm(t.disparity, out_dir / r.disparity);
      io::write_pfm(t.ao, out_dir / r.ao);
      io::write_mask_png(t.valid, out_dir / r.valid);
    } catch (...) {
#pragma omp critical(nsf_factory_failure)
      if (!failure) failure = std::current_exception();
    }
  }
  if (failure) std::rethrow_exception(failure);

  DatasetManifest m;
  m.d_max = opts.d_max;
  m.records = std::move(records);
  for (const auto& h : hists) m.histogram.merge(h);
  io::write_file(out_dir / kManifestName, encode_manifest(m));
  return m;
}

std::string encode_manifest(const DatasetManifest& m) {
  std::ostringstream out;
  ordered_json header;
  header["format"] = "nsf-manifest";
  header["version"] = m.version;
  header["count"] = m.records.size();
  header["d_max"] = m.d_max;
  header["histogram"] = {{"bin_width", m.histogram.bin_width}, {"counts", m.histogram.counts}};
  out << header.dump() << '\n';
  for (const auto& r : m.records) {
    ordered_json j;
    j["scene"] = r.scene_id;
    j["pose"] = r.pose_id;
    j["baseline"] = r.baseline;
    j["focal"] = r.focal;
    j["width"] = r.width;
    j["height"] = r.height;
    j["left"] = r.left;
    j["center"] = r.center;
    j["right"] = r.right;
    j["disparity"] = r.disparity;
    j["ao"] = r.ao;
    j["valid"] = r.valid;
    j["valid_pixels"] = r.valid_pixels;
    j["clipped_pixels"] = r.clipped_pixels;
    out << j.dump() << '\n';
  }
  return out.str();
}

DatasetManifest decode_manifest(const std::string& text) {
  std::istringstream in(text);
  std::string line;
  int line_no = 0;
  DatasetManifest m;
  std::size_t count = 0;
  try {
    while (std::getline(in, line)) {
      ++line_no;
      if (line.empty()) continue;
      const auto j = ordered_json::parse(line);
      if (line_no == 1) {
        if (j.at("format") != "nsf-manifest") throw ParseError("not an nsf manifest", line_no);
        m.version = j.at("version").get<int>();
        if (m.version != DatasetManifest::kVersion) {
          throw ParseError("unsupported manifest version " + std::to_string(m.version), line_no);
        }
        count = j.at("count").get<std::size_t>();
        m.d_max = j.at("d_max").get<double>();
        m.histogram.bin_width = j.at("histogram").at("bin_width").get<double>();
        m.histogram.counts = j.at("histogram").at("counts").get<std::vector<std::uint64_t>>();
        continue;
      }
      ManifestRecord r;
      r.scene_id = j.at("scene").get<std::string>();
      r.pose_id = j.at("pose").get<int>();
      r.baseline = j.at("baseline").get<double>();
      r.focal = j.at("focal").get<double>();
      r.width = j.at("width").get<int>();
      r.height = j.at("height").get<int>();
      r.left = j.at("left").get<std::string>();
      r.center = j.at("center").get<std::string>();
      r.right = j.at("right").get<std::string>();
      r.disparity = j.at("disparity").get<std::string>();
      r.ao = j.at("ao").get<std::string>();
      r.valid = j.at("valid").get<std::string>();
      r.valid_pixels = j.at("valid_pixels").get<std::uint64_t>();
      r.clipped_pixels = j.at("clipped_pixels").get<std::uint64_t>();
      m.records.push_back(std::move(r));
    }
  } catch (const nlohmann::json::exception& e) {
    throw ParseError(std::string("manifest: ") + e.what(), line_no);
  }
  if (line_no == 0) throw ParseError("manifest: empty file", 0);
  if (count != m.records.size()) {
    throw ParseError("manifest: header count " + std::to_string(count) + " but " +
                         std::to_string(m.records.size()) + " records",
                     line_no);
  }
  return m;
}

DatasetManifest read_manifest(const fs::path& manifest_path) {
  DatasetManifest m = decode_manifest(io::read_file(manifest_path));
  const fs::path root = manifest_path.parent_path();
  for (const auto& r : m.records) {
    for (const auto* f : {&r.left, &r.center, &r.right, &r.disparity, &r.ao, &r.valid}) {
      if (!fs::exists(root / *f)) throw IoError("manifest references missing file " + (root / *f).string());
    }
  }
  return m;
}

Triplet load_triplet(const ManifestRecord& rec, const fs::path& root) {
  Triplet t;
  t.left = io::read_png(root / rec.left);
  t.center = io::read_png(root / rec.center);
  t.right = io::read_png(root / rec.right);
  t.disparity = io::read_pfm(root / rec.disparity);
  t.ao = io::read_pfm(root / rec.ao);
  t.valid = io::read_mask_png(root / rec.valid);
  t.baseline = rec.baseline;
  t.focal = rec.focal;
  t.pose_id = rec.pose_id;
  t.scene_id = rec.scene_id;
  t.validate();
  return t;
}

}  // namespace nsf

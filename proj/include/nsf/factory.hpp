#pragma once

#include <cstdint>
#include <filesystem>
#include <functional>
#include <memory>
#include <string>
#include <vector>

#include "nsf/field.hpp"
#include "nsf/geometry.hpp"
#include "nsf/scenegen.hpp"
#include "nsf/triplet.hpp"

namespace nsf {

/// Renders left, center and right views from the rectified rig around the
/// center pose. Disparity comes from the center depth; AO and validity too.
Triplet render_triplet(const RadianceField& field, const Pose& center, const Intrinsics& intr,
                       const StereoRig& rig, int samples = 512);

/// Same layout from the ray-cast oracle: exact depth, AO 1 on hits.
Triplet analytic_triplet(const AnalyticScene& scene, const Pose& center, const Intrinsics& intr,
                         const StereoRig& rig);

using TripletRenderer = std::function<Triplet(const Pose&, const Intrinsics&, const StereoRig&)>;

TripletRenderer field_renderer(std::shared_ptr<const RadianceField> field, int samples);
TripletRenderer analytic_renderer(std::shared_ptr<const AnalyticScene> scene);

struct SceneSource {
  std::string id;
  Intrinsics intrinsics;
  std::vector<Pose> poses;
  TripletRenderer render;
};

struct DisparityHistogram {
  double bin_width = 1.0;
  std::vector<std::uint64_t> counts;  // bin k covers [k, k+1) * bin_width

  void add(double disparity);
  void merge(const DisparityHistogram& other);
  std::uint64_t total() const;
  /// Lowest and highest non-empty bin index; {0, -1} when empty.
  std::pair<int, int> support() const;
};

struct ManifestRecord {
  std::string scene_id;
  int pose_id = 0;
  double baseline = 0.0;
  double focal = 0.0;
  int width = 0;
  int height = 0;
  std::string left, center, right, disparity, ao, valid;  // relative to the manifest directory
  std::uint64_t valid_pixels = 0;
  std::uint64_t clipped_pixels = 0;  // rendered disparity above d_max, exported invalid
};

struct DatasetManifest {
  static constexpr int kVersion = 1;
  int version = kVersion;
  double d_max = 64.0;
  DisparityHistogram histogram;
  std::vector<ManifestRecord> records;
};

struct BuildOptions {
  std::vector<double> baselines{0.5, 0.3, 0.1};
  std::vector<int> resolutions;  // output widths; empty keeps each scene's native size
  double d_max = 64.0;
};

/// One triplet per (pose x baseline x resolution), written under out_dir with
/// manifest.jsonl next to them. Throws IoError when out_dir is unwritable.
DatasetManifest build_dataset(const std::vector<SceneSource>& scenes, const BuildOptions& opts,
                              const std::filesystem::path& out_dir);

std::string encode_manifest(const DatasetManifest& m);
DatasetManifest decode_manifest(const std::string& text);
/// Parses manifest.jsonl and checks every referenced file exists.
DatasetManifest read_manifest(const std::filesystem::path& manifest_path);

Triplet load_triplet(const ManifestRecord& rec, const std::filesystem::path& root);

inline constexpr const char* kManifestName = "manifest.jsonl";

}  // namespace nsf

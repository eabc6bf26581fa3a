#pragma once

#include <cstdint>
#include <filesystem>
#include <optional>
#include <random>
#include <string>
#include <vector>

#include "nsf/diff.hpp"
#include "nsf/field.hpp"
#include "nsf/geometry.hpp"
#include "nsf/image.hpp"
#include "nsf/scenegen.hpp"

namespace nsf {

struct SceneDataset {
  std::vector<Image> images;  // H x W x 3 in [0,1]
  std::vector<Pose> poses;
  Intrinsics intrinsics;
  Aabb bounds;

  void validate() const;
  static SceneDataset from_fixture(const Fixture& f);
};

struct TrainConfig {
  int steps = 2000;
  int rays_per_batch = 4096;
  int samples = 128;
  std::uint64_t seed = 0;
  bool deterministic = true;
  bool jitter = true;  // stratified sample offsets
  Backend backend = Backend::hash;
  double lr_grid = 1e-2;
  double lr_mlp = 1e-3;
  int holdout_every = 100;  // steps between held-out renders (0 disables)
  int holdout_samples = 128;

  void validate() const;
};

/// A batch of rays flattened for the tape: per-sample positions, direction
/// features, depths and bin widths, with per-ray offsets into them.
template <class T>
struct RayBatch {
  std::vector<T> positions;     // samples x 3
  std::vector<T> dir_features;  // samples x dir_width
  std::vector<T> t;
  std::vector<T> delta;
  std::vector<int> offsets{0};  // rays + 1
  std::vector<T> targets;       // rays x 3

  int rays() const { return static_cast<int>(offsets.size()) - 1; }
};

struct PixelRef {
  int image = 0;
  int x = 0;
  int y = 0;
};

/// Rays through the given pixel centers, clipped to the scene bounds; rays that
/// miss the bounds get no samples and composite to black.
template <class T>
RayBatch<T> make_ray_batch(const SceneDataset& scene, std::span<const PixelRef> pixels, int samples,
                           int dir_bands, std::mt19937_64* jitter);

/// Mean over rays of the squared L2 color error (rays x 3 prediction).
template <class T>
diff::Var rend_loss(diff::Tape<T>& tape, const FieldModel<T>& model, const diff::ParamSet<T>& params,
                    const RayBatch<T>& batch);

/// Direct evaluation on colors: mean_r ||pred_r - target_r||^2.
double rend_loss(std::span<const double> predicted, std::span<const double> target);

struct TraceEntry {
  int step = 0;
  double loss = 0.0;
  double psnr_train = 0.0;
  std::optional<double> psnr_holdout;
};

struct HoldoutView {
  Pose pose;
  Image image;
};

struct FitResult {
  FieldModel<float> model;
  std::vector<TraceEntry> trace;
};

/// Adam over all parameters with group learning rates. Throws DivergenceError
/// on a non-finite loss. Writes the checkpoint when a path is given.
FitResult fit(const SceneDataset& scene, const TrainConfig& cfg, const std::optional<HoldoutView>& holdout = {},
              const std::optional<std::filesystem::path>& checkpoint = {});

std::string trace_csv(const std::vector<TraceEntry>& trace);

/// Returns +infinity for identical images.
double psnr(const Image& img, const Image& ref);

}  // namespace nsf

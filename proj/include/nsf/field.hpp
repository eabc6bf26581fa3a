#pragma once

#include <cstdint>
#include <filesystem>
#include <memory>
#include <span>
#include <string>
#include <vector>

#include "nsf/diff.hpp"
#include "nsf/geometry.hpp"
#include "nsf/kernels.hpp"

namespace nsf {

struct FieldSample {
  double sigma = 0.0;
  Vec3 color = Vec3::Zero();
};

/// Read-only scene function (x, view direction) -> (sigma, rgb).
/// Implementations must be safe for concurrent queries.
class RadianceField {
 public:
  virtual ~RadianceField() = default;
  virtual Aabb bounds() const = 0;
  /// points.size() == dirs.size() == sigma.size() == color.size().
  virtual void query_batch(std::span<const Vec3> points, std::span<const Vec3> dirs,
                           std::span<double> sigma, std::span<Vec3> color) const = 0;

  FieldSample query(const Vec3& x, const Vec3& dir) const;
};

enum class Backend : std::uint32_t { dense = 0, hash = 1 };
enum class DensityActivation : std::uint32_t { exp = 0, softplus = 1 };

const char* to_string(Backend b);
Backend backend_from_string(const std::string& s);

struct FieldConfig {
  Backend backend = Backend::hash;
  DensityActivation density_activation = DensityActivation::exp;
  kernels::HashEncodingConfig hash;
  int dense_density_resolution = 48;
  int dense_feature_resolution = 48;
  int dense_features = 4;
  int hidden = 64;
  int dir_bands = 4;
  double density_bias_init = -1.0;
  Aabb bounds;

  /// Defaults for the backend: exp density for hash, softplus for dense.
  static FieldConfig defaults(Backend backend, const Aabb& bounds);

  int feature_width() const {
    return backend == Backend::hash ? hash.output_width() : dense_features;
  }
  int dir_width() const { return 6 * dir_bands; }
  void validate() const;
};

/// Interleaved sin/cos direction bands: for each axis a and band k,
/// sin(2^k pi d_a), cos(2^k pi d_a).
template <class T>
std::vector<T> encode_directions(std::span<const Vec3> dirs, int bands);

/// Grid + shallow MLP. Parameters live in a ParamSet so the same forward graph
/// serves training (float) and gradient verification (double).
template <class T>
class FieldModel {
 public:
  FieldModel() = default;
  FieldModel(FieldConfig cfg, std::uint64_t seed);
  FieldModel(FieldConfig cfg, diff::ParamSet<T> params);

  const FieldConfig& config() const { return cfg_; }
  diff::ParamSet<T>& params() { return params_; }
  const diff::ParamSet<T>& params() const { return params_; }

  struct Outputs {
    diff::Var sigma;  // n x 1
    diff::Var color;  // n x 3
  };

  /// positions: n x 3 world points; dir_features: n x dir_width.
  Outputs forward(diff::Tape<T>& tape, const diff::ParamSet<T>& params, std::span<const T> positions,
                  std::span<const T> dir_features) const;

  /// World points mapped into the unit cube of the configured bounds.
  std::vector<T> normalize(std::span<const T> positions) const;

  template <class U>
  FieldModel<U> cast() const {
    return FieldModel<U>(cfg_, params_.template cast<U>());
  }

 private:
  FieldConfig cfg_;
  diff::ParamSet<T> params_;
};

/// RadianceField adapter over a trained model.
template <class T>
class NeuralField final : public RadianceField {
 public:
  explicit NeuralField(FieldModel<T> model) : model_(std::move(model)) {}
  Aabb bounds() const override { return model_.config().bounds; }
  void query_batch(std::span<const Vec3> points, std::span<const Vec3> dirs, std::span<double> sigma,
                   std::span<Vec3> color) const override;
  const FieldModel<T>& model() const { return model_; }

 private:
  FieldModel<T> model_;
};

// ---------------------------------------------------------------- checkpoint

/// Versioned little-endian binary container; layout in docs/checkpoint_format.md.
std::string encode_checkpoint(const FieldModel<float>& model);
FieldModel<float> decode_checkpoint(const std::string& bytes);
void save_checkpoint(const FieldModel<float>& model, const std::filesystem::path& path);
FieldModel<float> load_checkpoint(const std::filesystem::path& path);

}  // namespace nsf

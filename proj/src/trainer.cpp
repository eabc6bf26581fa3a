#include "nsf/trainer.hpp"

#include <cmath>
#include <cstdio>
#include <limits>
#include <sstream>

#include "nsf/optim.hpp"
#include "nsf/renderer.hpp"

namespace nsf {

void SceneDataset::validate() const {
  if (images.size() < 2) throw DomainError("scene dataset: need at least two images");
  if (images.size() != poses.size()) throw DomainError("scene dataset: image and pose counts differ");
  intrinsics.validate();
  for (const auto& im : images) {
    if (im.width != intrinsics.width || im.height != intrinsics.height || im.channels != 3) {
      throw ShapeError("scene dataset: every image must be W x H x 3 matching the intrinsics");
    }
  }
  for (const auto& p : poses) p.validate();
  if (!(bounds.hi.array() > bounds.lo.array()).all()) throw DomainError("scene dataset: empty bounds");
}

SceneDataset SceneDataset::from_fixture(const Fixture& f) {
  return SceneDataset{f.images, f.views, f.intrinsics, f.scene.bounds()};
}

void TrainConfig::validate() const {
  if (steps < 1) throw DomainError("train config: steps must be >= 1");
  if (rays_per_batch < 1) throw DomainError("train config: rays per batch must be >= 1");
  if (samples < 2 || holdout_samples < 2) throw DomainError("train config: need at least two samples per ray");
  if (!(lr_grid > 0.0) || !(lr_mlp > 0.0)) throw DomainError("train config: learning rates must be positive");
}

template <class T>
RayBatch<T> make_ray_batch(const SceneDataset& scene, std::span<const PixelRef> pixels, int samples, int dir_bands,
                           std::mt19937_64* jitter) {
  RayBatch<T> b;
  const std::size_t cap = pixels.size() * static_cast<std::size_t>(samples);
  b.positions.reserve(3 * cap);
  b.t.reserve(cap);
  b.delta.reserve(cap);
  b.dir_features.reserve(cap * 6 * static_cast<std::size_t>(dir_bands));
  for (const auto& px : pixels) {
    const Image& im = scene.images.at(static_cast<std::size_t>(px.image));
    for (int c = 0; c < 3; ++c) b.targets.push_back(static_cast<T>(im.at(px.x, px.y, c)));
    Ray ray = make_ray(scene.intrinsics, scene.poses[static_cast<std::size_t>(px.image)], px.x + 0.5, px.y + 0.5);
    if (scene.bounds.clip(ray) && ray.t_far > ray.t_near) {
      const auto s = sample_bins(ray, samples, jitter);
      const std::vector<T> enc = encode_directions<T>(std::span<const Vec3>(&ray.direction, 1), dir_bands);
      for (int i = 0; i < samples; ++i) {
        const Vec3 p = ray.at(s.t[static_cast<std::size_t>(i)]);
        for (int a = 0; a < 3; ++a) b.positions.push_back(static_cast<T>(p[a]));
        b.t.push_back(static_cast<T>(s.t[static_cast<std::size_t>(i)]));
        b.delta.push_back(static_cast<T>(s.delta[static_cast<std::size_t>(i)]));
        b.dir_features.insert(b.dir_features.end(), enc.begin(), enc.end());
      }
    }
    b.offsets.push_back(static_cast<int>(b.t.size()));
  }
  return b;
}

template <class T>
diff::Var rend_loss(diff::Tape<T>& tape, const FieldModel<T>& model, const diff::ParamSet<T>& params,
                    const RayBatch<T>& batch) {
  using namespace diff;
  const int R = batch.rays();
  if (R < 1) throw DomainError("rend_loss: empty batch");
  Var rgb;
  if (batch.t.empty()) {
    rgb = tape.constant(std::vector<T>(static_cast<std::size_t>(R) * 3, T(0)), R, 3);
  } else {
    const auto out = model.forward(tape, params, batch.positions, batch.dir_features);
    const Var comp = composite(tape, out.sigma, out.color, std::span<const T>(batch.t),
                               std::span<const T>(batch.delta), std::span<const int>(batch.offsets));
    rgb = slice_cols(tape, comp, 0, 3);
  }
  const Var err = square(tape, sub(tape, rgb, tape.constant(batch.targets, R, 3)));
  return scale(tape, sum(tape, err), T(1) / static_cast<T>(R));
}

double rend_loss(std::span<const double> predicted, std::span<const double> target) {
  if (predicted.size() != target.size() || predicted.size() % 3 != 0 || predicted.empty()) {
    throw ShapeError("rend_loss: expected matching rays x 3 color arrays");
  }
  double s = 0.0;
  for (std::size_t i = 0; i < predicted.size(); ++i) s += (predicted[i] - target[i]) * (predicted[i] - target[i]);
  return s / static_cast<double>(predicted.size() / 3);
}

double psnr(const Image& img, const Image& ref) {
  if (!img.same_shape(ref)) throw ShapeError("psnr: images differ in shape");
  if (img.data.empty()) throw ShapeError("psnr: empty images");
  double s = 0.0;
  for (std::size_t i = 0; i < img.data.size(); ++i) {
    const double d = static_cast<double>(img.data[i]) - ref.data[i];
    s += d * d;
  }
  const double mse = s / static_cast<double>(img.data.size());
  if (mse == 0.0) return std::numeric_limits<double>::infinity();
  return -10.0 * std::log10(mse);
}

FitResult fit(const SceneDataset& scene, const TrainConfig& cfg, const std::optional<HoldoutView>& holdout,
              const std::optional<std::filesystem::path>& checkpoint) {
  scene.validate();
  cfg.validate();
  const FieldConfig fcfg = FieldConfig::defaults(cfg.backend, scene.bounds);
  FieldModel<float> model(fcfg, cfg.seed);
  diff::AdamConfig adam;
  adam.lr = cfg.lr_mlp;
  adam.group_lr["grid"] = cfg.lr_grid;
  adam.group_lr["mlp"] = cfg.lr_mlp;
  auto state = diff::OptState<float>::init(model.params(), adam);

  std::mt19937_64 rng(cfg.seed ^ 0x5eed5eedull);
  const std::uint64_t per_image = static_cast<std::uint64_t>(scene.intrinsics.width) * scene.intrinsics.height;
  std::uniform_int_distribution<std::uint64_t> pick(0, per_image * scene.images.size() - 1);
  std::vector<PixelRef> pixels(static_cast<std::size_t>(cfg.rays_per_batch));

  FitResult result;
  for (int step = 1; step <= cfg.steps; ++step) {
    for (auto& px : pixels) {
      const std::uint64_t k = pick(rng);
      px.image = static_cast<int>(k / per_image);
      const auto in_image = static_cast<int>(k % per_image);
      px.x = in_image % scene.intrinsics.width;
      px.y = in_image / scene.intrinsics.width;
    }
    const auto batch = make_ray_batch<float>(scene, pixels, cfg.samples, fcfg.dir_bands, cfg.jitter ? &rng : nullptr);

    diff::Tape<float> tape(true);
    const diff::Var loss = rend_loss(tape, model, model.params(), batch);
    const double value = tape.scalar(loss);
    if (!std::isfinite(value)) {
      throw DivergenceError("fit: non-finite rendering loss at step " + std::to_string(step));
    }
    auto grads = model.params().zeros_like();
    tape.backward(loss, grads);
    diff::adam_step(model.params(), grads, state);

    TraceEntry e{step, value, value > 0.0 ? -10.0 * std::log10(value / 3.0) : std::numeric_limits<double>::infinity(),
                 std::nullopt};
    if (holdout && cfg.holdout_every > 0 && (step % cfg.holdout_every == 0 || step == cfg.steps)) {
      const NeuralField<float> field(model);
      const auto img = render_image(field, scene.intrinsics, holdout->pose, RenderOptions{cfg.holdout_samples});
      e.psnr_holdout = psnr(img.color, holdout->image);
    }
    result.trace.push_back(e);
  }
  result.model = std::move(model);
  if (checkpoint) save_checkpoint(result.model, *checkpoint);
  return result;
}

std::string trace_csv(const std::vector<TraceEntry>& trace) {
  std::ostringstream out;
  out << "step,loss,psnr_train,psnr_holdout\n";
  char buf[128];
  for (const auto& e : trace) {
    std::snprintf(buf, sizeof buf, "%d,%.9g,%.6f,", e.step, e.loss, e.psnr_train);
    out << buf;
    if (e.psnr_holdout) {
      std::snprintf(buf, sizeof buf, "%.6f", *e.psnr_holdout);
      out << buf;
    }
    out << '\n';
  }
  return out.str();
}

template RayBatch<float> make_ray_batch<float>(const SceneDataset&, std::span<const PixelRef>, int, int,
                                               std::mt19937_64*);
template RayBatch<double> make_ray_batch<double>(const SceneDataset&, std::span<const PixelRef>, int, int,
                                                 std::mt19937_64*);
template diff::Var rend_loss<float>(diff::Tape<float>&, const FieldModel<float>&, const diff::ParamSet<float>&,
                                    const RayBatch<float>&);
template diff::Var rend_loss<double>(diff::Tape<double>&, const FieldModel<double>&, const diff::ParamSet<double>&,
                                     const RayBatch<double>&);

}  // namespace nsf

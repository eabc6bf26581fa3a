#include "nsf/field.hpp"

#include <bit>
#include <cmath>
#include <cstring>
#include <numbers>
#include <random>

#include "nsf/imageio.hpp"

namespace nsf {

FieldSample RadianceField::query(const Vec3& x, const Vec3& dir) const {
  double sigma = 0.0;
  Vec3 color;
  query_batch(std::span<const Vec3>(&x, 1), std::span<const Vec3>(&dir, 1), std::span<double>(&sigma, 1),
              std::span<Vec3>(&color, 1));
  return {sigma, color};
}

const char* to_string(Backend b) { return b == Backend::hash ? "hash" : "dense"; }

Backend backend_from_string(const std::string& s) {
  if (s == "hash") return Backend::hash;
  if (s == "dense") return Backend::dense;
  throw DomainError("unknown backend '" + s + "' (expected hash or dense)");
}

FieldConfig FieldConfig::defaults(Backend backend, const Aabb& bounds) {
  FieldConfig c;
  c.backend = backend;
  c.density_activation = backend == Backend::hash ? DensityActivation::exp : DensityActivation::softplus;
  c.bounds = bounds;
  return c;
}

void FieldConfig::validate() const {
  if (backend == Backend::hash) hash.validate();
  if (backend == Backend::dense && (dense_density_resolution < 2 || dense_feature_resolution < 2)) {
    throw DomainError("dense grid resolution must be >= 2");
  }
  if (hidden < 1 || dir_bands < 0 || dense_features < 1) throw DomainError("invalid MLP configuration");
  if (!((bounds.hi - bounds.lo).array() > 0).all()) throw DomainError("field bounds must be non-empty");
}

template <class T>
std::vector<T> encode_directions(std::span<const Vec3> dirs, int bands) {
  std::vector<T> out(dirs.size() * 6 * bands);
  for (std::size_t i = 0; i < dirs.size(); ++i) {
    T* o = out.data() + i * 6 * bands;
    for (int a = 0; a < 3; ++a) {
      for (int k = 0; k < bands; ++k) {
        const double arg = std::ldexp(std::numbers::pi, k) * dirs[i][a];
        o[(a * bands + k) * 2] = static_cast<T>(std::sin(arg));
        o[(a * bands + k) * 2 + 1] = static_cast<T>(std::cos(arg));
      }
    }
  }
  return out;
}

namespace {

template <class T>
void xavier(diff::Param<T>& p, std::mt19937_64& rng) {
  const double fan_in = static_cast<double>(p.shape[0]);
  const double fan_out = static_cast<double>(p.shape[1]);
  const double lim = std::sqrt(6.0 / (fan_in + fan_out));
  std::uniform_real_distribution<double> u(-lim, lim);
  for (auto& v : p.value) v = static_cast<T>(u(rng));
}

}  // namespace

template <class T>
FieldModel<T>::FieldModel(FieldConfig cfg, std::uint64_t seed) : cfg_(std::move(cfg)) {
  cfg_.validate();
  std::mt19937_64 rng(seed);
  const std::size_t H = cfg_.hidden;
  if (cfg_.backend == Backend::hash) {
    auto& table = params_.add("hash_table", "grid",
                              {static_cast<std::size_t>(cfg_.hash.levels) * cfg_.hash.table_size(),
                               static_cast<std::size_t>(cfg_.hash.features)});
    std::uniform_real_distribution<double> u(-1e-4, 1e-4);
    for (auto& v : table.value) v = static_cast<T>(u(rng));
  } else {
    const std::size_t rd = cfg_.dense_density_resolution, rf = cfg_.dense_feature_resolution;
    params_.add("density_grid", "grid", {rd * rd * rd, 1}, static_cast<T>(cfg_.density_bias_init));
    auto& feat = params_.add("feature_grid", "grid", {rf * rf * rf, static_cast<std::size_t>(cfg_.dense_features)});
    std::uniform_real_distribution<double> u(-1e-4, 1e-4);
    for (auto& v : feat.value) v = static_cast<T>(u(rng));
  }
  xavier(params_.add("w1", "mlp", {static_cast<std::size_t>(cfg_.feature_width()), H}), rng);
  params_.add("b1", "mlp", {1, H});
  if (cfg_.backend == Backend::hash) {
    xavier(params_.add("w_density", "mlp", {H, 1}), rng);
    params_.add("b_density", "mlp", {1, 1}, static_cast<T>(cfg_.density_bias_init));
  }
  xavier(params_.add("w2", "mlp", {H + static_cast<std::size_t>(cfg_.dir_width()), H}), rng);
  params_.add("b2", "mlp", {1, H});
  xavier(params_.add("w_color", "mlp", {H, 3}), rng);
  params_.add("b_color", "mlp", {1, 3});
}

template <class T>
FieldModel<T>::FieldModel(FieldConfig cfg, diff::ParamSet<T> params) : cfg_(std::move(cfg)), params_(std::move(params)) {
  cfg_.validate();
  FieldModel<T> reference(cfg_, 0);
  if (!reference.params_.same_layout(params_)) throw ShapeError("field parameters do not match the configuration");
}

template <class T>
std::vector<T> FieldModel<T>::normalize(std::span<const T> positions) const {
  std::vector<T> out(positions.size());
  const Vec3 lo = cfg_.bounds.lo, ext = cfg_.bounds.extent();
  for (std::size_t i = 0; i < positions.size(); ++i) {
    const int a = static_cast<int>(i % 3);
    out[i] = static_cast<T>((static_cast<double>(positions[i]) - lo[a]) / ext[a]);
  }
  return out;
}

template <class T>
typename FieldModel<T>::Outputs FieldModel<T>::forward(diff::Tape<T>& tape, const diff::ParamSet<T>& params,
                                                       std::span<const T> positions,
                                                       std::span<const T> dir_features) const {
  using namespace diff;
  const int n = static_cast<int>(positions.size() / 3);
  const int H = cfg_.hidden, Fw = cfg_.feature_width(), Dw = cfg_.dir_width();
  if (dir_features.size() != static_cast<std::size_t>(n) * Dw) throw ShapeError("field forward: direction features size mismatch");
  const std::vector<T> unit = normalize(positions);

  Var features, raw_density;
  if (cfg_.backend == Backend::hash) {
    const Var table = tape.parameter(params, "hash_table", static_cast<int>(cfg_.hash.levels * cfg_.hash.table_size()),
                                     cfg_.hash.features);
    features = hash_encode(tape, std::span<const T>(unit), table, cfg_.hash);
  } else {
    const int rd = cfg_.dense_density_resolution, rf = cfg_.dense_feature_resolution;
    const Var dgrid = tape.parameter(params, "density_grid", rd * rd * rd, 1);
    const Var fgrid = tape.parameter(params, "feature_grid", rf * rf * rf, cfg_.dense_features);
    raw_density = grid_interp(tape, std::span<const T>(unit), dgrid, kernels::DenseGridShape{rd, 1});
    features = grid_interp(tape, std::span<const T>(unit), fgrid, kernels::DenseGridShape{rf, cfg_.dense_features});
  }
  const Var w1 = tape.parameter(params, "w1", Fw, H);
  const Var b1 = tape.parameter(params, "b1", 1, H);
  const Var h1 = relu(tape, add_row(tape, matmul(tape, features, w1), b1));
  if (cfg_.backend == Backend::hash) {
    const Var wd = tape.parameter(params, "w_density", H, 1);
    const Var bd = tape.parameter(params, "b_density", 1, 1);
    raw_density = add_row(tape, matmul(tape, h1, wd), bd);
  }
  const Var sigma = cfg_.density_activation == DensityActivation::exp ? exp(tape, raw_density)
                                                                      : softplus(tape, raw_density);
  Var color_in = h1;
  if (Dw > 0) {
    const Var dir = tape.constant(std::vector<T>(dir_features.begin(), dir_features.end()), n, Dw);
    color_in = concat_cols(tape, h1, dir);
  }
  const Var w2 = tape.parameter(params, "w2", H + Dw, H);
  const Var b2 = tape.parameter(params, "b2", 1, H);
  const Var h2 = relu(tape, add_row(tape, matmul(tape, color_in, w2), b2));
  const Var wc = tape.parameter(params, "w_color", H, 3);
  const Var bc = tape.parameter(params, "b_color", 1, 3);
  const Var color = sigmoid(tape, add_row(tape, matmul(tape, h2, wc), bc));
  return {sigma, color};
}

template <class T>
void NeuralField<T>::query_batch(std::span<const Vec3> points, std::span<const Vec3> dirs, std::span<double> sigma,
                                 std::span<Vec3> color) const {
  const std::size_t n = points.size();
  if (dirs.size() != n || sigma.size() != n || color.size() != n) throw ShapeError("query_batch: size mismatch");
  if (n == 0) return;
  std::vector<T> pos(3 * n);
  for (std::size_t i = 0; i < n; ++i)
    for (int a = 0; a < 3; ++a) pos[3 * i + a] = static_cast<T>(points[i][a]);
  const auto dir_feat = encode_directions<T>(dirs, model_.config().dir_bands);
  diff::Tape<T> tape(false);
  const auto out = model_.forward(tape, model_.params(), pos, dir_feat);
  auto s = tape.value(out.sigma);
  auto c = tape.value(out.color);
  for (std::size_t i = 0; i < n; ++i) {
    sigma[i] = static_cast<double>(s[i]);
    color[i] = Vec3(c[3 * i], c[3 * i + 1], c[3 * i + 2]);
  }
}

template class FieldModel<float>;
template class FieldModel<double>;
template class NeuralField<float>;
template class NeuralField<double>;
template std::vector<float> encode_directions<float>(std::span<const Vec3>, int);
template std::vector<double> encode_directions<double>(std::span<const Vec3>, int);

// ---------------------------------------------------------------- checkpoint

namespace {

constexpr char kMagic[8] = {'N', 'S', 'F', 'C', 'K', 'P', 'T', '\0'};
constexpr std::uint32_t kVersion = 1;

class Writer {
 public:
  template <class U>
  void put(U v) {
    static_assert(std::is_trivially_copyable_v<U>);
    unsigned char b[sizeof(U)];
    std::memcpy(b, &v, sizeof(U));
    if constexpr (std::endian::native == std::endian::big) std::reverse(b, b + sizeof(U));
    out_.append(reinterpret_cast<const char*>(b), sizeof(U));
  }
  void str(const std::string& s) {
    put<std::uint32_t>(static_cast<std::uint32_t>(s.size()));
    out_ += s;
  }
  void raw(const char* p, std::size_t n) { out_.append(p, n); }
  std::string take() { return std::move(out_); }

 private:
  std::string out_;
};

class Reader {
 public:
  explicit Reader(const std::string& s) : s_(s) {}
  template <class U>
  U get() {
    need(sizeof(U));
    unsigned char b[sizeof(U)];
    std::memcpy(b, s_.data() + pos_, sizeof(U));
    if constexpr (std::endian::native == std::endian::big) std::reverse(b, b + sizeof(U));
    pos_ += sizeof(U);
    U v;
    std::memcpy(&v, b, sizeof(U));
    return v;
  }
  std::string str() {
    const auto n = get<std::uint32_t>();
    need(n);
    std::string r = s_.substr(pos_, n);
    pos_ += n;
    return r;
  }
  void need(std::size_t n) const {
    if (s_.size() - pos_ < n) throw ParseError("checkpoint: truncated file");
  }
  bool done() const { return pos_ == s_.size(); }

 private:
  const std::string& s_;
  std::size_t pos_ = 0;
};

}  // namespace

std::string encode_checkpoint(const FieldModel<float>& model) {
  const auto& c = model.config();
  Writer w;
  w.raw(kMagic, sizeof(kMagic));
  w.put<std::uint32_t>(kVersion);
  w.put<std::uint32_t>(static_cast<std::uint32_t>(c.backend));
  w.put<std::uint32_t>(static_cast<std::uint32_t>(c.density_activation));
  w.put<std::int32_t>(c.hash.levels);
  w.put<std::int32_t>(c.hash.features);
  w.put<std::int32_t>(c.hash.log2_table_size);
  w.put<std::int32_t>(c.hash.base_resolution);
  w.put<double>(c.hash.growth);
  for (auto p : c.hash.primes) w.put<std::uint64_t>(p);
  w.put<std::int32_t>(c.dense_density_resolution);
  w.put<std::int32_t>(c.dense_feature_resolution);
  w.put<std::int32_t>(c.dense_features);
  w.put<std::int32_t>(c.hidden);
  w.put<std::int32_t>(c.dir_bands);
  w.put<double>(c.density_bias_init);
  for (int a = 0; a < 3; ++a) w.put<double>(c.bounds.lo[a]);
  for (int a = 0; a < 3; ++a) w.put<double>(c.bounds.hi[a]);
  const auto& ps = model.params();
  w.put<std::uint32_t>(static_cast<std::uint32_t>(ps.count()));
  for (const auto& p : ps) {
    w.str(p.name);
    w.str(p.group);
    w.put<std::uint32_t>(static_cast<std::uint32_t>(p.shape.size()));
    for (auto d : p.shape) w.put<std::uint64_t>(d);
    for (float v : p.value) w.put<float>(v);
  }
  return w.take();
}

FieldModel<float> decode_checkpoint(const std::string& bytes) {
  Reader r(bytes);
  r.need(sizeof(kMagic));
  if (std::memcmp(bytes.data(), kMagic, sizeof(kMagic)) != 0) throw ParseError("checkpoint: bad magic");
  for (std::size_t i = 0; i < sizeof(kMagic); ++i) r.get<char>();
  const auto version = r.get<std::uint32_t>();
  if (version != kVersion) throw ParseError("checkpoint: unsupported version " + std::to_string(version));
  FieldConfig c;
  const auto backend = r.get<std::uint32_t>();
  const auto act = r.get<std::uint32_t>();
  if (backend > 1 || act > 1) throw ParseError("checkpoint: bad backend or activation tag");
  c.backend = static_cast<Backend>(backend);
  c.density_activation = static_cast<DensityActivation>(act);
  c.hash.levels = r.get<std::int32_t>();
  c.hash.features = r.get<std::int32_t>();
  c.hash.log2_table_size = r.get<std::int32_t>();
  c.hash.base_resolution = r.get<std::int32_t>();
  c.hash.growth = r.get<double>();
  for (auto& p : c.hash.primes) p = r.get<std::uint64_t>();
  c.dense_density_resolution = r.get<std::int32_t>();
  c.dense_feature_resolution = r.get<std::int32_t>();
  c.dense_features = r.get<std::int32_t>();
  c.hidden = r.get<std::int32_t>();
  c.dir_bands = r.get<std::int32_t>();
  c.density_bias_init = r.get<double>();
  for (int a = 0; a < 3; ++a) c.bounds.lo[a] = r.get<double>();
  for (int a = 0; a < 3; ++a) c.bounds.hi[a] = r.get<double>();
  try {
    c.validate();
  } catch (const DomainError& e) {
    throw ParseError(std::string("checkpoint: ") + e.what());
  }
  diff::ParamSet<float> ps;
  const auto count = r.get<std::uint32_t>();
  for (std::uint32_t k = 0; k < count; ++k) {
    std::string name = r.str();
    std::string group = r.str();
    const auto ndim = r.get<std::uint32_t>();
    if (ndim > 8) throw ParseError("checkpoint: implausible rank");
    std::vector<std::size_t> shape(ndim);
    for (auto& d : shape) d = static_cast<std::size_t>(r.get<std::uint64_t>());
    auto& p = ps.add(std::move(name), std::move(group), std::move(shape));
    r.need(p.value.size() * 4);
    for (auto& v : p.value) v = r.get<float>();
  }
  if (!r.done()) throw ParseError("checkpoint: trailing bytes");
  return FieldModel<float>(c, std::move(ps));
}

void save_checkpoint(const FieldModel<float>& model, const std::filesystem::path& path) {
  io::write_file(path, encode_checkpoint(model));
}

FieldModel<float> load_checkpoint(const std::filesystem::path& path) {
  return decode_checkpoint(io::read_file(path));
}

}  // namespace nsf

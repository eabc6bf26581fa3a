#include "nsf/cli.hpp"

#include <omp.h>
#include <spdlog/sinks/stdout_color_sinks.h>
#include <spdlog/spdlog.h>

#include <CLI11.hpp>
#include <algorithm>
#include <charconv>
#include <cmath>
#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <functional>
#include <json.hpp>
#include <limits>
#include <sstream>

#include "nsf/evalkit.hpp"
#include "nsf/factory.hpp"
#include "nsf/imageio.hpp"
#include "nsf/nsloss.hpp"
#include "nsf/renderer.hpp"
#include "nsf/scenegen.hpp"
#include "nsf/stereo.hpp"
#include "nsf/trainer.hpp"

namespace nsf::cli {

namespace fs = std::filesystem;
using nlohmann::ordered_json;

namespace {

struct UsageError : std::runtime_error {
  using std::runtime_error::runtime_error;
};

std::shared_ptr<spdlog::logger> logger() {
  if (auto l = spdlog::get("nsf")) return l;
  auto l = spdlog::stderr_color_mt("nsf");
  l->set_pattern("[%Y-%m-%d %H:%M:%S.%e] [%^%l%$] %v");
  return l;
}

// ----------------------------------------------------------------- config

std::string json_scalar_to_arg(const ordered_json& v) {
  if (v.is_string()) return v.get<std::string>();
  if (v.is_boolean()) return v.get<bool>() ? "true" : "false";
  if (v.is_number()) return v.dump();
  throw UsageError("config values must be strings, numbers, booleans or arrays of those");
}

CLI::Option* find_option(CLI::App& app, CLI::App* sub, const std::string& name) {
  if (sub) {
    if (auto* o = sub->get_option_no_throw(name)) return o;
  }
  return app.get_option_no_throw(name);
}

void apply_config_file(CLI::App& app, CLI::App* sub, const fs::path& path) {
  ordered_json j;
  try {
    j = ordered_json::parse(io::read_file(path));
  } catch (const nlohmann::json::exception& e) {
    throw ParseError("config " + path.string() + ": " + e.what());
  }
  if (!j.is_object()) throw ParseError("config " + path.string() + ": top level must be an object");
  for (const auto& [key, value] : j.items()) {
    if (key == "subcommand") {
      if (sub && value.is_string() && value.get<std::string>() != sub->get_name()) {
        throw UsageError("config was written for subcommand '" + value.get<std::string>() + "'");
      }
      continue;
    }
    std::string flag = "--" + key;
    std::replace(flag.begin(), flag.end(), '_', '-');
    if (flag == "--config") throw UsageError("config files cannot name another config file");
    CLI::Option* opt = find_option(app, sub, flag);
    if (!opt) throw UsageError("unknown config key '" + key + "'");
    if (opt->count() > 0) continue;  // command-line flags take precedence
    if (value.is_array()) {
      for (const auto& e : value) opt->add_result(json_scalar_to_arg(e));
    } else {
      opt->add_result(json_scalar_to_arg(value));
    }
    opt->run_callback();
  }
}

ordered_json typed(const std::string& s) {
  if (s == "true") return true;
  if (s == "false") return false;
  double d = 0.0;
  const auto* end = s.data() + s.size();
  auto [p, ec] = std::from_chars(s.data(), end, d);
  if (ec == std::errc() && p == end && !s.empty()) {
    long long i = 0;
    auto [pi, eci] = std::from_chars(s.data(), end, i);
    if (eci == std::errc() && pi == end) return i;
    return d;
  }
  return s;
}

void collect_options(const CLI::App& app, ordered_json& out) {
  for (const CLI::Option* o : app.get_options()) {
    if (o->get_lnames().empty()) continue;
    const std::string name = o->get_lnames().front();
    if (name == "help" || name == "config") continue;
    std::vector<std::string> values;
    if (o->count() > 0) {
      values = o->results();
    } else {
      std::string d = o->get_default_str();
      if (!d.empty() && d.front() == '[' && d.back() == ']') d = d.substr(1, d.size() - 2);
      if (o->get_items_expected_max() > 1) {
        std::stringstream ss(d);
        std::string item;
        while (std::getline(ss, item, ',')) values.push_back(item);
      } else {
        values.push_back(d);
      }
    }
    std::string key = name;
    std::replace(key.begin(), key.end(), '-', '_');
    if (o->get_items_expected_max() > 1) {
      ordered_json arr = ordered_json::array();
      for (const auto& v : values) arr.push_back(typed(v));
      out[key] = arr;
    } else {
      out[key] = values.empty() ? ordered_json(nullptr) : typed(values.back());
    }
  }
}

void write_resolved_config(const CLI::App& app, const CLI::App& sub, const fs::path& out_dir) {
  ordered_json j;
  j["subcommand"] = sub.get_name();
  collect_options(app, j);
  collect_options(sub, j);
  fs::create_directories(out_dir);
  io::write_file(out_dir / "resolved_config.json", j.dump(2) + "\n");
}

// ----------------------------------------------------------------- helpers

std::string stem_of(const ManifestRecord& r) {
  std::string s = fs::path(r.disparity).filename().string();
  const std::string tail = "_disp.pfm";
  if (s.size() > tail.size() && s.compare(s.size() - tail.size(), tail.size(), tail) == 0) s.resize(s.size() - tail.size());
  return r.scene_id + "_" + s;
}

std::string view_name(std::size_t i) {
  char name[32];
  std::snprintf(name, sizeof name, "view_%03zu.png", i);
  return name;
}

std::vector<CameraRecord> camera_records(const std::vector<Pose>& poses, const Intrinsics& intr) {
  std::vector<CameraRecord> out;
  for (std::size_t i = 0; i < poses.size(); ++i) out.push_back({static_cast<int>(i), view_name(i), intr, poses[i]});
  return out;
}

std::vector<CameraRecord> read_pose_file(const fs::path& p) {
  std::istringstream in(io::read_file(p));
  return parse_pose_file(in);
}

ordered_json bounds_json(const Aabb& b) {
  return ordered_json::array({b.lo.x(), b.lo.y(), b.lo.z(), b.hi.x(), b.hi.y(), b.hi.z()});
}

Aabb bounds_from_json(const ordered_json& j) {
  const auto v = j.get<std::vector<double>>();
  if (v.size() != 6) throw ParseError("scene.json: bounds needs six numbers");
  return Aabb{Vec3(v[0], v[1], v[2]), Vec3(v[3], v[4], v[5])};
}

void write_histogram_png(const DisparityHistogram& h, const fs::path& path) {
  const int W = 512, H = 256, margin = 8;
  Image img(W, H, 3, 1.0f);
  const auto [lo, hi] = h.support();
  if (hi >= lo) {
    const int bins = hi + 1;
    std::uint64_t peak = 1;
    for (auto c : h.counts) peak = std::max(peak, c);
    const double bar_w = static_cast<double>(W - 2 * margin) / bins;
    for (int k = 0; k < bins; ++k) {
      const std::uint64_t c = static_cast<std::size_t>(k) < h.counts.size() ? h.counts[static_cast<std::size_t>(k)] : 0;
      const int top = H - margin - static_cast<int>(std::lround((H - 2.0 * margin) * static_cast<double>(c) / peak));
      const int x0 = margin + static_cast<int>(k * bar_w), x1 = std::max(x0 + 1, margin + static_cast<int>((k + 1) * bar_w) - 1);
      for (int y = top; y < H - margin; ++y)
        for (int x = x0; x < x1 && x < W; ++x) {
          img.at(x, y, 0) = 0.2f;
          img.at(x, y, 1) = 0.35f;
          img.at(x, y, 2) = 0.7f;
        }
    }
  }
  for (int x = margin; x < W - margin; ++x)
    for (int c = 0; c < 3; ++c) img.at(x, H - margin, c) = 0.0f;
  io::write_png(img, path);
}

// ----------------------------------------------------------------- selftest

int selftest() {
  struct Check {
    const char* name;
    std::function<bool()> fn;
  };
  const auto near = [](double a, double b, double tol) { return std::abs(a - b) <= tol; };
  const std::vector<Check> checks = {
      {"psnr of identical images is +inf",
       [] {
         Image a(4, 4, 3, 0.5f);
         return std::isinf(psnr(a, a));
       }},
      {"psnr at mse 0.01 is 20 dB",
       [&] {
         Image a(4, 4, 3, 0.5f), b(4, 4, 3, 0.6f);
         return near(psnr(a, b), 20.0, 1e-4);
       }},
      {"ssim of an image with itself is 1",
       [&] {
         Image a(8, 8, 3);
         for (std::size_t i = 0; i < a.data.size(); ++i) a.data[i] = static_cast<float>((i * 37 % 101) / 100.0);
         const Image s = ssim(a, a);
         return std::all_of(s.data.begin(), s.data.end(), [&](float v) { return near(v, 1.0, 1e-6); });
       }},
      {"zero disparity warp is the identity",
       [] {
         Image a(8, 4, 3);
         for (std::size_t i = 0; i < a.data.size(); ++i) a.data[i] = static_cast<float>(i % 7) / 7.0f;
         const auto w = warp_horizontal(a, Image(8, 4, 1), kernels::WarpSide::right);
         return w.image.data == a.data &&
                std::all_of(w.inbounds.data.begin(), w.inbounds.data.end(), [](auto m) { return m == 1; });
       }},
      {"pfm round trip is bit exact",
       [] {
         Image m(5, 3, 1);
         for (std::size_t i = 0; i < m.data.size(); ++i) m.data[i] = static_cast<float>(i) * 0.37f - 1.0f;
         return io::decode_pfm(io::encode_pfm(m)).data == m.data;
       }},
      {"bad-2 of (1,2,10) against (1,2,3) is 33.33%",
       [&] {
         Image p(3, 1, 1), g(3, 1, 1);
         p.data = {1, 2, 10};
         g.data = {1, 2, 3};
         EvalMask m{Mask(3, 1, 1, 1), Mask(3, 1, 1, 1)};
         return near(bad_tau(p, g, 2.0, m, Region::all), 100.0 / 3.0, 1e-9);
       }},
      {"rend_loss of a constant 0.1 offset is 0.01",
       [&] {
         const std::vector<double> a{0.6, 0.2, 0.3, 0.9, 0.5, 0.1}, b{0.5, 0.2, 0.3, 0.8, 0.5, 0.1};
         return near(rend_loss(a, b), 0.01, 1e-12);
       }},
      {"eta is 0 below the AO threshold",
       [] { return ao_gate(0.49, true, LossConfig{}) == 0.0 && ao_gate(0.5, true, LossConfig{}) == 0.5; }},
      {"plane fixture disparity is 16 px at b = 0.5",
       [&] {
         const Fixture f = make_fixture("plane", 0);
         const auto r = analytic_render(f.scene, f.intrinsics, f.reference, 0.5);
         return near(r.disparity.at(32, 32), 16.0, 1e-4);
       }},
  };
  int failed = 0;
  for (const auto& c : checks) {
    bool ok = false;
    try {
      ok = c.fn();
    } catch (const std::exception& e) {
      logger()->error("{}: {}", c.name, e.what());
    }
    std::printf("%s  %s\n", ok ? "PASS" : "FAIL", c.name);
    failed += ok ? 0 : 1;
  }
  std::printf("%d/%zu checks passed\n", static_cast<int>(checks.size()) - failed, checks.size());
  return failed == 0 ? kExitOk : kExitDomain;
}

}  // namespace

int run(const std::vector<std::string>& args) {
  auto log = logger();
  CLI::App app{"Stereo data factory from radiance fields"};
  app.option_defaults()->always_capture_default();
  app.require_subcommand(1);

  int threads = 0;
  std::uint64_t seed = 0;
  std::string config_path;
  app.add_option("--threads", threads, "worker threads (0: NSF_THREADS or the OpenMP default)");
  app.add_option("--seed", seed, "random seed");
  app.add_option("--config", config_path, "JSON config file; flags override its values");

  // gen-fixture
  struct {
    std::string name, out;
    int width = kFixtureResolution, height = kFixtureResolution;
    std::vector<double> baselines{0.5};
  } gf;
  auto* gen = app.add_subcommand("gen-fixture", "render an analytic fixture and its ground truth");
  gen->add_option("--name", gf.name, "plane, occluder or textured_cube");
  gen->add_option("--out", gf.out, "output directory");
  gen->add_option("--width", gf.width);
  gen->add_option("--height", gf.height);
  gen->add_option("--baselines", gf.baselines, "baselines for the ground-truth triplets")->delimiter(',');

  // fit-nerf
  struct {
    std::string fixture, scene, out, backend = "hash";
    int steps = 2000, rays = 4096, samples = 128, holdout_every = 100;
    double lr_grid = 1e-2, lr_mlp = 1e-3;
    bool deterministic = true;
  } fn;
  auto* fit_cmd = app.add_subcommand("fit-nerf", "fit a radiance field to posed images");
  fit_cmd->add_option("--fixture", fn.fixture, "train on a built-in fixture");
  fit_cmd->add_option("--scene", fn.scene, "directory written by gen-fixture");
  fit_cmd->add_option("--out", fn.out);
  fit_cmd->add_option("--backend", fn.backend, "hash or dense");
  fit_cmd->add_option("--steps", fn.steps);
  fit_cmd->add_option("--rays", fn.rays, "rays per batch");
  fit_cmd->add_option("--samples", fn.samples, "samples per ray");
  fit_cmd->add_option("--holdout-every", fn.holdout_every);
  fit_cmd->add_option("--lr-grid", fn.lr_grid);
  fit_cmd->add_option("--lr-mlp", fn.lr_mlp);
  fit_cmd->add_option("--deterministic", fn.deterministic);

  // export-dataset
  struct {
    std::string checkpoint, poses, out, scene_id = "scene";
    std::vector<double> baselines{0.5, 0.3, 0.1};
    std::vector<int> resolutions;
    int samples = 128, max_poses = 0;
    double d_max = 64.0;
  } ex;
  auto* exp_cmd = app.add_subcommand("export-dataset", "render stereo triplets from a trained field");
  exp_cmd->add_option("--checkpoint", ex.checkpoint);
  exp_cmd->add_option("--poses", ex.poses, "pose file (default: poses.txt next to the checkpoint)");
  exp_cmd->add_option("--out", ex.out);
  exp_cmd->add_option("--scene-id", ex.scene_id);
  exp_cmd->add_option("--baselines", ex.baselines)->delimiter(',');
  exp_cmd->add_option("--resolutions", ex.resolutions, "output widths")->delimiter(',');
  exp_cmd->add_option("--samples", ex.samples);
  exp_cmd->add_option("--max-poses", ex.max_poses, "0 exports every pose");
  exp_cmd->add_option("--d-max", ex.d_max);

  // optimize
  struct {
    std::string manifest, out, row = "I";
    double beta = 0.85, th = 0.5, gamma_3rho = 0.1, gamma_disp = 1.0, lr = 0.05, d_max = 64.0;
    int steps = 500;
    std::vector<int> records;
  } op;
  auto* opt_cmd = app.add_subcommand("optimize", "fit disparity maps to exported triplets with the NS loss");
  opt_cmd->add_option("--manifest", op.manifest);
  opt_cmd->add_option("--out", op.out);
  opt_cmd->add_option("--row", op.row, "loss configuration: A, C, E, F, G, H or I");
  opt_cmd->add_option("--beta", op.beta);
  opt_cmd->add_option("--th", op.th);
  opt_cmd->add_option("--gamma-3rho", op.gamma_3rho);
  opt_cmd->add_option("--gamma-disp", op.gamma_disp);
  opt_cmd->add_option("--lr", op.lr);
  opt_cmd->add_option("--d-max", op.d_max);
  opt_cmd->add_option("--steps", op.steps);
  opt_cmd->add_option("--records", op.records, "manifest record indices (default: all)")->delimiter(',');

  // eval
  struct {
    std::string pred, gt, gt_right, valid, manifest, pred_dir, dataset = "middlebury", out;
    double tau = 0.0;
  } ev;
  auto* eval_cmd = app.add_subcommand("eval", "bad-tau over All and Noc pixels");
  eval_cmd->add_option("--pred", ev.pred, "predicted disparity PFM");
  eval_cmd->add_option("--gt", ev.gt, "ground-truth disparity PFM");
  eval_cmd->add_option("--gt-right", ev.gt_right, "right-view ground truth, enables the Noc split");
  eval_cmd->add_option("--valid", ev.valid, "ground-truth validity PNG");
  eval_cmd->add_option("--manifest", ev.manifest, "evaluate optimize outputs against a manifest");
  eval_cmd->add_option("--pred-dir", ev.pred_dir, "directory written by optimize");
  eval_cmd->add_option("--dataset", ev.dataset, "dataset id; sets the default tau");
  eval_cmd->add_option("--tau", ev.tau, "0 uses the dataset default");
  eval_cmd->add_option("--out", ev.out);

  // plot-hist
  struct {
    std::string manifest, out;
    double bin_width = 1.0;
  } ph;
  auto* hist_cmd = app.add_subcommand("plot-hist", "disparity histogram of an exported dataset");
  hist_cmd->add_option("--manifest", ph.manifest);
  hist_cmd->add_option("--out", ph.out);
  hist_cmd->add_option("--bin-width", ph.bin_width);

  auto* self_cmd = app.add_subcommand("selftest", "run the built-in invariant checks");

  const auto require = [](const std::string& v, const char* flag) {
    if (v.empty()) throw UsageError(std::string("missing required option ") + flag);
  };

  try {
    std::vector<std::string> reversed(args.rbegin(), args.rend());
    app.parse(reversed);
    CLI::App* sub = app.get_subcommands().front();
    if (!config_path.empty()) apply_config_file(app, sub, config_path);

    if (threads <= 0) {
      if (const char* env = std::getenv("NSF_THREADS")) {
        try {
          threads = std::stoi(env);
        } catch (const std::exception&) {
          throw UsageError("NSF_THREADS must be an integer");
        }
      }
    }
    if (threads > 0) omp_set_num_threads(threads);

    if (sub == self_cmd) return selftest();

    if (sub == gen) {
      require(gf.name, "--name");
      require(gf.out, "--out");
      const fs::path out = gf.out;
      write_resolved_config(app, *sub, out);
      const Fixture f = make_fixture(gf.name, seed, gf.width, gf.height);
      fs::create_directories(out / "views");
      for (std::size_t i = 0; i < f.images.size(); ++i) io::write_png(f.images[i], out / "views" / view_name(i));
      io::write_file(out / "poses.txt", serialize_pose_file(camera_records(f.views, f.intrinsics)));
      io::write_file(out / "reference_pose.txt", serialize_pose_file(camera_records({f.reference}, f.intrinsics)));
      io::write_png(f.reference_image, out / "reference.png");
      ordered_json scene;
      scene["fixture"] = f.name;
      scene["seed"] = f.seed;
      scene["width"] = f.intrinsics.width;
      scene["height"] = f.intrinsics.height;
      scene["bounds"] = bounds_json(f.scene.bounds());
      io::write_file(out / "scene.json", scene.dump(2) + "\n");
      std::vector<Pose> poses = f.views;
      poses.push_back(f.reference);
      BuildOptions bo;
      bo.baselines = gf.baselines;
      const auto m = build_dataset(
          {SceneSource{f.name, f.intrinsics, poses, analytic_renderer(std::make_shared<AnalyticScene>(f.scene))}}, bo,
          out / "dataset");
      log->info("gen-fixture: {} views and {} ground-truth triplets written to {}", f.views.size(), m.records.size(),
                out.string());
      return kExitOk;
    }

    if (sub == fit_cmd) {
      require(fn.out, "--out");
      if (fn.fixture.empty() == fn.scene.empty()) throw UsageError("give exactly one of --fixture or --scene");
      const fs::path out = fn.out;
      write_resolved_config(app, *sub, out);
      SceneDataset data;
      std::optional<HoldoutView> holdout;
      if (!fn.fixture.empty()) {
        const Fixture f = make_fixture(fn.fixture, seed);
        data = SceneDataset::from_fixture(f);
        holdout = HoldoutView{f.reference, f.reference_image};
      } else {
        const fs::path dir = fn.scene;
        const auto scene = ordered_json::parse(io::read_file(dir / "scene.json"));
        const auto recs = read_pose_file(dir / "poses.txt");
        if (recs.empty()) throw DomainError("scene has no poses");
        data.intrinsics = recs.front().intrinsics;
        data.bounds = bounds_from_json(scene.at("bounds"));
        for (const auto& r : recs) {
          data.poses.push_back(r.pose);
          data.images.push_back(io::read_png(dir / "views" / view_name(static_cast<std::size_t>(r.id))));
        }
        if (fs::exists(dir / "reference_pose.txt") && fs::exists(dir / "reference.png")) {
          holdout = HoldoutView{read_pose_file(dir / "reference_pose.txt").at(0).pose, io::read_png(dir / "reference.png")};
        }
      }
      TrainConfig tc;
      tc.steps = fn.steps;
      tc.rays_per_batch = fn.rays;
      tc.samples = fn.samples;
      tc.seed = seed;
      tc.deterministic = fn.deterministic;
      tc.backend = backend_from_string(fn.backend);
      tc.lr_grid = fn.lr_grid;
      tc.lr_mlp = fn.lr_mlp;
      tc.holdout_every = fn.holdout_every;
      const FitResult r = fit(data, tc, holdout, out / "checkpoint.nsfc");
      io::write_file(out / "trace.csv", trace_csv(r.trace));
      io::write_file(out / "poses.txt", serialize_pose_file(camera_records(data.poses, data.intrinsics)));
      if (holdout) {
        const NeuralField<float> field(r.model);
        const auto img = render_image(field, data.intrinsics, holdout->pose, RenderOptions{fn.samples});
        io::write_png(img.color, out / "holdout.png");
        log->info("fit-nerf: held-out PSNR {:.2f} dB", psnr(img.color, holdout->image));
      }
      log->info("fit-nerf: {} steps, final loss {:.6f}", r.trace.size(), r.trace.back().loss);
      return kExitOk;
    }

    if (sub == exp_cmd) {
      require(ex.checkpoint, "--checkpoint");
      require(ex.out, "--out");
      const fs::path out = ex.out;
      write_resolved_config(app, *sub, out);
      const fs::path pose_path = ex.poses.empty() ? fs::path(ex.checkpoint).parent_path() / "poses.txt" : fs::path(ex.poses);
      auto recs = read_pose_file(pose_path);
      if (recs.empty()) throw DomainError("pose file has no poses");
      if (ex.max_poses > 0 && recs.size() > static_cast<std::size_t>(ex.max_poses)) recs.resize(static_cast<std::size_t>(ex.max_poses));
      auto field = std::make_shared<NeuralField<float>>(load_checkpoint(ex.checkpoint));
      SceneSource src{ex.scene_id, recs.front().intrinsics, {}, field_renderer(field, ex.samples)};
      for (const auto& r : recs) src.poses.push_back(r.pose);
      BuildOptions bo;
      bo.baselines = ex.baselines;
      bo.resolutions = ex.resolutions;
      bo.d_max = ex.d_max;
      const auto m = build_dataset({src}, bo, out);
      log->info("export-dataset: {} triplets, manifest {}", m.records.size(), (out / kManifestName).string());
      return kExitOk;
    }

    if (sub == opt_cmd) {
      require(op.manifest, "--manifest");
      require(op.out, "--out");
      if (op.row.size() != 1) throw UsageError("--row takes a single letter");
      const fs::path out = op.out;
      write_resolved_config(app, *sub, out);
      LossConfig lc = LossConfig::row(op.row[0]);
      if (opt_cmd->count("--beta")) lc.beta = op.beta;
      if (opt_cmd->count("--th")) lc.th = op.th;
      if (opt_cmd->count("--gamma-3rho")) lc.gamma_3rho = op.gamma_3rho;
      if (opt_cmd->count("--gamma-disp")) lc.gamma_disp = op.gamma_disp;
      OptimizeConfig oc;
      oc.steps = op.steps;
      oc.lr = op.lr;
      oc.d_max = op.d_max;
      oc.matcher.d_max = static_cast<int>(op.d_max);
      const fs::path manifest_path = op.manifest;
      const DatasetManifest m = read_manifest(manifest_path);
      std::vector<int> which = op.records;
      if (which.empty())
        for (int i = 0; i < static_cast<int>(m.records.size()); ++i) which.push_back(i);
      std::ostringstream summary;
      summary << "record,stem,lns_initial,lns_final,bad_initial,bad_final\n";
      for (int k : which) {
        if (k < 0 || k >= static_cast<int>(m.records.size())) throw DomainError("record index out of range");
        const auto& rec = m.records[static_cast<std::size_t>(k)];
        const Triplet t = load_triplet(rec, manifest_path.parent_path());
        const OptimizeResult r = optimize_disparity(t, lc, oc);
        const std::string stem = stem_of(rec);
        io::write_pfm(r.disparity, out / (stem + "_pred.pfm"));
        std::ostringstream trace;
        trace << "step,lns,bad\n";
        for (const auto& row : r.trace) trace << row.step << ',' << row.lns << ',' << row.bad << '\n';
        io::write_file(out / (stem + "_trace.csv"), trace.str());
        summary << k << ',' << stem << ',' << r.trace.front().lns << ',' << r.trace.back().lns << ','
                << r.trace.front().bad << ',' << r.trace.back().bad << '\n';
        log->info("optimize: {} L_NS {:.5f} -> {:.5f}", stem, r.trace.front().lns, r.trace.back().lns);
      }
      io::write_file(out / "summary.csv", summary.str());
      return kExitOk;
    }

    if (sub == eval_cmd) {
      require(ev.out, "--out");
      const fs::path out = ev.out;
      write_resolved_config(app, *sub, out);
      const double tau = ev.tau > 0.0 ? ev.tau : default_tau(ev.dataset);
      std::vector<EvalRecord> records;
      if (!ev.manifest.empty()) {
        require(ev.pred_dir, "--pred-dir");
        const fs::path manifest_path = ev.manifest;
        const DatasetManifest m = read_manifest(manifest_path);
        for (const auto& rec : m.records) {
          const fs::path pred_path = fs::path(ev.pred_dir) / (stem_of(rec) + "_pred.pfm");
          if (!fs::exists(pred_path)) continue;
          const Image gt = io::read_pfm(manifest_path.parent_path() / rec.disparity);
          const Mask valid = io::read_mask_png(manifest_path.parent_path() / rec.valid);
          records.push_back(evaluate(stem_of(rec), io::read_pfm(pred_path), gt, EvalMask{valid, valid}, tau));
        }
        if (records.empty()) throw DomainError("no predictions found in " + ev.pred_dir);
      } else {
        require(ev.pred, "--pred");
        require(ev.gt, "--gt");
        const Image pred = io::read_pfm(ev.pred), gt = io::read_pfm(ev.gt);
        Mask valid(gt.width, gt.height, 1, 1);
        if (!ev.valid.empty()) valid = io::read_mask_png(ev.valid);
        const EvalMask mask = ev.gt_right.empty() ? EvalMask{valid, valid}
                                                  : make_eval_mask(valid, gt, io::read_pfm(ev.gt_right));
        records.push_back(evaluate(ev.dataset, pred, gt, mask, tau));
      }
      const std::string text = report_text(records);
      io::write_file(out / "report.txt", text);
      io::write_file(out / "report.csv", report_csv(records));
      std::fputs(text.c_str(), stdout);
      return kExitOk;
    }

    if (sub == hist_cmd) {
      require(ph.manifest, "--manifest");
      require(ph.out, "--out");
      if (!(ph.bin_width > 0.0)) throw UsageError("--bin-width must be positive");
      const fs::path out = ph.out;
      write_resolved_config(app, *sub, out);
      const fs::path manifest_path = ph.manifest;
      const DatasetManifest m = read_manifest(manifest_path);
      DisparityHistogram h;
      h.bin_width = ph.bin_width;
      for (const auto& rec : m.records) {
        const Image d = io::read_pfm(manifest_path.parent_path() / rec.disparity);
        const Mask v = io::read_mask_png(manifest_path.parent_path() / rec.valid);
        for (std::size_t i = 0; i < d.data.size(); ++i)
          if (v.data[i]) h.add(d.data[i]);
      }
      std::ostringstream csv;
      csv << "bin_lo,bin_hi,count\n";
      for (std::size_t k = 0; k < h.counts.size(); ++k)
        csv << k * h.bin_width << ',' << (k + 1) * h.bin_width << ',' << h.counts[k] << '\n';
      io::write_file(out / "histogram.csv", csv.str());
      write_histogram_png(h, out / "histogram.png");
      log->info("plot-hist: {} pixels over {} bins", h.total(), h.counts.size());
      return kExitOk;
    }
    throw UsageError("no subcommand");
  } catch (const CLI::ParseError& e) {
    const int code = app.exit(e);
    return code == 0 ? kExitOk : kExitUsage;
  } catch (const UsageError& e) {
    log->error("usage: {}", e.what());
    return kExitUsage;
  } catch (const nsf::Error& e) {
    log->error("{}", e.what());
    return kExitDomain;
  } catch (const nlohmann::json::exception& e) {
    log->error("{}", e.what());
    return kExitDomain;
  }
}

}  // namespace nsf::cli

#include <doctest.h>

#include <fstream>

#include <json.hpp>

#include "helpers.hpp"
#include "nsf/cli.hpp"
#include "nsf/evalkit.hpp"
#include "nsf/factory.hpp"
#include "nsf/imageio.hpp"

using namespace nsf;
namespace fs = std::filesystem;
using nlohmann::json;

namespace {

int run(std::initializer_list<std::string> args) { return cli::run(std::vector<std::string>(args)); }

json read_json(const fs::path& p) { return json::parse(io::read_file(p)); }

}  // namespace

TEST_SUITE("cli") {

TEST_CASE("selftest passes") { CHECK(run({"selftest"}) == cli::kExitOk); }

TEST_CASE("usage errors exit with two") {
  CHECK(run({}) == cli::kExitUsage);
  CHECK(run({"frobnicate"}) == cli::kExitUsage);
  CHECK(run({"gen-fixture", "--bogus", "1"}) == cli::kExitUsage);
  CHECK(run({"gen-fixture", "--name", "plane"}) == cli::kExitUsage);
  CHECK(run({"fit-nerf", "--out", "x", "--steps", "ten"}) == cli::kExitUsage);
}

TEST_CASE("domain errors exit with one") {
  const fs::path dir = test::temp_dir("cli_domain");
  CHECK(run({"gen-fixture", "--name", "teapot", "--out", (dir / "g").string()}) == cli::kExitDomain);
  CHECK(run({"plot-hist", "--manifest", (dir / "none.jsonl").string(), "--out", (dir / "h").string()}) ==
        cli::kExitDomain);
}

TEST_CASE("unknown config keys are rejected") {
  const fs::path dir = test::temp_dir("cli_config_bad");
  io::write_file(dir / "c.json", R"({"name": "plane", "colour": 3})");
  CHECK(run({"--config", (dir / "c.json").string(), "gen-fixture", "--out", (dir / "o").string()}) ==
        cli::kExitUsage);
  io::write_file(dir / "d.json", R"({"subcommand": "optimize"})");
  CHECK(run({"--config", (dir / "d.json").string(), "gen-fixture", "--name", "plane", "--out",
             (dir / "o").string()}) == cli::kExitUsage);
  io::write_file(dir / "e.json", "{broken");
  CHECK(run({"--config", (dir / "e.json").string(), "selftest"}) == cli::kExitDomain);
}

TEST_CASE("flags override the config file which overrides defaults") {
  const fs::path dir = test::temp_dir("cli_config");
  io::write_file(dir / "c.json", R"({"name": "occluder", "width": 12, "height": 10, "baselines": [0.4]})");
  REQUIRE(run({"--config", (dir / "c.json").string(), "gen-fixture", "--out", (dir / "o").string(), "--width",
               "16"}) == cli::kExitOk);
  const json r = read_json(dir / "o" / "resolved_config.json");
  CHECK(r["subcommand"] == "gen-fixture");
  CHECK(r["name"] == "occluder");
  CHECK(r["width"] == 16);
  CHECK(r["height"] == 10);
  CHECK(r["baselines"] == json::array({0.4}));
  CHECK(r["seed"] == 0);
  const auto m = read_manifest(dir / "o" / "dataset" / kManifestName);
  CHECK(m.records.size() == static_cast<std::size_t>(kFixtureViews + 1));
  CHECK(m.records[0].width == 16);

  // A resolved config replays to the same artifacts.
  REQUIRE(run({"--config", (dir / "o" / "resolved_config.json").string(), "gen-fixture", "--out",
               (dir / "p").string()}) == cli::kExitOk);
  CHECK(io::read_file(dir / "o" / "dataset" / kManifestName) == io::read_file(dir / "p" / "dataset" / kManifestName));
  CHECK(io::read_file(dir / "o" / "reference.png") == io::read_file(dir / "p" / "reference.png"));
}

TEST_CASE("pipeline from fixture to evaluation") {
  const fs::path dir = test::temp_dir("cli_pipeline");
  const std::string g = (dir / "gen").string(), f = (dir / "fit").string(), e = (dir / "exp").string();
  REQUIRE(run({"gen-fixture", "--name", "plane", "--out", g, "--width", "16", "--height", "16"}) == 0);
  REQUIRE(run({"--threads", "1", "fit-nerf", "--scene", g, "--out", f, "--steps", "4", "--rays", "32", "--samples",
               "8", "--holdout-every", "2"}) == 0);
  CHECK(fs::exists(dir / "fit" / "checkpoint.nsfc"));
  CHECK(fs::exists(dir / "fit" / "trace.csv"));

  REQUIRE(run({"export-dataset", "--checkpoint", (dir / "fit" / "checkpoint.nsfc").string(), "--out", e,
               "--baselines", "0.5,0.3,0.1", "--max-poses", "2", "--samples", "16"}) == 0);
  const auto m = read_manifest(dir / "exp" / kManifestName);
  CHECK(m.records.size() == 6u);
  CHECK(read_json(dir / "exp" / "resolved_config.json")["baselines"] == json::array({0.5, 0.3, 0.1}));

  REQUIRE(run({"plot-hist", "--manifest", (dir / "exp" / kManifestName).string(), "--out",
               (dir / "hist").string()}) == 0);
  CHECK(io::read_file(dir / "hist" / "histogram.png").substr(1, 3) == "PNG");
  const std::string csv = io::read_file(dir / "hist" / "histogram.csv");
  CHECK(csv.rfind("bin_lo,bin_hi,count\n", 0) == 0);

  const std::string gm = (dir / "gen" / "dataset" / kManifestName).string();
  REQUIRE(run({"optimize", "--manifest", gm, "--out", (dir / "opt").string(), "--steps", "3", "--records", "0,1",
               "--row", "C"}) == 0);
  CHECK(fs::exists(dir / "opt" / "summary.csv"));
  REQUIRE(run({"eval", "--manifest", gm, "--pred-dir", (dir / "opt").string(), "--out",
               (dir / "eval").string()}) == 0);
  const auto recs = parse_report_csv(io::read_file(dir / "eval" / "report.csv"));
  CHECK(recs.size() == 2u);
  CHECK(recs[0].tau == 2.0);
  CHECK(run({"optimize", "--manifest", gm, "--out", (dir / "opt2").string(), "--row", "Q"}) == cli::kExitDomain);
}

}

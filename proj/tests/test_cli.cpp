#include <catch2/catch_amalgamated.hpp>

#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <sstream>

#include "cafht/io.hpp"
#include "cafht/simdata.hpp"

using namespace cafht;
namespace fs = std::filesystem;

namespace {

const std::string kCli = CAFHT_CLI_PATH;

struct CliResult {
  int exit_code = -1;
  std::string output;  // stdout + stderr
};

fs::path test_dir() {
  static const fs::path dir = [] {
    fs::path p = fs::temp_directory_path() / "cafht_cli_tests";
    fs::remove_all(p);
    fs::create_directories(p);
    return p;
  }();
  return dir;
}

CliResult run_cli(const std::string& args) {
  const fs::path log = test_dir() / "last_output.txt";
  const std::string cmd = kCli + " " + args + " > " + log.string() + " 2>&1";
  const int status = std::system(cmd.c_str());
  CliResult r;
  r.exit_code = WIFEXITED(status) ? WEXITSTATUS(status) : -1;
  std::ifstream is(log);
  std::stringstream ss;
  ss << is.rdbuf();
  r.output = ss.str();
  return r;
}

std::string slurp(const fs::path& p) {
  std::ifstream is(p);
  std::stringstream ss;
  ss << is.rdbuf();
  return ss.str();
}

}  // namespace

TEST_CASE("generate writes a loadable trajectory file", "[cli]") {
  const fs::path out = test_dir() / "data.csv";
  const CliResult r = run_cli("generate --n 50 --T 10 --d 2 --delta 0.2 --seed 3 -o " + out.string());
  REQUIRE(r.exit_code == 0);
  const TrajectorySet set = load_trajectories(out.string());
  CHECK(set.size() == 50);
  CHECK(set.horizon() == 10);
  CHECK(set.dim() == 2);
}

TEST_CASE("calibrate then predict over a trajectory file", "[cli]") {
  const fs::path data = test_dir() / "cal_data.csv";
  const fs::path input = test_dir() / "cal_input.csv";
  const fs::path model = test_dir() / "model.txt";
  const fs::path bands = test_dir() / "bands.csv";
  REQUIRE(run_cli("generate --n 80 --T 12 --seed 4 -o " + data.string()).exit_code == 0);
  REQUIRE(run_cli("generate --n 5 --T 12 --seed 5 -o " + input.string()).exit_code == 0);
  const CliResult cal = run_cli("calibrate --input " + data.string() + " --alpha 0.1 " +
                                "--score multiplicative --tracker aci --tuning split " +
                                "--gamma-grid 0.05,0.2 --seed 11 -o " + model.string());
  REQUIRE(cal.exit_code == 0);
  REQUIRE(fs::exists(model));

  const CliResult pred = run_cli("predict --model " + model.string() + " --input " + input.string() +
                                 " -o " + bands.string());
  REQUIRE(pred.exit_code == 0);

  SECTION("output matches the library path byte for byte") {
    const CalibrationArtifact art = load_artifact(model.string());
    std::vector<long> ids;
    const TrajectorySet raw = load_trajectories(input.string(), &ids);
    const CalibratedPredictor cp = art.predictor();
    std::ostringstream expected;
    expected << band_csv_header() << "\n";
    for (std::size_t i = 0; i < raw.size(); ++i) {
      const PredictionBand band =
          cp.predict(art.normalizer.map(raw.items[i]), static_cast<std::uint64_t>(ids[i]));
      PredictionBand original(band.horizon(), band.dim());
      for (int t = 1; t <= band.horizon(); ++t)
        original.at(t, 0) = art.normalizer.unmap(0, band.at(t, 0));
      write_band_csv_row(expected, ids[i], original);
    }
    CHECK(slurp(bands) == expected.str());
  }

  SECTION("bands have no look-ahead") {
    // Perturb trajectory 0 from step 8 on; bands up to step 8 must not move.
    std::vector<long> ids;
    TrajectorySet raw = load_trajectories(input.string(), &ids);
    for (int t = 8; t <= raw.horizon(); ++t) raw.items[0].at(t, 0) += 5.0;
    const fs::path input2 = test_dir() / "cal_input_mod.csv";
    save_trajectories(input2.string(), raw);
    const fs::path bands2 = test_dir() / "bands_mod.csv";
    REQUIRE(run_cli("predict --model " + model.string() + " --input " + input2.string() + " -o " +
                    bands2.string())
                .exit_code == 0);

    std::istringstream a(slurp(bands)), b(slurp(bands2));
    std::string la, lb;
    bool later_steps_differ = false;
    while (std::getline(a, la) && std::getline(b, lb)) {
      if (la.rfind("0,", 0) != 0) continue;  // trajectory 0 rows
      const int t = std::stoi(la.substr(2));
      if (t <= 8)
        CHECK(la == lb);
      else if (la != lb)
        later_steps_differ = true;
    }
    CHECK(later_steps_differ);
  }

  SECTION("shape mismatches are rejected") {
    const fs::path wide = test_dir() / "wide.csv";
    REQUIRE(run_cli("generate --n 3 --T 12 --d 2 --seed 6 -o " + wide.string()).exit_code == 0);
    const CliResult r = run_cli("predict --model " + model.string() + " --input " + wide.string() +
                                " -o /dev/null");
    CHECK(r.exit_code == 1);
    CHECK_THAT(r.output, Catch::Matchers::ContainsSubstring("dimension"));
  }
}

TEST_CASE("a zero-margin artifact reproduces the raw adaptive band", "[cli]") {
  ArConfig cfg;
  cfg.horizon = 10;
  cfg.seed = 21;
  const TrajectorySet train_raw = generate_ar(cfg, 30, 0);
  CalibrationArtifact art;
  art.normalizer = Normalizer::fit(train_raw);
  art.forecaster = ArForecaster::fit(art.normalizer.map(train_raw));
  art.warm = {WarmStart{}};  // zero residual range: margin comes only from the tracker
  art.settings.gamma = 0.05;
  art.settings.alpha = 0.1;
  art.margin = 0.0;
  art.warm_seed = 33;
  const fs::path model = test_dir() / "zero_margin.txt";
  save_artifact(model.string(), art);

  const fs::path input = test_dir() / "zm_input.csv";
  REQUIRE(run_cli("generate --n 2 --T 10 --seed 22 -o " + input.string()).exit_code == 0);
  const fs::path bands = test_dir() / "zm_bands.csv";
  REQUIRE(run_cli("predict --model " + model.string() + " --input " + input.string() + " -o " +
                  bands.string())
              .exit_code == 0);

  std::vector<long> ids;
  const TrajectorySet raw = load_trajectories(input.string(), &ids);
  std::ostringstream expected;
  expected << band_csv_header() << "\n";
  for (std::size_t i = 0; i < raw.size(); ++i) {
    const Trajectory mapped = art.normalizer.map(raw.items[i]);
    const PredictionBand aci =
        run_aci_band(art.forecaster, mapped, art.settings.adaptive(), art.warm,
                     mix_seed(art.warm_seed, static_cast<std::uint64_t>(ids[i])));
    PredictionBand original(aci.horizon(), 1);
    for (int t = 1; t <= aci.horizon(); ++t) original.at(t, 0) = art.normalizer.unmap(0, aci.at(t, 0));
    write_band_csv_row(expected, ids[i], original);
  }
  CHECK(slurp(bands) == expected.str());
}

TEST_CASE("experiment subcommand", "[cli]") {
  const fs::path config = test_dir() / "exp.cfg";
  {
    std::ofstream os(config);
    os << "ar.T = 12\nn = 120\ntest_n = 30\nreps = 2\nmethods = cafht, nctp\n"
          "gamma_grid = 0.05, 0.2\nseed = 5\n";
  }
  const fs::path out1 = test_dir() / "run1";
  const fs::path out2 = test_dir() / "run2";
  const fs::path out3 = test_dir() / "run3";

  const CliResult r1 = run_cli("experiment --config " + config.string() + " -o " + out1.string());
  REQUIRE(r1.exit_code == 0);
  CHECK(fs::exists(out1 / "report.csv"));
  CHECK(fs::exists(out1 / "report_marginal.svg"));
  CHECK(fs::exists(out1 / "tuning.csv"));
  CHECK(fs::exists(out1 / "bands_sample.csv"));

  SECTION("same seed gives byte-identical reports") {
    REQUIRE(run_cli("experiment --config " + config.string() + " -o " + out2.string()).exit_code == 0);
    CHECK(slurp(out1 / "report.csv") == slurp(out2 / "report.csv"));
  }
  SECTION("the seed flag overrides the config deterministically") {
    REQUIRE(run_cli("experiment --config " + config.string() + " --seed 9 -o " + out3.string())
                .exit_code == 0);
    CHECK(slurp(out1 / "report.csv") != slurp(out3 / "report.csv"));
    CHECK_THAT(slurp(out3 / "report.csv"), Catch::Matchers::ContainsSubstring("seed=9"));
  }
  SECTION("plot regenerates charts from the csv") {
    const fs::path plots = test_dir() / "plots";
    REQUIRE(run_cli("plot --report " + (out1 / "report.csv").string() + " -o " + plots.string())
                .exit_code == 0);
    CHECK(fs::exists(plots / "report_marginal.svg"));
  }
}

TEST_CASE("experiment failures and config diagnostics", "[cli]") {
  SECTION("missing config file exits 1") {
    const CliResult r = run_cli("experiment --config /nonexistent.cfg -o /tmp/x");
    CHECK(r.exit_code == 1);
    CHECK_THAT(r.output, Catch::Matchers::ContainsSubstring("cannot open"));
  }
  SECTION("unknown keys exit 1 with a suggestion") {
    const fs::path config = test_dir() / "bad.cfg";
    std::ofstream(config) << "alpa = 0.1\n";
    const CliResult r = run_cli("experiment --config " + config.string() + " -o /tmp/x");
    CHECK(r.exit_code == 1);
    CHECK_THAT(r.output, Catch::Matchers::ContainsSubstring("did you mean"));
  }
  SECTION("per-cell failures exit 2 but still write the report") {
    const fs::path config = test_dir() / "partial.cfg";
    std::ofstream(config) << "ar.T = 10\nn = 80\ntest_n = 20\nreps = 2\nsteps_ahead = 3\n"
                             "methods = cafht, cfrnn\ngamma_grid = 0.05\nseed = 5\n";
    const fs::path out = test_dir() / "partial_out";
    const CliResult r = run_cli("experiment --config " + config.string() + " -o " + out.string());
    CHECK(r.exit_code == 2);
    CHECK(fs::exists(out / "report.csv"));
    CHECK_THAT(slurp(out / "report.csv"), Catch::Matchers::ContainsSubstring("single-step"));
  }
}

TEST_CASE("fit subcommand dumps forecaster parameters", "[cli]") {
  const fs::path data = test_dir() / "fit_data.csv";
  REQUIRE(run_cli("generate --n 40 --T 10 --seed 30 -o " + data.string()).exit_code == 0);
  const fs::path params = test_dir() / "forecaster.txt";
  REQUIRE(run_cli("fit --input " + data.string() + " -o " + params.string()).exit_code == 0);
  const std::string text = slurp(params);
  CHECK_THAT(text, Catch::Matchers::ContainsSubstring("ar_order=3"));
  CHECK_THAT(text, Catch::Matchers::ContainsSubstring("ar_coef_0_0="));
}

#include <catch2/catch_amalgamated.hpp>

#include <sstream>

#include "cafht/io.hpp"
#include "cafht/simdata.hpp"

using namespace cafht;

TEST_CASE("trajectory csv round trip", "[io]") {
  ArConfig cfg;
  cfg.horizon = 6;
  cfg.dim = 2;
  cfg.delta = 0.5;
  cfg.seed = 55;
  const TrajectorySet set = generate_ar(cfg, 10);
  std::stringstream ss;
  save_trajectories(ss, set);
  std::vector<long> ids;
  const TrajectorySet back = load_trajectories(ss, "roundtrip", &ids);
  REQUIRE(back.size() == set.size());
  for (std::size_t i = 0; i < set.size(); ++i) {
    CHECK(back.items[i].data() == set.items[i].data());
    CHECK(back.items[i].label() == set.items[i].label());
    CHECK(ids[i] == static_cast<long>(i));
  }
}

TEST_CASE("trajectory csv diagnostics carry line numbers", "[io]") {
  SECTION("non-finite value") {
    std::stringstream ss("traj_id,t,dim_0\n0,0,1.0\n0,1,nan\n");
    CHECK_THROWS_WITH(load_trajectories(ss, "f"), Catch::Matchers::ContainsSubstring("line 3"));
  }
  SECTION("malformed number") {
    std::stringstream ss("traj_id,t,dim_0\n0,0,oops\n");
    CHECK_THROWS_WITH(load_trajectories(ss, "f"), Catch::Matchers::ContainsSubstring("line 2"));
  }
  SECTION("inconsistent horizons") {
    std::stringstream ss("traj_id,t,dim_0\n0,0,1.0\n0,1,1.0\n1,0,2.0\n");
    CHECK_THROWS_WITH(load_trajectories(ss, "f"),
                      Catch::Matchers::ContainsSubstring("different number of steps"));
  }
  SECTION("bad header") {
    std::stringstream ss("id,t,dim_0\n");
    CHECK_THROWS_WITH(load_trajectories(ss, "f"), Catch::Matchers::ContainsSubstring("header"));
  }
  SECTION("unknown label") {
    std::stringstream ss("traj_id,t,dim_0,label\n0,0,1.0,medium\n");
    CHECK_THROWS_WITH(load_trajectories(ss, "f"), Catch::Matchers::ContainsSubstring("label"));
  }
}

TEST_CASE("calibration artifact round trip", "[io]") {
  ArConfig cfg;
  cfg.horizon = 15;
  cfg.seed = 56;
  const TrajectorySet train_raw = generate_ar(cfg, 40, 0);
  CalibrationArtifact art;
  art.normalizer = Normalizer::fit(train_raw);
  const TrajectorySet train = art.normalizer.map(train_raw);
  art.forecaster = ArForecaster::fit(train);
  art.warm = training_warm_starts(art.forecaster, train, 0.1);
  const TrajectorySet cal = art.normalizer.map(generate_ar(cfg, 25, 1));
  CafhtSettings s;
  s.alpha = 0.1;
  s.gamma = 0.07;
  s.score = ScoreKind::Multiplicative;
  const CalibratedPredictor cp = calibrate(art.forecaster, cal, s, art.warm, 77);
  art.settings = cp.settings();
  art.margin = cp.margin();
  art.alpha_effective = cp.alpha_effective();
  art.warm_seed = cp.warm_seed();

  const std::string path = std::string(::getenv("TMPDIR") ? ::getenv("TMPDIR") : "/tmp") +
                           "/cafht_artifact_test.txt";
  save_artifact(path, art);
  const CalibrationArtifact back = load_artifact(path);
  CHECK(back.margin == art.margin);
  CHECK(back.settings.gamma == art.settings.gamma);
  CHECK(back.settings.score == ScoreKind::Multiplicative);
  CHECK(back.warm_seed == art.warm_seed);
  for (int j = 0; j < 1; ++j) {
    CHECK(back.warm[j].r_min == art.warm[j].r_min);
    CHECK(back.warm[j].r_max == art.warm[j].r_max);
    CHECK(back.normalizer.shift(j) == art.normalizer.shift(j));
    CHECK(back.normalizer.scale(j) == art.normalizer.scale(j));
  }

  SECTION("reloaded predictor reproduces bands bit for bit") {
    const CalibratedPredictor reloaded = back.predictor();
    const PredictionBand a = cp.predict(cal.items[0], 9);
    const PredictionBand b = reloaded.predict(back.normalizer.map(generate_ar(cfg, 1, 1).items[0]), 9);
    // Same trajectory through the artifact's own normalizer.
    const PredictionBand c = reloaded.predict(cal.items[0], 9);
    for (int t = 1; t <= a.horizon(); ++t) {
      CHECK(a.at(t, 0).lo == c.at(t, 0).lo);
      CHECK(a.at(t, 0).hi == c.at(t, 0).hi);
    }
    (void)b;
  }

  SECTION("infinite margins survive the round trip") {
    art.margin = kInf;
    save_artifact(path, art);
    CHECK(load_artifact(path).margin == kInf);
  }
}

TEST_CASE("external forecast csv", "[io]") {
  std::stringstream ss("traj_id,t,tau,dim_0,dim_1\n4,0,1,0.5,1.5\n4,0,2,0.6,1.6\n4,1,1,0.7,1.7\n");
  const ExternalForecasts table = load_external_forecasts(ss, "f");
  CHECK(table.has(4));
  CHECK_FALSE(table.has(5));
  CHECK(table.lookup(4, 0, 2) == std::vector<double>{0.6, 1.6});

  std::stringstream bad("traj_id,t,tau,dim_0\n4,0,1\n");
  CHECK_THROWS_WITH(load_external_forecasts(bad, "f"),
                    Catch::Matchers::ContainsSubstring("column count"));
}

TEST_CASE("band and trace csv writers", "[io]") {
  PredictionBand band(2, 1);
  band.at(1, 0) = {-1.0, 1.0};
  band.at(2, 0) = {0.0, kInf};
  std::stringstream ss;
  ss << band_csv_header() << "\n";
  write_band_csv_row(ss, 3, band);
  CHECK_THAT(ss.str(), Catch::Matchers::ContainsSubstring("3,1,0,-1,1\n"));
  CHECK_THAT(ss.str(), Catch::Matchers::ContainsSubstring("3,2,0,0,inf\n"));

  std::stringstream ts;
  write_trace_csv(ts, {{1, 0.1, 0.5, 0}, {2, 0.101, 0.4, 1}});
  CHECK_THAT(ts.str(), Catch::Matchers::ContainsSubstring("t,state,radius,err\n"));
  CHECK_THAT(ts.str(), Catch::Matchers::ContainsSubstring("2,0.101,0.4,1\n"));
}

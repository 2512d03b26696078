#include <catch2/catch_amalgamated.hpp>

#include <sstream>

#include "cafht/config.hpp"
#include "cafht/experiments.hpp"
#include "cafht/report.hpp"
#include "cafht/rng.hpp"

using namespace cafht;

namespace {

ExperimentConfig small_config() {
  ExperimentConfig cfg;
  cfg.data.horizon = 12;
  cfg.n = 120;
  cfg.test_n = 40;
  cfg.reps = 3;
  cfg.gamma_grid = {0.05, 0.2};
  cfg.methods = {"cafht", "nctp", "cfrnn"};
  cfg.seed = 7;
  cfg.threads = 2;
  return cfg;
}

}  // namespace

TEST_CASE("standard error aggregation matches the textbook formula", "[experiments]") {
  const std::vector<double> values{0.8, 0.9, 1.0};
  const MetricStats s = detail::aggregate(values);
  CHECK_THAT(s.mean, Catch::Matchers::WithinAbs(0.9, 1e-15));
  // sample sd = 0.1, se = 0.1 / sqrt(3)
  CHECK_THAT(s.se, Catch::Matchers::WithinAbs(0.1 / std::sqrt(3.0), 1e-12));
  CHECK_FALSE(detail::aggregate({}).present);
}

TEST_CASE("conditional coverage", "[experiments]") {
  SECTION("all covered") {
    const std::vector<Label> labels{Label::Hard, Label::Hard, Label::Easy};
    const std::vector<bool> covered{true, true, true};
    CHECK(conditional_coverage(labels, covered, Label::Hard) == 1.0);
  }
  SECTION("an empty label subset is absent, not zero") {
    const std::vector<Label> labels{Label::Easy, Label::Easy};
    const std::vector<bool> covered{true, false};
    CHECK_FALSE(conditional_coverage(labels, covered, Label::Hard).has_value());
  }
  SECTION("random instances match a filter-then-count oracle") {
    Rng rng(61);
    for (int rep = 0; rep < 50; ++rep) {
      const std::size_t n = 1 + rng.below(40);
      std::vector<Label> labels(n);
      std::vector<bool> covered(n);
      for (std::size_t i = 0; i < n; ++i) {
        labels[i] = rng.uniform() < 0.3 ? Label::Hard : Label::Easy;
        covered[i] = rng.uniform() < 0.8;
      }
      long match = 0, hit = 0;
      for (std::size_t i = 0; i < n; ++i)
        if (labels[i] == Label::Hard) {
          ++match;
          hit += covered[i] ? 1 : 0;
        }
      const auto got = conditional_coverage(labels, covered, Label::Hard);
      if (match == 0)
        CHECK_FALSE(got.has_value());
      else
        CHECK(*got == static_cast<double>(hit) / match);
    }
  }
}

TEST_CASE("per-repetition marginal coverage is the label-weighted mix", "[experiments]") {
  ExperimentConfig cfg = small_config();
  cfg.methods = {"cafht"};
  const std::vector<MethodResult> results = run_single_repetition(cfg, 0);
  REQUIRE(results.size() == 1);
  const MethodResult& r = results[0];
  REQUIRE(r.ok);
  const double n = static_cast<double>(cfg.test_n);
  CHECK(r.hard_count + r.easy_count == static_cast<long>(cfg.test_n));
  CHECK_THAT(r.marginal, Catch::Matchers::WithinAbs((r.hard_sum + r.easy_sum) / n, 1e-12));
  if (r.hard_count > 0 && r.easy_count > 0) {
    const double weighted =
        (*r.hard() * r.hard_count + *r.easy() * r.easy_count) / n;
    CHECK_THAT(r.marginal, Catch::Matchers::WithinAbs(weighted, 1e-12));
  }
}

TEST_CASE("experiment reports are deterministic", "[experiments]") {
  const ExperimentConfig cfg = small_config();
  const ExperimentReport a = run_experiment(cfg);
  const ExperimentReport b = run_experiment(cfg);
  std::ostringstream sa, sb;
  write_report_csv(sa, a);
  write_report_csv(sb, b);
  CHECK(sa.str() == sb.str());

  SECTION("thread count does not change the bytes") {
    ExperimentConfig cfg1 = cfg;
    cfg1.threads = 1;
    const ExperimentReport c = run_experiment(cfg1);
    std::ostringstream sc;
    write_report_csv(sc, c);
    CHECK(sc.str() == sa.str());
  }
  SECTION("a different seed changes the bytes") {
    ExperimentConfig cfg2 = cfg;
    cfg2.seed = 8;
    const ExperimentReport c = run_experiment(cfg2);
    std::ostringstream sc;
    write_report_csv(sc, c);
    CHECK(sc.str() != sa.str());
  }
}

TEST_CASE("a failing method is recorded per cell without aborting the sweep", "[experiments]") {
  ExperimentConfig cfg = small_config();
  cfg.methods = {"cafht", "bogus"};
  const ExperimentReport report = run_experiment(cfg);
  REQUIRE(report.cells.size() == 2);
  CHECK(report.cells[0].ok);
  CHECK_FALSE(report.cells[1].ok);
  CHECK_THAT(report.cells[1].error, Catch::Matchers::ContainsSubstring("unknown method"));
  CHECK(report.any_failure());
}

TEST_CASE("report csv round trip", "[experiments]") {
  const ExperimentReport report = run_experiment(small_config());
  std::ostringstream os;
  write_report_csv(os, report);
  std::istringstream is(os.str());
  const LoadedReport loaded = load_report_csv(is, "mem");
  REQUIRE(loaded.cells.size() == report.cells.size());
  for (std::size_t i = 0; i < loaded.cells.size(); ++i) {
    CHECK(loaded.cells[i].method == report.cells[i].method);
    CHECK_THAT(loaded.cells[i].marginal.mean,
               Catch::Matchers::WithinAbs(report.cells[i].marginal.mean, 1e-6));
    CHECK(loaded.cells[i].ok == report.cells[i].ok);
  }
  CHECK_THAT(loaded.header_comment, Catch::Matchers::ContainsSubstring("seed=7"));
}

TEST_CASE("svg charts are well formed with exact error bars", "[experiments]") {
  // Hand-built cells with known statistics.
  std::vector<ReportCell> cells;
  for (int p = 0; p < 3; ++p) {
    for (const char* m : {"cafht", "nctp"}) {
      ReportCell c;
      c.sweep_value = 100.0 * (p + 1);
      c.method = m;
      c.ok = true;
      c.marginal = {0.85 + 0.03 * p, 0.004 + 0.002 * p, true};
      c.width = {0.2 + 0.1 * p, 0.01, true};
      cells.push_back(c);
    }
  }
  std::ostringstream os;
  write_report_svg(os, cells, "marginal", "marginal");
  const std::string svg = os.str();

  CHECK(svg.rfind("<svg", 0) == 0);
  CHECK_THAT(svg, Catch::Matchers::ContainsSubstring("viewBox"));
  CHECK(svg.find("</svg>") == svg.size() - 7);  // single root element
  CHECK(svg.find("<svg", 4) == std::string::npos);

  // Parse the geometry metadata and every error bar back out.
  const auto attr = [&](const std::string& name, std::size_t from = 0) {
    const std::size_t k = svg.find(name + "=\"", from);
    REQUIRE(k != std::string::npos);
    const std::size_t start = k + name.size() + 2;
    return std::make_pair(std::stod(svg.substr(start)), k);
  };
  const double ymin = attr("data-ymin").first;
  const double ymax = attr("data-ymax").first;
  const double plot_h = attr("data-plot-height").first;
  const double scale = plot_h / (ymax - ymin);

  std::size_t pos = 0;
  int bars = 0;
  while ((pos = svg.find("class=\"errbar\"", pos)) != std::string::npos) {
    const double se = attr("data-se", pos).first;
    const double y1 = attr("y1", pos).first;
    const double y2 = attr("y2", pos).first;
    CHECK_THAT(std::abs(y1 - y2) / 2.0, Catch::Matchers::WithinAbs(2.0 * se * scale, 0.05));
    ++bars;
    ++pos;
  }
  CHECK(bars == 6);
}

TEST_CASE("config files parse with key checking", "[experiments]") {
  const std::string text =
      "# comment\n"
      "ar.profile = static\n"
      "ar.T = 25\n"
      "alpha = 0.2\n"
      "methods = cafht, nctp\n"
      "sweep.variable = n\n"
      "sweep.values = 100, 200\n"
      "gamma_grid = 0.05, 0.1\n"
      "tracker = pid\n";
  std::istringstream is(text);
  const ExperimentConfig cfg = config_from_map(parse_config_text(is, "mem"), "mem");
  CHECK(cfg.data.profile == NoiseProfile::Static);
  CHECK(cfg.data.horizon == 25);
  CHECK(cfg.alpha == 0.2);
  CHECK(cfg.methods == std::vector<std::string>{"cafht", "nctp"});
  CHECK(cfg.sweep_values == std::vector<double>{100, 200});
  CHECK(cfg.tracker == TrackerKind::Pid);

  SECTION("unknown keys come back with a suggestion") {
    std::istringstream bad("alpa = 0.1\n");
    CHECK_THROWS_WITH(parse_config_text(bad, "mem"),
                      Catch::Matchers::ContainsSubstring("did you mean 'alpha'"));
  }
  SECTION("bad values carry the key path") {
    std::istringstream bad("ar.T = soon\n");
    CHECK_THROWS_WITH(config_from_map(parse_config_text(bad, "mem"), "mem"),
                      Catch::Matchers::ContainsSubstring("ar.T"));
  }
}

TEST_CASE("multi-step sweeps flow through the runner", "[experiments]") {
  ExperimentConfig cfg = small_config();
  cfg.methods = {"cafht", "nctp"};
  cfg.steps_ahead = 2;
  cfg.reps = 2;
  const ExperimentReport report = run_experiment(cfg);
  for (const ReportCell& c : report.cells) {
    INFO(c.method << ": " << c.error);
    CHECK(c.ok);
    CHECK(c.marginal.present);
  }
}

// Command-line frontend: generate data, fit and calibrate models, predict
// bands for trajectory files, run experiment sweeps, and re-plot reports.

#include <filesystem>
#include <iostream>
#include <string>
#include <vector>

#include "CLI11.hpp"
#include "cafht/config.hpp"
#include "cafht/io.hpp"
#include "cafht/report.hpp"
#include "cafht/tuning.hpp"
#include "cafht/version.hpp"

namespace {

using namespace cafht;

struct CalibrateOptions {
  std::string input;
  std::string output = "calibration.txt";
  std::string tuning_report;
  double alpha = 0.1;
  std::string score = "multiplicative";
  std::string tracker = "aci";
  std::string tuning = "split";
  std::string gamma_grid;
  double train_frac = 0.75;
  double cal1_frac = 0.5;
  int order = 3;
  double ridge = 1e-6;
  std::uint64_t seed = 1;
};

CafhtSettings settings_from(const CalibrateOptions& opt) {
  CafhtSettings s;
  s.alpha = opt.alpha;
  s.score = opt.score == "additive" ? ScoreKind::Additive : ScoreKind::Multiplicative;
  s.tracker = opt.tracker == "pid" ? TrackerKind::Pid : TrackerKind::Aci;
  return s;
}

int run_generate(const ArConfig& cfg, std::size_t n, const std::string& out) {
  save_trajectories(out, generate_ar(cfg, n));
  std::cout << "wrote " << n << " trajectories (T=" << cfg.horizon << ", d=" << cfg.dim << ") to "
            << out << "\n";
  return 0;
}

int run_fit(const std::string& input, const std::string& out, int order, double ridge) {
  const TrajectorySet raw = load_trajectories(input);
  const Normalizer norm = Normalizer::fit(raw);
  const TrajectorySet train = norm.map(raw);
  const ArForecaster ar = ArForecaster::fit(train, order, ridge);
  std::ofstream os(out);
  if (!os) throw std::runtime_error("cannot open for writing: " + out);
  os << "ar_order=" << ar.order() << "\n";
  for (int j = 0; j < ar.dim(); ++j) {
    os << "norm_shift_" << j << "=" << norm.shift(j) << "\n";
    os << "norm_scale_" << j << "=" << norm.scale(j) << "\n";
    os << "ar_intercept_" << j << "=" << ar.intercept(j) << "\n";
    for (int m = 0; m < ar.order(); ++m)
      os << "ar_coef_" << j << "_" << m << "=" << ar.coef(j, m) << "\n";
  }
  std::cout << "fitted AR(" << order << ") on " << raw.size() << " trajectories; wrote " << out << "\n";
  return 0;
}

int run_calibrate(const CalibrateOptions& opt) {
  const TrajectorySet raw = load_trajectories(opt.input);
  const SplitResult split = split_dataset(raw, opt.train_frac, opt.cal1_frac, opt.seed);

  CalibrationArtifact art;
  art.normalizer = Normalizer::fit(split.train);
  const TrajectorySet train = art.normalizer.map(split.train);
  const TrajectorySet cal1 = art.normalizer.map(split.cal1);
  const TrajectorySet cal2 = art.normalizer.map(split.cal2);
  art.forecaster = ArForecaster::fit(train, opt.order, opt.ridge);
  art.warm = training_warm_starts(art.forecaster, train, opt.alpha);

  CafhtSettings s = settings_from(opt);
  const std::vector<double> grid =
      opt.gamma_grid.empty() ? default_gamma_grid()
                             : detail::parse_double_list(opt.gamma_grid, "--gamma-grid");
  const std::uint64_t seed = mix_seed(opt.seed, 0xCA11);

  GammaSelection sel;
  if (opt.tuning == "theory") {
    const TrajectorySet cal = merge(cal1, cal2);
    const CalibratedPredictor cp = calibrate_theory(art.forecaster, cal, grid, s, art.warm, seed, &sel);
    art.settings = cp.settings();
    art.margin = cp.margin();
    art.alpha_effective = cp.alpha_effective();
    art.warm_seed = cp.warm_seed();
  } else {
    sel = select_gamma_split(art.forecaster, cal1, grid, s, art.warm, mix_seed(seed, 0x71));
    s.gamma = sel.gamma;
    const CalibratedPredictor cp = calibrate(art.forecaster, cal2, s, art.warm, seed);
    art.settings = cp.settings();
    art.margin = cp.margin();
    art.alpha_effective = cp.alpha_effective();
    art.warm_seed = cp.warm_seed();
  }
  save_artifact(opt.output, art);
  if (!opt.tuning_report.empty()) {
    std::ofstream os(opt.tuning_report);
    if (!os) throw std::runtime_error("cannot open for writing: " + opt.tuning_report);
    write_tuning_csv(os, sel.table);
  }
  std::cout << "calibrated: gamma=" << art.settings.gamma << " margin=" << art.margin
            << " alpha_effective=" << art.alpha_effective << "; wrote " << opt.output << "\n";
  if (sel.degenerate)
    std::cout << "warning: every candidate produced an infinite margin; bands are uninformative\n";
  return 0;
}

int run_predict(const std::string& model, const std::string& input, const std::string& out,
                const std::string& trace_path) {
  const CalibrationArtifact art = load_artifact(model);
  std::vector<long> ids;
  const TrajectorySet raw = load_trajectories(input, &ids);
  if (raw.dim() != art.normalizer.dim())
    throw std::runtime_error("input dimension " + std::to_string(raw.dim()) +
                             " does not match artifact dimension " +
                             std::to_string(art.normalizer.dim()));
  const CalibratedPredictor cp = art.predictor();

  std::ofstream os(out);
  if (!os) throw std::runtime_error("cannot open for writing: " + out);
  os << band_csv_header() << "\n";
  for (std::size_t i = 0; i < raw.size(); ++i) {
    const Trajectory traj = art.normalizer.map(raw.items[i]);
    const PredictionBand band = cp.predict(traj, static_cast<std::uint64_t>(ids[i]));
    PredictionBand original(band.horizon(), band.dim());
    for (int t = 1; t <= band.horizon(); ++t)
      for (int j = 0; j < band.dim(); ++j)
        original.at(t, j) = art.normalizer.unmap(j, band.at(t, j));
    write_band_csv_row(os, ids[i], original);
  }
  if (!trace_path.empty() && !raw.empty()) {
    std::vector<TraceRow> trace;
    const Trajectory traj = art.normalizer.map(raw.items[0]);
    run_aci_band(art.forecaster, traj, art.settings.adaptive(), art.warm,
                 mix_seed(cp.warm_seed(), static_cast<std::uint64_t>(ids[0])), &trace);
    std::ofstream ts(trace_path);
    if (!ts) throw std::runtime_error("cannot open for writing: " + trace_path);
    write_trace_csv(ts, trace);
  }
  std::cout << "wrote bands for " << raw.size() << " trajectories to " << out << "\n";
  return 0;
}

int run_experiment_cmd(const std::string& config_path, std::int64_t seed_override, int threads,
                       const std::string& out_dir) {
  ExperimentConfig cfg = load_experiment_config(config_path);
  if (seed_override >= 0) cfg.seed = static_cast<std::uint64_t>(seed_override);
  if (threads > 0) cfg.threads = threads;
  std::filesystem::create_directories(out_dir);
  const ExperimentReport report = run_experiment(cfg);
  write_report_files(out_dir, report);
  std::cout << "wrote " << out_dir << "/report.csv (" << report.cells.size() << " cells)\n";
  if (report.any_failure()) {
    for (const ReportCell& c : report.cells)
      if (!c.ok)
        std::cerr << "cell failed: method=" << c.method << " sweep=" << c.sweep_value << ": "
                  << c.error << "\n";
    return 2;
  }
  return 0;
}

int run_plot(const std::string& report_path, const std::string& out_dir) {
  const LoadedReport loaded = load_report_csv(report_path);
  std::filesystem::create_directories(out_dir);
  int written = 0;
  for (const std::string metric : {"avg_width", "marginal", "cond_hard", "cond_easy"}) {
    bool present = false;
    for (const ReportCell& c : loaded.cells) present = present || metric_of(c, metric).present;
    if (!present) continue;
    write_report_svg(out_dir + "/report_" + metric + ".svg", loaded.cells, metric, metric);
    ++written;
  }
  std::cout << "wrote " << written << " charts to " << out_dir << "\n";
  return 0;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Adaptive conformal prediction bands for heterogeneous trajectories"};
  app.set_version_flag("--version", cafht::kVersion);
  app.require_subcommand(1);

  // generate
  auto* gen = app.add_subcommand("generate", "Generate synthetic AR trajectories");
  ArConfig gen_cfg;
  std::size_t gen_n = 1000;
  std::string gen_profile = "dynamic";
  std::string gen_out = "trajectories.csv";
  gen->add_option("--profile", gen_profile, "dynamic|static")
      ->check(CLI::IsMember({"dynamic", "static"}));
  gen->add_option("--n", gen_n, "number of trajectories");
  gen->add_option("--T", gen_cfg.horizon, "steps per trajectory");
  gen->add_option("--d", gen_cfg.dim, "dimensions");
  gen->add_option("--delta", gen_cfg.delta, "fraction of hard trajectories");
  gen->add_option("--k", gen_cfg.hard_multiplier, "hardness multiplier");
  gen->add_option("--noise-scale", gen_cfg.noise_scale, "noise variance scale");
  gen->add_option("--seed", gen_cfg.seed, "rng seed");
  gen->add_option("-o,--output", gen_out, "output csv");

  // fit
  auto* fit = app.add_subcommand("fit", "Fit the forecaster on a trajectory file");
  std::string fit_input, fit_out = "forecaster.txt";
  int fit_order = 3;
  double fit_ridge = 1e-6;
  fit->add_option("--input", fit_input, "trajectory csv")->required();
  fit->add_option("-o,--output", fit_out, "output parameter file");
  fit->add_option("--order", fit_order, "ar order");
  fit->add_option("--ridge", fit_ridge, "ridge penalty");

  // calibrate
  auto* cal = app.add_subcommand("calibrate", "Fit, tune and calibrate on a trajectory file");
  CalibrateOptions copt;
  cal->add_option("--input", copt.input, "trajectory csv")->required();
  cal->add_option("-o,--output", copt.output, "calibration artifact");
  cal->add_option("--alpha", copt.alpha, "nominal miscoverage level");
  cal->add_option("--score", copt.score, "additive|multiplicative")
      ->check(CLI::IsMember({"additive", "multiplicative"}));
  cal->add_option("--tracker", copt.tracker, "aci|pid")->check(CLI::IsMember({"aci", "pid"}));
  cal->add_option("--tuning", copt.tuning, "split|theory")->check(CLI::IsMember({"split", "theory"}));
  cal->add_option("--gamma-grid", copt.gamma_grid, "comma-separated learning rates");
  cal->add_option("--train-frac", copt.train_frac, "training fraction");
  cal->add_option("--cal1-frac", copt.cal1_frac, "selection fraction of the calibration part");
  cal->add_option("--order", copt.order, "ar order");
  cal->add_option("--ridge", copt.ridge, "ridge penalty");
  cal->add_option("--seed", copt.seed, "rng seed");
  cal->add_option("--tuning-report", copt.tuning_report, "write per-candidate tuning csv here");

  // predict
  auto* pred = app.add_subcommand("predict", "Replay the online band over a trajectory file");
  std::string pred_model, pred_input, pred_out = "bands.csv", pred_trace;
  pred->add_option("--model", pred_model, "calibration artifact")->required();
  pred->add_option("--input", pred_input, "trajectory csv")->required();
  pred->add_option("-o,--output", pred_out, "band csv");
  pred->add_option("--trace", pred_trace, "tracker trace csv for the first trajectory");

  // experiment
  auto* exp = app.add_subcommand("experiment", "Run a configured experiment sweep");
  std::string exp_config, exp_out = "results";
  std::int64_t exp_seed = -1;
  int exp_threads = 0;
  exp->add_option("--config", exp_config, "experiment config file")->required();
  exp->add_option("--seed", exp_seed, "override the config seed");
  exp->add_option("--threads", exp_threads, "cap worker threads");
  exp->add_option("-o,--output", exp_out, "output directory");

  // plot
  auto* plot = app.add_subcommand("plot", "Regenerate charts from a report csv");
  std::string plot_report, plot_out = ".";
  plot->add_option("--report", plot_report, "report.csv path")->required();
  plot->add_option("-o,--output", plot_out, "output directory");

  CLI11_PARSE(app, argc, argv);

  try {
    if (gen->parsed()) {
      gen_cfg.profile = gen_profile == "static" ? NoiseProfile::Static : NoiseProfile::Dynamic;
      return run_generate(gen_cfg, gen_n, gen_out);
    }
    if (fit->parsed()) return run_fit(fit_input, fit_out, fit_order, fit_ridge);
    if (cal->parsed()) return run_calibrate(copt);
    if (pred->parsed()) return run_predict(pred_model, pred_input, pred_out, pred_trace);
    if (exp->parsed()) return run_experiment_cmd(exp_config, exp_seed, exp_threads, exp_out);
    if (plot->parsed()) return run_plot(plot_report, plot_out);
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << "\n";
    return 1;
  }
  return 0;
}

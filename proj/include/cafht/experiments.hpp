// Experiment runner: repeated generate/train/calibrate/test cycles across
// methods and sweep points, with coverage and width statistics.
#pragma once

#include <cmath>
#include <cstdint>
#include <map>
#include <mutex>
#include <optional>
#include <sstream>
#include <string>
#include <vector>

#include "cafht/baselines.hpp"
#include "cafht/io.hpp"
#include "cafht/multistep.hpp"
#include "cafht/parallel.hpp"
#include "cafht/simdata.hpp"
#include "cafht/tuning.hpp"
#include "cafht/version.hpp"

namespace cafht {

enum class TuningMode { Split, Theory };

struct ExperimentConfig {
  ArConfig data;
  double alpha = 0.1;
  std::vector<std::string> methods{"cafht", "nctp", "cfrnn"};
  std::string sweep_variable = "none";
  std::vector<double> sweep_values;
  int reps = 20;
  std::size_t n = 2000;
  std::size_t test_n = 200;
  double delta_test = -1.0;  // < 0: same as data.delta
  double train_frac = 0.75;
  double cal1_frac = 0.5;
  std::vector<double> gamma_grid;  // empty: default grid
  ScoreKind score = ScoreKind::Multiplicative;
  TrackerKind tracker = TrackerKind::Aci;
  TuningMode tuning = TuningMode::Split;
  int steps_ahead = 1;
  std::uint64_t seed = 1;
  int threads = 0;

  std::vector<double> grid() const { return gamma_grid.empty() ? default_gamma_grid() : gamma_grid; }
};

// Per-repetition outcome of one method.
struct MethodResult {
  bool ok = false;
  std::string error;
  double width = 0.0;
  double marginal = 0.0;
  double hard_sum = 0.0;  // covered hard trajectories
  double easy_sum = 0.0;
  long hard_count = 0;
  long easy_count = 0;

  std::optional<double> hard() const {
    return hard_count > 0 ? std::optional<double>(hard_sum / hard_count) : std::nullopt;
  }
  std::optional<double> easy() const {
    return easy_count > 0 ? std::optional<double>(easy_sum / easy_count) : std::nullopt;
  }
};

// Fraction of label-matching trajectories that are fully covered; absent when
// no trajectory carries the label.
inline std::optional<double> conditional_coverage(std::span<const Label> labels,
                                                  std::span<const bool> covered, Label which) {
  if (labels.size() != covered.size())
    throw std::invalid_argument("conditional_coverage: size mismatch");
  long n = 0, hit = 0;
  for (std::size_t i = 0; i < labels.size(); ++i) {
    if (labels[i] != which) continue;
    ++n;
    if (covered[i]) ++hit;
  }
  if (n == 0) return std::nullopt;
  return static_cast<double>(hit) / static_cast<double>(n);
}

struct MetricStats {
  double mean = 0.0;
  double se = 0.0;
  bool present = false;
};

struct ReportCell {
  double sweep_value = 0.0;
  std::string method;
  bool ok = false;
  std::string error;
  int reps_used = 0;
  MetricStats width, marginal, hard, easy;
};

struct ExperimentReport {
  std::uint64_t config_hash = 0;
  std::uint64_t seed = 0;
  std::vector<ReportCell> cells;
  std::vector<GammaCandidateReport> tuning_table;  // first repetition, first sweep point
  std::string bands_sample_csv;

  bool any_failure() const {
    for (const ReportCell& c : cells)
      if (!c.ok) return true;
    return false;
  }
};

namespace detail {

inline MetricStats aggregate(std::span<const double> values) {
  MetricStats s;
  if (values.empty()) return s;
  s.present = true;
  double sum = 0.0;
  for (double v : values) sum += v;
  s.mean = sum / static_cast<double>(values.size());
  if (values.size() > 1) {
    double ss = 0.0;
    for (double v : values) ss += (v - s.mean) * (v - s.mean);
    const double sd = std::sqrt(ss / static_cast<double>(values.size() - 1));
    s.se = sd / std::sqrt(static_cast<double>(values.size()));
  }
  return s;
}

inline ExperimentConfig at_sweep_point(ExperimentConfig cfg, const std::string& var, double value) {
  if (var == "none") return cfg;
  if (var == "n")
    cfg.n = static_cast<std::size_t>(value);
  else if (var == "T")
    cfg.data.horizon = static_cast<int>(value);
  else if (var == "d")
    cfg.data.dim = static_cast<int>(value);
  else if (var == "delta")
    cfg.data.delta = value;
  else if (var == "delta_test")
    cfg.delta_test = value;
  else if (var == "noise")
    cfg.data.noise_scale = value;
  else if (var == "H")
    cfg.steps_ahead = static_cast<int>(value);
  else
    throw std::invalid_argument("unknown sweep variable '" + var + "'");
  return cfg;
}

// Everything a repetition prepares once and shares across methods.
struct RepContext {
  TrajectorySet train, cal1, cal2, cal_full, test;
  ArForecaster forecaster;
  std::vector<WarmStart> warm;
  std::uint64_t seed = 0;
  std::map<int, GammaSelection> tuning_cache;  // keyed by tracker/score combination
};

inline RepContext prepare_repetition(const ExperimentConfig& cfg, int rep) {
  RepContext ctx;
  ctx.seed = mix_seed(cfg.seed, 0xE0, static_cast<std::uint64_t>(rep));
  ArConfig dcfg = cfg.data;
  dcfg.seed = ctx.seed;
  const TrajectorySet data = generate_ar(dcfg, cfg.n, 0);
  ArConfig tcfg = dcfg;
  if (cfg.delta_test >= 0.0) tcfg.delta = cfg.delta_test;
  const TrajectorySet test_raw = generate_ar(tcfg, cfg.test_n, 1);

  SplitResult split = split_dataset(data, cfg.train_frac, cfg.cal1_frac, ctx.seed);
  const Normalizer norm = Normalizer::fit(split.train);
  ctx.train = norm.map(split.train);
  ctx.cal1 = norm.map(split.cal1);
  ctx.cal2 = norm.map(split.cal2);
  ctx.cal_full = merge(ctx.cal1, ctx.cal2);
  ctx.test = norm.map(test_raw);
  ctx.forecaster = ArForecaster::fit(ctx.train);
  ctx.warm = training_warm_starts(ctx.forecaster, ctx.train, cfg.alpha);
  return ctx;
}

inline constexpr std::uint64_t kTestUidOffset = 1u << 20;

template <class BandFn, class CoverFn, class WidthFn>
MethodResult score_test_set(const TrajectorySet& test, BandFn&& band_of, CoverFn&& covers,
                            WidthFn&& width_of) {
  MethodResult r;
  double width_sum = 0.0;
  long covered_count = 0;
  for (std::size_t i = 0; i < test.size(); ++i) {
    const Trajectory& y = test.items[i];
    const auto band = band_of(y, i);
    const bool cov = covers(band, y);
    width_sum += width_of(band);
    covered_count += cov ? 1 : 0;
    if (y.label() == Label::Hard) {
      ++r.hard_count;
      r.hard_sum += cov ? 1.0 : 0.0;
    } else if (y.label() == Label::Easy) {
      ++r.easy_count;
      r.easy_sum += cov ? 1.0 : 0.0;
    }
  }
  r.width = width_sum / static_cast<double>(test.size());
  r.marginal = static_cast<double>(covered_count) / static_cast<double>(test.size());
  r.ok = true;
  return r;
}

inline const GammaSelection& cached_split_selection(const ExperimentConfig& cfg, RepContext& ctx) {
  const int key = static_cast<int>(cfg.score) * 2 + static_cast<int>(cfg.tracker);
  auto it = ctx.tuning_cache.find(key);
  if (it != ctx.tuning_cache.end()) return it->second;
  CafhtSettings s;
  s.alpha = cfg.alpha;
  s.score = cfg.score;
  s.tracker = cfg.tracker;
  GammaSelection sel =
      cfg.steps_ahead > 1
          ? select_gamma_split_multistep(ctx.forecaster, ctx.cal1, cfg.grid(), s, cfg.steps_ahead,
                                         ctx.warm, mix_seed(ctx.seed, 0x71))
          : select_gamma_split(ctx.forecaster, ctx.cal1, cfg.grid(), s, ctx.warm,
                               mix_seed(ctx.seed, 0x71));
  return ctx.tuning_cache.emplace(key, std::move(sel)).first->second;
}

struct SampleCapture {
  std::vector<GammaCandidateReport> tuning_table;
  std::string bands_csv;
};

inline MethodResult evaluate_method(const ExperimentConfig& cfg, RepContext& ctx,
                                    const std::string& method, SampleCapture* capture) {
  CafhtSettings s;
  s.alpha = cfg.alpha;
  s.score = cfg.score;
  s.tracker = cfg.tracker;

  if (method == "cafht") {
    if (cfg.steps_ahead > 1) {
      double gamma;
      if (cfg.tuning == TuningMode::Split) {
        gamma = cached_split_selection(cfg, ctx).gamma;
      } else {
        throw std::runtime_error("cafht: theory tuning is single-step only");
      }
      s.gamma = gamma;
      const MultiStepCalibrated cp = calibrate_multistep(ctx.forecaster, ctx.cal2, s,
                                                         cfg.steps_ahead, ctx.warm,
                                                         mix_seed(ctx.seed, 0xCA));
      return score_test_set(
          ctx.test,
          [&](const Trajectory& y, std::size_t i) { return cp.predict(y, kTestUidOffset + i); },
          [](const MultiStepBand& b, const Trajectory& y) { return covers_multistep(b, y); },
          [](const MultiStepBand& b) { return b.average_width(); });
    }
    CalibratedPredictor cp = [&] {
      if (cfg.tuning == TuningMode::Theory) {
        GammaSelection sel;
        CalibratedPredictor p = calibrate_theory(ctx.forecaster, ctx.cal_full, cfg.grid(), s,
                                                 ctx.warm, mix_seed(ctx.seed, 0xCA), &sel);
        if (capture) capture->tuning_table = sel.table;
        return p;
      }
      const GammaSelection& sel = cached_split_selection(cfg, ctx);
      if (capture) capture->tuning_table = sel.table;
      s.gamma = sel.gamma;
      return calibrate(ctx.forecaster, ctx.cal2, s, ctx.warm, mix_seed(ctx.seed, 0xCA));
    }();
    MethodResult r = score_test_set(
        ctx.test,
        [&](const Trajectory& y, std::size_t i) { return cp.predict(y, kTestUidOffset + i); },
        [](const PredictionBand& b, const Trajectory& y) { return covers_simultaneously(b, y); },
        [](const PredictionBand& b) { return band_width_stats(b); });
    if (capture) {
      std::ostringstream os;
      os << band_csv_header() << ",value\n";
      const std::size_t count = std::min<std::size_t>(3, ctx.test.size());
      for (std::size_t i = 0; i < count; ++i) {
        const Trajectory& y = ctx.test.items[i];
        const PredictionBand band = cp.predict(y, kTestUidOffset + i);
        for (int t = 1; t <= band.horizon(); ++t)
          for (int j = 0; j < band.dim(); ++j)
            os << i << "," << t << "," << j << "," << detail::format_double(band.at(t, j).lo) << ","
               << detail::format_double(band.at(t, j).hi) << ","
               << detail::format_double(y.at(t, j)) << "\n";
      }
      capture->bands_csv = os.str();
    }
    return r;
  }

  if (method == "aci") {
    if (cfg.steps_ahead > 1) throw std::runtime_error("aci: single-step only");
    s.gamma = cached_split_selection(cfg, ctx).gamma;
    return score_test_set(
        ctx.test,
        [&](const Trajectory& y, std::size_t i) {
          return run_aci_band(ctx.forecaster, y, s.adaptive(), ctx.warm,
                              mix_seed(mix_seed(ctx.seed, 0xCA), kTestUidOffset + i));
        },
        [](const PredictionBand& b, const Trajectory& y) { return covers_simultaneously(b, y); },
        [](const PredictionBand& b) { return band_width_stats(b); });
  }

  if (method == "cfrnn") {
    if (cfg.steps_ahead > 1) throw std::runtime_error("cfrnn: single-step only");
    const CfrnnModel model = cfrnn_fit(ctx.forecaster, ctx.cal_full, cfg.alpha);
    return score_test_set(
        ctx.test,
        [&](const Trajectory& y, std::size_t) { return cfrnn_predict(ctx.forecaster, model, y); },
        [](const PredictionBand& b, const Trajectory& y) { return covers_simultaneously(b, y); },
        [](const PredictionBand& b) { return band_width_stats(b); });
  }

  if (method == "nctp") {
    if (cfg.steps_ahead > 1) {
      const MultiStepNctp model = nctp_fit_multistep(ctx.forecaster, ctx.train, ctx.cal_full,
                                                     cfg.alpha, cfg.steps_ahead);
      return score_test_set(
          ctx.test,
          [&](const Trajectory& y, std::size_t) {
            return nctp_predict_multistep(ctx.forecaster, model, y);
          },
          [](const MultiStepBand& b, const Trajectory& y) { return covers_multistep(b, y); },
          [](const MultiStepBand& b) { return b.average_width(); });
    }
    const NctpModel model = nctp_fit(ctx.forecaster, ctx.train, ctx.cal_full, cfg.alpha);
    return score_test_set(
        ctx.test,
        [&](const Trajectory& y, std::size_t) { return nctp_predict(ctx.forecaster, model, y); },
        [](const PredictionBand& b, const Trajectory& y) { return covers_simultaneously(b, y); },
        [](const PredictionBand& b) { return band_width_stats(b); });
  }

  throw std::invalid_argument("unknown method '" + method + "'");
}

}  // namespace detail

// One repetition at one sweep point: fresh data, fit, tune, calibrate, and
// evaluate every configured method. Fully determined by (config, rep).
inline std::vector<MethodResult> run_single_repetition(const ExperimentConfig& cfg, int rep,
                                                       detail::SampleCapture* capture = nullptr) {
  detail::RepContext ctx = detail::prepare_repetition(cfg, rep);
  std::vector<MethodResult> out;
  out.reserve(cfg.methods.size());
  for (const std::string& m : cfg.methods) {
    try {
      out.push_back(detail::evaluate_method(cfg, ctx, m, m == "cafht" ? capture : nullptr));
    } catch (const std::exception& e) {
      MethodResult r;
      r.ok = false;
      r.error = e.what();
      out.push_back(std::move(r));
    }
  }
  return out;
}

inline std::uint64_t fnv1a(const std::string& s) {
  std::uint64_t h = 1469598103934665603ULL;
  for (unsigned char c : s) {
    h ^= c;
    h *= 1099511628211ULL;
  }
  return h;
}

// Canonical one-line-per-key form; hashed into report provenance headers.
inline std::string serialize_config(const ExperimentConfig& cfg) {
  std::ostringstream os;
  os << "ar.profile=" << (cfg.data.profile == NoiseProfile::Dynamic ? "dynamic" : "static") << "\n"
     << "ar.T=" << cfg.data.horizon << "\n"
     << "ar.d=" << cfg.data.dim << "\n"
     << "ar.delta=" << detail::format_double(cfg.data.delta) << "\n"
     << "ar.k=" << detail::format_double(cfg.data.hard_multiplier) << "\n"
     << "ar.noise_scale=" << detail::format_double(cfg.data.noise_scale) << "\n"
     << "ar.seed=" << cfg.data.seed << "\n"
     << "alpha=" << detail::format_double(cfg.alpha) << "\n"
     << "n=" << cfg.n << "\n"
     << "test_n=" << cfg.test_n << "\n"
     << "delta_test=" << detail::format_double(cfg.delta_test) << "\n"
     << "train_frac=" << detail::format_double(cfg.train_frac) << "\n"
     << "cal1_frac=" << detail::format_double(cfg.cal1_frac) << "\n"
     << "reps=" << cfg.reps << "\n"
     << "steps_ahead=" << cfg.steps_ahead << "\n"
     << "seed=" << cfg.seed << "\n"
     << "score=" << (cfg.score == ScoreKind::Multiplicative ? "multiplicative" : "additive") << "\n"
     << "tracker=" << (cfg.tracker == TrackerKind::Pid ? "pid" : "aci") << "\n"
     << "tuning=" << (cfg.tuning == TuningMode::Theory ? "theory" : "split") << "\n";
  os << "methods=";
  for (std::size_t i = 0; i < cfg.methods.size(); ++i) os << (i ? "," : "") << cfg.methods[i];
  os << "\nsweep.variable=" << cfg.sweep_variable << "\nsweep.values=";
  for (std::size_t i = 0; i < cfg.sweep_values.size(); ++i)
    os << (i ? "," : "") << detail::format_double(cfg.sweep_values[i]);
  os << "\ngamma_grid=";
  const std::vector<double> g = cfg.grid();
  for (std::size_t i = 0; i < g.size(); ++i) os << (i ? "," : "") << detail::format_double(g[i]);
  os << "\n";
  return os.str();
}

inline ExperimentReport run_experiment(const ExperimentConfig& cfg) {
  if (cfg.reps < 1) throw std::invalid_argument("experiment: reps must be >= 1");
  if (!(cfg.alpha > 0.0 && cfg.alpha < 1.0)) throw std::invalid_argument("experiment: alpha must lie in (0, 1)");
  check_gamma_grid(cfg.grid());

  std::vector<double> points = cfg.sweep_values;
  if (cfg.sweep_variable == "none" || points.empty()) points = {0.0};

  ExperimentReport report;
  report.seed = cfg.seed;
  report.config_hash = fnv1a(serialize_config(cfg));

  for (std::size_t pi = 0; pi < points.size(); ++pi) {
    const ExperimentConfig pcfg = detail::at_sweep_point(cfg, cfg.sweep_variable, points[pi]);
    std::vector<std::vector<MethodResult>> results(pcfg.reps);
    std::vector<detail::SampleCapture> captures(pcfg.reps);
    parallel_for(pcfg.reps, cfg.threads, [&](std::size_t rep) {
      results[rep] = run_single_repetition(pcfg, static_cast<int>(rep),
                                           pi == 0 && rep == 0 ? &captures[0] : nullptr);
    });
    if (pi == 0) {
      report.tuning_table = captures[0].tuning_table;
      report.bands_sample_csv = captures[0].bands_csv;
    }

    for (std::size_t mi = 0; mi < pcfg.methods.size(); ++mi) {
      ReportCell cell;
      cell.sweep_value = points[pi];
      cell.method = pcfg.methods[mi];
      std::vector<double> widths, marginals, hards, easys;
      for (int rep = 0; rep < pcfg.reps; ++rep) {
        const MethodResult& r = results[rep][mi];
        if (!r.ok) {
          if (cell.error.empty()) cell.error = r.error;
          continue;
        }
        ++cell.reps_used;
        widths.push_back(r.width);
        marginals.push_back(r.marginal);
        if (const auto h = r.hard()) hards.push_back(*h);
        if (const auto e = r.easy()) easys.push_back(*e);
      }
      cell.ok = cell.error.empty() && cell.reps_used == pcfg.reps;
      cell.width = detail::aggregate(widths);
      cell.marginal = detail::aggregate(marginals);
      cell.hard = detail::aggregate(hards);
      cell.easy = detail::aggregate(easys);
      report.cells.push_back(std::move(cell));
    }
  }
  return report;
}

}  // namespace cafht

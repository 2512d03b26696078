// Conformalization layer: trajectory conformity scores, the calibration
// quantile, and online test-time band construction.
#pragma once

#include <cstdint>
#include <span>
#include <vector>

#include "cafht/adaptive.hpp"
#include "cafht/core.hpp"
#include "cafht/forecaster.hpp"
#include "cafht/rng.hpp"

namespace cafht {

enum class ScoreKind { Additive, Multiplicative };
enum class Aggregation { LInf, L2 };

// Floor applied to interval widths before dividing in multiplicative scores;
// the same floored width is used when expanding, which keeps the
// score/coverage duality exact.
inline constexpr double kWidthFloor = 1e-8;

namespace detail {

inline double positive_part(double x) { return x > 0.0 ? x : 0.0; }

inline double cell_margin(const Interval& iv, double y) {
  return std::max(positive_part(iv.lo - y), positive_part(y - iv.hi));
}

inline double floored_width(const Interval& iv, double floor) {
  const double w = iv.width();
  return w > floor ? w : floor;
}

}  // namespace detail

// Largest margin by which the band must be expanded in both directions to
// cover the whole trajectory. Zero iff the trajectory is already covered.
// For d > 1 the per-dimension margins are combined by the chosen aggregation:
// LInf takes their maximum, L2 the root of their squared sum.
inline double additive_score(const PredictionBand& band, const Trajectory& traj,
                             Aggregation agg = Aggregation::LInf) {
  check_shapes(band, traj);
  const int d = band.dim();
  std::vector<double> per_dim(d, 0.0);
  for (int t = 1; t <= band.horizon(); ++t)
    for (int j = 0; j < d; ++j)
      per_dim[j] = std::max(per_dim[j], detail::cell_margin(band.at(t, j), traj.at(t, j)));
  if (agg == Aggregation::LInf) {
    double s = 0.0;
    for (double v : per_dim) s = std::max(s, v);
    return s;
  }
  double ss = 0.0;
  for (double v : per_dim) ss += v * v;
  return std::sqrt(ss);
}

// Margins relative to the local interval width, so wider adaptive intervals
// tolerate proportionally larger excursions.
inline double multiplicative_score(const PredictionBand& band, const Trajectory& traj,
                                   double width_floor = kWidthFloor) {
  check_shapes(band, traj);
  double s = 0.0;
  for (int t = 1; t <= band.horizon(); ++t)
    for (int j = 0; j < band.dim(); ++j) {
      const Interval& iv = band.at(t, j);
      const double m = detail::cell_margin(iv, traj.at(t, j));
      if (m > 0.0) s = std::max(s, m / detail::floored_width(iv, width_floor));
    }
  return s;
}

struct CafhtSettings {
  double alpha = 0.1;
  double gamma = 0.05;
  ScoreKind score = ScoreKind::Additive;
  Aggregation aggregation = Aggregation::LInf;
  TrackerKind tracker = TrackerKind::Aci;
  double alpha_aci = -1.0;  // < 0: use alpha
  double width_floor = kWidthFloor;

  double effective_alpha_aci() const { return alpha_aci < 0.0 ? alpha : alpha_aci; }
  AdaptiveSettings adaptive() const { return {gamma, effective_alpha_aci(), tracker}; }
};

inline double score_band(const PredictionBand& band, const Trajectory& traj, const CafhtSettings& s) {
  if (s.score == ScoreKind::Multiplicative) return multiplicative_score(band, traj, s.width_floor);
  return additive_score(band, traj, s.aggregation);
}

// Calibration conformity scores together with the configuration they were
// computed under.
struct ScoreSet {
  std::vector<double> scores;  // ascending
  double gamma = 0.0;
  ScoreKind kind = ScoreKind::Additive;
  TrackerKind tracker = TrackerKind::Aci;

  double quantile(double level) const { return empirical_quantile(scores, level); }
};

// Expand one adaptive interval by the conformal margin.
inline Interval expand_interval(const Interval& iv, double margin, ScoreKind kind, double width_floor) {
  if (margin == 0.0) return iv;
  if (!std::isfinite(margin)) return Interval::everything();
  if (kind == ScoreKind::Additive) return {iv.lo - margin, iv.hi + margin};
  if (!iv.bounded()) return Interval::everything();
  const double pad = margin * detail::floored_width(iv, width_floor);
  return {iv.lo - pad, iv.hi + pad};
}

// Frozen output of calibration: the chosen learning rate, the conformal
// margin, and everything needed to reproduce warm starts at test time.
class CalibratedPredictor {
 public:
  CalibratedPredictor(const Forecaster& f, CafhtSettings settings, std::vector<WarmStart> warm,
                      double margin, std::uint64_t warm_seed, double alpha_effective)
      : forecaster_(&f), settings_(settings), warm_(std::move(warm)), margin_(margin),
        warm_seed_(warm_seed), alpha_effective_(alpha_effective) {}

  const CafhtSettings& settings() const { return settings_; }
  double margin() const { return margin_; }
  double alpha_effective() const { return alpha_effective_; }
  std::uint64_t warm_seed() const { return warm_seed_; }
  const std::vector<WarmStart>& warm() const { return warm_; }
  const Forecaster& forecaster() const { return *forecaster_; }

  // Raw adaptive band for a trajectory stream; uid selects the warm-start
  // stream and must be reused to reproduce a band.
  PredictionBand raw_band(const Trajectory& traj, std::uint64_t uid) const {
    return run_aci_band(*forecaster_, traj, settings_.adaptive(), warm_, mix_seed(warm_seed_, uid));
  }

  PredictionBand expand(const PredictionBand& raw) const {
    PredictionBand out(raw.horizon(), raw.dim());
    for (int t = 1; t <= raw.horizon(); ++t)
      for (int j = 0; j < raw.dim(); ++j)
        out.at(t, j) = expand_interval(raw.at(t, j), margin_, settings_.score, settings_.width_floor);
    return out;
  }

  // The calibrated band, constructed one step at a time: each interval depends
  // only on observations strictly before its target step.
  PredictionBand predict(const Trajectory& traj, std::uint64_t uid) const {
    return expand(raw_band(traj, uid));
  }

  double score(const Trajectory& traj, std::uint64_t uid) const {
    return score_band(raw_band(traj, uid), traj, settings_);
  }

 private:
  const Forecaster* forecaster_;
  CafhtSettings settings_;
  std::vector<WarmStart> warm_;
  double margin_;
  std::uint64_t warm_seed_;
  double alpha_effective_;
};

namespace detail {

// Scores each calibration trajectory at the fixed gamma in `settings`.
inline ScoreSet calibration_scores(const Forecaster& f, const TrajectorySet& cal,
                                   const CafhtSettings& settings, std::span<const WarmStart> warm,
                                   std::uint64_t seed) {
  cal.validate();
  ScoreSet set;
  set.gamma = settings.gamma;
  set.kind = settings.score;
  set.tracker = settings.tracker;
  set.scores.reserve(cal.size());
  for (std::size_t i = 0; i < cal.size(); ++i) {
    const PredictionBand band =
        run_aci_band(f, cal.items[i], settings.adaptive(), warm, mix_seed(seed, i));
    set.scores.push_back(score_band(band, cal.items[i], settings));
  }
  std::sort(set.scores.begin(), set.scores.end());
  return set;
}

inline CalibratedPredictor calibrate_at_level(const Forecaster& f, const TrajectorySet& cal,
                                              const CafhtSettings& settings,
                                              std::span<const WarmStart> warm, std::uint64_t seed,
                                              double alpha_effective) {
  const ScoreSet set = calibration_scores(f, cal, settings, warm, seed);
  const double margin = set.quantile(1.0 - alpha_effective);
  return CalibratedPredictor(f, settings, {warm.begin(), warm.end()}, margin, seed, alpha_effective);
}

}  // namespace detail

// Runs the adaptive band over every calibration trajectory, scores it, and
// sets the conformal margin to the empirical (1-alpha)-quantile of the scores.
// Calibration trajectories must be disjoint from the data used to fit `f` and
// to select gamma.
inline CalibratedPredictor calibrate(const Forecaster& f, const TrajectorySet& cal,
                                     const CafhtSettings& settings, std::span<const WarmStart> warm,
                                     std::uint64_t seed) {
  return detail::calibrate_at_level(f, cal, settings, warm, seed, settings.alpha);
}

}  // namespace cafht

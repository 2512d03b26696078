// Online per-trajectory adaptive trackers: ACI level tracking and simplified
// conformal PID quantile tracking, with warm starts.
#pragma once

#include <algorithm>
#include <cstdint>
#include <optional>
#include <span>
#include <vector>

#include "cafht/core.hpp"
#include "cafht/forecaster.hpp"
#include "cafht/rng.hpp"

namespace cafht {

enum class TrackerKind { Aci, Pid };

// Warm-start specification for one dimension, derived from training residuals.
struct WarmStart {
  int count = 5;               // artificial scores injected before step 1
  double r_min = 0.0;          // training residual range for the ACI draws
  double r_max = 0.0;
  double initial_level = 0.1;  // starting alpha of the ACI track
  double pid_q0 = 0.0;         // starting radius of the PID track

  // The ACI warm scores are uniform draws on [r_min, r_max].
  std::vector<double> draw_scores(Rng& rng) const {
    std::vector<double> s(count);
    for (double& v : s) v = rng.uniform(r_min, r_max);
    return s;
  }
};

// Builds a warm start from a non-empty set of training residuals. The PID
// track starts at the empirical (1-alpha)-quantile of the residuals.
inline WarmStart make_warm_start(std::span<const double> train_residuals, double alpha) {
  if (train_residuals.empty()) throw std::invalid_argument("warm start: empty residual set");
  WarmStart w;
  w.r_min = kInf;
  w.r_max = -kInf;
  for (double r : train_residuals) {
    w.r_min = std::min(w.r_min, r);
    w.r_max = std::max(w.r_max, r);
  }
  std::vector<double> sorted(train_residuals.begin(), train_residuals.end());
  std::sort(sorted.begin(), sorted.end());
  w.pid_q0 = order_stat_capped(sorted, 1.0 - alpha);
  return w;
}

// One warm start per dimension, from the forecaster's training residuals.
inline std::vector<WarmStart> training_warm_starts(const Forecaster& f, const TrajectorySet& train,
                                                   double alpha) {
  const std::vector<std::vector<double>> res = abs_residuals_per_dim(f, train);
  std::vector<WarmStart> out;
  out.reserve(res.size());
  for (const std::vector<double>& r : res) out.push_back(make_warm_start(r, alpha));
  return out;
}

// ACI track for a single dimension. The level alpha_t evolves unclamped; only
// the quantile lookup clamps the level, with level <= 0 giving a width-0
// interval and level >= 1 an infinite radius.
class AciTracker {
 public:
  AciTracker(double gamma, double alpha_target, const WarmStart& warm, Rng& rng)
      : gamma_(gamma), alpha_target_(alpha_target), alpha_(warm.initial_level) {
    scores_ = warm.draw_scores(rng);
    std::sort(scores_.begin(), scores_.end());
  }

  Interval emit(double prediction) {
    last_pred_ = prediction;
    last_interval_ = Interval::around(prediction, radius());
    return last_interval_;
  }

  void observe(double value) { observe_against(value, last_pred_, last_interval_); }

  // Update against an arbitrary earlier emission (multi-step tracks observe
  // against the interval issued several steps ago).
  void observe_against(double value, double prediction_then, const Interval& interval_then) {
    add_score(std::abs(value - prediction_then));
    const double err = interval_then.contains(value) ? 0.0 : 1.0;
    alpha_ += gamma_ * (alpha_target_ - err);
    last_err_ = err;
  }

  double radius() const {
    const double level = 1.0 - alpha_;
    if (level <= 0.0) return 0.0;
    if (level >= 1.0) return kInf;
    return order_stat_capped(scores_, level);
  }

  double alpha() const { return alpha_; }
  double last_err() const { return last_err_; }
  std::size_t score_count() const { return scores_.size(); }

 private:
  void add_score(double s) { scores_.insert(std::upper_bound(scores_.begin(), scores_.end(), s), s); }

  double gamma_;
  double alpha_target_;
  double alpha_;
  std::vector<double> scores_;  // ascending
  double last_pred_ = 0.0;
  Interval last_interval_{};
  double last_err_ = 0.0;
};

// Quantile-tracking PID variant: the radius itself takes online subgradient
// steps q += gamma * (err - alpha), clamped at 0.
class PidTracker {
 public:
  PidTracker(double gamma, double alpha_target, const WarmStart& warm, Rng&)
      : gamma_(gamma), alpha_target_(alpha_target),
        q_(std::isfinite(warm.pid_q0) ? warm.pid_q0 : warm.r_max) {}

  Interval emit(double prediction) {
    last_interval_ = Interval::around(prediction, q_);
    return last_interval_;
  }

  void observe(double value) { observe_against(value, 0.0, last_interval_); }

  void observe_against(double value, double, const Interval& interval_then) {
    const double err = interval_then.contains(value) ? 0.0 : 1.0;
    q_ = std::max(0.0, q_ + gamma_ * (err - alpha_target_));
    last_err_ = err;
  }

  double radius() const { return q_; }
  double quantile() const { return q_; }
  double last_err() const { return last_err_; }

 private:
  double gamma_;
  double alpha_target_;
  double q_;
  Interval last_interval_{};
  double last_err_ = 0.0;
};

// Convenience form of one tracker step: observe the previously targeted value
// (when present), then emit the interval for the next prediction.
template <class Tracker>
Interval tracker_step(Tracker& tr, double prediction, std::optional<double> observed_prev) {
  if (observed_prev) tr.observe(*observed_prev);
  return tr.emit(prediction);
}

struct AdaptiveSettings {
  double gamma = 0.05;
  double alpha_aci = 0.1;
  TrackerKind tracker = TrackerKind::Aci;
};

// One row per step of a tracker trace: state when emitting for target t plus
// the err outcome once Y_t is revealed.
struct TraceRow {
  int t = 0;
  double state = 0.0;  // alpha_t (ACI) or q_t (PID)
  double radius = 0.0;
  int err = 0;
};

namespace detail {

template <class Tracker>
PredictionBand run_band(const Forecaster& f, const Trajectory& traj, const AdaptiveSettings& s,
                        std::span<const WarmStart> warm, std::uint64_t warm_seed,
                        std::vector<TraceRow>* trace) {
  const int d = traj.dim();
  const int T = traj.horizon();
  if (static_cast<int>(warm.size()) != d)
    throw std::invalid_argument("warm start count must match trajectory dimension");

  std::vector<Tracker> tracks;
  tracks.reserve(d);
  for (int j = 0; j < d; ++j) {
    Rng rng(mix_seed(warm_seed, 1, static_cast<std::uint64_t>(j)));
    tracks.emplace_back(s.gamma, s.alpha_aci, warm[j], rng);
  }

  PredictionBand band(T, d);
  for (int t = 1; t <= T; ++t) {
    const std::vector<double> pred = f.predict(traj, t, 1);
    for (int j = 0; j < d; ++j) {
      Tracker& tr = tracks[j];
      double state;
      if constexpr (std::is_same_v<Tracker, AciTracker>)
        state = tr.alpha();
      else
        state = tr.quantile();
      band.at(t, j) = tr.emit(pred[j]);
      if (trace && j == 0)
        trace->push_back({t, state, band.at(t, j).width() / 2.0, 0});
      tr.observe(traj.at(t, j));
      if (trace && j == 0) trace->back().err = static_cast<int>(tr.last_err());
    }
  }
  return band;
}

}  // namespace detail

// Raw adaptive band: for t = 1..T, predict from the prefix Y_0..Y_{t-1}, emit
// a per-dimension interval, then reveal Y_t. Dimensions evolve independently.
inline PredictionBand run_aci_band(const Forecaster& f, const Trajectory& traj,
                                   const AdaptiveSettings& s, std::span<const WarmStart> warm,
                                   std::uint64_t warm_seed, std::vector<TraceRow>* trace = nullptr) {
  if (s.tracker == TrackerKind::Pid)
    return detail::run_band<PidTracker>(f, traj, s, warm, warm_seed, trace);
  return detail::run_band<AciTracker>(f, traj, s, warm, warm_seed, trace);
}

}  // namespace cafht

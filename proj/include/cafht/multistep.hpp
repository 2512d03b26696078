// Multiple-step-ahead extension: H parallel lagged adaptive tracks,
// intersection-style calibration scores, and per-horizon calibrated bands.
#pragma once

#include <cstdint>
#include <vector>

#include "cafht/cafht.hpp"
#include "cafht/tuning.hpp"

namespace cafht {

// Bands emitted over a trajectory stream: at emission index e (after
// observing Y_0..Y_e) one interval per lag tau targets Y_{e+tau}. Cells with
// e + tau > T do not exist.
class MultiStepBand {
 public:
  MultiStepBand(int horizon, int steps_ahead, int dim)
      : horizon_(horizon), steps_ahead_(steps_ahead), dim_(dim),
        cells_(static_cast<std::size_t>(horizon) * steps_ahead * dim) {
    if (horizon < 1 || steps_ahead < 1 || dim < 1)
      throw std::invalid_argument("multi-step band: horizon, steps and dim must be positive");
  }

  int horizon() const { return horizon_; }
  int steps_ahead() const { return steps_ahead_; }
  int dim() const { return dim_; }

  bool valid(int e, int tau) const {
    return e >= 0 && e < horizon_ && tau >= 1 && tau <= steps_ahead_ && e + tau <= horizon_;
  }

  const Interval& at(int e, int tau, int j) const { return cells_[index(e, tau, j)]; }
  Interval& at(int e, int tau, int j) { return cells_[index(e, tau, j)]; }

  // Mean reported width over existing cells.
  double average_width() const {
    double sum = 0.0;
    std::size_t count = 0;
    for (int e = 0; e < horizon_; ++e)
      for (int tau = 1; tau <= steps_ahead_ && e + tau <= horizon_; ++tau)
        for (int j = 0; j < dim_; ++j) {
          sum += reported_width(at(e, tau, j));
          ++count;
        }
    return sum / static_cast<double>(count);
  }

 private:
  std::size_t index(int e, int tau, int j) const {
    return (static_cast<std::size_t>(e) * steps_ahead_ + (tau - 1)) * dim_ + j;
  }

  int horizon_;
  int steps_ahead_;
  int dim_;
  std::vector<Interval> cells_;
};

// Raw lagged bands. Track (tau, j) keeps its own level and pool of lagged
// residuals |Y_t - Yhat^tau_{t-tau}|; its err at time t references the band it
// issued tau steps earlier. With H = 1 this reproduces run_aci_band exactly.
inline MultiStepBand run_multistep_aci(const Forecaster& f, const Trajectory& traj,
                                       const AdaptiveSettings& s, int H,
                                       std::span<const WarmStart> warm, std::uint64_t warm_seed) {
  const int d = traj.dim();
  const int T = traj.horizon();
  if (H < 1) throw std::invalid_argument("steps ahead must be >= 1");
  if (static_cast<int>(warm.size()) != d)
    throw std::invalid_argument("warm start count must match trajectory dimension");

  // Warm streams are indexed (tau, dim); tau = 1 matches the single-step run.
  std::vector<AciTracker> tracks;
  tracks.reserve(static_cast<std::size_t>(H) * d);
  for (int tau = 1; tau <= H; ++tau)
    for (int j = 0; j < d; ++j) {
      Rng rng(mix_seed(warm_seed, static_cast<std::uint64_t>(tau), static_cast<std::uint64_t>(j)));
      tracks.emplace_back(s.gamma, s.alpha_aci, warm[j], rng);
    }
  const auto track = [&](int tau, int j) -> AciTracker& {
    return tracks[static_cast<std::size_t>(tau - 1) * d + j];
  };

  MultiStepBand band(T, H, d);
  std::vector<double> preds(static_cast<std::size_t>(T) * H * d, 0.0);
  const auto pred_at = [&](int e, int tau, int j) -> double& {
    return preds[(static_cast<std::size_t>(e) * H + (tau - 1)) * d + j];
  };

  for (int e = 0; e < T; ++e) {
    // Observe Y_e against every band targeting it, oldest lag first.
    for (int tau = std::min(H, e); tau >= 1; --tau)
      for (int j = 0; j < d; ++j)
        track(tau, j).observe_against(traj.at(e, j), pred_at(e - tau, tau, j),
                                      band.at(e - tau, tau, j));
    // Emit fresh intervals for Y_{e+1}..Y_{e+H} from the prefix Y_0..Y_e.
    const int h = std::min(H, T - e);
    const std::vector<double> p = f.predict(traj, e + 1, h);
    for (int tau = 1; tau <= h; ++tau)
      for (int j = 0; j < d; ++j) {
        pred_at(e, tau, j) = p[static_cast<std::size_t>(tau - 1) * d + j];
        band.at(e, tau, j) = track(tau, j).emit(pred_at(e, tau, j));
      }
  }
  return band;
}

// True iff every existing cell covers its target value.
inline bool covers_multistep(const MultiStepBand& band, const Trajectory& traj) {
  if (band.dim() != traj.dim() || band.horizon() != traj.horizon())
    throw std::invalid_argument("multi-step band/trajectory shape mismatch");
  for (int e = 0; e < band.horizon(); ++e)
    for (int tau = 1; tau <= band.steps_ahead() && e + tau <= band.horizon(); ++tau)
      for (int j = 0; j < band.dim(); ++j)
        if (!band.at(e, tau, j).contains(traj.at(e + tau, j))) return false;
  return true;
}

// Margin of each target relative to the intersection of the up-to-H bands
// issued for it; equivalently the largest per-cell margin. Multiplicative
// scores divide each margin by its own band's (floored) width.
inline double multistep_score(const MultiStepBand& band, const Trajectory& traj, ScoreKind kind,
                              double width_floor = kWidthFloor) {
  if (band.dim() != traj.dim() || band.horizon() != traj.horizon())
    throw std::invalid_argument("multi-step band/trajectory shape mismatch");
  double s = 0.0;
  for (int t = 1; t <= band.horizon(); ++t)
    for (int tau = 1; tau <= band.steps_ahead() && t - tau >= 0; ++tau)
      for (int j = 0; j < band.dim(); ++j) {
        const Interval& iv = band.at(t - tau, tau, j);
        const double m = detail::cell_margin(iv, traj.at(t, j));
        if (m <= 0.0) continue;
        s = std::max(s, kind == ScoreKind::Multiplicative ? m / detail::floored_width(iv, width_floor) : m);
      }
  return s;
}

// Fixed-margin expansion of every emitted cell.
inline MultiStepBand expand_multistep(const MultiStepBand& raw, double margin, ScoreKind kind,
                                      double width_floor = kWidthFloor) {
  MultiStepBand out(raw.horizon(), raw.steps_ahead(), raw.dim());
  for (int e = 0; e < raw.horizon(); ++e)
    for (int tau = 1; tau <= raw.steps_ahead() && e + tau <= raw.horizon(); ++tau)
      for (int j = 0; j < raw.dim(); ++j)
        out.at(e, tau, j) = expand_interval(raw.at(e, tau, j), margin, kind, width_floor);
  return out;
}

class MultiStepCalibrated {
 public:
  MultiStepCalibrated(const Forecaster& f, CafhtSettings settings, int steps_ahead,
                      std::vector<WarmStart> warm, double margin, std::uint64_t warm_seed)
      : forecaster_(&f), settings_(settings), steps_ahead_(steps_ahead), warm_(std::move(warm)),
        margin_(margin), warm_seed_(warm_seed) {}

  double margin() const { return margin_; }
  int steps_ahead() const { return steps_ahead_; }

  MultiStepBand raw_band(const Trajectory& traj, std::uint64_t uid) const {
    return run_multistep_aci(*forecaster_, traj, settings_.adaptive(), steps_ahead_, warm_,
                             mix_seed(warm_seed_, uid));
  }

  MultiStepBand predict(const Trajectory& traj, std::uint64_t uid) const {
    return expand_multistep(raw_band(traj, uid), margin_, settings_.score, settings_.width_floor);
  }

  double score(const Trajectory& traj, std::uint64_t uid) const {
    return multistep_score(raw_band(traj, uid), traj, settings_.score, settings_.width_floor);
  }

 private:
  const Forecaster* forecaster_;
  CafhtSettings settings_;
  int steps_ahead_;
  std::vector<WarmStart> warm_;
  double margin_;
  std::uint64_t warm_seed_;
};

inline MultiStepCalibrated calibrate_multistep(const Forecaster& f, const TrajectorySet& cal,
                                               const CafhtSettings& settings, int steps_ahead,
                                               std::span<const WarmStart> warm, std::uint64_t seed) {
  cal.validate();
  std::vector<double> scores;
  scores.reserve(cal.size());
  for (std::size_t i = 0; i < cal.size(); ++i) {
    const MultiStepBand band = run_multistep_aci(f, cal.items[i], settings.adaptive(), steps_ahead,
                                                 warm, mix_seed(seed, i));
    scores.push_back(multistep_score(band, cal.items[i], settings.score, settings.width_floor));
  }
  std::sort(scores.begin(), scores.end());
  const double margin = empirical_quantile(scores, 1.0 - settings.alpha);
  return MultiStepCalibrated(f, settings, steps_ahead, {warm.begin(), warm.end()}, margin, seed);
}

// Gamma selection for the multi-step pipeline: same width-minimizing search
// as the single-step variant, over the expanded lagged bands.
inline GammaSelection select_gamma_split_multistep(const Forecaster& f, const TrajectorySet& cal1,
                                                   const std::vector<double>& grid,
                                                   const CafhtSettings& settings, int steps_ahead,
                                                   std::span<const WarmStart> warm,
                                                   std::uint64_t seed) {
  check_gamma_grid(grid);
  cal1.validate();
  GammaSelection sel;
  sel.table.reserve(grid.size());
  std::size_t best = 0;
  bool any_finite = false;
  for (std::size_t l = 0; l < grid.size(); ++l) {
    CafhtSettings s = settings;
    s.gamma = grid[l];
    const std::uint64_t cand_seed = mix_seed(seed, 7, l);
    std::vector<MultiStepBand> bands;
    bands.reserve(cal1.size());
    std::vector<double> scores;
    scores.reserve(cal1.size());
    for (std::size_t i = 0; i < cal1.size(); ++i) {
      bands.push_back(run_multistep_aci(f, cal1.items[i], s.adaptive(), steps_ahead, warm,
                                        mix_seed(cand_seed, i)));
      scores.push_back(multistep_score(bands.back(), cal1.items[i], s.score, s.width_floor));
    }
    const double qhat = empirical_quantile(scores, 1.0 - s.alpha);
    double width = 0.0;
    for (std::size_t i = 0; i < cal1.size(); ++i)
      width += expand_multistep(bands[i], qhat, s.score, s.width_floor).average_width();
    sel.table.push_back({grid[l], width / static_cast<double>(cal1.size()), qhat, false});
    if (std::isfinite(qhat)) any_finite = true;
    if (sel.table[l].avg_width < sel.table[best].avg_width) best = l;
  }
  if (!any_finite) {
    sel.degenerate = true;
    best = 0;
  }
  sel.gamma = grid[best];
  sel.table[best].selected = true;
  return sel;
}

// Multi-step variant of the normalized max-residual baseline: one sigma per
// existing (emission, lag, dimension) cell from training residuals, a single
// conformal multiplier from calibration, bands Yhat +- qhat * sigma.
struct MultiStepNctp {
  int horizon = 0;
  int steps_ahead = 0;
  int dim = 0;
  double qhat = 0.0;
  std::vector<double> sigma;

  std::size_t index(int e, int tau, int j) const {
    return (static_cast<std::size_t>(e) * steps_ahead + (tau - 1)) * dim + j;
  }
};

namespace detail {

// Predictions for every existing (e, tau, j) cell over one trajectory.
inline std::vector<double> lagged_predictions(const Forecaster& f, const Trajectory& traj, int H) {
  const int T = traj.horizon();
  const int d = traj.dim();
  std::vector<double> preds(static_cast<std::size_t>(T) * H * d, 0.0);
  for (int e = 0; e < T; ++e) {
    const int h = std::min(H, T - e);
    const std::vector<double> p = f.predict(traj, e + 1, h);
    for (int tau = 1; tau <= h; ++tau)
      for (int j = 0; j < d; ++j)
        preds[(static_cast<std::size_t>(e) * H + (tau - 1)) * d + j] =
            p[static_cast<std::size_t>(tau - 1) * d + j];
  }
  return preds;
}

}  // namespace detail

inline MultiStepNctp nctp_fit_multistep(const Forecaster& f, const TrajectorySet& train,
                                        const TrajectorySet& cal, double alpha, int H,
                                        double sigma_floor = 1e-8) {
  train.validate();
  cal.validate();
  const int T = train.horizon();
  const int d = train.dim();
  MultiStepNctp model{T, H, d, 0.0,
                      std::vector<double>(static_cast<std::size_t>(T) * H * d, sigma_floor)};

  std::vector<double> sum(model.sigma.size(), 0.0), sumsq(model.sigma.size(), 0.0);
  for (const Trajectory& y : train.items) {
    const std::vector<double> preds = detail::lagged_predictions(f, y, H);
    for (int e = 0; e < T; ++e)
      for (int tau = 1; tau <= H && e + tau <= T; ++tau)
        for (int j = 0; j < d; ++j) {
          const std::size_t c = model.index(e, tau, j);
          const double r = preds[c] - y.at(e + tau, j);
          sum[c] += r;
          sumsq[c] += r * r;
        }
  }
  const double n = static_cast<double>(train.size());
  for (int e = 0; e < T; ++e)
    for (int tau = 1; tau <= H && e + tau <= T; ++tau)
      for (int j = 0; j < d; ++j) {
        const std::size_t c = model.index(e, tau, j);
        const double mean = sum[c] / n;
        model.sigma[c] = std::max(std::sqrt(std::max(0.0, sumsq[c] / n - mean * mean)), sigma_floor);
      }

  std::vector<double> scores;
  scores.reserve(cal.size());
  for (const Trajectory& y : cal.items) {
    const std::vector<double> preds = detail::lagged_predictions(f, y, H);
    double s = 0.0;
    for (int e = 0; e < T; ++e)
      for (int tau = 1; tau <= H && e + tau <= T; ++tau)
        for (int j = 0; j < d; ++j) {
          const std::size_t c = model.index(e, tau, j);
          s = std::max(s, std::abs(preds[c] - y.at(e + tau, j)) / model.sigma[c]);
        }
    scores.push_back(s);
  }
  model.qhat = empirical_quantile(scores, 1.0 - alpha);
  return model;
}

inline MultiStepBand nctp_predict_multistep(const Forecaster& f, const MultiStepNctp& model,
                                            const Trajectory& traj) {
  if (traj.horizon() != model.horizon || traj.dim() != model.dim)
    throw std::invalid_argument("nctp multi-step: trajectory shape mismatch");
  MultiStepBand band(model.horizon, model.steps_ahead, model.dim);
  const std::vector<double> preds = detail::lagged_predictions(f, traj, model.steps_ahead);
  for (int e = 0; e < model.horizon; ++e)
    for (int tau = 1; tau <= model.steps_ahead && e + tau <= model.horizon; ++tau)
      for (int j = 0; j < model.dim; ++j) {
        const std::size_t c = model.index(e, tau, j);
        band.at(e, tau, j) = Interval::around(preds[c], model.qhat * model.sigma[c]);
      }
  return band;
}

}  // namespace cafht

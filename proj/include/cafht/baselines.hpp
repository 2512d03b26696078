// Comparison methods with simultaneous marginal coverage: a Bonferroni
// per-step band and a normalized max-residual band.
#pragma once

#include <cmath>
#include <vector>

#include "cafht/core.hpp"
#include "cafht/forecaster.hpp"

namespace cafht {

// Per-step conformal radii calibrated at level alpha/T. For d > 1 the
// per-step score is the l-inf residual over dimensions, so every dimension
// shares the step's radius (square regions) and the union bound stays over T
// terms.
struct CfrnnModel {
  int horizon = 0;
  int dim = 0;
  double alpha = 0.0;
  std::vector<double> radius;  // per step, possibly +inf
};

inline CfrnnModel cfrnn_fit(const Forecaster& f, const TrajectorySet& cal, double alpha) {
  cal.validate();
  const int T = cal.horizon();
  const int d = cal.dim();
  CfrnnModel model{T, d, alpha, std::vector<double>(T, 0.0)};
  std::vector<std::vector<double>> step_scores(T);
  for (const Trajectory& y : cal.items) {
    const std::vector<double> preds = one_step_predictions(f, y);
    for (int t = 1; t <= T; ++t) {
      double r = 0.0;
      for (int j = 0; j < d; ++j)
        r = std::max(r, std::abs(preds[static_cast<std::size_t>(t - 1) * d + j] - y.at(t, j)));
      step_scores[t - 1].push_back(r);
    }
  }
  const double level = 1.0 - alpha / static_cast<double>(T);
  for (int t = 0; t < T; ++t) model.radius[t] = empirical_quantile(step_scores[t], level);
  return model;
}

inline PredictionBand cfrnn_predict(const Forecaster& f, const CfrnnModel& model, const Trajectory& traj) {
  if (traj.horizon() != model.horizon || traj.dim() != model.dim)
    throw std::invalid_argument("cfrnn: trajectory shape mismatch");
  PredictionBand band(model.horizon, model.dim);
  for (int t = 1; t <= model.horizon; ++t) {
    const std::vector<double> p = f.predict(traj, t, 1);
    for (int j = 0; j < model.dim; ++j)
      band.at(t, j) = Interval::around(p[j], model.radius[t - 1]);
  }
  return band;
}

// Per-step, per-dimension normalization constants from training residuals and
// a single conformal multiplier from calibration scores. The constants come
// from the training split so the calibration scores stay exchangeable with a
// test score.
struct NctpModel {
  int horizon = 0;
  int dim = 0;
  double qhat = 0.0;
  std::vector<double> sigma;  // T x d, floored

  double sigma_at(int t, int j) const { return sigma[static_cast<std::size_t>(t - 1) * dim + j]; }
};

inline constexpr double kSigmaFloor = 1e-8;

inline NctpModel nctp_fit(const Forecaster& f, const TrajectorySet& train, const TrajectorySet& cal,
                          double alpha, double sigma_floor = kSigmaFloor) {
  train.validate();
  cal.validate();
  const int T = train.horizon();
  const int d = train.dim();
  NctpModel model{T, d, 0.0, std::vector<double>(static_cast<std::size_t>(T) * d, 0.0)};

  // sigma_{t,j}: standard deviation of the training residuals at (t, j).
  std::vector<double> sum(model.sigma.size(), 0.0), sumsq(model.sigma.size(), 0.0);
  for (const Trajectory& y : train.items) {
    const std::vector<double> preds = one_step_predictions(f, y);
    for (std::size_t c = 0; c < model.sigma.size(); ++c) {
      const int t = static_cast<int>(c) / d + 1;
      const int j = static_cast<int>(c) % d;
      const double r = preds[c] - y.at(t, j);
      sum[c] += r;
      sumsq[c] += r * r;
    }
  }
  const double n = static_cast<double>(train.size());
  for (std::size_t c = 0; c < model.sigma.size(); ++c) {
    const double mean = sum[c] / n;
    const double var = std::max(0.0, sumsq[c] / n - mean * mean);
    model.sigma[c] = std::max(std::sqrt(var), sigma_floor);
  }

  std::vector<double> scores;
  scores.reserve(cal.size());
  for (const Trajectory& y : cal.items) {
    const std::vector<double> preds = one_step_predictions(f, y);
    double s = 0.0;
    for (std::size_t c = 0; c < model.sigma.size(); ++c) {
      const int t = static_cast<int>(c) / d + 1;
      const int j = static_cast<int>(c) % d;
      s = std::max(s, std::abs(preds[c] - y.at(t, j)) / model.sigma[c]);
    }
    scores.push_back(s);
  }
  model.qhat = empirical_quantile(scores, 1.0 - alpha);
  return model;
}

inline PredictionBand nctp_predict(const Forecaster& f, const NctpModel& model, const Trajectory& traj) {
  if (traj.horizon() != model.horizon || traj.dim() != model.dim)
    throw std::invalid_argument("nctp: trajectory shape mismatch");
  PredictionBand band(model.horizon, model.dim);
  for (int t = 1; t <= model.horizon; ++t) {
    const std::vector<double> p = f.predict(traj, t, 1);
    for (int j = 0; j < model.dim; ++j)
      band.at(t, j) = Interval::around(p[j], model.qhat * model.sigma_at(t, j));
  }
  return band;
}

}  // namespace cafht

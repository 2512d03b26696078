// Black-box point forecaster contract, the built-in autoregressive ridge
// forecaster, and the [-1, 1] training-range normalizer.
#pragma once

#include <array>
#include <cstdint>
#include <map>
#include <span>
#include <stdexcept>
#include <vector>

#include "cafht/core.hpp"

namespace cafht {

// Contract: given the observed prefix Y_0..Y_{prefix_len-1} of a trajectory,
// produce point predictions for the next `horizon` steps (row-major
// horizon x dim). Implementations are fitted once and deterministic.
class Forecaster {
 public:
  virtual ~Forecaster() = default;
  virtual int dim() const = 0;
  virtual std::vector<double> predict(const Trajectory& traj, int prefix_len, int horizon) const = 0;
};

// Per-dimension affine map fitted on training data so mapped training values
// lie in [-1, 1]. Values outside the training range map outside [-1, 1].
class Normalizer {
 public:
  Normalizer() = default;

  static Normalizer fit(const TrajectorySet& train) {
    train.validate();
    const int d = train.dim();
    Normalizer n;
    n.shift_.assign(d, 0.0);
    n.scale_.assign(d, 1.0);
    for (int j = 0; j < d; ++j) {
      double lo = kInf, hi = -kInf;
      for (const Trajectory& y : train.items)
        for (int t = 0; t <= y.horizon(); ++t) {
          lo = std::min(lo, y.at(t, j));
          hi = std::max(hi, y.at(t, j));
        }
      n.shift_[j] = 0.5 * (hi + lo);
      n.scale_[j] = hi > lo ? 0.5 * (hi - lo) : 1.0;
    }
    return n;
  }

  int dim() const { return static_cast<int>(shift_.size()); }

  double map_value(int j, double v) const { return (v - shift_[j]) / scale_[j]; }
  double unmap_value(int j, double v) const { return shift_[j] + scale_[j] * v; }

  Trajectory map(const Trajectory& y) const {
    Trajectory out(y.dim(), y.horizon(), y.label());
    for (int t = 0; t <= y.horizon(); ++t)
      for (int j = 0; j < y.dim(); ++j) out.at(t, j) = map_value(j, y.at(t, j));
    return out;
  }

  TrajectorySet map(const TrajectorySet& s) const {
    TrajectorySet out;
    out.items.reserve(s.size());
    for (const Trajectory& y : s.items) out.items.push_back(map(y));
    return out;
  }

  Interval unmap(int j, const Interval& iv) const {
    return {unmap_value(j, iv.lo), unmap_value(j, iv.hi)};
  }

  double shift(int j) const { return shift_[j]; }
  double scale(int j) const { return scale_[j]; }
  void set(std::vector<double> shift, std::vector<double> scale) {
    shift_ = std::move(shift);
    scale_ = std::move(scale);
  }

 private:
  std::vector<double> shift_;
  std::vector<double> scale_;
};

// Per-dimension AR(p) model with intercept, fitted by ridge least squares over
// all (lag window -> next value) pairs pooled across training trajectories.
// Windows that reach before t = 0 are zero-padded on the left.
class ArForecaster final : public Forecaster {
 public:
  ArForecaster() = default;

  static ArForecaster fit(const TrajectorySet& train, int order = 3, double ridge = 1e-6) {
    train.validate();
    if (order < 1) throw std::invalid_argument("ar order must be >= 1");
    if (train.horizon() < order) throw std::invalid_argument("ar fit needs horizon >= order");
    if (ridge < 0.0) throw std::invalid_argument("ridge penalty must be >= 0");

    const int d = train.dim();
    const int p = order;
    const int n = p + 1;  // lag coefficients plus intercept
    ArForecaster f;
    f.order_ = p;
    f.ridge_ = ridge;
    f.coef_.assign(static_cast<std::size_t>(d) * p, 0.0);
    f.intercept_.assign(d, 0.0);

    std::vector<double> xtx(static_cast<std::size_t>(n) * n);
    std::vector<double> xty(n);
    std::vector<double> row(n);
    for (int j = 0; j < d; ++j) {
      std::fill(xtx.begin(), xtx.end(), 0.0);
      std::fill(xty.begin(), xty.end(), 0.0);
      for (const Trajectory& y : train.items) {
        for (int t = 1; t <= y.horizon(); ++t) {
          for (int m = 0; m < p; ++m) row[m] = t - 1 - m >= 0 ? y.at(t - 1 - m, j) : 0.0;
          row[p] = 1.0;
          for (int r = 0; r < n; ++r) {
            for (int c = r; c < n; ++c) xtx[static_cast<std::size_t>(r) * n + c] += row[r] * row[c];
            xty[r] += row[r] * y.at(t, j);
          }
        }
      }
      for (int r = 0; r < n; ++r)
        for (int c = 0; c < r; ++c)
          xtx[static_cast<std::size_t>(r) * n + c] = xtx[static_cast<std::size_t>(c) * n + r];
      // Intercept stays unpenalized.
      for (int m = 0; m < p; ++m) xtx[static_cast<std::size_t>(m) * n + m] += ridge;

      std::vector<double> beta = solve_spd(xtx, xty, n, ridge);
      for (int m = 0; m < p; ++m) f.coef_[static_cast<std::size_t>(j) * p + m] = beta[m];
      f.intercept_[j] = beta[p];
    }
    f.fitted_ = true;
    return f;
  }

  int dim() const override { return static_cast<int>(intercept_.size()); }
  int order() const { return order_; }
  double ridge() const { return ridge_; }
  double coef(int j, int m) const { return coef_[static_cast<std::size_t>(j) * order_ + m]; }
  double intercept(int j) const { return intercept_[j]; }

  // Iterated one-step prediction; beyond the first step predictions feed back
  // as pseudo-observations.
  std::vector<double> predict(const Trajectory& traj, int prefix_len, int horizon) const override {
    if (!fitted_) throw std::logic_error("forecaster is not fitted");
    if (prefix_len < 1 || prefix_len > traj.horizon() + 1)
      throw std::invalid_argument("prefix length out of range");
    if (horizon < 1) throw std::invalid_argument("prediction horizon must be >= 1");
    if (traj.dim() != dim()) throw std::invalid_argument("trajectory dimension mismatch");

    const int d = dim();
    const int p = order_;
    std::vector<double> out(static_cast<std::size_t>(horizon) * d);
    std::vector<double> window(p);
    for (int j = 0; j < d; ++j) {
      for (int m = 0; m < p; ++m) {
        const int t = prefix_len - 1 - m;
        window[m] = t >= 0 ? traj.at(t, j) : 0.0;
      }
      for (int h = 0; h < horizon; ++h) {
        double v = intercept_[j];
        for (int m = 0; m < p; ++m) v += coef(j, m) * window[m];
        out[static_cast<std::size_t>(h) * d + j] = v;
        for (int m = p - 1; m > 0; --m) window[m] = window[m - 1];
        window[0] = v;
      }
    }
    return out;
  }

  void restore(int order, double ridge, std::vector<double> coef, std::vector<double> intercept) {
    order_ = order;
    ridge_ = ridge;
    coef_ = std::move(coef);
    intercept_ = std::move(intercept);
    fitted_ = true;
  }

 private:
  static std::vector<double> solve_spd(std::vector<double> a, std::vector<double> b, int n, double ridge) {
    // Cholesky in place; a must be symmetric positive definite.
    for (int r = 0; r < n; ++r) {
      for (int c = 0; c <= r; ++c) {
        double s = a[static_cast<std::size_t>(r) * n + c];
        for (int k = 0; k < c; ++k)
          s -= a[static_cast<std::size_t>(r) * n + k] * a[static_cast<std::size_t>(c) * n + k];
        if (r == c) {
          if (s <= 1e-12) {
            if (ridge == 0.0)
              throw std::invalid_argument("ar fit: singular normal equations; use a ridge penalty > 0");
            throw std::runtime_error("ar fit: normal equations are numerically singular");
          }
          a[static_cast<std::size_t>(r) * n + c] = std::sqrt(s);
        } else {
          a[static_cast<std::size_t>(r) * n + c] = s / a[static_cast<std::size_t>(c) * n + c];
        }
      }
    }
    for (int r = 0; r < n; ++r) {
      double s = b[r];
      for (int k = 0; k < r; ++k) s -= a[static_cast<std::size_t>(r) * n + k] * b[k];
      b[r] = s / a[static_cast<std::size_t>(r) * n + r];
    }
    for (int r = n - 1; r >= 0; --r) {
      double s = b[r];
      for (int k = r + 1; k < n; ++k) s -= a[static_cast<std::size_t>(k) * n + r] * b[k];
      b[r] = s / a[static_cast<std::size_t>(r) * n + r];
    }
    return b;
  }

  int order_ = 0;
  double ridge_ = 0.0;
  std::vector<double> coef_;       // d x order
  std::vector<double> intercept_;  // d
  bool fitted_ = false;
};

// Teacher-forced one-step predictions for targets t = 1..T (row-major T x d).
inline std::vector<double> one_step_predictions(const Forecaster& f, const Trajectory& traj) {
  const int d = traj.dim();
  const int T = traj.horizon();
  std::vector<double> preds(static_cast<std::size_t>(T) * d);
  for (int t = 1; t <= T; ++t) {
    const std::vector<double> p = f.predict(traj, t, 1);
    for (int j = 0; j < d; ++j) preds[static_cast<std::size_t>(t - 1) * d + j] = p[j];
  }
  return preds;
}

// Absolute one-step residuals pooled over a set, grouped by dimension.
inline std::vector<std::vector<double>> abs_residuals_per_dim(const Forecaster& f, const TrajectorySet& s) {
  s.validate();
  const int d = s.dim();
  std::vector<std::vector<double>> res(d);
  for (const Trajectory& y : s.items) {
    const std::vector<double> preds = one_step_predictions(f, y);
    for (int t = 1; t <= y.horizon(); ++t)
      for (int j = 0; j < d; ++j)
        res[j].push_back(std::abs(preds[static_cast<std::size_t>(t - 1) * d + j] - y.at(t, j)));
  }
  return res;
}

// Precomputed predictions from an external model: for each trajectory id, the
// H-step-ahead prediction made at time t for target t + tau.
class ExternalForecasts {
 public:
  void add(std::int64_t traj_id, int t, int tau, std::span<const double> value) {
    auto& m = table_[traj_id];
    m[key(t, tau)] = std::vector<double>(value.begin(), value.end());
    dim_ = static_cast<int>(value.size());
  }

  bool has(std::int64_t traj_id) const { return table_.count(traj_id) > 0; }
  int dim() const { return dim_; }

  const std::vector<double>& lookup(std::int64_t traj_id, int t, int tau) const {
    const auto it = table_.find(traj_id);
    if (it == table_.end()) throw std::invalid_argument("external forecasts: unknown trajectory id");
    const auto jt = it->second.find(key(t, tau));
    if (jt == it->second.end())
      throw std::invalid_argument("external forecasts: missing prediction for (t=" + std::to_string(t) +
                                  ", tau=" + std::to_string(tau) + ")");
    return jt->second;
  }

 private:
  static std::int64_t key(int t, int tau) { return static_cast<std::int64_t>(t) * 1000003 + tau; }
  std::map<std::int64_t, std::map<std::int64_t, std::vector<double>>> table_;
  int dim_ = 0;
};

// Adapter binding one trajectory id of an ExternalForecasts table to the
// Forecaster contract.
class ExternalForecaster final : public Forecaster {
 public:
  ExternalForecaster(const ExternalForecasts& table, std::int64_t traj_id)
      : table_(&table), traj_id_(traj_id) {}

  int dim() const override { return table_->dim(); }

  std::vector<double> predict(const Trajectory&, int prefix_len, int horizon) const override {
    const int d = dim();
    std::vector<double> out(static_cast<std::size_t>(horizon) * d);
    for (int tau = 1; tau <= horizon; ++tau) {
      const std::vector<double>& v = table_->lookup(traj_id_, prefix_len - 1, tau);
      for (int j = 0; j < d; ++j) out[static_cast<std::size_t>(tau - 1) * d + j] = v[j];
    }
    return out;
  }

 private:
  const ExternalForecasts* table_;
  std::int64_t traj_id_;
};

}  // namespace cafht

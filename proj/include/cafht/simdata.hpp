// Synthetic heterogeneous AR trajectories and dataset splitting.
#pragma once

#include <array>
#include <cstdint>
#include <vector>

#include "cafht/core.hpp"
#include "cafht/rng.hpp"

namespace cafht {

enum class NoiseProfile { Dynamic, Static };

// AR(3) mixture generator. Each trajectory is independently flagged hard with
// probability delta; hard trajectories get noise variance scaled by the
// hardness multiplier k. Dynamic noise grows linearly with the step index,
// static noise is constant.
struct ArConfig {
  std::array<double, 3> coeffs{0.9, 0.1, -0.2};
  int horizon = 100;
  int dim = 1;
  NoiseProfile profile = NoiseProfile::Dynamic;
  double delta = 0.1;
  double hard_multiplier = 10.0;  // k
  double noise_scale = 1.0;
  std::array<double, 3> lag_init{0.0, 0.0, 0.0};
  std::uint64_t seed = 1;

  double variance_at(int t, bool hard) const {
    const double k = hard ? hard_multiplier : 1.0;
    const double base = profile == NoiseProfile::Dynamic ? static_cast<double>(t) * k : k;
    return base * noise_scale;
  }
};

// Trajectories are seeded per (seed, stream, index), so generation order and
// thread count never change the output.
inline TrajectorySet generate_ar(const ArConfig& cfg, std::size_t n, std::uint64_t stream = 0) {
  if (n < 1) throw std::invalid_argument("generate_ar: n must be >= 1");
  if (cfg.horizon < 1 || cfg.dim < 1) throw std::invalid_argument("generate_ar: bad shape");
  if (cfg.delta < 0.0 || cfg.delta > 1.0) throw std::invalid_argument("generate_ar: delta must lie in [0, 1]");
  if (cfg.hard_multiplier <= 0.0) throw std::invalid_argument("generate_ar: hardness multiplier must be > 0");

  TrajectorySet out;
  out.items.reserve(n);
  for (std::size_t i = 0; i < n; ++i) {
    Rng rng(mix_seed(cfg.seed, stream, i));
    const bool hard = rng.uniform() < cfg.delta;
    Trajectory y(cfg.dim, cfg.horizon, hard ? Label::Hard : Label::Easy);
    for (int j = 0; j < cfg.dim; ++j) {
      std::array<double, 3> lags = cfg.lag_init;
      for (int t = 0; t <= cfg.horizon; ++t) {
        const double sd = std::sqrt(cfg.variance_at(t, hard));
        double v = cfg.coeffs[0] * lags[0] + cfg.coeffs[1] * lags[1] + cfg.coeffs[2] * lags[2];
        if (sd > 0.0) v += sd * rng.normal();
        y.at(t, j) = v;
        lags[2] = lags[1];
        lags[1] = lags[0];
        lags[0] = v;
      }
    }
    out.items.push_back(std::move(y));
  }
  return out;
}

struct SplitResult {
  TrajectorySet train;
  TrajectorySet cal1;
  TrajectorySet cal2;
};

// Disjoint uniform random partition: train_frac of the data for training, the
// remainder split into cal1/cal2 with cal1_frac_of_cal going to cal1.
inline SplitResult split_dataset(const TrajectorySet& ds, double train_frac, double cal1_frac_of_cal,
                                 std::uint64_t seed) {
  ds.validate();
  const std::size_t n = ds.size();
  std::vector<std::size_t> idx(n);
  for (std::size_t i = 0; i < n; ++i) idx[i] = i;
  Rng rng(mix_seed(seed, 0x51A7ULL));
  for (std::size_t i = n - 1; i > 0; --i) std::swap(idx[i], idx[rng.below(i + 1)]);

  const std::size_t n_train = static_cast<std::size_t>(train_frac * static_cast<double>(n));
  const std::size_t n_cal = n - n_train;
  const std::size_t n_cal1 = static_cast<std::size_t>(cal1_frac_of_cal * static_cast<double>(n_cal));
  if (n_train < 1 || n_cal1 < 1 || n_cal - n_cal1 < 1)
    throw std::invalid_argument("split_dataset: dataset too small for the requested split");

  SplitResult r;
  r.train.items.reserve(n_train);
  r.cal1.items.reserve(n_cal1);
  r.cal2.items.reserve(n_cal - n_cal1);
  for (std::size_t i = 0; i < n; ++i) {
    const Trajectory& y = ds.items[idx[i]];
    if (i < n_train)
      r.train.items.push_back(y);
    else if (i < n_train + n_cal1)
      r.cal1.items.push_back(y);
    else
      r.cal2.items.push_back(y);
  }
  return r;
}

inline TrajectorySet merge(const TrajectorySet& a, const TrajectorySet& b) {
  TrajectorySet out;
  out.items.reserve(a.size() + b.size());
  out.items.insert(out.items.end(), a.items.begin(), a.items.end());
  out.items.insert(out.items.end(), b.items.begin(), b.items.end());
  return out;
}

}  // namespace cafht

// Data-driven selection of the adaptive learning rate: calibration-split
// selection and theory-corrected selection on the full calibration set.
#pragma once

#include <cmath>
#include <cstdint>
#include <numbers>
#include <vector>

#include "cafht/cafht.hpp"
#include "cafht/special.hpp"

namespace cafht {

// Default candidate grid: 0.001 to 0.1 in steps of 0.01, then 0.2 to 0.9 in
// steps of 0.1 (L = 21).
inline std::vector<double> default_gamma_grid() {
  std::vector<double> g;
  for (int i = 0; i < 10; ++i) g.push_back(0.001 + 0.01 * i);
  g.push_back(0.1);
  for (int i = 2; i <= 9; ++i) g.push_back(0.1 * i);
  return g;
}

// Alternative reading of the same grid text, anchored at 0.01 increments
// starting from 0.01 (also L = 21 with the coarse tail).
inline std::vector<double> dense_gamma_grid() {
  std::vector<double> g;
  g.push_back(0.001);
  for (int i = 1; i <= 10; ++i) g.push_back(0.01 * i);
  for (int i = 2; i <= 9; ++i) g.push_back(0.1 * i);
  return g;
}

inline void check_gamma_grid(const std::vector<double>& grid) {
  if (grid.empty()) throw std::invalid_argument("gamma grid is empty");
  double prev = 0.0;
  for (double g : grid) {
    if (!(g > prev)) throw std::invalid_argument("gamma grid must be strictly positive and increasing");
    prev = g;
  }
}

struct GammaCandidateReport {
  double gamma = 0.0;
  double avg_width = 0.0;
  double quantile = 0.0;
  bool selected = false;
};

struct GammaSelection {
  double gamma = 0.0;
  // Set when every candidate produced an infinite conformal margin; the
  // smallest gamma is returned in that case.
  bool degenerate = false;
  std::vector<GammaCandidateReport> table;
};

namespace detail {

// Builds adaptive bands on `set` at one gamma, calibrates the margin on the
// same set at `level`, expands, and reports the mean band width.
inline GammaCandidateReport evaluate_gamma(const Forecaster& f, const TrajectorySet& set,
                                           double gamma, double level, CafhtSettings settings,
                                           std::span<const WarmStart> warm, std::uint64_t seed) {
  settings.gamma = gamma;
  std::vector<PredictionBand> bands;
  bands.reserve(set.size());
  std::vector<double> scores;
  scores.reserve(set.size());
  for (std::size_t i = 0; i < set.size(); ++i) {
    bands.push_back(run_aci_band(f, set.items[i], settings.adaptive(), warm, mix_seed(seed, i)));
    scores.push_back(score_band(bands.back(), set.items[i], settings));
  }
  const double qhat = empirical_quantile(scores, level);
  double width = 0.0;
  for (std::size_t i = 0; i < set.size(); ++i) {
    PredictionBand expanded(bands[i].horizon(), bands[i].dim());
    for (int t = 1; t <= bands[i].horizon(); ++t)
      for (int j = 0; j < bands[i].dim(); ++j)
        expanded.at(t, j) = expand_interval(bands[i].at(t, j), qhat, settings.score, settings.width_floor);
    width += band_width_stats(expanded);
  }
  return {gamma, width / static_cast<double>(set.size()), qhat, false};
}

inline GammaSelection select_gamma_at_level(const Forecaster& f, const TrajectorySet& set,
                                            const std::vector<double>& grid, double level,
                                            const CafhtSettings& settings,
                                            std::span<const WarmStart> warm, std::uint64_t seed) {
  check_gamma_grid(grid);
  set.validate();
  GammaSelection sel;
  sel.table.reserve(grid.size());
  std::size_t best = 0;
  bool any_finite = false;
  for (std::size_t l = 0; l < grid.size(); ++l) {
    sel.table.push_back(evaluate_gamma(f, set, grid[l], level, settings, warm, mix_seed(seed, 7, l)));
    if (std::isfinite(sel.table[l].quantile)) any_finite = true;
    // Ties resolve toward the smallest gamma; the grid is increasing.
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

}  // namespace detail

// Picks the width-minimizing gamma over the grid by building full calibrated
// bands on cal1 at nominal level alpha.
inline GammaSelection select_gamma_split(const Forecaster& f, const TrajectorySet& cal1,
                                         const std::vector<double>& grid, const CafhtSettings& settings,
                                         std::span<const WarmStart> warm, std::uint64_t seed) {
  return detail::select_gamma_at_level(f, cal1, grid, 1.0 - settings.alpha, settings, warm, seed);
}

// DKW constant c(L); below 1/3 for every L >= 2.
inline double dkw_constant(std::size_t L) {
  const double l2 = std::log(2.0 * static_cast<double>(L));
  const double num = std::numbers::sqrt2 * static_cast<double>(L) * std::exp(-l2);
  return num / (std::sqrt(l2) + std::sqrt(l2 + 4.0 / std::numbers::pi));
}

// Corrected level compensating for selecting among L candidates on the same
// m calibration trajectories, via the DKW inequality. Throws when m is too
// small for any positive corrected level to exist.
inline double dkw_corrected_level(std::size_t m, std::size_t L, double alpha) {
  if (m < 1 || L < 1) throw std::invalid_argument("dkw_corrected_level: m and L must be >= 1");
  const double err = (std::sqrt(std::log(2.0 * static_cast<double>(L)) / 2.0) + dkw_constant(L)) /
                     std::sqrt(static_cast<double>(m));
  double a = 1.0 - (1.0 - alpha + err) / (1.0 + 1.0 / static_cast<double>(m));
  if (a > alpha) a = alpha;
  if (a <= 0.0) throw std::runtime_error("calibration set too small for theory correction");
  return a;
}

// Markov lower bound on coverage when calibrating at candidate level a_hat.
inline double markov_coverage_bound(std::size_t m, std::size_t L, double a_hat, double b) {
  const long l = static_cast<long>(std::floor(a_hat * static_cast<double>(m + 1)));
  if (l < 1) throw std::invalid_argument("markov bound undefined for l = 0");
  return inverse_beta_cdf(1.0 / (b * static_cast<double>(L)),
                          static_cast<double>(m + 1) - static_cast<double>(l),
                          static_cast<double>(l)) *
         (1.0 - 1.0 / b);
}

// Largest a_hat on the grid {alpha, alpha - step, ...} whose Markov bound
// reaches 1 - alpha. The whole grid is scanned (the bound is expected, but not
// assumed, to be monotone in a_hat); candidates with l = 0 are skipped.
inline double markov_corrected_level(std::size_t m, std::size_t L, double alpha, double b = 100.0,
                                     double step = 1e-4) {
  if (m < 1 || L < 1) throw std::invalid_argument("markov_corrected_level: m and L must be >= 1");
  if (!(b > 1.0)) throw std::invalid_argument("markov_corrected_level: b must exceed 1");
  const double target = 1.0 - alpha;
  double best = -1.0;
  long last_l = -1;
  bool last_ok = false;
  for (long i = 0;; ++i) {
    const double a_hat = alpha - static_cast<double>(i) * step;
    if (a_hat <= 0.0) break;
    const long l = static_cast<long>(std::floor(a_hat * static_cast<double>(m + 1)));
    if (l < 1) continue;
    if (l != last_l) {
      last_ok = markov_coverage_bound(m, L, a_hat, b) >= target;
      last_l = l;
    }
    if (last_ok && a_hat > best) best = a_hat;
  }
  if (best < 0.0) throw std::runtime_error("no candidate level satisfies the Markov bound");
  return best;
}

struct TheoryLevel {
  double alpha_prime = 0.0;
  // Neither bound was attainable: calibration must fall back to an infinite
  // margin (bands spanning the whole normalized range).
  bool degenerate = false;
};

// alpha' = max of the two corrections, never above alpha.
inline TheoryLevel corrected_level(std::size_t m, std::size_t L, double alpha, double b = 100.0) {
  double dkw = -1.0, markov = -1.0;
  try {
    dkw = dkw_corrected_level(m, L, alpha);
  } catch (const std::runtime_error&) {
  }
  try {
    markov = markov_corrected_level(m, L, alpha, b);
  } catch (const std::runtime_error&) {
  }
  if (dkw < 0.0 && markov < 0.0) return {0.0, true};
  double a = std::max(dkw, markov);
  if (a > alpha) a = alpha;
  return {a, false};
}

// Theory-corrected pipeline: selects gamma and calibrates the margin on the
// same full calibration set, both at level alpha'.
inline CalibratedPredictor calibrate_theory(const Forecaster& f, const TrajectorySet& cal,
                                            const std::vector<double>& grid,
                                            const CafhtSettings& settings,
                                            std::span<const WarmStart> warm, std::uint64_t seed,
                                            GammaSelection* selection_out = nullptr) {
  check_gamma_grid(grid);
  cal.validate();
  const TheoryLevel level = corrected_level(cal.size(), grid.size(), settings.alpha);
  if (level.degenerate) {
    GammaSelection sel;
    sel.gamma = grid.front();
    sel.degenerate = true;
    if (selection_out) *selection_out = sel;
    CafhtSettings s = settings;
    s.gamma = sel.gamma;
    return CalibratedPredictor(f, s, {warm.begin(), warm.end()}, kInf, seed, 0.0);
  }
  GammaSelection sel =
      detail::select_gamma_at_level(f, cal, grid, 1.0 - level.alpha_prime, settings, warm, seed);
  if (selection_out) *selection_out = sel;
  CafhtSettings s = settings;
  s.gamma = sel.gamma;
  return detail::calibrate_at_level(f, cal, s, warm, seed, level.alpha_prime);
}

}  // namespace cafht

// Trajectories, intervals, prediction bands and the finite-sample empirical
// quantile shared by every method in the library.
#pragma once

#include <algorithm>
#include <cmath>
#include <cstddef>
#include <limits>
#include <span>
#include <stdexcept>
#include <string>
#include <vector>

namespace cafht {

inline constexpr double kInf = std::numeric_limits<double>::infinity();

// Experiment-only difficulty tag. Methods never read it.
enum class Label { Unlabeled, Easy, Hard };

// Closed interval [lo, hi]; endpoints may be infinite.
struct Interval {
  double lo = 0.0;
  double hi = 0.0;

  bool contains(double v) const { return lo <= v && v <= hi; }
  double width() const { return hi - lo; }
  bool bounded() const { return std::isfinite(lo) && std::isfinite(hi); }

  static Interval everything() { return {-kInf, kInf}; }
  static Interval around(double center, double radius) {
    return {center - radius, center + radius};
  }
};

// A (T+1)-step, d-dimensional series with steps t = 0..T. Values are stored
// row-major by step.
class Trajectory {
 public:
  Trajectory(int dim, int horizon, Label label = Label::Unlabeled)
      : dim_(dim), label_(label), data_(static_cast<std::size_t>(horizon + 1) * dim, 0.0) {
    if (dim < 1 || horizon < 1) throw std::invalid_argument("trajectory: dim and horizon must be positive");
  }

  int dim() const { return dim_; }
  int horizon() const { return static_cast<int>(data_.size()) / dim_ - 1; }

  double at(int t, int j) const { return data_[static_cast<std::size_t>(t) * dim_ + j]; }
  double& at(int t, int j) { return data_[static_cast<std::size_t>(t) * dim_ + j]; }

  Label label() const { return label_; }
  void set_label(Label l) { label_ = l; }

  const std::vector<double>& data() const { return data_; }

  bool all_finite() const {
    for (double v : data_)
      if (!std::isfinite(v)) return false;
    return true;
  }

 private:
  int dim_;
  Label label_;
  std::vector<double> data_;
};

// Homogeneous collection of trajectories (identical d and T).
struct TrajectorySet {
  std::vector<Trajectory> items;

  std::size_t size() const { return items.size(); }
  bool empty() const { return items.empty(); }
  int dim() const { return items.front().dim(); }
  int horizon() const { return items.front().horizon(); }

  void validate() const {
    if (items.empty()) throw std::invalid_argument("trajectory set is empty");
    const int d = items.front().dim();
    const int T = items.front().horizon();
    for (const Trajectory& y : items) {
      if (y.dim() != d || y.horizon() != T)
        throw std::invalid_argument("trajectory set is not shape-homogeneous");
      if (!y.all_finite()) throw std::invalid_argument("trajectory contains non-finite values");
    }
  }
};

// Per-step, per-dimension intervals for targets t = 1..T.
class PredictionBand {
 public:
  PredictionBand(int horizon, int dim)
      : horizon_(horizon), dim_(dim), cells_(static_cast<std::size_t>(horizon) * dim) {
    if (horizon < 1 || dim < 1) throw std::invalid_argument("band: horizon and dim must be positive");
  }

  int horizon() const { return horizon_; }
  int dim() const { return dim_; }

  // t is the 1-based target step in [1, T].
  const Interval& at(int t, int j) const { return cells_[static_cast<std::size_t>(t - 1) * dim_ + j]; }
  Interval& at(int t, int j) { return cells_[static_cast<std::size_t>(t - 1) * dim_ + j]; }

  const std::vector<Interval>& cells() const { return cells_; }

 private:
  int horizon_;
  int dim_;
  std::vector<Interval> cells_;
};

// 1-based rank of the finite-sample empirical quantile: k = ceil(level*(m+1)).
inline std::size_t quantile_rank(std::size_t m, double level) {
  return static_cast<std::size_t>(std::ceil(level * static_cast<double>(m + 1)));
}

// k-th smallest of m scores with k = ceil(level*(m+1)); +inf when the rank
// exceeds m (the adjusted level is capped at 1).
inline double empirical_quantile(std::vector<double> scores, double level) {
  if (scores.empty()) throw std::invalid_argument("empty calibration set");
  const std::size_t k = quantile_rank(scores.size(), level);
  if (k > scores.size()) return kInf;
  std::nth_element(scores.begin(), scores.begin() + (k - 1), scores.end());
  return scores[k - 1];
}

// Order statistic of an ascending-sorted range at the same rank rule, with the
// rank capped at m instead of mapping to +inf. Used by the online trackers,
// whose radius stays finite at any level below 1.
inline double order_stat_capped(std::span<const double> sorted, double level) {
  if (sorted.empty()) return kInf;
  std::size_t k = quantile_rank(sorted.size(), level);
  if (k < 1) k = 1;
  if (k > sorted.size()) k = sorted.size();
  return sorted[k - 1];
}

inline void check_shapes(const PredictionBand& band, const Trajectory& traj) {
  if (band.dim() != traj.dim() || band.horizon() != traj.horizon())
    throw std::invalid_argument("band/trajectory shape mismatch");
}

// True iff Y_{t,j} lies in the band for every t in [T] and dimension j.
inline bool covers_simultaneously(const PredictionBand& band, const Trajectory& traj) {
  check_shapes(band, traj);
  for (int t = 1; t <= band.horizon(); ++t)
    for (int j = 0; j < band.dim(); ++j)
      if (!band.at(t, j).contains(traj.at(t, j))) return false;
  return true;
}

// Width of one cell as reported in summaries: unbounded intervals count as the
// clipped width 2 of the normalized data range [-1, 1].
inline double reported_width(const Interval& iv) {
  return iv.bounded() ? iv.width() : 2.0;
}

// Mean reported width over all (t, j) cells.
inline double band_width_stats(const PredictionBand& band) {
  double sum = 0.0;
  for (const Interval& iv : band.cells()) sum += reported_width(iv);
  return sum / static_cast<double>(band.cells().size());
}

inline std::string label_name(Label l) {
  switch (l) {
    case Label::Easy: return "easy";
    case Label::Hard: return "hard";
    default: return "";
  }
}

}  // namespace cafht

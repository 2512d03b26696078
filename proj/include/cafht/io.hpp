// File formats: trajectory CSV, band CSV, tracker traces, external forecast
// ingestion, and the plain-text calibration artifact.
#pragma once

#include <cstdint>
#include <cstdio>
#include <fstream>
#include <map>
#include <sstream>
#include <string>
#include <vector>

#include "cafht/adaptive.hpp"
#include "cafht/cafht.hpp"
#include "cafht/core.hpp"
#include "cafht/forecaster.hpp"
#include "cafht/multistep.hpp"

namespace cafht {

namespace detail {

inline std::vector<std::string> split_csv_line(const std::string& line) {
  std::vector<std::string> out;
  std::string cell;
  std::stringstream ss(line);
  while (std::getline(ss, cell, ',')) out.push_back(cell);
  if (!line.empty() && line.back() == ',') out.push_back("");
  return out;
}

inline double parse_double(const std::string& s, const std::string& where, int line_no) {
  try {
    std::size_t pos = 0;
    const double v = std::stod(s, &pos);
    if (pos != s.size()) throw std::invalid_argument(s);
    return v;
  } catch (...) {
    throw std::runtime_error(where + ": line " + std::to_string(line_no) + ": bad number '" + s + "'");
  }
}

inline long parse_long(const std::string& s, const std::string& where, int line_no) {
  try {
    std::size_t pos = 0;
    const long v = std::stol(s, &pos);
    if (pos != s.size()) throw std::invalid_argument(s);
    return v;
  } catch (...) {
    throw std::runtime_error(where + ": line " + std::to_string(line_no) + ": bad integer '" + s + "'");
  }
}

inline std::string format_double(double v) {
  char buf[40];
  std::snprintf(buf, sizeof(buf), "%.17g", v);
  return buf;
}

}  // namespace detail

// Trajectory CSV: header `traj_id,t,dim_0,...,dim_{d-1}[,label]`, one row per
// (trajectory, step), t running 0..T.
inline void save_trajectories(std::ostream& os, const TrajectorySet& set) {
  set.validate();
  const int d = set.dim();
  os << "traj_id,t";
  for (int j = 0; j < d; ++j) os << ",dim_" << j;
  os << ",label\n";
  for (std::size_t i = 0; i < set.size(); ++i) {
    const Trajectory& y = set.items[i];
    for (int t = 0; t <= y.horizon(); ++t) {
      os << i << "," << t;
      for (int j = 0; j < d; ++j) os << "," << detail::format_double(y.at(t, j));
      os << "," << label_name(y.label()) << "\n";
    }
  }
}

inline void save_trajectories(const std::string& path, const TrajectorySet& set) {
  std::ofstream os(path);
  if (!os) throw std::runtime_error("cannot open for writing: " + path);
  save_trajectories(os, set);
}

inline TrajectorySet load_trajectories(std::istream& is, const std::string& name = "trajectory csv",
                                       std::vector<long>* ids_out = nullptr) {
  std::string line;
  if (!std::getline(is, line)) throw std::runtime_error(name + ": empty file");
  const std::vector<std::string> header = detail::split_csv_line(line);
  if (header.size() < 3 || header[0] != "traj_id" || header[1] != "t")
    throw std::runtime_error(name + ": line 1: expected header traj_id,t,dim_0,...");
  bool has_label = header.back() == "label";
  const int d = static_cast<int>(header.size()) - 2 - (has_label ? 1 : 0);
  if (d < 1) throw std::runtime_error(name + ": line 1: no dimension columns");

  struct Raw {
    std::vector<std::pair<int, std::vector<double>>> rows;
    Label label = Label::Unlabeled;
  };
  std::map<long, Raw> by_id;
  int line_no = 1;
  while (std::getline(is, line)) {
    ++line_no;
    if (line.empty()) continue;
    const std::vector<std::string> cells = detail::split_csv_line(line);
    if (static_cast<int>(cells.size()) < 2 + d)
      throw std::runtime_error(name + ": line " + std::to_string(line_no) + ": too few columns");
    const long id = detail::parse_long(cells[0], name, line_no);
    const int t = static_cast<int>(detail::parse_long(cells[1], name, line_no));
    std::vector<double> v(d);
    for (int j = 0; j < d; ++j) {
      v[j] = detail::parse_double(cells[2 + j], name, line_no);
      if (!std::isfinite(v[j]))
        throw std::runtime_error(name + ": line " + std::to_string(line_no) + ": non-finite value");
    }
    Raw& raw = by_id[id];
    raw.rows.emplace_back(t, std::move(v));
    if (has_label && static_cast<int>(cells.size()) > 2 + d) {
      const std::string& l = cells[2 + d];
      if (l == "hard")
        raw.label = Label::Hard;
      else if (l == "easy")
        raw.label = Label::Easy;
      else if (!l.empty())
        throw std::runtime_error(name + ": line " + std::to_string(line_no) + ": unknown label '" + l + "'");
    }
  }
  if (by_id.empty()) throw std::runtime_error(name + ": no data rows");

  TrajectorySet out;
  int T = -1;
  for (auto& [id, raw] : by_id) {
    std::sort(raw.rows.begin(), raw.rows.end(),
              [](const auto& a, const auto& b) { return a.first < b.first; });
    const int horizon = static_cast<int>(raw.rows.size()) - 1;
    if (T < 0) T = horizon;
    if (horizon != T)
      throw std::runtime_error(name + ": trajectory " + std::to_string(id) +
                               " has a different number of steps than the rest");
    for (int t = 0; t <= horizon; ++t)
      if (raw.rows[t].first != t)
        throw std::runtime_error(name + ": trajectory " + std::to_string(id) +
                                 ": steps are not consecutive from 0");
    Trajectory y(d, horizon, raw.label);
    for (int t = 0; t <= horizon; ++t)
      for (int j = 0; j < d; ++j) y.at(t, j) = raw.rows[t].second[j];
    out.items.push_back(std::move(y));
    if (ids_out) ids_out->push_back(id);
  }
  out.validate();
  return out;
}

inline TrajectorySet load_trajectories(const std::string& path, std::vector<long>* ids_out = nullptr) {
  std::ifstream is(path);
  if (!is) throw std::runtime_error("cannot open: " + path);
  return load_trajectories(is, path, ids_out);
}

// Band CSV: `traj_id,t,dim,lower,upper`.
inline void write_band_csv_row(std::ostream& os, long traj_id, const PredictionBand& band) {
  for (int t = 1; t <= band.horizon(); ++t)
    for (int j = 0; j < band.dim(); ++j)
      os << traj_id << "," << t << "," << j << "," << detail::format_double(band.at(t, j).lo) << ","
         << detail::format_double(band.at(t, j).hi) << "\n";
}

inline std::string band_csv_header() { return "traj_id,t,dim,lower,upper"; }

// Multi-step band CSV: `traj_id,t,tau,dim,lower,upper` with t the emission
// index.
inline void write_multistep_band_csv_row(std::ostream& os, long traj_id, const MultiStepBand& band) {
  for (int e = 0; e < band.horizon(); ++e)
    for (int tau = 1; tau <= band.steps_ahead() && e + tau <= band.horizon(); ++tau)
      for (int j = 0; j < band.dim(); ++j)
        os << traj_id << "," << e << "," << tau << "," << j << ","
           << detail::format_double(band.at(e, tau, j).lo) << ","
           << detail::format_double(band.at(e, tau, j).hi) << "\n";
}

// Tracker trace CSV: `t,state,radius,err`.
inline void write_trace_csv(std::ostream& os, const std::vector<TraceRow>& trace) {
  os << "t,state,radius,err\n";
  for (const TraceRow& r : trace)
    os << r.t << "," << detail::format_double(r.state) << "," << detail::format_double(r.radius)
       << "," << r.err << "\n";
}

// External forecast CSV: `traj_id,t,tau,dim_0,...` carrying the prediction
// for step t + tau made at time t.
inline ExternalForecasts load_external_forecasts(std::istream& is,
                                                 const std::string& name = "forecast csv") {
  std::string line;
  if (!std::getline(is, line)) throw std::runtime_error(name + ": empty file");
  const std::vector<std::string> header = detail::split_csv_line(line);
  if (header.size() < 4 || header[0] != "traj_id" || header[1] != "t" || header[2] != "tau")
    throw std::runtime_error(name + ": line 1: expected header traj_id,t,tau,dim_0,...");
  const int d = static_cast<int>(header.size()) - 3;
  ExternalForecasts out;
  std::vector<double> v(d);
  int line_no = 1;
  while (std::getline(is, line)) {
    ++line_no;
    if (line.empty()) continue;
    const std::vector<std::string> cells = detail::split_csv_line(line);
    if (static_cast<int>(cells.size()) != 3 + d)
      throw std::runtime_error(name + ": line " + std::to_string(line_no) + ": wrong column count");
    const long id = detail::parse_long(cells[0], name, line_no);
    const int t = static_cast<int>(detail::parse_long(cells[1], name, line_no));
    const int tau = static_cast<int>(detail::parse_long(cells[2], name, line_no));
    for (int j = 0; j < d; ++j) v[j] = detail::parse_double(cells[3 + j], name, line_no);
    out.add(id, t, tau, v);
  }
  return out;
}

inline ExternalForecasts load_external_forecasts(const std::string& path) {
  std::ifstream is(path);
  if (!is) throw std::runtime_error("cannot open: " + path);
  return load_external_forecasts(is, path);
}

// Everything needed to reload a calibrated pipeline: normalizer, fitted AR
// forecaster, and the conformal state.
struct CalibrationArtifact {
  CafhtSettings settings;
  double margin = 0.0;
  double alpha_effective = 0.0;
  std::uint64_t warm_seed = 0;
  std::vector<WarmStart> warm;
  Normalizer normalizer;
  ArForecaster forecaster;

  CalibratedPredictor predictor() const {
    return CalibratedPredictor(forecaster, settings, warm, margin, warm_seed, alpha_effective);
  }
};

inline void save_artifact(const std::string& path, const CalibrationArtifact& art) {
  std::ofstream os(path);
  if (!os) throw std::runtime_error("cannot open for writing: " + path);
  const auto put = [&](const std::string& k, const std::string& v) { os << k << "=" << v << "\n"; };
  const auto putd = [&](const std::string& k, double v) { put(k, detail::format_double(v)); };
  put("artifact_version", "1");
  const int d = art.normalizer.dim();
  put("dim", std::to_string(d));
  putd("alpha", art.settings.alpha);
  putd("alpha_aci", art.settings.effective_alpha_aci());
  putd("alpha_effective", art.alpha_effective);
  putd("gamma", art.settings.gamma);
  putd("margin", art.margin);
  put("score", art.settings.score == ScoreKind::Multiplicative ? "multiplicative" : "additive");
  put("aggregation", art.settings.aggregation == Aggregation::L2 ? "l2" : "linf");
  put("tracker", art.settings.tracker == TrackerKind::Pid ? "pid" : "aci");
  putd("width_floor", art.settings.width_floor);
  put("warm_seed", std::to_string(art.warm_seed));
  put("warm_count", std::to_string(art.warm.front().count));
  putd("warm_initial_level", art.warm.front().initial_level);
  put("ar_order", std::to_string(art.forecaster.order()));
  putd("ar_ridge", art.forecaster.ridge());
  for (int j = 0; j < d; ++j) {
    const std::string sj = std::to_string(j);
    putd("warm_rmin_" + sj, art.warm[j].r_min);
    putd("warm_rmax_" + sj, art.warm[j].r_max);
    putd("warm_pidq0_" + sj, art.warm[j].pid_q0);
    putd("norm_shift_" + sj, art.normalizer.shift(j));
    putd("norm_scale_" + sj, art.normalizer.scale(j));
    putd("ar_intercept_" + sj, art.forecaster.intercept(j));
    for (int m = 0; m < art.forecaster.order(); ++m)
      putd("ar_coef_" + sj + "_" + std::to_string(m), art.forecaster.coef(j, m));
  }
}

inline CalibrationArtifact load_artifact(const std::string& path) {
  std::ifstream is(path);
  if (!is) throw std::runtime_error("cannot open: " + path);
  std::map<std::string, std::string> kv;
  std::string line;
  int line_no = 0;
  while (std::getline(is, line)) {
    ++line_no;
    if (line.empty() || line[0] == '#') continue;
    const std::size_t eq = line.find('=');
    if (eq == std::string::npos)
      throw std::runtime_error(path + ": line " + std::to_string(line_no) + ": expected key=value");
    kv[line.substr(0, eq)] = line.substr(eq + 1);
  }
  const auto get = [&](const std::string& k) -> const std::string& {
    const auto it = kv.find(k);
    if (it == kv.end()) throw std::runtime_error(path + ": missing key '" + k + "'");
    return it->second;
  };
  const auto getd = [&](const std::string& k) { return detail::parse_double(get(k), path, 0); };

  if (get("artifact_version") != "1") throw std::runtime_error(path + ": unsupported artifact version");
  CalibrationArtifact art;
  const int d = static_cast<int>(detail::parse_long(get("dim"), path, 0));
  art.settings.alpha = getd("alpha");
  art.settings.alpha_aci = getd("alpha_aci");
  art.alpha_effective = getd("alpha_effective");
  art.settings.gamma = getd("gamma");
  art.margin = getd("margin");
  art.settings.score = get("score") == "multiplicative" ? ScoreKind::Multiplicative : ScoreKind::Additive;
  art.settings.aggregation = get("aggregation") == "l2" ? Aggregation::L2 : Aggregation::LInf;
  art.settings.tracker = get("tracker") == "pid" ? TrackerKind::Pid : TrackerKind::Aci;
  art.settings.width_floor = getd("width_floor");
  art.warm_seed = static_cast<std::uint64_t>(std::stoull(get("warm_seed")));

  const int warm_count = static_cast<int>(detail::parse_long(get("warm_count"), path, 0));
  const double warm_level = getd("warm_initial_level");
  const int order = static_cast<int>(detail::parse_long(get("ar_order"), path, 0));
  std::vector<double> shift(d), scale(d), intercept(d);
  std::vector<double> coef(static_cast<std::size_t>(d) * order);
  art.warm.resize(d);
  for (int j = 0; j < d; ++j) {
    const std::string sj = std::to_string(j);
    art.warm[j].count = warm_count;
    art.warm[j].initial_level = warm_level;
    art.warm[j].r_min = getd("warm_rmin_" + sj);
    art.warm[j].r_max = getd("warm_rmax_" + sj);
    art.warm[j].pid_q0 = getd("warm_pidq0_" + sj);
    shift[j] = getd("norm_shift_" + sj);
    scale[j] = getd("norm_scale_" + sj);
    intercept[j] = getd("ar_intercept_" + sj);
    for (int m = 0; m < order; ++m)
      coef[static_cast<std::size_t>(j) * order + m] = getd("ar_coef_" + sj + "_" + std::to_string(m));
  }
  art.normalizer.set(std::move(shift), std::move(scale));
  art.forecaster.restore(order, getd("ar_ridge"), std::move(coef), std::move(intercept));
  return art;
}

}  // namespace cafht

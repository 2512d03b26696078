// Report emission: the per-cell CSV table and SVG line charts with 2-SE
// error bars, plus the loader the plot command uses.
#pragma once

#include <cstdio>
#include <fstream>
#include <map>
#include <sstream>
#include <string>
#include <vector>

#include "cafht/experiments.hpp"

namespace cafht {

namespace detail {

inline std::string fmt_stat(double v) {
  char buf[32];
  std::snprintf(buf, sizeof(buf), "%.6f", v);
  return buf;
}

inline std::string stat_or_na(const MetricStats& s, bool se) {
  if (!s.present) return "NA";
  return fmt_stat(se ? s.se : s.mean);
}

inline std::string sanitize_cell(std::string s) {
  for (char& c : s)
    if (c == ',' || c == '\n') c = ';';
  return s;
}

}  // namespace detail

inline std::string report_csv_header_comment(std::uint64_t config_hash, std::uint64_t seed) {
  std::ostringstream os;
  os << "# cafht " << kVersion << " config_hash=" << std::hex << config_hash << std::dec
     << " seed=" << seed;
  return os.str();
}

inline void write_report_csv(std::ostream& os, const ExperimentReport& report) {
  os << report_csv_header_comment(report.config_hash, report.seed) << "\n";
  os << "sweep,method,avg_width,avg_width_se,cond_hard,cond_hard_se,cond_easy,cond_easy_se,"
        "marginal,marginal_se,reps,status\n";
  for (const ReportCell& c : report.cells) {
    os << detail::fmt_stat(c.sweep_value) << "," << c.method << ","
       << detail::stat_or_na(c.width, false) << "," << detail::stat_or_na(c.width, true) << ","
       << detail::stat_or_na(c.hard, false) << "," << detail::stat_or_na(c.hard, true) << ","
       << detail::stat_or_na(c.easy, false) << "," << detail::stat_or_na(c.easy, true) << ","
       << detail::stat_or_na(c.marginal, false) << "," << detail::stat_or_na(c.marginal, true) << ","
       << c.reps_used << "," << (c.ok ? "ok" : detail::sanitize_cell(c.error)) << "\n";
  }
}

inline void write_report_csv(const std::string& path, const ExperimentReport& report) {
  std::ofstream os(path);
  if (!os) throw std::runtime_error("cannot open for writing: " + path);
  write_report_csv(os, report);
}

// Parses the cell table back from report.csv (provenance comment preserved).
struct LoadedReport {
  std::string header_comment;
  std::vector<ReportCell> cells;
};

inline LoadedReport load_report_csv(std::istream& is, const std::string& name = "report csv") {
  LoadedReport out;
  std::string line;
  int line_no = 0;
  bool saw_header = false;
  while (std::getline(is, line)) {
    ++line_no;
    if (line.empty()) continue;
    if (line[0] == '#') {
      out.header_comment = line;
      continue;
    }
    if (!saw_header) {
      saw_header = true;  // column header
      continue;
    }
    const std::vector<std::string> cells = detail::split_csv_line(line);
    if (cells.size() != 12)
      throw std::runtime_error(name + ": line " + std::to_string(line_no) + ": expected 12 columns");
    ReportCell c;
    c.sweep_value = detail::parse_double(cells[0], name, line_no);
    c.method = cells[1];
    const auto stat = [&](int i) {
      MetricStats s;
      if (cells[i] == "NA") return s;
      s.present = true;
      s.mean = detail::parse_double(cells[i], name, line_no);
      s.se = detail::parse_double(cells[i + 1], name, line_no);
      return s;
    };
    c.width = stat(2);
    c.hard = stat(4);
    c.easy = stat(6);
    c.marginal = stat(8);
    c.reps_used = static_cast<int>(detail::parse_long(cells[10], name, line_no));
    c.ok = cells[11] == "ok";
    if (!c.ok) c.error = cells[11];
    out.cells.push_back(std::move(c));
  }
  if (out.cells.empty()) throw std::runtime_error(name + ": no data rows");
  return out;
}

inline LoadedReport load_report_csv(const std::string& path) {
  std::ifstream is(path);
  if (!is) throw std::runtime_error("cannot open: " + path);
  return load_report_csv(is, path);
}

inline const MetricStats& metric_of(const ReportCell& c, const std::string& metric) {
  if (metric == "avg_width") return c.width;
  if (metric == "marginal") return c.marginal;
  if (metric == "cond_hard") return c.hard;
  if (metric == "cond_easy") return c.easy;
  throw std::invalid_argument("unknown metric '" + metric + "'");
}

// Line chart of one metric against the sweep variable, one series per method,
// error bars spanning +-2 SE. Geometry metadata is carried as data-*
// attributes on the root element so plots are machine-checkable.
inline void write_report_svg(std::ostream& os, const std::vector<ReportCell>& cells,
                             const std::string& metric, const std::string& title) {
  constexpr double width = 720, height = 480;
  constexpr double left = 80, right = 20, top = 30, bottom = 60;
  const double plot_w = width - left - right;
  const double plot_h = height - top - bottom;

  std::vector<std::string> methods;
  std::vector<double> xs;
  double ymin = kInf, ymax = -kInf, xmin = kInf, xmax = -kInf;
  for (const ReportCell& c : cells) {
    const MetricStats& s = metric_of(c, metric);
    if (!s.present) continue;
    if (std::find(methods.begin(), methods.end(), c.method) == methods.end())
      methods.push_back(c.method);
    if (std::find(xs.begin(), xs.end(), c.sweep_value) == xs.end()) xs.push_back(c.sweep_value);
    ymin = std::min(ymin, s.mean - 2.0 * s.se);
    ymax = std::max(ymax, s.mean + 2.0 * s.se);
    xmin = std::min(xmin, c.sweep_value);
    xmax = std::max(xmax, c.sweep_value);
  }
  if (methods.empty()) throw std::invalid_argument("svg: no cells carry metric '" + metric + "'");
  if (ymax <= ymin) ymax = ymin + 1.0;
  if (xmax <= xmin) xmax = xmin + 1.0;
  const double ypad = 0.05 * (ymax - ymin);
  ymin -= ypad;
  ymax += ypad;

  const auto xpix = [&](double x) { return left + (x - xmin) / (xmax - xmin) * plot_w; };
  const auto ypix = [&](double y) { return top + (ymax - y) / (ymax - ymin) * plot_h; };
  const auto f = [](double v) {
    char buf[32];
    std::snprintf(buf, sizeof(buf), "%.2f", v);
    return std::string(buf);
  };
  const char* palette[] = {"#1f77b4", "#d62728", "#2ca02c", "#9467bd", "#ff7f0e", "#8c564b"};

  os << "<svg xmlns=\"http://www.w3.org/2000/svg\" viewBox=\"0 0 " << width << " " << height
     << "\" data-ymin=\"" << detail::format_double(ymin) << "\" data-ymax=\""
     << detail::format_double(ymax) << "\" data-plot-top=\"" << top << "\" data-plot-height=\""
     << plot_h << "\">\n";
  os << "<rect x=\"0\" y=\"0\" width=\"" << width << "\" height=\"" << height
     << "\" fill=\"white\"/>\n";
  os << "<text x=\"" << width / 2 << "\" y=\"18\" text-anchor=\"middle\" font-size=\"14\">" << title
     << "</text>\n";
  // axes
  os << "<line x1=\"" << left << "\" y1=\"" << top << "\" x2=\"" << left << "\" y2=\"" << top + plot_h
     << "\" stroke=\"black\"/>\n";
  os << "<line x1=\"" << left << "\" y1=\"" << top + plot_h << "\" x2=\"" << left + plot_w
     << "\" y2=\"" << top + plot_h << "\" stroke=\"black\"/>\n";
  for (int g = 0; g <= 4; ++g) {
    const double yv = ymin + (ymax - ymin) * g / 4.0;
    os << "<text x=\"" << left - 6 << "\" y=\"" << f(ypix(yv) + 4)
       << "\" text-anchor=\"end\" font-size=\"11\">" << f(yv) << "</text>\n";
  }
  for (std::size_t mi = 0; mi < methods.size(); ++mi) {
    const std::string& m = methods[mi];
    const char* color = palette[mi % 6];
    std::ostringstream pts;
    for (const ReportCell& c : cells) {
      if (c.method != m) continue;
      const MetricStats& s = metric_of(c, metric);
      if (!s.present) continue;
      const double px = xpix(c.sweep_value);
      pts << f(px) << "," << f(ypix(s.mean)) << " ";
      os << "<line class=\"errbar\" data-se=\"" << detail::format_double(s.se) << "\" x1=\"" << f(px)
         << "\" y1=\"" << f(ypix(s.mean - 2.0 * s.se)) << "\" x2=\"" << f(px) << "\" y2=\""
         << f(ypix(s.mean + 2.0 * s.se)) << "\" stroke=\"" << color << "\"/>\n";
      os << "<circle cx=\"" << f(px) << "\" cy=\"" << f(ypix(s.mean)) << "\" r=\"3\" fill=\"" << color
         << "\"/>\n";
    }
    os << "<polyline points=\"" << pts.str() << "\" fill=\"none\" stroke=\"" << color << "\"/>\n";
    os << "<text x=\"" << left + plot_w - 4 << "\" y=\"" << top + 16 + 16 * mi
       << "\" text-anchor=\"end\" font-size=\"12\" fill=\"" << color << "\">" << m << "</text>\n";
  }
  os << "</svg>\n";
}

inline void write_report_svg(const std::string& path, const std::vector<ReportCell>& cells,
                             const std::string& metric, const std::string& title) {
  std::ofstream os(path);
  if (!os) throw std::runtime_error("cannot open for writing: " + path);
  write_report_svg(os, cells, metric, title);
}

inline void write_tuning_csv(std::ostream& os, const std::vector<GammaCandidateReport>& table) {
  os << "gamma,avg_width,quantile,selected\n";
  for (const GammaCandidateReport& r : table)
    os << detail::format_double(r.gamma) << "," << detail::format_double(r.avg_width) << ","
       << detail::format_double(r.quantile) << "," << (r.selected ? 1 : 0) << "\n";
}

// Writes the standard output directory layout: report.csv, one SVG per
// metric, tuning.csv, and bands_sample.csv.
inline void write_report_files(const std::string& dir, const ExperimentReport& report) {
  write_report_csv(dir + "/report.csv", report);
  for (const std::string metric : {"avg_width", "marginal", "cond_hard", "cond_easy"}) {
    bool present = false;
    for (const ReportCell& c : report.cells) present = present || metric_of(c, metric).present;
    if (!present) continue;
    write_report_svg(dir + "/report_" + metric + ".svg", report.cells, metric, metric);
  }
  if (!report.tuning_table.empty()) {
    std::ofstream os(dir + "/tuning.csv");
    if (!os) throw std::runtime_error("cannot open for writing: " + dir + "/tuning.csv");
    write_tuning_csv(os, report.tuning_table);
  }
  if (!report.bands_sample_csv.empty()) {
    std::ofstream os(dir + "/bands_sample.csv");
    if (!os) throw std::runtime_error("cannot open for writing: " + dir + "/bands_sample.csv");
    os << report.bands_sample_csv;
  }
}

}  // namespace cafht

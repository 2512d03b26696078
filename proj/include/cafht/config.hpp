// Plain-text key=value experiment configuration with strict key checking.
#pragma once

#include <fstream>
#include <map>
#include <sstream>
#include <string>
#include <vector>

#include "cafht/experiments.hpp"

namespace cafht {

namespace detail {

inline std::string trim(const std::string& s) {
  const std::size_t b = s.find_first_not_of(" \t\r");
  if (b == std::string::npos) return "";
  const std::size_t e = s.find_last_not_of(" \t\r");
  return s.substr(b, e - b + 1);
}

inline int edit_distance(const std::string& a, const std::string& b) {
  std::vector<int> prev(b.size() + 1), cur(b.size() + 1);
  for (std::size_t j = 0; j <= b.size(); ++j) prev[j] = static_cast<int>(j);
  for (std::size_t i = 1; i <= a.size(); ++i) {
    cur[0] = static_cast<int>(i);
    for (std::size_t j = 1; j <= b.size(); ++j) {
      const int sub = prev[j - 1] + (a[i - 1] == b[j - 1] ? 0 : 1);
      cur[j] = std::min({prev[j] + 1, cur[j - 1] + 1, sub});
    }
    std::swap(prev, cur);
  }
  return prev[b.size()];
}

inline std::vector<double> parse_double_list(const std::string& s, const std::string& key) {
  std::vector<double> out;
  std::stringstream ss(s);
  std::string cell;
  while (std::getline(ss, cell, ',')) {
    cell = trim(cell);
    if (cell.empty()) continue;
    try {
      out.push_back(std::stod(cell));
    } catch (...) {
      throw std::runtime_error("config key '" + key + "': bad number '" + cell + "'");
    }
  }
  return out;
}

}  // namespace detail

inline const std::vector<std::string>& known_config_keys() {
  static const std::vector<std::string> keys = {
      "ar.profile", "ar.T",        "ar.d",          "ar.delta",   "ar.k",
      "ar.noise_scale", "ar.seed", "ar.delta_test", "alpha",      "methods",
      "sweep.variable", "sweep.values", "reps",     "n",          "test_n",
      "train_frac",     "cal1_frac",    "gamma_grid", "score",    "tracker",
      "tuning",         "steps_ahead",  "seed",     "threads",
  };
  return keys;
}

// Raw key=value map; '#' starts a comment, unknown keys are rejected with the
// closest known key as a suggestion.
inline std::map<std::string, std::string> parse_config_text(std::istream& is,
                                                            const std::string& name) {
  std::map<std::string, std::string> kv;
  std::string line;
  int line_no = 0;
  while (std::getline(is, line)) {
    ++line_no;
    const std::size_t hash = line.find('#');
    if (hash != std::string::npos) line = line.substr(0, hash);
    line = detail::trim(line);
    if (line.empty()) continue;
    const std::size_t eq = line.find('=');
    if (eq == std::string::npos)
      throw std::runtime_error(name + ": line " + std::to_string(line_no) + ": expected key = value");
    const std::string key = detail::trim(line.substr(0, eq));
    const std::string value = detail::trim(line.substr(eq + 1));
    int best_dist = 1 << 20;
    std::string best;
    bool known = false;
    for (const std::string& k : known_config_keys()) {
      if (k == key) {
        known = true;
        break;
      }
      const int d = detail::edit_distance(key, k);
      if (d < best_dist) {
        best_dist = d;
        best = k;
      }
    }
    if (!known)
      throw std::runtime_error(name + ": line " + std::to_string(line_no) + ": unknown key '" + key +
                               "' (did you mean '" + best + "'?)");
    kv[key] = value;
  }
  return kv;
}

inline ExperimentConfig config_from_map(const std::map<std::string, std::string>& kv,
                                        const std::string& name) {
  ExperimentConfig cfg;
  const auto fail = [&](const std::string& key, const std::string& why) {
    throw std::runtime_error(name + ": key '" + key + "': " + why);
  };
  for (const auto& [key, value] : kv) {
    try {
      if (key == "ar.profile") {
        if (value == "dynamic")
          cfg.data.profile = NoiseProfile::Dynamic;
        else if (value == "static")
          cfg.data.profile = NoiseProfile::Static;
        else
          fail(key, "expected dynamic or static");
      } else if (key == "ar.T")
        cfg.data.horizon = std::stoi(value);
      else if (key == "ar.d")
        cfg.data.dim = std::stoi(value);
      else if (key == "ar.delta")
        cfg.data.delta = std::stod(value);
      else if (key == "ar.k")
        cfg.data.hard_multiplier = std::stod(value);
      else if (key == "ar.noise_scale")
        cfg.data.noise_scale = std::stod(value);
      else if (key == "ar.seed")
        cfg.data.seed = std::stoull(value);
      else if (key == "ar.delta_test")
        cfg.delta_test = std::stod(value);
      else if (key == "alpha")
        cfg.alpha = std::stod(value);
      else if (key == "methods") {
        cfg.methods.clear();
        std::stringstream ss(value);
        std::string m;
        while (std::getline(ss, m, ',')) {
          m = detail::trim(m);
          if (!m.empty()) cfg.methods.push_back(m);
        }
        if (cfg.methods.empty()) fail(key, "no methods listed");
      } else if (key == "sweep.variable")
        cfg.sweep_variable = value;
      else if (key == "sweep.values")
        cfg.sweep_values = detail::parse_double_list(value, key);
      else if (key == "reps")
        cfg.reps = std::stoi(value);
      else if (key == "n")
        cfg.n = std::stoull(value);
      else if (key == "test_n")
        cfg.test_n = std::stoull(value);
      else if (key == "train_frac")
        cfg.train_frac = std::stod(value);
      else if (key == "cal1_frac")
        cfg.cal1_frac = std::stod(value);
      else if (key == "gamma_grid")
        cfg.gamma_grid = detail::parse_double_list(value, key);
      else if (key == "score") {
        if (value == "additive")
          cfg.score = ScoreKind::Additive;
        else if (value == "multiplicative")
          cfg.score = ScoreKind::Multiplicative;
        else
          fail(key, "expected additive or multiplicative");
      } else if (key == "tracker") {
        if (value == "aci")
          cfg.tracker = TrackerKind::Aci;
        else if (value == "pid")
          cfg.tracker = TrackerKind::Pid;
        else
          fail(key, "expected aci or pid");
      } else if (key == "tuning") {
        if (value == "split")
          cfg.tuning = TuningMode::Split;
        else if (value == "theory")
          cfg.tuning = TuningMode::Theory;
        else
          fail(key, "expected split or theory");
      } else if (key == "steps_ahead")
        cfg.steps_ahead = std::stoi(value);
      else if (key == "seed")
        cfg.seed = std::stoull(value);
      else if (key == "threads")
        cfg.threads = std::stoi(value);
    } catch (const std::invalid_argument&) {
      fail(key, "bad value '" + value + "'");
    } catch (const std::out_of_range&) {
      fail(key, "value out of range '" + value + "'");
    }
  }
  return cfg;
}

inline ExperimentConfig load_experiment_config(const std::string& path) {
  std::ifstream is(path);
  if (!is) throw std::runtime_error("cannot open config file: " + path);
  return config_from_map(parse_config_text(is, path), path);
}

}  // namespace cafht

#pragma once

/// Flat key=value run configuration: a text file plus command-line
/// overrides, validated against a per-command key registry before any
/// computation. Unknown keys are rejected.

#include <algorithm>
#include <fstream>
#include <map>
#include <set>
#include <sstream>
#include <stdexcept>
#include <string>
#include <vector>

#include "klab/quadrature.hpp"

namespace klab {

class RunConfig {
 public:
  void load_file(const std::string& path) {
    std::ifstream in(path);
    if (!in) throw std::invalid_argument("config: cannot open " + path);
    std::string line;
    int lineno = 0;
    while (std::getline(in, line)) {
      ++lineno;
      const auto hash = line.find('#');
      if (hash != std::string::npos) line = line.substr(0, hash);
      const auto trimmed = trim(line);
      if (trimmed.empty()) continue;
      const auto eq = trimmed.find('=');
      if (eq == std::string::npos)
        throw std::invalid_argument("config: line " + std::to_string(lineno) + " is not key=value");
      set(trim(trimmed.substr(0, eq)), trim(trimmed.substr(eq + 1)));
    }
  }

  void set(const std::string& key, const std::string& value) { kv_[key] = value; }
  bool has(const std::string& key) const { return kv_.count(key) > 0; }

  void validate(const std::set<std::string>& known, const std::string& command) const {
    for (const auto& [k, v] : kv_) {
      (void)v;
      if (!known.count(k))
        throw std::invalid_argument("config: unknown key '" + k + "' for command " + command);
    }
  }

  std::string get_string(const std::string& key, const std::string& dflt = "") const {
    auto it = kv_.find(key);
    return it == kv_.end() ? dflt : it->second;
  }

  double get_double(const std::string& key, double dflt) const {
    auto it = kv_.find(key);
    if (it == kv_.end()) return dflt;
    return parse_double(key, it->second);
  }

  long get_long(const std::string& key, long dflt) const {
    auto it = kv_.find(key);
    if (it == kv_.end()) return dflt;
    try {
      size_t pos = 0;
      const long v = std::stol(it->second, &pos);
      if (pos != it->second.size()) throw std::invalid_argument("");
      return v;
    } catch (...) {
      throw std::invalid_argument("config: key '" + key + "' is not an integer");
    }
  }

  int get_int(const std::string& key, int dflt) const {
    return static_cast<int>(get_long(key, dflt));
  }

  /// Sample lists: tuples separated by ';', entries by ','.
  std::vector<std::vector<double>> get_samples(const std::string& key,
                                               const std::string& dflt) const {
    const std::string raw = get_string(key, dflt);
    std::vector<std::vector<double>> out;
    std::stringstream tuples(raw);
    std::string tuple;
    while (std::getline(tuples, tuple, ';')) {
      if (trim(tuple).empty()) continue;
      std::vector<double> entry;
      std::stringstream parts(tuple);
      std::string part;
      while (std::getline(parts, part, ',')) entry.push_back(parse_double(key, trim(part)));
      out.push_back(std::move(entry));
    }
    if (out.empty()) throw std::invalid_argument("config: key '" + key + "' has no samples");
    return out;
  }

  std::vector<double> get_list(const std::string& key, const std::string& dflt) const {
    const std::string raw = get_string(key, dflt);
    std::vector<double> out;
    std::stringstream parts(raw);
    std::string part;
    while (std::getline(parts, part, ',')) {
      if (trim(part).empty()) continue;
      out.push_back(parse_double(key, trim(part)));
    }
    return out;
  }

  QuadSpec quad_spec() const {
    QuadSpec s;
    s.rel_tol = get_double("rel_tol", 1e-7);
    s.abs_tol = get_double("abs_tol", 1e-9);
    s.max_evals = get_long("max_evals", 4'000'000);
    s.radius = {get_double("radius", 10.0)};
    s.qmc_seed = static_cast<std::uint64_t>(get_long("qmc_seed", 12345));
    s.qmc_log2_points = get_int("qmc_log2_points", 15);
    s.tensor_panels = get_int("tensor_panels", 8);
    const std::string scheme = get_string("scheme", "adaptive");
    if (scheme == "adaptive")
      s.scheme = QuadScheme::AdaptiveSubdivision;
    else if (scheme == "tensor")
      s.scheme = QuadScheme::TensorRule;
    else if (scheme == "qmc")
      s.scheme = QuadScheme::Qmc;
    else
      throw std::invalid_argument("config: scheme must be adaptive|tensor|qmc");
    const auto eps = get_list("eps_schedule", "");
    if (!eps.empty()) {
      auto sorted = eps;
      std::sort(sorted.begin(), sorted.end(), std::greater<double>());
      if (sorted != eps) throw std::invalid_argument("config: eps_schedule must be decreasing");
      for (double e : eps)
        if (e < 1e-6) throw std::invalid_argument("config: eps_schedule entries must be >= 1e-6");
      s.eps_schedule = eps;
    }
    return s;
  }

  static const std::set<std::string>& common_keys() {
    static const std::set<std::string> keys = {
        "tag",     "n",          "sign",       "samples",        "function",      "function2",
        "output",  "format",     "rel_tol",    "abs_tol",        "max_evals",     "radius",
        "scheme",  "qmc_seed",   "qmc_log2_points", "tensor_panels", "eps_schedule",
        "workers", "tolerance",  "grid",       "include_singular", "matrix",      "identity"};
    return keys;
  }

 private:
  static std::string trim(const std::string& s) {
    const auto a = s.find_first_not_of(" \t\r\n");
    if (a == std::string::npos) return "";
    const auto b = s.find_last_not_of(" \t\r\n");
    return s.substr(a, b - a + 1);
  }
  static double parse_double(const std::string& key, const std::string& v) {
    try {
      size_t pos = 0;
      const double d = std::stod(v, &pos);
      if (pos != v.size()) throw std::invalid_argument("");
      return d;
    } catch (...) {
      throw std::invalid_argument("config: key '" + key + "' has non-numeric value '" + v + "'");
    }
  }

  std::map<std::string, std::string> kv_;
};

}  // namespace klab

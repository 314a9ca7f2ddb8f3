#pragma once

/// Machine-readable reports: canonical JSON (sorted keys, no timestamps)
/// and RFC-4180-style CSV.

#include <fstream>
#include <sstream>
#include <string>
#include <vector>

#include <json.hpp>

#include "klab/jacquet.hpp"
#include "klab/orbital.hpp"
#include "klab/quadrature.hpp"

namespace klab {

using nlohmann::json;

inline json to_json(const QuadResult& r) {
  json j;
  j["value"] = {r.value.real(), r.value.imag()};
  j["err"] = r.err_est;
  j["evals"] = r.evals;
  j["converged"] = r.converged;
  if (!r.notes.empty()) j["notes"] = r.notes;
  return j;
}

inline json to_json(const VerifySample& s) {
  json j;
  j["a"] = s.a;
  j["lhs"] = {s.lhs.real(), s.lhs.imag()};
  j["rhs"] = {s.rhs.real(), s.rhs.imag()};
  j["residual"] = s.residual;
  j["err"] = s.err;
  return j;
}

inline json to_json(const VerifyReport& r) {
  json j;
  j["identity"] = r.identity;
  j["tag"] = tag_name(r.tag);
  j["n"] = r.n;
  j["sign"] = r.sign;
  j["tolerance"] = r.tolerance;
  j["max_residual"] = r.max_residual;
  j["pass"] = r.pass;
  j["inferred_constant"] = {r.inferred_constant.real(), r.inferred_constant.imag()};
  j["expected_constant"] = {r.expected_constant.real(), r.expected_constant.imag()};
  json samples = json::array();
  for (const auto& s : r.samples) samples.push_back(to_json(s));
  j["samples"] = samples;
  return j;
}

inline json to_json(const MatchReport& r) {
  json j;
  j["max_residual"] = r.max_residual;
  j["all_converged"] = r.all_converged;
  json samples = json::array();
  for (const auto& s : r.samples) {
    json e;
    e["a"] = s.a;
    e["lhs"] = {s.lhs.real(), s.lhs.imag()};
    e["rhs"] = {s.rhs.real(), s.rhs.imag()};
    e["residual"] = s.residual;
    e["err"] = s.err;
    samples.push_back(e);
  }
  j["samples"] = samples;
  return j;
}

inline json to_json(const WeilConstant& w) {
  json j;
  j["tag"] = tag_name(w.tag);
  j["value"] = {w.value.real(), w.value.imag()};
  j["raw"] = {w.raw.real(), w.raw.imag()};
  j["residual"] = w.residual;
  j["determined_numerically"] = w.determined_numerically;
  return j;
}

// --- CSV ----------------------------------------------------------------------

inline std::string csv_quote(const std::string& field) {
  bool need = false;
  for (char c : field)
    if (c == ',' || c == '"' || c == '\n' || c == '\r') need = true;
  if (!need) return field;
  std::string out = "\"";
  for (char c : field) {
    if (c == '"') out += '"';
    out += c;
  }
  out += '"';
  return out;
}

class CsvWriter {
 public:
  void row(const std::vector<std::string>& fields) {
    for (size_t i = 0; i < fields.size(); ++i) {
      if (i) out_ << ',';
      out_ << csv_quote(fields[i]);
    }
    out_ << "\r\n";
  }
  std::string str() const { return out_.str(); }

 private:
  std::ostringstream out_;
};

inline std::string fmt_double(double v) {
  std::ostringstream o;
  o.precision(17);
  o << v;
  return o.str();
}

inline std::string fmt_vector(const std::vector<double>& v) {
  std::string s;
  for (size_t i = 0; i < v.size(); ++i) {
    if (i) s += ";";
    s += fmt_double(v[i]);
  }
  return s;
}

inline std::string verify_report_csv(const VerifyReport& r) {
  CsvWriter w;
  w.row({"a", "lhs_re", "lhs_im", "rhs_re", "rhs_im", "residual", "err"});
  for (const auto& s : r.samples)
    w.row({fmt_vector(s.a), fmt_double(s.lhs.real()), fmt_double(s.lhs.imag()),
           fmt_double(s.rhs.real()), fmt_double(s.rhs.imag()), fmt_double(s.residual),
           fmt_double(s.err)});
  return w.str();
}

inline std::string match_report_csv(const MatchReport& r) {
  CsvWriter w;
  w.row({"a", "lhs_re", "lhs_im", "rhs_re", "rhs_im", "residual", "err"});
  for (const auto& s : r.samples)
    w.row({fmt_vector(s.a), fmt_double(s.lhs.real()), fmt_double(s.lhs.imag()),
           fmt_double(s.rhs.real()), fmt_double(s.rhs.imag()), fmt_double(s.residual),
           fmt_double(s.err)});
  return w.str();
}

inline void write_text_file(const std::string& path, const std::string& content) {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw std::runtime_error("cannot open output file: " + path);
  out << content;
}

}  // namespace klab

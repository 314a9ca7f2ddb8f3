/// kloosterman-lab: batch verification runs, orbit tables and
/// machine-readable reports for the orbital-integral library.
///
/// Commands
///   omega    per-sample orbital integrals of a test function
///   verify   inversion | partial-inversion | factorization |
///            simple-inversion | weil
///   orbits   list | classify
///   match    two-sided residuals of the matching condition
///
/// Exit codes: 0 success, 1 usage/config error, 2 numeric non-convergence,
/// 3 identity violation (residual over tolerance).

#include <fstream>
#include <iostream>
#include <set>
#include <string>

#include <CLI11.hpp>
#include <json.hpp>

#include "klab/config.hpp"
#include "klab/jacquet.hpp"
#include "klab/orbital.hpp"
#include "klab/orbits.hpp"
#include "klab/report.hpp"
#include "klab/schwartz.hpp"
#include "klab/version.hpp"

namespace {

using namespace klab;
using nlohmann::json;

constexpr int kExitOk = 0;
constexpr int kExitUsage = 1;
constexpr int kExitNonConverged = 2;
constexpr int kExitViolation = 3;

struct CommonArgs {
  std::string config_path;
  std::vector<std::string> overrides;
};

RunConfig load_config(const CommonArgs& args) {
  RunConfig cfg;
  if (!args.config_path.empty()) cfg.load_file(args.config_path);
  for (const auto& kv : args.overrides) {
    const auto eq = kv.find('=');
    if (eq == std::string::npos) throw std::invalid_argument("--set expects key=value, got " + kv);
    cfg.set(kv.substr(0, eq), kv.substr(eq + 1));
  }
  return cfg;
}

SchwartzFn load_function(const RunConfig& cfg, const std::string& key) {
  const std::string path = cfg.get_string(key);
  if (path.empty()) throw std::invalid_argument("config: missing required key '" + key + "'");
  std::ifstream in(path);
  if (!in) throw std::invalid_argument("cannot open function file: " + path);
  json j;
  try {
    in >> j;
  } catch (const std::exception& e) {
    throw std::invalid_argument("function file " + path + ": invalid JSON: " + e.what());
  }
  try {
    return schwartz_from_json(j);
  } catch (const std::exception& e) {
    throw std::invalid_argument("function file " + path + ": " + e.what());
  }
}

void emit(const RunConfig& cfg, const json& payload, const std::string& csv) {
  const std::string format = cfg.get_string("format", "json");
  std::string body;
  if (format == "json")
    body = payload.dump(2) + "\n";
  else if (format == "csv")
    body = csv;
  else
    throw std::invalid_argument("config: format must be json or csv");
  const std::string out = cfg.get_string("output");
  if (out.empty())
    std::cout << body;
  else
    write_text_file(out, body);
}

std::vector<TorusPoint> torus_samples(const RunConfig& cfg, int n, const std::string& dflt) {
  std::vector<TorusPoint> pts;
  for (const auto& tuple : cfg.get_samples("samples", dflt)) {
    if (static_cast<int>(tuple.size()) != n)
      throw std::invalid_argument("config: sample arity does not match n");
    pts.push_back(TorusPoint(tuple));
  }
  return pts;
}

int cmd_omega(const RunConfig& cfg) {
  cfg.validate(RunConfig::common_keys(), "omega");
  const SchwartzFn f = load_function(cfg, "function");
  const int n = f.n();
  const int sign = cfg.get_int("sign", +1);
  const bool tilde = cfg.get_string("identity", "omega") == "omega-tilde";
  const QuadSpec spec = cfg.quad_spec();
  const auto samples = torus_samples(cfg, n, n == 1 ? "1" : (n == 2 ? "1,1;1,2" : "1,1,1"));

  json rows = json::array();
  CsvWriter csv;
  csv.row({"a", "value_re", "value_im", "err", "evals", "converged"});
  bool all_ok = true;
  for (const auto& a : samples) {
    const QuadResult r = tilde ? omega_tilde(f, a, sign, spec) : omega(f, a, sign, spec);
    all_ok = all_ok && r.converged;
    json row = to_json(r);
    row["a"] = a.diag;
    rows.push_back(row);
    csv.row({fmt_vector(a.diag), fmt_double(r.value.real()), fmt_double(r.value.imag()),
             fmt_double(r.err_est), std::to_string(r.evals), r.converged ? "true" : "false"});
  }
  json payload;
  payload["command"] = "omega";
  payload["tag"] = tag_name(f.tag());
  payload["n"] = n;
  payload["sign"] = sign;
  payload["samples"] = rows;
  emit(cfg, payload, csv.str());
  return all_ok ? kExitOk : kExitNonConverged;
}

int verify_exit(const VerifyReport& rep) {
  if (!rep.converged) return kExitNonConverged;
  return rep.pass ? kExitOk : kExitViolation;
}

int cmd_verify(const std::string& identity, const RunConfig& cfg) {
  cfg.validate(RunConfig::common_keys(), "verify " + identity);
  const int sign = cfg.get_int("sign", +1);
  const QuadSpec spec = cfg.quad_spec();

  if (identity == "weil") {
    const double tol = cfg.get_double("tolerance", 1e-3);
    json payload;
    payload["command"] = "verify";
    payload["identity"] = "weil";
    CsvWriter csv;
    csv.row({"tag", "value_re", "value_im", "raw_re", "raw_im", "residual"});
    bool pass = true;
    for (AlgebraTag tag : {AlgebraTag::SplitRR, AlgebraTag::ComplexC}) {
      const WeilConstant w = weil_constant(tag, sign, spec);
      payload[tag_name(tag)] = to_json(w);
      csv.row({tag_name(tag), fmt_double(w.value.real()), fmt_double(w.value.imag()),
               fmt_double(w.raw.real()), fmt_double(w.raw.imag()), fmt_double(w.residual)});
      pass = pass && w.residual <= tol;
      const cplx sq = w.value * w.value;
      if (tag == AlgebraTag::SplitRR) pass = pass && w.value == cplx(1, 0);
      if (tag == AlgebraTag::ComplexC) pass = pass && std::abs(sq + cplx(1, 0)) < 1e-12;
    }
    payload["pass"] = pass;
    emit(cfg, payload, csv.str());
    return pass ? kExitOk : kExitViolation;
  }

  const SchwartzFn f = load_function(cfg, "function");
  const int workers = cfg.get_int("workers", 1);

  VerifyReport rep;
  if (identity == "inversion") {
    const double tol = cfg.get_double("tolerance", f.n() == 1 ? 1e-8 : 1e-2);
    const auto samples = torus_samples(cfg, f.n(), f.n() == 1 ? "0.5;1;2" : "1,2;1,-1");
    rep = verify_inversion(f, samples, sign, spec, tol, workers);
  } else if (identity == "partial-inversion") {
    const double tol = cfg.get_double("tolerance", 1e-3);
    std::vector<std::array<double, 2>> samples;
    for (const auto& t : cfg.get_samples("samples", "1,1;1,2;-1,1.5")) {
      if (t.size() != 2) throw std::invalid_argument("partial-inversion samples must be pairs");
      samples.push_back({t[0], t[1]});
    }
    rep = verify_partial_inversion(f, samples, sign, spec, tol, workers);
  } else if (identity == "factorization") {
    const double tol = cfg.get_double("tolerance", f.n() == 2 ? 1e-4 : 1e-2);
    const auto samples = torus_samples(cfg, f.n(), f.n() == 2 ? "1,2" : "1,1,1");
    const int i = 1;  // block cut after the first row; other cuts via the library
    rep.identity = "factorization";
    rep.pass = true;
    rep.converged = true;
    rep.tolerance = tol;
    for (const auto& a : samples) {
      VerifyReport one = verify_factorization(f, i, a, sign, spec, tol);
      rep.n = one.n;
      rep.tag = one.tag;
      rep.sign = one.sign;
      rep.expected_constant = one.expected_constant;
      rep.inferred_constant = one.inferred_constant;
      rep.max_residual = std::max(rep.max_residual, one.max_residual);
      rep.evals += one.evals;
      rep.converged = rep.converged && one.converged;
      for (auto& s : one.samples) rep.samples.push_back(std::move(s));
    }
    rep.pass = rep.max_residual <= tol;
  } else if (identity == "simple-inversion") {
    const double tol = cfg.get_double("tolerance", 3e-2);
    std::vector<double> a_values;
    for (const auto& t : cfg.get_samples("samples", "0.5;-0.5;1;-1;2")) {
      if (t.size() != 1) throw std::invalid_argument("simple-inversion samples are scalars");
      a_values.push_back(t[0]);
    }
    rep = verify_simple_inversion(f, a_values, sign, spec, tol);
  } else {
    throw std::invalid_argument("unknown identity: " + identity);
  }
  json payload = to_json(rep);
  payload["command"] = "verify";
  emit(cfg, payload, verify_report_csv(rep));
  return verify_exit(rep);
}

int cmd_orbits_list(const RunConfig& cfg) {
  cfg.validate(RunConfig::common_keys(), "orbits list");
  const AlgebraTag tag = tag_from_name(cfg.get_string("tag", "ComplexC"));
  const int n = cfg.get_int("n", 2);
  const auto grid = cfg.get_list("grid", "1,-1");
  const bool singular = cfg.get_long("include_singular", 1) != 0;
  const auto reps = relevant_representatives(tag, n, grid, singular);
  json rows = json::array();
  CsvWriter csv;
  csv.row({"blocks", "singular", "relevant"});
  for (const auto& r : reps) {
    json row = to_json(r);
    row["relevant"] = is_relevant(r.materialize());
    rows.push_back(row);
    std::string blocks;
    for (const auto& [m, a] : r.blocks) blocks += "(" + std::to_string(m) + "," + fmt_double(a) + ")";
    csv.row({blocks, r.singular_tail ? "true" : "false",
             is_relevant(r.materialize()) ? "true" : "false"});
  }
  json payload;
  payload["command"] = "orbits list";
  payload["tag"] = tag_name(tag);
  payload["n"] = n;
  payload["count"] = reps.size();
  payload["representatives"] = rows;
  emit(cfg, payload, csv.str());
  return kExitOk;
}

int cmd_orbits_classify(const RunConfig& cfg) {
  cfg.validate(RunConfig::common_keys(), "orbits classify");
  const std::string path = cfg.get_string("matrix");
  if (path.empty()) throw std::invalid_argument("orbits classify: missing 'matrix' key");
  std::ifstream in(path);
  if (!in) throw std::invalid_argument("cannot open matrix file: " + path);
  json j;
  in >> j;
  const HermitianMatrix x = hermitian_from_json(j);
  json payload;
  payload["command"] = "orbits classify";
  payload["relevant"] = is_relevant(x);
  payload["stabilizer_dim"] = stabilizer_lie(x).dim();
  const auto region = region_classify(x);
  payload["in_U"] = region.in_U;
  payload["in_Z"] = region.in_Z;
  payload["in_Zprime"] = region.in_Zprime;
  CsvWriter csv;
  csv.row({"relevant", "stabilizer_dim", "canonical"});
  std::string canon = "irrelevant";
  if (const auto rep = canonical_form(x)) {
    payload["canonical"] = to_json(*rep);
    canon.clear();
    for (const auto& [m, a] : rep->blocks) canon += "(" + std::to_string(m) + "," + fmt_double(a) + ")";
  } else {
    payload["canonical"] = "irrelevant";
  }
  csv.row({payload["relevant"].get<bool>() ? "true" : "false",
           std::to_string(stabilizer_lie(x).dim()), canon});
  emit(cfg, payload, csv.str());
  return kExitOk;
}

int cmd_match(const RunConfig& cfg) {
  cfg.validate(RunConfig::common_keys(), "match");
  const SchwartzFn phi = load_function(cfg, "function");
  const SchwartzFn psi_fn = load_function(cfg, "function2");
  const int sign = cfg.get_int("sign", +1);
  const double tol = cfg.get_double("tolerance", 1e-6);
  const QuadSpec spec = cfg.quad_spec();
  const auto samples = torus_samples(cfg, phi.n(), phi.n() == 1 ? "0.5;1;2" : "1,1;1,2");
  const MatchReport rep = match_residual(phi, psi_fn, samples, sign, spec);
  json payload = to_json(rep);
  payload["command"] = "match";
  payload["tolerance"] = tol;
  payload["pass"] = rep.max_residual <= tol;
  emit(cfg, payload, match_report_csv(rep));
  if (!rep.all_converged) return kExitNonConverged;
  return rep.max_residual <= tol ? kExitOk : kExitViolation;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"kloosterman-lab: orbital integrals, transfer factors and inversion checks"};
  app.set_version_flag("--version", std::string("kloosterman-lab ") + klab::kVersion);
  app.require_subcommand(1);

  CommonArgs args;
  auto add_common = [&](CLI::App* sub) {
    sub->add_option("--config", args.config_path, "flat key=value config file");
    sub->add_option("--set", args.overrides, "override config entries (key=value)")
        ->take_all();
  };

  auto* omega_cmd = app.add_subcommand("omega", "orbital integrals at torus samples");
  add_common(omega_cmd);

  std::string identity;
  auto* verify_cmd = app.add_subcommand("verify", "numeric identity checks");
  verify_cmd
      ->add_option("identity", identity,
                   "inversion|partial-inversion|factorization|simple-inversion|weil")
      ->required();
  add_common(verify_cmd);

  auto* orbits_cmd = app.add_subcommand("orbits", "orbit enumeration and classification");
  std::string orbits_mode;
  orbits_cmd->add_option("mode", orbits_mode, "list|classify")->required();
  add_common(orbits_cmd);

  auto* match_cmd = app.add_subcommand("match", "matching-condition residuals");
  add_common(match_cmd);

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    return app.exit(e) ? kExitUsage : kExitOk;
  }

  try {
    const RunConfig cfg = load_config(args);
    if (omega_cmd->parsed()) return cmd_omega(cfg);
    if (verify_cmd->parsed()) return cmd_verify(identity, cfg);
    if (orbits_cmd->parsed()) {
      if (orbits_mode == "list") return cmd_orbits_list(cfg);
      if (orbits_mode == "classify") return cmd_orbits_classify(cfg);
      throw std::invalid_argument("orbits mode must be list or classify");
    }
    if (match_cmd->parsed()) return cmd_match(cfg);
    return kExitUsage;
  } catch (const std::invalid_argument& e) {
    std::cerr << "error: " << e.what() << "\n";
    return kExitUsage;
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << "\n";
    return kExitNonConverged;
  }
}

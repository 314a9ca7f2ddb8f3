#pragma once

/// Orbit structure of the twisted unipotent action: stabilizer Lie algebras,
/// the relevance predicate, enumeration of relevant representatives in
/// anti-diagonal block form, and canonical forms for n <= 3.
///
/// Relevance is decided on the Lie algebra: stabilizers of points under
/// algebraic actions of unipotent groups are connected, so the character is
/// trivial on the stabilizer exactly when its differential vanishes on the
/// stabilizer Lie algebra.
///
/// The block representatives are diag(a_1 w_{m_1}, ..., a_k w_{m_k}) with
/// nonzero a_j, except that a trailing 1x1 zero block is allowed when the
/// leading (n-1)-minor stays nonzero.

#include <cmath>
#include <functional>
#include <optional>
#include <stdexcept>
#include <vector>

#include <eigen3/Eigen/Dense>
#include <json.hpp>

#include "klab/algebra.hpp"
#include "klab/orbital.hpp"

namespace klab {

struct OrbitRep {
  AlgebraTag tag;
  std::vector<std::pair<int, double>> blocks;  // (m_j, a_j)
  bool singular_tail = false;                  // trailing (1, 0) block present

  int n() const {
    int s = 0;
    for (const auto& [m, a] : blocks) s += m;
    return s;
  }

  HermitianMatrix materialize() const {
    const int N = n();
    Eigen::MatrixXcd out = Eigen::MatrixXcd::Zero(N, N);
    int off = 0;
    for (const auto& [m, a] : blocks) {
      out.block(off, off, m, m) = (a * weyl_longest(m)).cast<cplx>();
      off += m;
    }
    return HermitianMatrix(tag, out);
  }

  void validate() const {
    if (blocks.empty()) throw std::invalid_argument("OrbitRep: empty");
    for (size_t j = 0; j < blocks.size(); ++j) {
      const bool last = j + 1 == blocks.size();
      if (blocks[j].first < 1) throw std::invalid_argument("OrbitRep: bad block size");
      if (blocks[j].second == 0.0) {
        if (!(last && blocks[j].first == 1 && singular_tail))
          throw std::invalid_argument("OrbitRep: zero value outside singular tail");
      }
    }
  }
};

struct StabilizerBasis {
  AlgebraTag tag;
  int n;
  // each basis vector in the strict-upper coordinate chart (UnipotentCoord layout)
  std::vector<Eigen::VectorXd> basis;
  int dim() const { return static_cast<int>(basis.size()); }
};

namespace detail {

/// Chart of the derivative of the action at g, as a matrix from the
/// strict-upper Lie coordinates to the chart of the target space.
inline Eigen::MatrixXd stabilizer_equation_matrix(const HermitianMatrix& g) {
  const AlgebraTag tag = g.tag();
  const int n = g.n();
  const int d = UnipotentCoord::dim(n);
  const int rows = n * n;
  Eigen::MatrixXd A(rows, d);
  const int m = n * (n - 1) / 2;
  for (int k = 0; k < d; ++k) {
    Eigen::MatrixXcd X1 = Eigen::MatrixXcd::Zero(n, n);
    Eigen::MatrixXcd X2 = Eigen::MatrixXcd::Zero(n, n);
    // decode chart slot k into a strict upper entry
    if (tag == AlgebraTag::SplitRR) {
      int idx = k % m, which = k / m, t = 0;
      for (int r = 0; r < n; ++r)
        for (int c = r + 1; c < n; ++c, ++t)
          if (t == idx) (which == 0 ? X1 : X2)(r, c) = 1.0;
    } else {
      int idx = k / 2, t = 0;
      const bool imag_part = k % 2 == 1;
      for (int r = 0; r < n; ++r)
        for (int c = r + 1; c < n; ++c, ++t)
          if (t == idx) X1(r, c) = imag_part ? cplx(0, 1) : cplx(1, 0);
    }
    Eigen::MatrixXcd M;
    if (tag == AlgebraTag::SplitRR)
      M = X2.transpose() * g.entries() + g.entries() * X1;
    else
      M = X1.adjoint() * g.entries() + g.entries() * X1;
    // target chart: all n^2 real coordinates
    if (tag == AlgebraTag::SplitRR) {
      int t = 0;
      for (int r = 0; r < n; ++r)
        for (int c = 0; c < n; ++c) A(t++, k) = M(r, c).real();
    } else {
      int t = 0;
      for (int r = 0; r < n; ++r) A(t++, k) = M(r, r).real();
      for (int r = 0; r < n; ++r)
        for (int c = r + 1; c < n; ++c) {
          A(t++, k) = M(r, c).real();
          A(t++, k) = M(r, c).imag();
        }
    }
  }
  return A;
}

/// Coefficients of the character differential on the Lie coordinates.
inline Eigen::VectorXd chi_differential(AlgebraTag tag, int n) {
  const int d = UnipotentCoord::dim(n);
  const int m = n * (n - 1) / 2;
  Eigen::VectorXd v = Eigen::VectorXd::Zero(d);
  int t = 0;
  for (int r = 0; r < n; ++r)
    for (int c = r + 1; c < n; ++c, ++t) {
      if (c != r + 1) continue;
      if (tag == AlgebraTag::SplitRR) {
        v[t] = 1.0;
        v[m + t] = 1.0;
      } else {
        v[2 * t] = 2.0;
      }
    }
  return v;
}

}  // namespace detail

/// Basis of the stabilizer Lie algebra {X strictly upper : d/dt act(exp tX, g) = 0}.
inline StabilizerBasis stabilizer_lie(const HermitianMatrix& g) {
  const Eigen::MatrixXd A = detail::stabilizer_equation_matrix(g);
  Eigen::JacobiSVD<Eigen::MatrixXd> svd(A, Eigen::ComputeFullV);
  const auto& sv = svd.singularValues();
  const double thresh = 1e-10 * (sv.size() ? sv[0] : 0.0);
  StabilizerBasis out{g.tag(), g.n(), {}};
  for (int k = 0; k < svd.matrixV().cols(); ++k) {
    const double s = k < sv.size() ? sv[k] : 0.0;
    if (s <= thresh) out.basis.push_back(svd.matrixV().col(k));
  }
  return out;
}

/// chi is trivial on the stabilizer iff its differential vanishes there.
inline bool is_relevant(const HermitianMatrix& g) {
  const StabilizerBasis st = stabilizer_lie(g);
  if (st.basis.empty()) return true;
  const Eigen::VectorXd v = detail::chi_differential(g.tag(), g.n());
  for (const auto& b : st.basis)
    if (std::abs(v.dot(b)) > 1e-8 * (v.norm() + 1.0)) return false;
  return true;
}

/// All block representatives with values from the grid: compositions of n,
/// optionally with a trailing zero block (which keeps Delta_{n-1} nonzero).
inline std::vector<OrbitRep> relevant_representatives(AlgebraTag tag, int n,
                                                      const std::vector<double>& grid,
                                                      bool include_singular) {
  if (grid.empty()) throw std::invalid_argument("relevant_representatives: empty grid");
  for (double v : grid)
    if (v == 0.0) throw std::invalid_argument("relevant_representatives: zero grid value");

  std::vector<std::vector<int>> comps;
  std::vector<int> cur;
  std::function<void(int)> gen = [&](int rest) {
    if (rest == 0) {
      comps.push_back(cur);
      return;
    }
    for (int m = 1; m <= rest; ++m) {
      cur.push_back(m);
      gen(rest - m);
      cur.pop_back();
    }
  };
  gen(n);

  std::vector<OrbitRep> out;
  auto emit = [&](const std::vector<int>& comp, bool singular) {
    const int k = static_cast<int>(comp.size());
    std::vector<size_t> pick(k, 0);
    while (true) {
      OrbitRep r;
      r.tag = tag;
      for (int j = 0; j < k; ++j) r.blocks.push_back({comp[j], grid[pick[j]]});
      if (singular) {
        r.blocks.push_back({1, 0.0});
        r.singular_tail = true;
      }
      r.validate();
      out.push_back(std::move(r));
      int j = k - 1;
      while (j >= 0 && ++pick[j] == grid.size()) pick[j--] = 0;
      if (j < 0) break;
    }
  };
  for (const auto& comp : comps) emit(comp, false);
  if (include_singular && n >= 2) {
    std::vector<std::vector<int>> comps1;
    std::vector<int> c1;
    std::function<void(int)> gen1 = [&](int rest) {
      if (rest == 0) {
        comps1.push_back(c1);
        return;
      }
      for (int m = 1; m <= rest; ++m) {
        c1.push_back(m);
        gen1(rest - m);
        c1.pop_back();
      }
    };
    gen1(n - 1);
    for (const auto& comp : comps1) emit(comp, true);
  }
  return out;
}

namespace detail {

/// Least-squares search for u with act(u, rep) = x. Gauss-Newton with a
/// Levenberg damping term and a few deterministic restarts; the step uses
/// the minimum-norm solution, so positive-dimensional stabilizers are fine.
inline std::optional<UnipotentCoord> solve_orbit_membership(const HermitianMatrix& rep,
                                                            const HermitianMatrix& x,
                                                            double tol = 1e-8) {
  const AlgebraTag tag = x.tag();
  const int n = x.n();
  const int d = UnipotentCoord::dim(n);
  const Eigen::VectorXd target = x.to_chart();
  const double scale = target.norm() + 1.0;
  auto resid = [&](const Eigen::VectorXd& c) {
    UnipotentCoord u{tag, n, c};
    return Eigen::VectorXd(act(u, rep).to_chart() - target);
  };
  std::vector<Eigen::VectorXd> starts;
  starts.push_back(Eigen::VectorXd::Zero(d));
  starts.push_back(Eigen::VectorXd::Constant(d, 0.1));
  starts.push_back(Eigen::VectorXd::Constant(d, -0.1));
  {
    Eigen::VectorXd alt(d);
    for (int k = 0; k < d; ++k) alt[k] = k % 2 ? 0.2 : -0.2;
    starts.push_back(alt);
  }
  for (const auto& start : starts) {
    Eigen::VectorXd c = start;
    double lambda = 1e-3;
    for (int it = 0; it < 120; ++it) {
      const Eigen::VectorXd F = resid(c);
      if (F.norm() <= tol * scale) return UnipotentCoord{tag, n, c};
      Eigen::MatrixXd J(F.size(), d);
      const double h = 1e-6;
      for (int k = 0; k < d; ++k) {
        Eigen::VectorXd cp = c, cm = c;
        cp[k] += h;
        cm[k] -= h;
        J.col(k) = (resid(cp) - resid(cm)) / (2 * h);
      }
      const Eigen::MatrixXd JtJ =
          J.transpose() * J + lambda * Eigen::MatrixXd::Identity(d, d);
      const Eigen::VectorXd step = JtJ.ldlt().solve(J.transpose() * F);
      const Eigen::VectorXd cand = c - step;
      if (resid(cand).norm() < F.norm()) {
        c = cand;
        lambda = std::max(lambda * 0.5, 1e-12);
      } else {
        lambda *= 8.0;
        if (lambda > 1e8) break;
      }
    }
    const Eigen::VectorXd F = resid(c);
    if (F.norm() <= tol * scale) return UnipotentCoord{tag, n, c};
  }
  return std::nullopt;
}

inline bool near_zero(double v, double scale) { return std::abs(v) <= 1e-10 * scale; }

}  // namespace detail

/// Canonical block representative of the orbit of x (n <= 3), or nullopt if
/// the orbit is irrelevant. Candidates are read off the minor invariants and
/// confirmed by an explicit orbit-membership solve.
inline std::optional<OrbitRep> canonical_form(const HermitianMatrix& x) {
  const AlgebraTag tag = x.tag();
  const int n = x.n();
  if (n > 3) throw std::invalid_argument("canonical_form: supported for n <= 3 only");
  const double sc = x.entries().cwiseAbs().maxCoeff() + 1.0;

  auto confirmed = [&](OrbitRep r) -> std::optional<OrbitRep> {
    r.tag = tag;
    r.validate();
    if (detail::solve_orbit_membership(r.materialize(), x)) return r;
    return std::nullopt;
  };

  if (n == 1) {
    const double a = x.entries()(0, 0).real();
    OrbitRep r{tag, {{1, a}}, a == 0.0};
    return r;
  }

  std::vector<double> delta(n);
  for (int i = 1; i <= n; ++i) delta[i - 1] = minor_delta(x, i);
  auto zero = [&](int i) { return detail::near_zero(delta[i - 1], std::pow(sc, i)); };

  // anti-diagonal value shared by both off entries, when real
  auto corner_value = [&](int r, int c) -> std::optional<double> {
    const cplx top = x.entries()(r, c), bot = x.entries()(c, r);
    if (tag == AlgebraTag::ComplexC) {
      if (std::abs(top.imag()) > 1e-10 * sc) return std::nullopt;
      return top.real();
    }
    if (std::abs(top - bot) > 1e-10 * sc) return std::nullopt;
    return top.real();
  };

  if (n == 2) {
    if (!zero(1)) {
      OrbitRep r{tag, {{1, delta[0]}, {1, delta[1] / delta[0]}}, false};
      if (zero(2)) {
        r.blocks[1].second = 0.0;
        r.singular_tail = true;
      }
      return confirmed(r);
    }
    const auto a = corner_value(0, 1);
    if (a && *a != 0.0) return confirmed(OrbitRep{tag, {{2, *a}}, false});
    return std::nullopt;
  }

  // n == 3
  if (!zero(1) && !zero(2)) {
    OrbitRep r{tag, {{1, delta[0]}, {1, delta[1] / delta[0]}, {1, delta[2] / delta[1]}}, false};
    if (zero(3)) {
      r.blocks[2].second = 0.0;
      r.singular_tail = true;
    }
    return confirmed(r);
  }
  if (!zero(1) && zero(2)) {
    if (zero(3)) return std::nullopt;  // would need a zero block above the tail
    const double asq = -delta[2] / delta[0];
    if (asq <= 0) return std::nullopt;
    const double a = std::sqrt(asq);
    for (double cand : {a, -a}) {
      auto r = confirmed(OrbitRep{tag, {{1, delta[0]}, {2, cand}}, false});
      if (r) return r;
    }
    return std::nullopt;
  }
  if (zero(1) && !zero(2)) {
    const auto a = corner_value(0, 1);
    if (!a || *a == 0.0) return std::nullopt;
    OrbitRep r{tag, {{2, *a}, {1, delta[2] / delta[1]}}, false};
    if (zero(3)) {
      r.blocks[1].second = 0.0;
      r.singular_tail = true;
    }
    return confirmed(r);
  }
  // Delta_1 = Delta_2 = 0: only the full anti-diagonal block is possible
  if (zero(3)) return std::nullopt;
  const double a = std::cbrt(-delta[2]);
  return confirmed(OrbitRep{tag, {{3, a}}, false});
}

// --- singular orbital integrals ----------------------------------------------

/// Integral over N / N_g at a relevant representative. The quotient is
/// parameterized by the chart coordinates outside the row-echelon pivot set
/// of the stabilizer basis, with Lebesgue measure there.
inline QuadResult omega_singular(const SchwartzFn& f, const OrbitRep& rep, int sign,
                                 const QuadSpec& spec_in) {
  rep.validate();
  const HermitianMatrix g = rep.materialize();
  if (g.tag() != f.tag() || g.n() != f.n())
    throw std::invalid_argument("omega_singular: shape mismatch");
  if (!is_relevant(g)) throw std::invalid_argument("omega_singular: irrelevant representative");

  const int n = g.n();
  const int d = UnipotentCoord::dim(n);
  const StabilizerBasis st = stabilizer_lie(g);
  // row echelon over the basis to find pivot coordinates
  std::vector<int> pivots;
  if (!st.basis.empty()) {
    Eigen::MatrixXd K(st.dim(), d);
    for (int r = 0; r < st.dim(); ++r) K.row(r) = st.basis[r];
    int row = 0;
    for (int col = 0; col < d && row < K.rows(); ++col) {
      int best = -1;
      double bestv = 1e-9 * (K.cwiseAbs().maxCoeff() + 1.0);
      for (int r = row; r < K.rows(); ++r)
        if (std::abs(K(r, col)) > bestv) {
          bestv = std::abs(K(r, col));
          best = r;
        }
      if (best < 0) continue;
      K.row(best).swap(K.row(row));
      K.row(row) /= K(row, col);
      for (int r = 0; r < K.rows(); ++r)
        if (r != row) K.row(r) -= K(r, col) * K.row(row);
      pivots.push_back(col);
      ++row;
    }
  }
  std::vector<int> free_coords;
  {
    std::vector<bool> is_pivot(d, false);
    for (int p : pivots) is_pivot[p] = true;
    for (int k = 0; k < d; ++k)
      if (!is_pivot[k]) free_coords.push_back(k);
  }
  const int q = static_cast<int>(free_coords.size());
  auto lift = [&](const Eigen::VectorXd& c) {
    Eigen::VectorXd full = Eigen::VectorXd::Zero(d);
    for (int k = 0; k < q; ++k) full[free_coords[k]] = c[k];
    return UnipotentCoord{g.tag(), n, full};
  };
  if (q == 0) {
    QuadResult r;
    r.value = f.eval(g);
    r.evals = 1;
    r.converged = true;
    return r;
  }
  Integrand integ = [&](const Eigen::VectorXd& c) -> cplx {
    const UnipotentCoord u = lift(c);
    return f.eval(act(u, g)) * chi(u, sign);
  };
  auto amp = [&](const Eigen::VectorXd& c) { return std::abs(integ(c)); };
  const double R =
      detail::probe_box(amp, q, f.decay_radius(1e-6) + 2.0, std::max(1e-14, spec_in.abs_tol * 1e-3));
  QuadSpec spec = detail::scheme_for_dim(spec_in, q, R);
  return integrate(integ, spec);
}

/// Extended transfer factor on block representatives: the anti-diagonal
/// blocks contribute through the period-8 table, and splitting off the
/// leading block multiplies by sign(det of that block) to the power of the
/// remaining size. On all-scalar blocks this reduces to the regular factor.
inline cplx transfer_factor_extended(const OrbitRep& rep, int sign = +1) {
  rep.validate();
  cplx out(1, 0);
  int rest = rep.n();
  for (size_t j = 0; j < rep.blocks.size(); ++j) {
    const auto [m, a] = rep.blocks[j];
    rest -= m;
    out *= gamma_block_table(m, a, sign);
    if (rest > 0) {
      double det = weyl_det_sign(m);
      for (int k = 0; k < m; ++k) det *= a;
      const double sd = det >= 0 ? 1.0 : -1.0;
      if (rest % 2 == 1) out *= sd;
    }
  }
  const cplx fourth = out * out * out * out;
  if (std::abs(fourth.imag()) > 1e-9 || std::abs(std::abs(fourth.real()) - 1.0) > 1e-9)
    throw std::logic_error("transfer_factor_extended: not a fourth root of unity");
  return out;
}

// --- serialization -------------------------------------------------------------

inline nlohmann::json to_json(const OrbitRep& r) {
  nlohmann::json j;
  j["tag"] = tag_name(r.tag);
  nlohmann::json blocks = nlohmann::json::array();
  for (const auto& [m, a] : r.blocks) blocks.push_back({m, a});
  j["blocks"] = blocks;
  j["singular"] = r.singular_tail;
  return j;
}

inline OrbitRep orbit_rep_from_json(const nlohmann::json& j) {
  OrbitRep r;
  r.tag = tag_from_name(j.at("tag").get<std::string>());
  for (const auto& b : j.at("blocks")) r.blocks.push_back({b[0].get<int>(), b[1].get<double>()});
  r.singular_tail = j.value("singular", false);
  r.validate();
  return r;
}

}  // namespace klab

#pragma once

/// Linear algebra over the two-dimensional algebras D = R(+)R and D = C:
/// Hermitian matrices, their coordinate chart, leading minors, Weyl
/// elements, the pairing forms, and the region predicates used to stratify
/// the Hermitian space.
///
/// Storage conventions
///   SplitRR:  a Hermitian matrix over R(+)R is the pair (M, M^t); only the
///             first component M (an arbitrary real n x n matrix) is stored.
///   ComplexC: an ordinary complex Hermitian matrix.
///
/// Chart of H^n(D) ~ R^{n^2}
///   SplitRR:  the n^2 entries of M in row-major order.
///   ComplexC: the n real diagonal entries, then (Re x_ij, Im x_ij) for
///             i < j in row-major order.
/// Every Lebesgue measure, Gram matrix and quadrature in this project
/// refers to this chart.

#include <cmath>
#include <complex>
#include <stdexcept>
#include <string>
#include <vector>

#include <eigen3/Eigen/Dense>
#include <json.hpp>

#include "klab/poly.hpp"

namespace klab {

enum class AlgebraTag { SplitRR, ComplexC };

inline const char* tag_name(AlgebraTag t) { return t == AlgebraTag::SplitRR ? "SplitRR" : "ComplexC"; }

inline AlgebraTag tag_from_name(const std::string& s) {
  if (s == "SplitRR") return AlgebraTag::SplitRR;
  if (s == "ComplexC") return AlgebraTag::ComplexC;
  throw std::invalid_argument("unknown algebra tag: " + s);
}

inline int dim_R(AlgebraTag) { return 2; }

/// A scalar of D. ComplexC: a + ib. SplitRR: the ordered pair (a, b).
struct DElem {
  double a = 0.0;
  double b = 0.0;
};

/// The nontrivial involution of D: conjugation resp. coordinate swap.
inline DElem involve(AlgebraTag tag, DElem x) {
  if (tag == AlgebraTag::ComplexC) return {x.a, -x.b};
  return {x.b, x.a};
}

/// Trace of D over R (R-linear, doubling on the fixed line).
inline double trace_to_R(AlgebraTag tag, DElem x) {
  if (tag == AlgebraTag::ComplexC) return 2.0 * x.a;
  return x.a + x.b;
}

/// Entrywise involution on a complex matrix (ComplexC-valued entries).
inline Eigen::MatrixXcd involve(const Eigen::MatrixXcd& x) { return x.conjugate(); }

/// A general matrix over R(+)R, stored as its two components.
struct SplitMatrix {
  Eigen::MatrixXd first, second;
};

/// Entrywise involution on a SplitMatrix: swap of the two components.
inline SplitMatrix involve(const SplitMatrix& x) { return {x.second, x.first}; }

class HermitianMatrix {
 public:
  HermitianMatrix(AlgebraTag tag, Eigen::MatrixXcd entries, double hermiticity_tol = 1e-12)
      : tag_(tag), n_(static_cast<int>(entries.rows())) {
    if (entries.rows() != entries.cols()) throw std::invalid_argument("HermitianMatrix: not square");
    if (tag_ == AlgebraTag::ComplexC) {
      const double scale = entries.cwiseAbs().maxCoeff() + 1.0;
      if ((entries - entries.adjoint()).cwiseAbs().maxCoeff() > hermiticity_tol * scale)
        throw std::invalid_argument("HermitianMatrix: ComplexC entries are not Hermitian");
      m_ = 0.5 * (entries + entries.adjoint());
    } else {
      if (entries.imag().cwiseAbs().maxCoeff() > 0.0)
        throw std::invalid_argument("HermitianMatrix: SplitRR stored matrix must be real");
      m_ = entries;
    }
  }

  static HermitianMatrix from_real(AlgebraTag tag, const Eigen::MatrixXd& m) {
    return HermitianMatrix(tag, m.cast<cplx>());
  }

  static HermitianMatrix zero(AlgebraTag tag, int n) {
    return HermitianMatrix(tag, Eigen::MatrixXcd::Zero(n, n));
  }

  static HermitianMatrix diagonal(AlgebraTag tag, const Eigen::VectorXd& d) {
    Eigen::MatrixXcd m = Eigen::MatrixXcd::Zero(d.size(), d.size());
    for (int i = 0; i < d.size(); ++i) m(i, i) = d[i];
    return HermitianMatrix(tag, m);
  }

  AlgebraTag tag() const { return tag_; }
  int n() const { return n_; }
  const Eigen::MatrixXcd& entries() const { return m_; }

  int chart_dim() const { return n_ * n_; }

  Eigen::VectorXd to_chart() const {
    Eigen::VectorXd v(chart_dim());
    if (tag_ == AlgebraTag::SplitRR) {
      int k = 0;
      for (int i = 0; i < n_; ++i)
        for (int j = 0; j < n_; ++j) v[k++] = m_(i, j).real();
    } else {
      int k = 0;
      for (int i = 0; i < n_; ++i) v[k++] = m_(i, i).real();
      for (int i = 0; i < n_; ++i)
        for (int j = i + 1; j < n_; ++j) {
          v[k++] = m_(i, j).real();
          v[k++] = m_(i, j).imag();
        }
    }
    return v;
  }

  static HermitianMatrix from_chart(AlgebraTag tag, int n, const Eigen::VectorXd& v) {
    if (v.size() != n * n) throw std::invalid_argument("from_chart: wrong length");
    Eigen::MatrixXcd m = Eigen::MatrixXcd::Zero(n, n);
    if (tag == AlgebraTag::SplitRR) {
      int k = 0;
      for (int i = 0; i < n; ++i)
        for (int j = 0; j < n; ++j) m(i, j) = v[k++];
    } else {
      int k = 0;
      for (int i = 0; i < n; ++i) m(i, i) = v[k++];
      for (int i = 0; i < n; ++i)
        for (int j = i + 1; j < n; ++j) {
          m(i, j) = cplx(v[k], v[k + 1]);
          m(j, i) = cplx(v[k], -v[k + 1]);
          k += 2;
        }
    }
    return HermitianMatrix(tag, m);
  }

 private:
  AlgebraTag tag_;
  int n_;
  Eigen::MatrixXcd m_;
};

struct TorusPoint {
  std::vector<double> diag;

  explicit TorusPoint(std::vector<double> d) : diag(std::move(d)) {
    for (double x : diag)
      if (x == 0.0) throw std::invalid_argument("TorusPoint: zero entry");
  }
  int n() const { return static_cast<int>(diag.size()); }

  HermitianMatrix materialize(AlgebraTag tag) const {
    Eigen::VectorXd d = Eigen::Map<const Eigen::VectorXd>(diag.data(), diag.size());
    return HermitianMatrix::diagonal(tag, d);
  }
};

/// Leading i x i principal minor, as a real number. For ComplexC the minor
/// of a Hermitian matrix is real; the imaginary part is checked against
/// a tolerance before being discarded.
inline double minor_delta(const HermitianMatrix& x, int i) {
  if (i < 1 || i > x.n()) throw std::out_of_range("minor_delta: index out of range");
  const cplx det = x.entries().topLeftCorner(i, i).determinant();
  if (x.tag() == AlgebraTag::ComplexC) {
    const double scale = x.entries().cwiseAbs().maxCoeff() + 1.0;
    double tol = 1e-12;
    for (int k = 1; k < i; ++k) tol *= scale;  // determinant scale grows with i
    if (std::abs(det.imag()) > std::max(tol, 1e-12) * (std::abs(det.real()) + 1.0) && std::abs(det.imag()) > 1e-10)
      throw std::runtime_error("minor_delta: non-real minor of Hermitian matrix");
  }
  return det.real();
}

/// sigma(x) = product of the first n-1 leading minors (empty product = 1).
inline double sigma(const HermitianMatrix& x) {
  double p = 1.0;
  for (int i = 1; i < x.n(); ++i) p *= minor_delta(x, i);
  return p;
}

/// Longest Weyl element: the anti-diagonal permutation matrix.
inline Eigen::MatrixXd weyl_longest(int n) {
  if (n < 1) throw std::invalid_argument("weyl_longest: n must be positive");
  Eigen::MatrixXd w = Eigen::MatrixXd::Zero(n, n);
  for (int i = 0; i < n; ++i) w(i, n - 1 - i) = 1.0;
  return w;
}

inline int weyl_det_sign(int n) {
  // parity of the reversal permutation
  return (n / 2) % 2 == 0 ? 1 : -1;
}

/// The canonical real value of tr(x y) for Hermitian x, y (the trace lands
/// on the fixed line of the involution).
inline double trace_pairing_half(const HermitianMatrix& x, const HermitianMatrix& y) {
  if (x.tag() != y.tag() || x.n() != y.n()) throw std::invalid_argument("trace pairing: shape mismatch");
  return (x.entries() * y.entries()).trace().real();
}

/// B(x, y) = Tr_R(x w y w) with the full trace of D over R. This is twice
/// the half pairing used to normalize Fourier transforms.
inline double bilinear_b(const HermitianMatrix& x, const HermitianMatrix& y) {
  if (x.tag() != y.tag() || x.n() != y.n()) throw std::invalid_argument("bilinear_b: shape mismatch");
  const Eigen::MatrixXd w = weyl_longest(x.n());
  return 2.0 * (x.entries() * w * y.entries() * w).trace().real();
}

/// Half pairing attached to B; all Fourier transforms in this project are
/// normalized against the Gram matrix of this form (or of the half trace
/// form). See gram_b / gram_trace.
inline double bilinear_b_half(const HermitianMatrix& x, const HermitianMatrix& y) {
  return 0.5 * bilinear_b(x, y);
}

namespace detail {
template <class Form>
Eigen::MatrixXd gram_of(AlgebraTag tag, int n, Form&& f) {
  const int d = n * n;
  Eigen::MatrixXd g(d, d);
  std::vector<HermitianMatrix> basis;
  basis.reserve(d);
  for (int k = 0; k < d; ++k) {
    Eigen::VectorXd e = Eigen::VectorXd::Zero(d);
    e[k] = 1.0;
    basis.push_back(HermitianMatrix::from_chart(tag, n, e));
  }
  for (int i = 0; i < d; ++i)
    for (int j = 0; j < d; ++j) g(i, j) = f(basis[i], basis[j]);
  return g;
}
}  // namespace detail

/// Gram matrix of the half trace form on the chart.
inline Eigen::MatrixXd gram_trace(AlgebraTag tag, int n) {
  return detail::gram_of(tag, n, [](const HermitianMatrix& a, const HermitianMatrix& b) {
    return trace_pairing_half(a, b);
  });
}

/// Gram matrix of the half B form on the chart.
inline Eigen::MatrixXd gram_b(AlgebraTag tag, int n) {
  return detail::gram_of(tag, n, [](const HermitianMatrix& a, const HermitianMatrix& b) {
    return bilinear_b_half(a, b);
  });
}

/// Gram matrix of the doubled form B itself (the public bilinear_b).
inline Eigen::MatrixXd gram_b_full(AlgebraTag tag, int n) {
  return detail::gram_of(tag, n, [](const HermitianMatrix& a, const HermitianMatrix& b) {
    return bilinear_b(a, b);
  });
}

/// Chart matrix of the linear involution x -> w x w.
inline Eigen::MatrixXd ad_w_chart(AlgebraTag tag, int n) {
  const int d = n * n;
  const Eigen::MatrixXd w = weyl_longest(n);
  Eigen::MatrixXd L(d, d);
  for (int k = 0; k < d; ++k) {
    Eigen::VectorXd e = Eigen::VectorXd::Zero(d);
    e[k] = 1.0;
    const HermitianMatrix x = HermitianMatrix::from_chart(tag, n, e);
    const HermitianMatrix y(tag, w * x.entries() * w);
    L.col(k) = y.to_chart();
  }
  return L;
}

struct RegionFlags {
  std::vector<double> delta;  // Delta_1 .. Delta_n
  std::vector<bool> in_O;     // Delta_i != 0, i = 1 .. n-1
  bool in_U = false;
  bool in_Z = false;
  bool in_Zprime = false;
};

/// Region membership. The open sets O_i are detected by exact non-vanishing
/// of the minors; the measure-zero set Z' uses an absolute entry tolerance
/// (it is only ever used for reporting).
inline RegionFlags region_classify(const HermitianMatrix& x, double zprime_tol = 1e-10) {
  const int n = x.n();
  RegionFlags f;
  f.delta.resize(n);
  for (int i = 1; i <= n; ++i) f.delta[i - 1] = minor_delta(x, i);
  f.in_O.resize(std::max(0, n - 1));
  f.in_U = false;
  for (int i = 1; i <= n - 1; ++i) {
    f.in_O[i - 1] = f.delta[i - 1] != 0.0;
    f.in_U = f.in_U || f.in_O[i - 1];
  }
  f.in_Z = !f.in_U;
  f.in_Zprime = false;
  if (f.in_Z) {
    bool ok = true;
    const auto& m = x.entries();
    // entries above the anti-diagonal vanish; anti-diagonal entries are a
    // common real constant
    for (int i = 1; i <= n && ok; ++i)
      for (int j = 1; j <= n && ok; ++j)
        if (i + j < n + 1 && std::abs(m(i - 1, j - 1)) > zprime_tol) ok = false;
    if (ok) {
      const cplx c0 = m(0, n - 1);
      if (std::abs(c0.imag()) > zprime_tol) ok = false;
      for (int i = 1; i <= n && ok; ++i) {
        const cplx c = m(i - 1, n - i);
        if (std::abs(c - c0) > zprime_tol || std::abs(c.imag()) > zprime_tol) ok = false;
      }
    }
    f.in_Zprime = ok;
  }
  return f;
}

/// Block-diagonal placement of (s, h) into a matrix of size size(s)+size(h).
inline HermitianMatrix block_embed(const HermitianMatrix& s, const HermitianMatrix& h) {
  if (s.tag() != h.tag()) throw std::invalid_argument("block_embed: tag mismatch");
  const int i = s.n(), m = h.n();
  Eigen::MatrixXcd out = Eigen::MatrixXcd::Zero(i + m, i + m);
  out.topLeftCorner(i, i) = s.entries();
  out.bottomRightCorner(m, m) = h.entries();
  return HermitianMatrix(s.tag(), out);
}

// --- JSON serialization -----------------------------------------------------

inline nlohmann::json to_json(const HermitianMatrix& x) {
  nlohmann::json j;
  j["tag"] = tag_name(x.tag());
  j["n"] = x.n();
  nlohmann::json entries = nlohmann::json::array();
  for (int i = 0; i < x.n(); ++i)
    for (int k = 0; k < x.n(); ++k) {
      const cplx v = x.entries()(i, k);
      if (x.tag() == AlgebraTag::SplitRR)
        entries.push_back(v.real());
      else
        entries.push_back({v.real(), v.imag()});
    }
  j["entries"] = entries;
  return j;
}

inline HermitianMatrix hermitian_from_json(const nlohmann::json& j) {
  const AlgebraTag tag = tag_from_name(j.at("tag").get<std::string>());
  const int n = j.at("n").get<int>();
  const auto& entries = j.at("entries");
  if (static_cast<int>(entries.size()) != n * n) throw std::invalid_argument("matrix json: wrong entry count");
  Eigen::MatrixXcd m(n, n);
  int k = 0;
  for (int i = 0; i < n; ++i)
    for (int c = 0; c < n; ++c, ++k) {
      const auto& e = entries[k];
      if (e.is_array())
        m(i, c) = cplx(e[0].get<double>(), e[1].get<double>());
      else
        m(i, c) = cplx(e.get<double>(), 0.0);
    }
  return HermitianMatrix(tag, m, 1e-9);
}

}  // namespace klab

#pragma once

/// Sparse multivariate polynomials with complex coefficients.
///
/// Exponent vectors are kept in an ordered map so every operation is
/// deterministic. Degrees and dimensions stay small (dim <= 9 for the
/// matrix charts used in this project), so no attempt is made at
/// asymptotic cleverness.

#include <complex>
#include <map>
#include <stdexcept>
#include <vector>

#include <eigen3/Eigen/Dense>

namespace klab {

using cplx = std::complex<double>;

class Poly {
 public:
  using Exponent = std::vector<int>;

  Poly() : dim_(0) {}
  explicit Poly(int dim) : dim_(dim) {}

  static Poly constant(int dim, cplx c) {
    Poly p(dim);
    if (c != cplx(0.0, 0.0)) p.terms_[Exponent(dim, 0)] = c;
    return p;
  }

  static Poly variable(int dim, int j, cplx scale = cplx(1.0, 0.0)) {
    Poly p(dim);
    Exponent e(dim, 0);
    e[j] = 1;
    p.terms_[e] = scale;
    return p;
  }

  int dim() const { return dim_; }
  bool empty() const { return terms_.empty(); }
  const std::map<Exponent, cplx>& terms() const { return terms_; }

  void add_term(const Exponent& e, cplx c) {
    if (static_cast<int>(e.size()) != dim_) throw std::invalid_argument("Poly: exponent size mismatch");
    cplx& slot = terms_[e];
    slot += c;
    if (slot == cplx(0.0, 0.0)) terms_.erase(e);
  }

  Poly& operator+=(const Poly& o) {
    check_dim(o);
    for (const auto& [e, c] : o.terms_) add_term(e, c);
    return *this;
  }

  Poly operator+(const Poly& o) const {
    Poly r = *this;
    r += o;
    return r;
  }

  Poly operator*(cplx s) const {
    Poly r(dim_);
    if (s == cplx(0.0, 0.0)) return r;
    for (const auto& [e, c] : terms_) r.terms_[e] = c * s;
    return r;
  }

  Poly operator*(const Poly& o) const {
    check_dim(o);
    Poly r(dim_);
    for (const auto& [ea, ca] : terms_)
      for (const auto& [eb, cb] : o.terms_) {
        Exponent e(dim_);
        for (int k = 0; k < dim_; ++k) e[k] = ea[k] + eb[k];
        r.add_term(e, ca * cb);
      }
    return r;
  }

  /// Partial derivative with respect to variable j.
  Poly derivative(int j) const {
    Poly r(dim_);
    for (const auto& [e, c] : terms_) {
      if (e[j] == 0) continue;
      Exponent d = e;
      d[j] -= 1;
      r.add_term(d, c * double(e[j]));
    }
    return r;
  }

  cplx eval(const Eigen::VectorXd& x) const {
    cplx acc(0.0, 0.0);
    for (const auto& [e, c] : terms_) {
      cplx m = c;
      for (int k = 0; k < dim_; ++k)
        for (int q = 0; q < e[k]; ++q) m *= x[k];
      acc += m;
    }
    return acc;
  }

  cplx eval(const Eigen::VectorXcd& x) const {
    cplx acc(0.0, 0.0);
    for (const auto& [e, c] : terms_) {
      cplx m = c;
      for (int k = 0; k < dim_; ++k)
        for (int q = 0; q < e[k]; ++q) m *= x[k];
      acc += m;
    }
    return acc;
  }

  /// Substitute x_k = sum_j L(k,j) y_j; returns a polynomial in y.
  /// L maps the new variables to the old ones; columns index y.
  Poly compose_linear(const Eigen::MatrixXcd& L) const {
    const int newdim = static_cast<int>(L.cols());
    if (L.rows() != dim_) throw std::invalid_argument("Poly: linear substitution shape mismatch");
    std::vector<Poly> lin;
    lin.reserve(dim_);
    for (int k = 0; k < dim_; ++k) {
      Poly pk(newdim);
      for (int j = 0; j < newdim; ++j)
        if (L(k, j) != cplx(0.0, 0.0)) pk.add_term(unit(newdim, j), L(k, j));
      lin.push_back(pk);
    }
    Poly out(newdim);
    for (const auto& [e, c] : terms_) {
      Poly m = Poly::constant(newdim, c);
      for (int k = 0; k < dim_; ++k)
        for (int q = 0; q < e[k]; ++q) m = m * lin[k];
      out += m;
    }
    return out;
  }

  /// Substitute x -> x + shift (shift is a constant vector).
  Poly shift(const Eigen::VectorXcd& s) const {
    Eigen::MatrixXcd L = Eigen::MatrixXcd::Identity(dim_, dim_);
    std::vector<Poly> lin;
    for (int k = 0; k < dim_; ++k) {
      Poly pk(dim_);
      pk.add_term(unit(dim_, k), cplx(1.0, 0.0));
      if (s[k] != cplx(0.0, 0.0)) pk.add_term(Exponent(dim_, 0), s[k]);
      lin.push_back(pk);
    }
    Poly out(dim_);
    for (const auto& [e, c] : terms_) {
      Poly m = Poly::constant(dim_, c);
      for (int k = 0; k < dim_; ++k)
        for (int q = 0; q < e[k]; ++q) m = m * lin[k];
      out += m;
    }
    return out;
  }

  Poly conj_coeffs() const {
    Poly r(dim_);
    for (const auto& [e, c] : terms_) r.terms_[e] = std::conj(c);
    return r;
  }

  int total_degree() const {
    int d = 0;
    for (const auto& [e, c] : terms_) {
      (void)c;
      int s = 0;
      for (int v : e) s += v;
      if (s > d) d = s;
    }
    return d;
  }

  double coeff_norm() const {
    double s = 0;
    for (const auto& [e, c] : terms_) {
      (void)e;
      s += std::abs(c);
    }
    return s;
  }

 private:
  static Exponent unit(int dim, int j) {
    Exponent e(dim, 0);
    e[j] = 1;
    return e;
  }
  void check_dim(const Poly& o) const {
    if (o.dim_ != dim_) throw std::invalid_argument("Poly: dimension mismatch");
  }

  int dim_;
  std::map<Exponent, cplx> terms_;
};

}  // namespace klab

#pragma once

/// Schwartz test functions on the Hermitian chart and their Fourier
/// transforms.
///
/// A ClosedForm function is
///     f(x) = p(x - mu) exp(-(x-mu)^T Q (x-mu) / 2) exp(i <xi, x>)
/// with Q symmetric positive definite and p a polynomial with complex
/// coefficients. The family is closed under every transform used here.
///
/// All transforms use the kernel psi_s(-<x, y>_M) = exp(-i s x^T M y) with
/// the self-dual normalization |det M|^{1/2} (2 pi)^{-d/2} Lebesgue, where
/// M is the Gram matrix of the half pairing on the transformed coordinates
/// (gram_b for the full transform on H, gram_trace for the trace-form and
/// partial transforms). Under this normalization the double transform is
/// exactly the pullback by -1.
///
/// The closed-form transform of a monomial Gaussian follows from
///     int z^a exp(-z^T Q z / 2 + i w.z) dz
///       = (2 pi)^{d/2} det(Q)^{-1/2} (-i)^{|a|} P_a(w) exp(-w^T Q^{-1} w / 2)
/// with the Hermite-type recursion P_{a+e_j} = dP_a/dw_j - (Q^{-1} w)_j P_a.

#include <functional>
#include <map>
#include <memory>
#include <optional>
#include <stdexcept>
#include <vector>

#include <eigen3/Eigen/Dense>
#include <json.hpp>

#include "klab/algebra.hpp"
#include "klab/poly.hpp"
#include "klab/quadrature.hpp"

namespace klab {

struct ClosedForm {
  Poly p;              // polynomial in z = x - mu
  Eigen::MatrixXd Q;   // SPD
  Eigen::VectorXd mu;
  Eigen::VectorXd xi;
};

struct BlackBox {
  std::function<cplx(const Eigen::VectorXd&)> f;
  double radius = 10.0;  // |f(x)| <= bound (1+|x|)^{-(d+2)} for |x| > radius (declared)
  double bound = 1.0;
};

class SchwartzFn {
 public:
  SchwartzFn(AlgebraTag tag, int n, ClosedForm cf) : tag_(tag), n_(n), cf_(std::move(cf)) {
    validate_closed_form();
  }
  SchwartzFn(AlgebraTag tag, int n, BlackBox bb) : tag_(tag), n_(n), bb_(std::move(bb)) {}

  static SchwartzFn gaussian(AlgebraTag tag, int n, const Eigen::MatrixXd& Q,
                             const Eigen::VectorXd& mu, const Eigen::VectorXd& xi,
                             cplx amplitude = cplx(1.0, 0.0)) {
    const int d = n * n;
    ClosedForm cf{Poly::constant(d, amplitude), Q, mu, xi};
    return SchwartzFn(tag, n, std::move(cf));
  }

  /// Standard Gaussian exp(-|x|^2/2) on the chart.
  static SchwartzFn standard_gaussian(AlgebraTag tag, int n) {
    const int d = n * n;
    return gaussian(tag, n, Eigen::MatrixXd::Identity(d, d), Eigen::VectorXd::Zero(d),
                    Eigen::VectorXd::Zero(d));
  }

  /// Gaussian adapted to a symmetric nondegenerate form: Q = |M| in the
  /// spectral sense, the fixed point of the transform attached to M.
  static SchwartzFn adapted_gaussian(AlgebraTag tag, int n, const Eigen::MatrixXd& M) {
    Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd> es(M);
    Eigen::MatrixXd absM =
        es.eigenvectors() * es.eigenvalues().cwiseAbs().asDiagonal() * es.eigenvectors().transpose();
    const int d = n * n;
    return gaussian(tag, n, absM, Eigen::VectorXd::Zero(d), Eigen::VectorXd::Zero(d));
  }

  AlgebraTag tag() const { return tag_; }
  int n() const { return n_; }
  int dim() const { return n_ * n_; }
  bool is_closed_form() const { return cf_.has_value(); }
  const ClosedForm& closed_form() const {
    if (!cf_) throw std::logic_error("SchwartzFn: not closed form");
    return *cf_;
  }
  const BlackBox& black_box() const {
    if (!bb_) throw std::logic_error("SchwartzFn: not black box");
    return *bb_;
  }
  const std::vector<std::string>& notes() const { return notes_; }
  void add_note(std::string s) { notes_.push_back(std::move(s)); }

  cplx eval(const Eigen::VectorXd& x) const {
    if (cf_) {
      const Eigen::VectorXd z = x - cf_->mu;
      const double quad = z.dot(cf_->Q * z);
      const double phase = cf_->xi.dot(x);
      return cf_->p.eval(z) * std::exp(-0.5 * quad) * cplx(std::cos(phase), std::sin(phase));
    }
    return bb_->f(x);
  }

  cplx eval(const HermitianMatrix& x) const {
    if (x.tag() != tag_ || x.n() != n_) throw std::invalid_argument("SchwartzFn::eval: shape mismatch");
    return eval(x.to_chart());
  }

  /// Radius beyond which |f| is below tol (amplitude bound; deterministic).
  double decay_radius(double tol) const {
    if (bb_) {
      const double r = std::pow(std::max(bb_->bound / std::max(tol, 1e-300), 1.0),
                                1.0 / double(dim() + 2));
      return std::max(bb_->radius, r);
    }
    const double lmin = Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd>(cf_->Q).eigenvalues().minCoeff();
    const double cp = cf_->p.coeff_norm() + 1e-300;
    const int deg = cf_->p.total_degree();
    double r = 1.0;
    for (int it = 0; it < 200; ++it) {
      const double amp = cp * std::pow(1.0 + r, deg) * std::exp(-0.5 * lmin * r * r);
      if (amp <= tol) break;
      r *= 1.25;
    }
    return r + cf_->mu.norm();
  }

  /// Pullback by an invertible linear chart map: (f o L)(x) = f(Lx).
  SchwartzFn pullback_linear(const Eigen::MatrixXd& L) const {
    if (cf_) {
      ClosedForm out;
      out.Q = L.transpose() * cf_->Q * L;
      out.mu = L.partialPivLu().solve(cf_->mu);
      out.xi = L.transpose() * cf_->xi;
      out.p = cf_->p.compose_linear(L.cast<cplx>());
      return SchwartzFn(tag_, n_, std::move(out));
    }
    BlackBox bb;
    auto inner = bb_->f;
    bb.f = [inner, L](const Eigen::VectorXd& x) { return inner(L * x); };
    const double growth = L.inverse().norm();
    bb.radius = bb_->radius * growth;
    bb.bound = bb_->bound;
    return SchwartzFn(tag_, n_, std::move(bb));
  }

  /// L2 norm squared, closed form for ClosedForm bodies.
  double l2_norm_sq() const {
    if (!cf_) throw std::logic_error("l2_norm_sq: closed form only");
    const int d = dim();
    // |f|^2 = p pbar exp(-z^T (2Q) z / 2); integrate the polynomial moments
    const Poly prod = cf_->p * cf_->p.conj_coeffs();
    const Eigen::MatrixXd Q2 = 2.0 * cf_->Q;
    const Eigen::MatrixXd A = Q2.llt().solve(Eigen::MatrixXd::Identity(d, d));
    const double c0 = std::pow(2.0 * M_PI, 0.5 * d) / std::sqrt(Q2.determinant());
    // moment of z^a against exp(-z^T Q2 z /2): (-i)^{|a|} P_a(0) c0 with the
    // same Hermite recursion evaluated at w = 0
    double total = 0.0;
    for (const auto& [e, c] : prod.terms()) {
      const Poly pa = hermite_poly(e, A);
      int deg = 0;
      for (int v : e) deg += v;
      cplx mi(1, 0);
      for (int k = 0; k < deg; ++k) mi *= cplx(0, -1);
      const Eigen::VectorXd origin = Eigen::VectorXd::Zero(d);
      const cplx moment = mi * pa.eval(origin) * c0;
      total += (c * moment).real();
    }
    return total;
  }

  // --- transforms -----------------------------------------------------------

  /// Transform over a subset of chart coordinates with pairing Gram M_T.
  /// ClosedForm stays closed form when Q does not couple the subset to its
  /// complement; otherwise the result falls back to a numeric BlackBox and
  /// carries a warning note.
  SchwartzFn partial_transform(const std::vector<int>& subset, const Eigen::MatrixXd& M_T,
                               int sign, const QuadSpec* numeric_spec = nullptr) const {
    if (cf_ && separable(subset)) return closed_form_transform(subset, M_T, sign);
    SchwartzFn out = numeric_transform(subset, M_T, sign, numeric_spec);
    if (cf_) out.add_note("partial transform: non-separable quadratic form, numeric fallback");
    return out;
  }

  SchwartzFn fourier_b(int sign, const QuadSpec* numeric_spec = nullptr) const {
    std::vector<int> all(dim());
    for (int k = 0; k < dim(); ++k) all[k] = k;
    return partial_transform(all, gram_b(tag_, n_), sign, numeric_spec);
  }

  SchwartzFn fourier_trace(int sign, const QuadSpec* numeric_spec = nullptr) const {
    std::vector<int> all(dim());
    for (int k = 0; k < dim(); ++k) all[k] = k;
    return partial_transform(all, gram_trace(tag_, n_), sign, numeric_spec);
  }

  /// Pullback by x -> w x w.
  SchwartzFn ad_w() const { return pullback_linear(ad_w_chart(tag_, n_)); }

 private:
  void validate_closed_form() {
    const int d = dim();
    if (cf_->Q.rows() != d || cf_->Q.cols() != d || cf_->mu.size() != d || cf_->xi.size() != d ||
        cf_->p.dim() != d)
      throw std::invalid_argument("ClosedForm: dimension mismatch");
    Eigen::LLT<Eigen::MatrixXd> llt(cf_->Q);
    if (llt.info() != Eigen::Success)
      throw std::invalid_argument("ClosedForm: quadratic form not positive definite");
  }

  bool separable(const std::vector<int>& subset) const {
    std::vector<bool> in(dim(), false);
    for (int t : subset) in[t] = true;
    const double scale = cf_->Q.cwiseAbs().maxCoeff() + 1.0;
    for (int i = 0; i < dim(); ++i)
      for (int j = 0; j < dim(); ++j)
        if (in[i] != in[j] && std::abs(cf_->Q(i, j)) > 1e-13 * scale) return false;
    return true;
  }

  static Poly hermite_poly(const Poly::Exponent& alpha, const Eigen::MatrixXd& A) {
    // P_0 = 1, P_{a+e_j} = dP/dw_j - (A w)_j P, in dim(A) variables
    const int k = static_cast<int>(A.rows());
    Poly P = Poly::constant(k, cplx(1, 0));
    for (int j = 0; j < k; ++j) {
      for (int q = 0; q < alpha[j]; ++q) {
        Poly Aw_j(k);
        for (int l = 0; l < k; ++l)
          if (A(j, l) != 0.0) Aw_j.add_term(unit_exp(k, l), cplx(A(j, l), 0.0));
        P = P.derivative(j) + Aw_j * P * cplx(-1.0, 0.0);
      }
    }
    return P;
  }

  static Poly::Exponent unit_exp(int dim, int j) {
    Poly::Exponent e(dim, 0);
    e[j] = 1;
    return e;
  }

  SchwartzFn closed_form_transform(const std::vector<int>& subset, const Eigen::MatrixXd& M_T,
                                   int sign) const {
    const ClosedForm& in = *cf_;
    const int d = dim();
    const int k = static_cast<int>(subset.size());
    const double s = sign >= 0 ? 1.0 : -1.0;

    Eigen::MatrixXd Q_T(k, k);
    Eigen::VectorXd mu_T(k), xi_T(k);
    for (int a = 0; a < k; ++a) {
      mu_T[a] = in.mu[subset[a]];
      xi_T[a] = in.xi[subset[a]];
      for (int b = 0; b < k; ++b) Q_T(a, b) = in.Q(subset[a], subset[b]);
    }
    const Eigen::MatrixXd A = Q_T.llt().solve(Eigen::MatrixXd::Identity(k, k));  // Q_T^{-1}
    const Eigen::MatrixXd Minv = M_T.partialPivLu().solve(Eigen::MatrixXd::Identity(k, k));

    ClosedForm out;
    out.mu = in.mu;
    out.xi = in.xi;
    Eigen::VectorXd muT_new = s * (Minv * xi_T);
    Eigen::VectorXd xiT_new = -s * (M_T * mu_T);
    for (int a = 0; a < k; ++a) {
      out.mu[subset[a]] = muT_new[a];
      out.xi[subset[a]] = xiT_new[a];
    }
    out.Q = in.Q;
    const Eigen::MatrixXd QT_new = M_T * A * M_T;
    for (int a = 0; a < k; ++a)
      for (int b = 0; b < k; ++b) out.Q(subset[a], subset[b]) = QT_new(a, b);

    // overall constant |det M|^{1/2} det(Q_T)^{-1/2} e^{i <xi_T, mu_T>}
    const double detM = std::abs(M_T.determinant());
    const double detQ = Q_T.determinant();
    const double ip = xi_T.dot(mu_T);
    const cplx K = std::sqrt(detM / detQ) * cplx(std::cos(ip), std::sin(ip));

    // w = -s M_T zT in the transformed variables
    Eigen::MatrixXcd sub = Eigen::MatrixXcd::Zero(k, d);
    for (int a = 0; a < k; ++a)
      for (int b = 0; b < k; ++b) sub(a, subset[b]) = cplx(-s * M_T(a, b), 0.0);

    Poly result(d);
    std::map<Poly::Exponent, Poly> hermite_cache;
    for (const auto& [e, c] : in.p.terms()) {
      Poly::Exponent eT(k, 0);
      Poly::Exponent eC = e;
      int degT = 0;
      for (int a = 0; a < k; ++a) {
        eT[a] = e[subset[a]];
        degT += eT[a];
        eC[subset[a]] = 0;
      }
      auto it = hermite_cache.find(eT);
      if (it == hermite_cache.end()) it = hermite_cache.emplace(eT, hermite_poly(eT, A)).first;
      Poly pw = it->second.compose_linear(sub);  // polynomial in full z, via w(zT)
      cplx mi(1, 0);
      for (int q = 0; q < degT; ++q) mi *= cplx(0, -1);
      Poly mono(d);
      mono.add_term(eC, cplx(1.0, 0.0));
      result += pw * mono * (c * mi * K);
    }
    out.p = std::move(result);
    return SchwartzFn(tag_, n_, std::move(out));
  }

  SchwartzFn numeric_transform(const std::vector<int>& subset, const Eigen::MatrixXd& M_T,
                               int sign, const QuadSpec* numeric_spec) const {
    const int d = dim();
    const int k = static_cast<int>(subset.size());
    const double s = sign >= 0 ? 1.0 : -1.0;
    QuadSpec spec = numeric_spec ? *numeric_spec : QuadSpec{};
    spec.dim = k;
    if (!numeric_spec) {
      spec.rel_tol = 1e-8;
      spec.abs_tol = 1e-10;
    }
    spec.radius = {decay_radius(1e-3 * spec.abs_tol)};
    const double norm = std::sqrt(std::abs(M_T.determinant())) * std::pow(2.0 * M_PI, -0.5 * k);
    auto self = std::make_shared<SchwartzFn>(*this);
    auto MT = std::make_shared<Eigen::MatrixXd>(M_T);
    auto sub = std::make_shared<std::vector<int>>(subset);
    BlackBox bb;
    bb.radius = decay_radius(1e-12);
    bb.bound = 1.0;
    bb.f = [self, MT, sub, s, spec, norm, d, k](const Eigen::VectorXd& y) -> cplx {
      Eigen::VectorXd yT(k);
      for (int a = 0; a < k; ++a) yT[a] = y[(*sub)[a]];
      const Eigen::VectorXd My = (*MT) * yT;
      Integrand g = [&](const Eigen::VectorXd& t) -> cplx {
        Eigen::VectorXd x = y;
        for (int a = 0; a < k; ++a) x[(*sub)[a]] = t[a];
        double phase = 0;
        for (int a = 0; a < k; ++a) phase -= s * t[a] * My[a];
        return self->eval(x) * cplx(std::cos(phase), std::sin(phase));
      };
      return norm * integrate(g, spec).value;
    };
    return SchwartzFn(tag_, n_, std::move(bb));
  }

  AlgebraTag tag_;
  int n_;
  std::optional<ClosedForm> cf_;
  std::optional<BlackBox> bb_;
  std::vector<std::string> notes_;
};

/// Coordinate split H^n = (H^i x H^{n-i}) (+) (off-diagonal blocks) in the
/// chart. The two index sets partition {0, .., n^2-1}.
struct BlockSplit {
  int i;

  std::vector<int> diagonal_coords(AlgebraTag tag, int n) const {
    return coords(tag, n, true);
  }
  std::vector<int> off_diagonal_coords(AlgebraTag tag, int n) const {
    return coords(tag, n, false);
  }

 private:
  std::vector<int> coords(AlgebraTag tag, int n, bool want_diag) const {
    if (i < 1 || i >= n) throw std::invalid_argument("BlockSplit: need 1 <= i <= n-1");
    std::vector<int> out;
    auto same_block = [&](int r, int c) { return (r < i && c < i) || (r >= i && c >= i); };
    if (tag == AlgebraTag::SplitRR) {
      int k = 0;
      for (int r = 0; r < n; ++r)
        for (int c = 0; c < n; ++c, ++k)
          if (same_block(r, c) == want_diag) out.push_back(k);
    } else {
      int k = 0;
      for (int r = 0; r < n; ++r, ++k)
        if (want_diag) out.push_back(k);
      for (int r = 0; r < n; ++r)
        for (int c = r + 1; c < n; ++c, k += 2)
          if (same_block(r, c) == want_diag) {
            out.push_back(k);
            out.push_back(k + 1);
          }
    }
    return out;
  }
};

/// Partial Fourier transform with respect to the trace form on the named
/// coordinate subset of a block split.
enum class SplitPart { DiagonalBlocks, OffDiagonal };

inline SchwartzFn partial_fourier(const SchwartzFn& f, const BlockSplit& split, SplitPart which,
                                  int sign, const QuadSpec* numeric_spec = nullptr) {
  const std::vector<int> subset = which == SplitPart::DiagonalBlocks
                                      ? split.diagonal_coords(f.tag(), f.n())
                                      : split.off_diagonal_coords(f.tag(), f.n());
  const Eigen::MatrixXd G = gram_trace(f.tag(), f.n());
  Eigen::MatrixXd M_T(subset.size(), subset.size());
  for (size_t a = 0; a < subset.size(); ++a)
    for (size_t b = 0; b < subset.size(); ++b) M_T(a, b) = G(subset[a], subset[b]);
  return f.partial_transform(subset, M_T, sign, numeric_spec);
}

inline SchwartzFn fourier_b(const SchwartzFn& f, int sign, const QuadSpec* spec = nullptr) {
  return f.fourier_b(sign, spec);
}
inline SchwartzFn fourier_trace(const SchwartzFn& f, int sign, const QuadSpec* spec = nullptr) {
  return f.fourier_trace(sign, spec);
}
inline SchwartzFn ad_w(const SchwartzFn& f) { return f.ad_w(); }

// --- JSON serialization ------------------------------------------------------

inline nlohmann::json to_json(const SchwartzFn& f) {
  if (!f.is_closed_form()) throw std::invalid_argument("serialize: closed form only");
  const ClosedForm& cf = f.closed_form();
  nlohmann::json j;
  j["tag"] = tag_name(f.tag());
  j["n"] = f.n();
  nlohmann::json poly = nlohmann::json::object();
  for (const auto& [e, c] : cf.p.terms()) {
    std::string key;
    for (size_t k = 0; k < e.size(); ++k) {
      if (k) key += ",";
      key += std::to_string(e[k]);
    }
    poly[key] = {c.real(), c.imag()};
  }
  j["poly"] = poly;
  nlohmann::json Q = nlohmann::json::array();
  for (int r = 0; r < cf.Q.rows(); ++r) {
    nlohmann::json row = nlohmann::json::array();
    for (int c = 0; c < cf.Q.cols(); ++c) row.push_back(cf.Q(r, c));
    Q.push_back(row);
  }
  j["Q"] = Q;
  j["mu"] = std::vector<double>(cf.mu.data(), cf.mu.data() + cf.mu.size());
  j["xi"] = std::vector<double>(cf.xi.data(), cf.xi.data() + cf.xi.size());
  return j;
}

inline SchwartzFn schwartz_from_json(const nlohmann::json& j) {
  const AlgebraTag tag = tag_from_name(j.at("tag").get<std::string>());
  const int n = j.at("n").get<int>();
  const int d = n * n;
  ClosedForm cf;
  cf.p = Poly(d);
  for (const auto& [key, val] : j.at("poly").items()) {
    Poly::Exponent e;
    size_t pos = 0;
    while (pos < key.size()) {
      size_t next = key.find(',', pos);
      if (next == std::string::npos) next = key.size();
      e.push_back(std::stoi(key.substr(pos, next - pos)));
      pos = next + 1;
    }
    if (static_cast<int>(e.size()) != d) throw std::invalid_argument("poly key has wrong arity");
    cplx c = val.is_array() ? cplx(val[0].get<double>(), val[1].get<double>())
                            : cplx(val.get<double>(), 0.0);
    cf.p.add_term(e, c);
  }
  const auto& Q = j.at("Q");
  if (static_cast<int>(Q.size()) != d) throw std::invalid_argument("Q has wrong size");
  cf.Q.resize(d, d);
  for (int r = 0; r < d; ++r)
    for (int c = 0; c < d; ++c) cf.Q(r, c) = Q[r][c].get<double>();
  auto mu = j.at("mu").get<std::vector<double>>();
  auto xi = j.at("xi").get<std::vector<double>>();
  if (static_cast<int>(mu.size()) != d || static_cast<int>(xi.size()) != d)
    throw std::invalid_argument("mu/xi have wrong size");
  cf.mu = Eigen::Map<Eigen::VectorXd>(mu.data(), d);
  cf.xi = Eigen::Map<Eigen::VectorXd>(xi.data(), d);
  return SchwartzFn(tag, n, std::move(cf));
}

}  // namespace klab

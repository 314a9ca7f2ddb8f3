#pragma once

/// Exact Gaussian integrals with complex quadratic forms:
///
///   int_{R^k} P(z) exp(-z^T S z / 2 + w^T z) dz
///     = (2 pi)^{k/2} det(S)^{-1/2} exp(w^T S^{-1} w / 2) E[P(m + y)]
///
/// with S complex symmetric, Re S positive definite, m = S^{-1} w, and y a
/// central Gaussian vector of covariance S^{-1} (Isserlis moments). The
/// determinant branch is fixed by factoring S = L (I + i K) L^T over the
/// Cholesky factor L of Re S and taking principal square roots of the
/// eigenvalue factors 1 + i kappa.
///
/// These integrals evaluate the oscillatory inner transforms of the
/// inversion machinery exactly, with no truncation.

#include <complex>
#include <map>
#include <stdexcept>
#include <vector>

#include <eigen3/Eigen/Dense>

#include "klab/poly.hpp"

namespace klab {

namespace detail {

/// Central moments E[y^alpha] for covariance C (complex symmetric), times
/// nothing: pure Isserlis recursion with memoization.
class GaussianMoments {
 public:
  explicit GaussianMoments(Eigen::MatrixXcd cov) : cov_(std::move(cov)) {}

  cplx moment(const Poly::Exponent& alpha) {
    int total = 0;
    for (int a : alpha) total += a;
    if (total % 2 == 1) return cplx(0, 0);
    if (total == 0) return cplx(1, 0);
    auto it = memo_.find(alpha);
    if (it != memo_.end()) return it->second;
    int j = 0;
    while (alpha[j] == 0) ++j;
    Poly::Exponent beta = alpha;
    beta[j] -= 1;
    // E[y_j y^beta] = sum_l C_jl beta_l E[y^{beta - e_l}]
    cplx acc(0, 0);
    for (int l = 0; l < static_cast<int>(alpha.size()); ++l) {
      if (beta[l] == 0) continue;
      Poly::Exponent gamma = beta;
      gamma[l] -= 1;
      acc += cov_(j, l) * double(beta[l]) * moment(gamma);
    }
    memo_[alpha] = acc;
    return acc;
  }

 private:
  Eigen::MatrixXcd cov_;
  std::map<Poly::Exponent, cplx> memo_;
};

}  // namespace detail

/// det(S)^{-1/2} with the analytic branch for Re S > 0.
inline cplx gaussian_det_invsqrt(const Eigen::MatrixXcd& S) {
  const int k = static_cast<int>(S.rows());
  const Eigen::MatrixXd P = S.real();
  const Eigen::MatrixXd T = S.imag();
  Eigen::LLT<Eigen::MatrixXd> llt(P);
  if (llt.info() != Eigen::Success)
    throw std::invalid_argument("gaussian integral: real part not positive definite");
  const Eigen::MatrixXd L = llt.matrixL();
  const Eigen::MatrixXd Linv = L.inverse();
  const Eigen::MatrixXd K = Linv * T * Linv.transpose();
  Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd> es(0.5 * (K + K.transpose()));
  double detL = 1.0;
  for (int i = 0; i < k; ++i) detL *= L(i, i);
  cplx out = 1.0 / detL;
  for (int i = 0; i < k; ++i) {
    const cplx factor(1.0, es.eigenvalues()[i]);
    out /= std::sqrt(factor);  // principal branch; Re(1 + i kappa) > 0
  }
  return out;
}

/// int P(z) exp(-z^T S z / 2 + w^T z) dz over R^k.
inline cplx fresnel_gaussian(const Poly& P, const Eigen::MatrixXcd& S,
                             const Eigen::VectorXcd& w) {
  const int k = static_cast<int>(S.rows());
  if (P.dim() != k || w.size() != k) throw std::invalid_argument("fresnel_gaussian: shape mismatch");
  const Eigen::MatrixXcd Sinv = S.partialPivLu().solve(Eigen::MatrixXcd::Identity(k, k));
  const Eigen::VectorXcd m = Sinv * w;
  // w^T S^{-1} w is the plain (non-conjugated) bilinear value
  cplx quad(0, 0);
  for (int i = 0; i < k; ++i)
    for (int j = 0; j < k; ++j) quad += w[i] * Sinv(i, j) * w[j];
  const cplx c0 = std::pow(2.0 * M_PI, 0.5 * k) * gaussian_det_invsqrt(S) * std::exp(0.5 * quad);
  // E[P(m + y)] with y central of covariance S^{-1}
  const Poly shifted = P.shift(m);
  detail::GaussianMoments mom(Sinv);
  cplx acc(0, 0);
  for (const auto& [e, c] : shifted.terms()) acc += c * mom.moment(e);
  return c0 * acc;
}

}  // namespace klab

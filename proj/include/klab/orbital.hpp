#pragma once

/// Kloosterman orbital integrals and transfer factors.
///
/// The unipotent group N acts on the Hermitian space by x -> ubar^t x u.
/// Over R(+)R, where x is stored through its first component M and
/// u = (u1, u2), the stored action is M -> u2^t M u1, which realizes the
/// two-sided action on GL_n(R). The character is
///     chi(u) = psi_s( sum_k Tr_{D/R}( u_{k,k+1} ) ),
/// i.e. psi_s(sum (u1 + u2)_{k,k+1}) over R(+)R and psi_s(2 Re u_{k,k+1})
/// over C. Haar measure on N (and on the block subgroups N_i) is Lebesgue
/// measure in the coordinate chart of the strict upper entries.
///
/// Near a vanishing first pivot the n = 2 integral is evaluated in
/// orbit-entry coordinates (X = a_1 s), which keeps the truncation box at
/// the scale of the test function instead of 1/|a_1|.

#include <cmath>
#include <complex>
#include <functional>
#include <stdexcept>
#include <vector>

#include <eigen3/Eigen/Dense>

#include "klab/algebra.hpp"
#include "klab/fresnel.hpp"
#include "klab/quadrature.hpp"
#include "klab/schwartz.hpp"

namespace klab {

inline cplx psi(int sign, double t) {
  const double st = sign >= 0 ? t : -t;
  return cplx(std::cos(st), std::sin(st));
}

struct UnipotentCoord {
  AlgebraTag tag;
  int n;
  Eigen::VectorXd coords;  // see layout below

  static int dim(int n) { return n * (n - 1); }
};

/// Coordinate layout: strict upper entries in row-major order.
/// SplitRR: entries of u1 first, then entries of u2.
/// ComplexC: (Re, Im) per entry.
inline Eigen::MatrixXcd unipotent_matrix(const UnipotentCoord& u, int which = 0) {
  const int n = u.n;
  const int m = n * (n - 1) / 2;
  Eigen::MatrixXcd U = Eigen::MatrixXcd::Identity(n, n);
  int k = 0;
  for (int r = 0; r < n; ++r)
    for (int c = r + 1; c < n; ++c, ++k) {
      if (u.tag == AlgebraTag::SplitRR)
        U(r, c) = u.coords[which * m + k];
      else
        U(r, c) = cplx(u.coords[2 * k], u.coords[2 * k + 1]);
    }
  return U;
}

inline cplx chi(const UnipotentCoord& u, int sign) {
  const int n = u.n;
  const int m = n * (n - 1) / 2;
  double t = 0;
  int k = 0;
  for (int r = 0; r < n; ++r)
    for (int c = r + 1; c < n; ++c, ++k) {
      if (c != r + 1) continue;
      if (u.tag == AlgebraTag::SplitRR)
        t += u.coords[k] + u.coords[m + k];
      else
        t += 2.0 * u.coords[2 * k];
    }
  return psi(sign, t);
}

/// Twisted action x -> ubar^t x u (stored form over R(+)R: u2^t M u1).
inline HermitianMatrix act(const UnipotentCoord& u, const HermitianMatrix& x) {
  if (u.tag != x.tag() || u.n != x.n()) throw std::invalid_argument("act: shape mismatch");
  if (u.tag == AlgebraTag::SplitRR) {
    const Eigen::MatrixXcd u1 = unipotent_matrix(u, 0);
    const Eigen::MatrixXcd u2 = unipotent_matrix(u, 1);
    return HermitianMatrix(u.tag, u2.transpose() * x.entries() * u1);
  }
  const Eigen::MatrixXcd U = unipotent_matrix(u, 0);
  Eigen::MatrixXcd y = U.adjoint() * x.entries() * U;
  const double dev = (y - y.adjoint()).cwiseAbs().maxCoeff();
  const double scale = y.cwiseAbs().maxCoeff() + 1.0;
  if (dev > 1e-11 * scale) throw std::logic_error("act: hermiticity lost beyond tolerance");
  return HermitianMatrix(u.tag, y);
}

/// Group law in coordinates: the product u * v as a coordinate vector.
inline UnipotentCoord compose(const UnipotentCoord& a, const UnipotentCoord& b) {
  if (a.tag != b.tag || a.n != b.n) throw std::invalid_argument("compose: shape mismatch");
  const int n = a.n;
  const int m = n * (n - 1) / 2;
  UnipotentCoord out{a.tag, n, Eigen::VectorXd::Zero(UnipotentCoord::dim(n))};
  auto fill = [&](const Eigen::MatrixXcd& P, int which) {
    int k = 0;
    for (int r = 0; r < n; ++r)
      for (int c = r + 1; c < n; ++c, ++k) {
        if (a.tag == AlgebraTag::SplitRR)
          out.coords[which * m + k] = P(r, c).real();
        else {
          out.coords[2 * k] = P(r, c).real();
          out.coords[2 * k + 1] = P(r, c).imag();
        }
      }
  };
  fill(unipotent_matrix(a, 0) * unipotent_matrix(b, 0), 0);
  if (a.tag == AlgebraTag::SplitRR) fill(unipotent_matrix(a, 1) * unipotent_matrix(b, 1), 1);
  return out;
}

namespace detail {

/// Deterministic truncation box with per-axis radii: each axis expands
/// until a boundary-face lattice of integrand amplitudes drops below the
/// threshold. Tight boxes matter for the lattice rule in high dimension.
inline std::vector<double> probe_box_axes(const std::function<double(const Eigen::VectorXd&)>& amp,
                                          int d, double r0, double threshold) {
  std::vector<double> r(d, r0);
  const int per_axis = d <= 2 ? 9 : 3;
  auto face_max = [&](int axis, int side) {
    Eigen::VectorXd x(d);
    long npts = 1;
    for (int k = 0; k < d - 1; ++k) npts *= per_axis;
    double worst = 0;
    for (long p = 0; p < npts; ++p) {
      long q = p;
      for (int k = 0; k < d; ++k) {
        if (k == axis) {
          x[k] = side * r[axis];
          continue;
        }
        const int i = static_cast<int>(q % per_axis);
        q /= per_axis;
        x[k] = (-1.0 + 2.0 * double(i) / double(per_axis - 1)) * r[k];
      }
      worst = std::max(worst, amp(x));
    }
    return worst;
  };
  for (int rounds = 0; rounds < 24; ++rounds) {
    bool grew = false;
    for (int axis = 0; axis < d; ++axis) {
      if (std::max(face_max(axis, -1), face_max(axis, +1)) > threshold) {
        r[axis] *= 1.4;
        grew = true;
      }
    }
    if (!grew) break;
  }
  return r;
}

inline double probe_box(const std::function<double(const Eigen::VectorXd&)>& amp, int d,
                        double r0, double threshold) {
  const auto radii = probe_box_axes(amp, d, r0, threshold);
  double r = 0;
  for (double v : radii) r = std::max(r, v);
  return r;
}

inline QuadSpec scheme_for_dim(QuadSpec spec, int d, std::vector<double> radii) {
  spec.dim = d;
  spec.radius = std::move(radii);
  // high dimension runs on the lattice rule; the Gaussian importance map
  // suits the peaked orbit integrands unless plain box sampling was asked for
  if (d > 3 && spec.scheme != QuadScheme::Qmc) spec.scheme = QuadScheme::QmcGaussian;
  return spec;
}

inline QuadSpec scheme_for_dim(QuadSpec spec, int d, double radius) {
  return scheme_for_dim(std::move(spec), d, std::vector<double>{radius});
}

/// Orbit integrals over R(+)R with the first unipotent factor integrated
/// exactly: x = u2^t A u1 is affine in the coordinates of u1, so for a
/// ClosedForm test function the s-half is a Gaussian integral with a linear
/// oscillation (a Fresnel form), and only the u2 coordinates stay numeric.
inline QuadResult split_semianalytic_orbit(
    const ClosedForm& cf, int n, const Eigen::MatrixXd& base,
    const std::function<Eigen::MatrixXd(const Eigen::VectorXd&)>& u1_of_s,
    const std::function<Eigen::MatrixXd(const Eigen::VectorXd&)>& u2_of_t, int m_s, int m_t,
    const Eigen::VectorXd& chi_s, const Eigen::VectorXd& chi_t, int sign,
    const QuadSpec& spec_in, double probe_r0) {
  const double sgn = sign >= 0 ? 1.0 : -1.0;
  const int d = n * n;
  auto chart_of = [n](const Eigen::MatrixXd& m) {
    Eigen::VectorXd v(m.size());
    int k = 0;
    for (int r = 0; r < n; ++r)
      for (int c = 0; c < n; ++c) v[k++] = m(r, c);
    return v;
  };
  const bool const_poly = cf.p.total_degree() == 0;
  cplx p_const(0, 0);
  if (const_poly && !cf.p.empty()) p_const = cf.p.terms().begin()->second;

  auto value_at_t = [&](const Eigen::VectorXd& t) -> cplx {
    const Eigen::MatrixXd left = u2_of_t(t).transpose() * base;
    const Eigen::VectorXd c0 = chart_of(left * u1_of_s(Eigen::VectorXd::Zero(m_s)));
    Eigen::MatrixXd L(d, m_s);
    for (int j = 0; j < m_s; ++j) {
      Eigen::VectorXd ej = Eigen::VectorXd::Zero(m_s);
      ej[j] = 1.0;
      L.col(j) = chart_of(left * u1_of_s(ej)) - c0;
    }
    const Eigen::VectorXd z0 = c0 - cf.mu;
    const Eigen::MatrixXd S = L.transpose() * cf.Q * L;
    Eigen::VectorXcd w = (-(L.transpose() * (cf.Q * z0))).cast<cplx>();
    w += cplx(0, 1) * (L.transpose() * cf.xi + sgn * chi_s).cast<cplx>();
    const double cre = -0.5 * z0.dot(cf.Q * z0);
    const double cim = cf.xi.dot(c0);
    const cplx c = std::exp(cre) * cplx(std::cos(cim), std::sin(cim));
    if (const_poly)
      return c * p_const * fresnel_gaussian(Poly::constant(m_s, cplx(1, 0)), S.cast<cplx>(), w);
    const Poly ps = cf.p.shift(z0.cast<cplx>().eval()).compose_linear(L.cast<cplx>());
    return c * fresnel_gaussian(ps, S.cast<cplx>(), w);
  };

  auto amp = [&](const Eigen::VectorXd& t) { return std::abs(value_at_t(t)); };
  const double threshold = std::max(1e-14, spec_in.abs_tol * 1e-3);
  const auto radii = detail::probe_box_axes(amp, m_t, probe_r0, threshold);
  QuadSpec spec = detail::scheme_for_dim(spec_in, m_t, radii);
  Integrand g = [&](const Eigen::VectorXd& t) -> cplx {
    return value_at_t(t) * psi(sign, chi_t.dot(t));
  };
  return integrate(g, spec);
}

}  // namespace detail

using ChartFn = std::function<cplx(const HermitianMatrix&)>;

/// Integral over all of N of eval(act(u, base)) chi(u) du.
inline QuadResult orbit_integral(const ChartFn& eval, const HermitianMatrix& base, int sign,
                                 const QuadSpec& spec_in, double probe_r0 = 4.0) {
  const AlgebraTag tag = base.tag();
  const int n = base.n();
  if (n == 1) {
    QuadResult r;
    r.value = eval(base);
    r.evals = 1;
    r.converged = true;
    return r;
  }
  const int d = UnipotentCoord::dim(n);
  auto point = [&](const Eigen::VectorXd& c) {
    UnipotentCoord u{tag, n, c};
    return act(u, base);
  };
  auto amp = [&](const Eigen::VectorXd& c) { return std::abs(eval(point(c))); };
  const double threshold = std::max(1e-14, spec_in.abs_tol * 1e-3);
  const auto radii = detail::probe_box_axes(amp, d, probe_r0, threshold);
  QuadSpec spec = detail::scheme_for_dim(spec_in, d, radii);
  Integrand g = [&](const Eigen::VectorXd& c) -> cplx {
    UnipotentCoord u{tag, n, c};
    return eval(act(u, base)) * chi(u, sign);
  };
  return integrate(g, spec);
}

/// Regular orbital integral at a torus point.
inline QuadResult omega(const SchwartzFn& f, const TorusPoint& a, int sign, const QuadSpec& spec) {
  const AlgebraTag tag = f.tag();
  const int n = f.n();
  if (a.n() != n) throw std::invalid_argument("omega: torus point size mismatch");
  const HermitianMatrix base = a.materialize(tag);
  if (n == 2 && std::abs(a.diag[0]) < 0.8) {
    // orbit-entry coordinates X = a1 s
    const double a1 = a.diag[0], a2 = a.diag[1];
    const double pref = 1.0 / (a1 * a1);
    Integrand g;
    if (tag == AlgebraTag::SplitRR) {
      g = [&f, a1, a2, sign](const Eigen::VectorXd& v) -> cplx {
        Eigen::MatrixXcd m(2, 2);
        m << a1, v[0], v[1], v[0] * v[1] / a1 + a2;
        return f.eval(HermitianMatrix(AlgebraTag::SplitRR, m)) * psi(sign, (v[0] + v[1]) / a1);
      };
    } else {
      g = [&f, a1, a2, sign](const Eigen::VectorXd& v) -> cplx {
        const cplx X(v[0], v[1]);
        Eigen::MatrixXcd m(2, 2);
        m << a1, X, std::conj(X), std::norm(X) / a1 + a2;
        return f.eval(HermitianMatrix(AlgebraTag::ComplexC, m)) * psi(sign, 2.0 * v[0] / a1);
      };
    }
    auto amp = [&](const Eigen::VectorXd& v) { return std::abs(g(v)); };
    const double R = detail::probe_box(amp, 2, f.decay_radius(1e-6) + std::abs(a2), 1e-14);
    QuadSpec spec2 = detail::scheme_for_dim(spec, 2, R);
    QuadResult r = integrate(g, spec2);
    r.value *= pref;
    r.err_est *= pref;
    return r;
  }
  if (n >= 3 && tag == AlgebraTag::SplitRR && f.is_closed_form()) {
    const int m = n * (n - 1) / 2;
    auto build = [n, m](const Eigen::VectorXd& c) {
      Eigen::MatrixXd u = Eigen::MatrixXd::Identity(n, n);
      int k = 0;
      for (int r = 0; r < n; ++r)
        for (int col = r + 1; col < n; ++col, ++k) u(r, col) = c[k];
      return u;
    };
    Eigen::VectorXd chi_coef = Eigen::VectorXd::Zero(m);
    {
      int k = 0;
      for (int r = 0; r < n; ++r)
        for (int col = r + 1; col < n; ++col, ++k)
          if (col == r + 1) chi_coef[k] = 1.0;
    }
    return detail::split_semianalytic_orbit(f.closed_form(), n, base.entries().real(), build,
                                            build, m, m, chi_coef, chi_coef, sign, spec,
                                            f.decay_radius(1e-6));
  }
  ChartFn ev = [&f](const HermitianMatrix& x) { return f.eval(x); };
  return orbit_integral(ev, base, sign, spec, f.decay_radius(1e-6));
}

inline double eta(AlgebraTag tag, double t) {
  if (tag == AlgebraTag::SplitRR) return 1.0;
  return t >= 0 ? 1.0 : -1.0;
}

/// Normalized integral: eta(sigma(a)) |sigma(a)| Omega.
inline QuadResult omega_tilde(const SchwartzFn& f, const TorusPoint& a, int sign,
                              const QuadSpec& spec) {
  const HermitianMatrix base = a.materialize(f.tag());
  const double s = sigma(base);
  QuadResult r = omega(f, a, sign, spec);
  const double scale = eta(f.tag(), s) * std::abs(s);
  r.value *= scale;
  r.err_est *= std::abs(scale);
  return r;
}

/// Intermediate integral over the block subgroup N_i at the block-diagonal
/// point diag(s_block, h_block); s_block must be nondegenerate.
inline QuadResult omega_intermediate(const ChartFn& eval, const HermitianMatrix& s_block,
                                     const HermitianMatrix& h_block, int sign,
                                     const QuadSpec& spec_in, double probe_r0 = 4.0) {
  const AlgebraTag tag = s_block.tag();
  const int i = s_block.n(), n = s_block.n() + h_block.n();
  if (std::abs(minor_delta(s_block, i)) == 0.0)
    throw std::invalid_argument("omega_intermediate: singular leading block");
  const HermitianMatrix base = block_embed(s_block, h_block);
  const int d = 2 * i * (n - i);  // chart dimension of N_i over either algebra

  auto build = [&](const Eigen::VectorXd& c) {
    // u = [[I, Y], [0, I]]; over R(+)R the two components are stacked
    Eigen::MatrixXcd u1 = Eigen::MatrixXcd::Identity(n, n);
    Eigen::MatrixXcd u2 = Eigen::MatrixXcd::Identity(n, n);
    int k = 0;
    for (int r = 0; r < i; ++r)
      for (int col = i; col < n; ++col, ++k) {
        if (tag == AlgebraTag::SplitRR) {
          u1(r, col) = c[k];
          u2(r, col) = c[d / 2 + k];
        } else {
          u1(r, col) = cplx(c[2 * k], c[2 * k + 1]);
        }
      }
    if (tag == AlgebraTag::SplitRR)
      return HermitianMatrix(tag, u2.transpose() * base.entries() * u1);
    Eigen::MatrixXcd y = u1.adjoint() * base.entries() * u1;
    return HermitianMatrix(tag, 0.5 * (y + y.adjoint()));
  };
  auto phase = [&](const Eigen::VectorXd& c) {
    // only the (i-1, i) entry of u meets the superdiagonal
    const int k0 = (i - 1) * (n - i);  // row i-1, first block column
    if (tag == AlgebraTag::SplitRR) return c[k0] + c[d / 2 + k0];
    return 2.0 * c[2 * k0];
  };
  auto amp = [&](const Eigen::VectorXd& c) { return std::abs(eval(build(c))); };
  const double threshold = std::max(1e-14, spec_in.abs_tol * 1e-3);
  const auto radii = detail::probe_box_axes(amp, d, probe_r0, threshold);
  QuadSpec spec = detail::scheme_for_dim(spec_in, d, radii);
  Integrand g = [&](const Eigen::VectorXd& c) -> cplx { return eval(build(c)) * psi(sign, phase(c)); };
  return integrate(g, spec);
}

inline QuadResult omega_intermediate(const SchwartzFn& f, const HermitianMatrix& s_block,
                                     const HermitianMatrix& h_block, int sign,
                                     const QuadSpec& spec) {
  const int i = s_block.n(), n = s_block.n() + h_block.n();
  if (f.tag() == AlgebraTag::SplitRR && f.is_closed_form() && i * (n - i) > 1) {
    const int m = i * (n - i);
    auto build = [n, i](const Eigen::VectorXd& c) {
      Eigen::MatrixXd u = Eigen::MatrixXd::Identity(n, n);
      int k = 0;
      for (int r = 0; r < i; ++r)
        for (int col = i; col < n; ++col, ++k) u(r, col) = c[k];
      return u;
    };
    Eigen::VectorXd chi_coef = Eigen::VectorXd::Zero(m);
    chi_coef[(i - 1) * (n - i)] = 1.0;  // the (i-1, i) block entry
    const HermitianMatrix base = block_embed(s_block, h_block);
    if (std::abs(minor_delta(s_block, i)) == 0.0)
      throw std::invalid_argument("omega_intermediate: singular leading block");
    return detail::split_semianalytic_orbit(f.closed_form(), n, base.entries().real(), build,
                                            build, m, m, chi_coef, chi_coef, sign, spec,
                                            f.decay_radius(1e-6));
  }
  ChartFn ev = [&f](const HermitianMatrix& x) { return f.eval(x); };
  return omega_intermediate(ev, s_block, h_block, sign, spec, f.decay_radius(1e-6));
}

/// eta(Delta_i)^{n-i} |Delta_i|^{n-i} Omega_i at the block point.
inline QuadResult omega_tilde_intermediate(const SchwartzFn& f, const HermitianMatrix& s_block,
                                           const HermitianMatrix& h_block, int sign,
                                           const QuadSpec& spec) {
  const int i = s_block.n();
  const int n = i + h_block.n();
  const double det_s = minor_delta(s_block, i);
  QuadResult r = omega_intermediate(f, s_block, h_block, sign, spec);
  double scale = 1.0;
  for (int k = 0; k < n - i; ++k) scale *= eta(f.tag(), det_s) * std::abs(det_s);
  r.value *= scale;
  r.err_est *= std::abs(scale);
  return r;
}

/// Product-domain integral over N^{n_1} x ... x N^{n_k}.
inline QuadResult omega_multi(const std::function<cplx(const std::vector<HermitianMatrix>&)>& f,
                              AlgebraTag tag, const std::vector<TorusPoint>& points, int sign,
                              const QuadSpec& spec_in, double probe_r0 = 4.0) {
  const int k = static_cast<int>(points.size());
  std::vector<int> dims(k), offs(k);
  int d = 0;
  for (int j = 0; j < k; ++j) {
    dims[j] = UnipotentCoord::dim(points[j].n());
    offs[j] = d;
    d += dims[j];
  }
  auto assemble = [&](const Eigen::VectorXd& c, std::vector<HermitianMatrix>& xs, cplx& character) {
    xs.clear();
    character = cplx(1, 0);
    for (int j = 0; j < k; ++j) {
      const HermitianMatrix base = points[j].materialize(tag);
      if (dims[j] == 0) {
        xs.push_back(base);
        continue;
      }
      UnipotentCoord u{tag, points[j].n(), c.segment(offs[j], dims[j])};
      xs.push_back(act(u, base));
      character *= chi(u, sign);
    }
  };
  if (d == 0) {
    std::vector<HermitianMatrix> xs;
    cplx one;
    assemble(Eigen::VectorXd(), xs, one);
    QuadResult r;
    r.value = f(xs);
    r.evals = 1;
    r.converged = true;
    return r;
  }
  auto g = [&](const Eigen::VectorXd& c) -> cplx {
    std::vector<HermitianMatrix> xs;
    cplx character;
    assemble(c, xs, character);
    return f(xs) * character;
  };
  auto amp = [&](const Eigen::VectorXd& c) { return std::abs(g(c)); };
  const double threshold = std::max(1e-14, spec_in.abs_tol * 1e-3);
  const auto radii = detail::probe_box_axes(amp, d, probe_r0, threshold);
  QuadSpec spec = detail::scheme_for_dim(spec_in, d, radii);
  return integrate(g, spec);
}

/// Multi-block normalization: the sigma factor of each component.
inline double multi_tilde_scale(AlgebraTag tag, const std::vector<TorusPoint>& points) {
  double s = 1.0;
  for (const auto& p : points) {
    const double sg = sigma(p.materialize(tag));
    s *= eta(tag, sg) * std::abs(sg);
  }
  return s;
}

// --- transfer factors --------------------------------------------------------

/// gamma(a) = prod_{k<n} sign(a_1 ... a_k).
inline int transfer_factor(const TorusPoint& a) {
  int out = 1;
  double prod = 1.0;
  for (int k = 0; k + 1 < a.n(); ++k) {
    prod *= a.diag[k];
    if (prod == 0.0) throw std::invalid_argument("transfer_factor: zero entry");
    out *= prod > 0 ? 1 : -1;
  }
  return out;
}

struct WeilConstant {
  AlgebraTag tag;
  cplx value;          // snapped fourth root of unity
  cplx raw;            // numeric value before snapping
  double residual;     // |raw - value|
  bool determined_numerically;
};

/// Numeric determination of the unit constant in the transform of the
/// Gaussian phase psi(a x xbar) on D, snapped to the nearest fourth root
/// of unity. D carries the pairing Tr_{D/R}(x ybar) and the self-dual
/// measure; the pairing against the adapted Gaussian G uses the identity
/// <F xi, G> = <xi, F G>, which makes both sides absolutely convergent.
inline WeilConstant weil_constant(AlgebraTag tag, int sign = +1,
                                  const QuadSpec& spec_in = QuadSpec{}) {
  const double a = 1.0;
  QuadSpec spec = spec_in;
  spec.dim = 2;
  spec.radius = {12.0};
  spec.rel_tol = std::min(spec_in.rel_tol, 1e-9);
  spec.abs_tol = std::min(spec_in.abs_tol, 1e-11);

  // x xbar as a real number and the adapted Gaussian for each algebra
  auto xxbar = [tag](const Eigen::VectorXd& v) {
    return tag == AlgebraTag::ComplexC ? v[0] * v[0] + v[1] * v[1] : v[0] * v[1];
  };
  auto gauss = [tag](const Eigen::VectorXd& v) {
    const double q = tag == AlgebraTag::ComplexC ? 2.0 * (v[0] * v[0] + v[1] * v[1])
                                                 : v[0] * v[0] + v[1] * v[1];
    return std::exp(-0.5 * q);
  };
  // adapted Gaussians are fixed points of the transform on D
  Integrand num = [&](const Eigen::VectorXd& v) -> cplx {
    return psi(sign, a * xxbar(v)) * gauss(v);
  };
  Integrand den = [&](const Eigen::VectorXd& v) -> cplx {
    return (1.0 / std::abs(a)) * eta(tag, a) * psi(sign, -xxbar(v) / a) * gauss(v);
  };
  const QuadResult rn = integrate(num, spec);
  const QuadResult rd = integrate(den, spec);
  WeilConstant w;
  w.tag = tag;
  w.determined_numerically = true;
  w.raw = rn.value / rd.value;
  const cplx candidates[4] = {cplx(1, 0), cplx(-1, 0), cplx(0, 1), cplx(0, -1)};
  w.value = candidates[0];
  for (const cplx& c : candidates)
    if (std::abs(w.raw - c) < std::abs(w.raw - w.value)) w.value = c;
  w.residual = std::abs(w.raw - w.value);
  if (w.residual > 1e-3) throw std::runtime_error("weil_constant: residual above 1e-3, convention inconsistency");
  return w;
}

/// Exact value under the project's conventions (psi_s(t) = e^{ist}).
inline cplx weil_constant_exact(AlgebraTag tag, int sign = +1) {
  if (tag == AlgebraTag::SplitRR) return cplx(1, 0);
  return cplx(0, sign >= 0 ? 1.0 : -1.0);
}

/// gamma(a w_m) for the anti-diagonal blocks: the period-8 sequence.
inline cplx gamma_block_table(int m, double a, int sign) {
  const cplx c = weil_constant_exact(AlgebraTag::ComplexC, sign);
  const double sa = a >= 0 ? 1.0 : -1.0;
  switch (((m - 1) % 8 + 8) % 8) {
    case 0: return cplx(1, 0);
    case 1: return c * (-sa);
    case 2: return cplx(sa, 0);
    case 3: return cplx(1, 0);
    case 4: return cplx(-1, 0);
    case 5: return c * (-sa);
    case 6: return cplx(-sa, 0);
    default: return cplx(1, 0);
  }
}

/// Same value by the defining recursion
///   gamma(a w_n, psi) = gamma(-a^{-1} w_{n-1}, psibar)
///                       * c(C, psi)^{n(n-1)/2} * sign(det(-a^{-1} w_{n-1})),
/// used as a cross-check of the table.
inline cplx gamma_wn_recursive(int m, double a, int sign) {
  if (m <= 1) return cplx(1, 0);
  const cplx c = weil_constant_exact(AlgebraTag::ComplexC, sign);
  cplx cpow(1, 0);
  for (long k = 0; k < (long(m) * (m - 1)) / 2 % 4; ++k) cpow *= c;
  const double b = -1.0 / a;
  double det = weyl_det_sign(m - 1);
  for (int k = 0; k < m - 1; ++k) det *= b;
  const double sd = det >= 0 ? 1.0 : -1.0;
  return gamma_wn_recursive(m - 1, b, -sign) * cpow * sd;
}

// --- matching ----------------------------------------------------------------

struct MatchSample {
  std::vector<double> a;
  cplx lhs, rhs;
  double residual;
  double err;
};

struct MatchReport {
  std::vector<MatchSample> samples;
  double max_residual = 0;
  bool all_converged = true;
};

/// Residuals of the matching condition Omega_{R+R}(Phi)(a) - gamma(a) Omega_C(Psi)(a).
inline MatchReport match_residual(const SchwartzFn& phi, const SchwartzFn& psi_fn,
                                  const std::vector<TorusPoint>& samples, int sign,
                                  const QuadSpec& spec) {
  if (phi.tag() != AlgebraTag::SplitRR || psi_fn.tag() != AlgebraTag::ComplexC)
    throw std::invalid_argument("match_residual: expects (SplitRR, ComplexC) pair");
  if (phi.n() != psi_fn.n()) throw std::invalid_argument("match_residual: size mismatch");
  MatchReport rep;
  for (const auto& a : samples) {
    const QuadResult l = omega(phi, a, sign, spec);
    const QuadResult r = omega(psi_fn, a, sign, spec);
    MatchSample s;
    s.a = a.diag;
    s.lhs = l.value;
    s.rhs = double(transfer_factor(a)) * r.value;
    s.residual = std::abs(s.lhs - s.rhs);
    s.err = l.err_est + r.err_est;
    rep.all_converged = rep.all_converged && l.converged && r.converged;
    rep.max_residual = std::max(rep.max_residual, s.residual);
    rep.samples.push_back(std::move(s));
  }
  return rep;
}

}  // namespace klab

#pragma once

/// Deterministic numerical integration for Schwartz-damped oscillatory
/// integrands.
///
/// Three schemes share one entry point:
///   adaptive_subdivision  tensor Gauss-Kronrod 7/15 cells, worst-first
///                         dyadic bisection of the widest axis (d <= 3)
///   tensor_rule           a fixed panel grid of GK cells
///   qmc                   rank-1 lattice with a fixed seed and shifted
///                         replicates for the error estimate (any d)
///
/// Conditionally convergent one-dimensional oscillatory integrals (linear
/// plus 1/t phases) are handled by integrate_oscillatory_1d: split at the
/// origin, log-map each half line, damp by exp(-eps t^2) over a decreasing
/// schedule and extrapolate the damping to zero by Neville's scheme.
///
/// Everything here is deterministic: subdivision order, lattice points and
/// reduction order depend only on the spec, never on timing.

#include <algorithm>
#include <atomic>
#include <cmath>
#include <complex>
#include <cstdint>
#include <functional>
#include <queue>
#include <stdexcept>
#include <string>
#include <thread>
#include <vector>

#include <eigen3/Eigen/Dense>

namespace klab {

using cplx = std::complex<double>;
using Integrand = std::function<cplx(const Eigen::VectorXd&)>;
using Integrand1D = std::function<cplx(double)>;

enum class QuadScheme { AdaptiveSubdivision, TensorRule, Qmc, QmcGaussian };

struct QuadSpec {
  int dim = 1;
  std::vector<double> radius = {10.0};  // per-axis truncation; one entry = uniform
  double rel_tol = 1e-8;
  double abs_tol = 1e-10;
  long max_evals = 4'000'000;
  QuadScheme scheme = QuadScheme::AdaptiveSubdivision;
  std::vector<double> eps_schedule;  // empty = no damping
  std::uint64_t qmc_seed = 12345;
  int qmc_log2_points = 15;
  int tensor_panels = 8;

  double radius_axis(int k) const {
    if (radius.empty()) return 10.0;
    return radius.size() == 1 ? radius[0] : radius.at(k);
  }
  QuadSpec with_dim(int d) const {
    QuadSpec s = *this;
    s.dim = d;
    return s;
  }
  QuadSpec with_radius(double r) const {
    QuadSpec s = *this;
    s.radius = {r};
    return s;
  }
};

struct QuadResult {
  cplx value{0.0, 0.0};
  double err_est = 0.0;
  long evals = 0;
  bool converged = false;
  std::vector<std::string> notes;

  QuadResult& operator+=(const QuadResult& o) {
    value += o.value;
    err_est += o.err_est;
    evals += o.evals;
    converged = converged && o.converged;
    for (const auto& s : o.notes) notes.push_back(s);
    return *this;
  }
};

namespace qk {
// Kronrod 15 / Gauss 7 pair on [-1, 1] (QUADPACK dqk15 constants).
inline constexpr double xgk[8] = {
    0.991455371120813, 0.949107912342759, 0.864864423359769, 0.741531185599394,
    0.586087235467691, 0.405845151377397, 0.207784955007898, 0.0};
inline constexpr double wgk[8] = {
    0.022935322010529, 0.063092092629979, 0.104790010322250, 0.140653259715525,
    0.169004726639267, 0.190350578064785, 0.204432940075298, 0.209482141084728};
inline constexpr double wg[4] = {0.129484966168870, 0.279705391489277, 0.381830050505119,
                                 0.417959183673469};

struct Nodes {
  double x[15];   // ordered: -x0..-x6, 0, x6..x0 is not needed; use symmetric list
  double wk[15];
  double wgauss[15];  // zero at pure-Kronrod nodes
};

inline const Nodes& nodes() {
  static const Nodes n = [] {
    Nodes n{};
    for (int i = 0; i < 7; ++i) {
      n.x[i] = -xgk[i];
      n.wk[i] = wgk[i];
      n.x[14 - i] = xgk[i];
      n.wk[14 - i] = wgk[i];
      n.wgauss[i] = 0.0;
      n.wgauss[14 - i] = 0.0;
    }
    n.x[7] = 0.0;
    n.wk[7] = wgk[7];
    n.wgauss[7] = wg[3];
    // Gauss nodes are the odd-index Kronrod nodes
    n.wgauss[1] = wg[0];
    n.wgauss[13] = wg[0];
    n.wgauss[3] = wg[1];
    n.wgauss[11] = wg[1];
    n.wgauss[5] = wg[2];
    n.wgauss[9] = wg[2];
    return n;
  }();
  return n;
}
}  // namespace qk

/// GK15 on [a, b]: Kronrod value, Gauss value, evaluation count.
inline void gk15_1d(const Integrand1D& f, double a, double b, cplx& kron, cplx& gauss) {
  const auto& nd = qk::nodes();
  const double mid = 0.5 * (a + b), h = 0.5 * (b - a);
  cplx sk(0, 0), sg(0, 0);
  for (int i = 0; i < 15; ++i) {
    const cplx v = f(mid + h * nd.x[i]);
    sk += nd.wk[i] * v;
    sg += nd.wgauss[i] * v;
  }
  kron = h * sk;
  gauss = h * sg;
}

namespace detail {

struct Cell {
  Eigen::VectorXd lo, hi;
  cplx value{0, 0};
  double err = 0;
  long id = 0;
};

struct CellWorse {
  bool operator()(const Cell& a, const Cell& b) const {
    if (a.err != b.err) return a.err < b.err;  // max-heap on error
    return a.id > b.id;                        // older cell first on ties
  }
};

/// Tensor GK15 over a box; error from the Kronrod-Gauss difference.
inline void gk_tensor_cell(const Integrand& f, Cell& c, long& evals) {
  const int d = static_cast<int>(c.lo.size());
  const auto& nd = qk::nodes();
  long npts = 1;
  for (int k = 0; k < d; ++k) npts *= 15;
  cplx sk(0, 0), sg(0, 0);
  Eigen::VectorXd x(d);
  std::vector<int> idx(d, 0);
  for (long p = 0; p < npts; ++p) {
    long q = p;
    double wk = 1.0, wgs = 1.0;
    for (int k = 0; k < d; ++k) {
      const int i = static_cast<int>(q % 15);
      q /= 15;
      const double mid = 0.5 * (c.lo[k] + c.hi[k]);
      const double h = 0.5 * (c.hi[k] - c.lo[k]);
      x[k] = mid + h * nd.x[i];
      wk *= nd.wk[i] * h;
      wgs *= nd.wgauss[i] * h;
    }
    const cplx v = f(x);
    sk += wk * v;
    if (wgs != 0.0) sg += wgs * v;
  }
  evals += npts;
  c.value = sk;
  c.err = std::abs(sk - sg);
}

inline QuadResult adaptive_nd(const Integrand& f, const QuadSpec& spec) {
  const int d = spec.dim;
  if (d > 3) throw std::invalid_argument("adaptive_subdivision: dimension above 3, use qmc");
  QuadResult res;
  Cell root;
  root.lo.resize(d);
  root.hi.resize(d);
  for (int k = 0; k < d; ++k) {
    root.lo[k] = -spec.radius_axis(k);
    root.hi[k] = spec.radius_axis(k);
  }
  long evals = 0;
  long next_id = 0;
  root.id = next_id++;
  gk_tensor_cell(f, root, evals);
  std::priority_queue<Cell, std::vector<Cell>, CellWorse> heap;
  std::vector<Cell> done;
  heap.push(root);
  cplx total = root.value;
  double toterr = root.err;
  Eigen::VectorXd scale(d);
  for (int k = 0; k < d; ++k) scale[k] = spec.radius_axis(k);
  while (true) {
    const double tol = std::max(spec.abs_tol, spec.rel_tol * std::abs(total));
    if (toterr <= tol) break;
    if (evals >= spec.max_evals || heap.empty()) break;
    Cell worst = heap.top();
    heap.pop();
    // pick widest axis relative to the root scale
    int axis = 0;
    double wbest = -1;
    for (int k = 0; k < d; ++k) {
      const double w = (worst.hi[k] - worst.lo[k]) / scale[k];
      if (w > wbest + 1e-15) {
        wbest = w;
        axis = k;
      }
    }
    if (worst.hi[axis] - worst.lo[axis] < 1e-13 * scale[axis]) {
      done.push_back(worst);
      continue;
    }
    total -= worst.value;
    toterr -= worst.err;
    const double mid = 0.5 * (worst.lo[axis] + worst.hi[axis]);
    Cell a = worst, b = worst;
    a.hi[axis] = mid;
    b.lo[axis] = mid;
    a.id = next_id++;
    b.id = next_id++;
    gk_tensor_cell(f, a, evals);
    gk_tensor_cell(f, b, evals);
    total += a.value + b.value;
    toterr += a.err + b.err;
    heap.push(a);
    heap.push(b);
  }
  // deterministic reduction: leaves in creation order
  std::vector<Cell> leaves = std::move(done);
  while (!heap.empty()) {
    leaves.push_back(heap.top());
    heap.pop();
  }
  std::sort(leaves.begin(), leaves.end(), [](const Cell& a, const Cell& b) { return a.id < b.id; });
  cplx sum(0, 0);
  double err = 0;
  for (const auto& c : leaves) {
    sum += c.value;
    err += c.err;
  }
  res.value = sum;
  res.err_est = err;
  res.evals = evals;
  res.converged = err <= std::max(spec.abs_tol, spec.rel_tol * std::abs(sum));
  if (!res.converged) res.notes.push_back("adaptive: error target not reached");
  return res;
}

inline QuadResult tensor_nd(const Integrand& f, const QuadSpec& spec) {
  const int d = spec.dim;
  QuadResult res;
  const int panels = std::max(1, spec.tensor_panels);
  std::vector<Cell> cells;
  std::vector<int> idx(d, 0);
  long ncells = 1;
  for (int k = 0; k < d; ++k) ncells *= panels;
  long evals = 0;
  cplx sum(0, 0);
  double err = 0;
  for (long p = 0; p < ncells; ++p) {
    long q = p;
    Cell c;
    c.lo.resize(d);
    c.hi.resize(d);
    for (int k = 0; k < d; ++k) {
      const int i = static_cast<int>(q % panels);
      q /= panels;
      const double r = spec.radius_axis(k);
      const double h = 2.0 * r / panels;
      c.lo[k] = -r + i * h;
      c.hi[k] = c.lo[k] + h;
    }
    gk_tensor_cell(f, c, evals);
    sum += c.value;
    err += c.err;
    if (evals >= spec.max_evals) {
      res.notes.push_back("tensor: eval budget reached");
      break;
    }
  }
  res.value = sum;
  res.err_est = err;
  res.evals = evals;
  res.converged = err <= std::max(spec.abs_tol, spec.rel_tol * std::abs(sum));
  return res;
}

inline std::uint64_t splitmix64(std::uint64_t& s) {
  std::uint64_t z = (s += 0x9e3779b97f4a7c15ULL);
  z = (z ^ (z >> 30)) * 0xbf58476d1ce4e5b9ULL;
  z = (z ^ (z >> 27)) * 0x94d049bb133111ebULL;
  return z ^ (z >> 31);
}

/// Inverse of the standard normal CDF (Acklam's rational approximation,
/// relative error below 1.2e-9; ample for an importance map).
inline double inv_norm_cdf(double p) {
  static const double a[] = {-3.969683028665376e+01, 2.209460984245205e+02,
                             -2.759285104469687e+02, 1.383577518672690e+02,
                             -3.066479806614716e+01, 2.506628277459239e+00};
  static const double b[] = {-5.447609879822406e+01, 1.615858368580409e+02,
                             -1.556989798598866e+02, 6.680131188771972e+01,
                             -1.328068155288572e+01};
  static const double c[] = {-7.784894002430293e-03, -3.223964580411365e-01,
                             -2.400758277161838e+00, -2.549732539343734e+00,
                             4.374664141464968e+00,  2.938163982698783e+00};
  static const double d[] = {7.784695709041462e-03, 3.224671290700398e-01,
                             2.445134137142996e+00, 3.754408661907416e+00};
  const double pl = 0.02425;
  double q, r;
  if (p < pl) {
    q = std::sqrt(-2 * std::log(p));
    return (((((c[0] * q + c[1]) * q + c[2]) * q + c[3]) * q + c[4]) * q + c[5]) /
           ((((d[0] * q + d[1]) * q + d[2]) * q + d[3]) * q + 1);
  }
  if (p <= 1 - pl) {
    q = p - 0.5;
    r = q * q;
    return (((((a[0] * r + a[1]) * r + a[2]) * r + a[3]) * r + a[4]) * r + a[5]) * q /
           (((((b[0] * r + b[1]) * r + b[2]) * r + b[3]) * r + b[4]) * r + 1);
  }
  q = std::sqrt(-2 * std::log(1 - p));
  return -(((((c[0] * q + c[1]) * q + c[2]) * q + c[3]) * q + c[4]) * q + c[5]) /
         ((((d[0] * q + d[1]) * q + d[2]) * q + d[3]) * q + 1);
}

/// Rank-1 lattice rule with shifted replicates. The generating vector is a
/// published component-by-component vector; the shift stream is derived
/// from the spec seed, so results are a pure function of the spec.
///
/// Two point maps: the plain box map over the truncation box, and a
/// Gaussian importance map (per-axis sigma = radius/3) for peaked smooth
/// integrands, which removes the truncation bias entirely.
inline QuadResult qmc_nd(const Integrand& f, const QuadSpec& spec) {
  static const std::uint64_t gen[10] = {1,      182667, 469891, 498753, 110745,
                                        446247, 250185, 118627, 245333, 283199};
  const int d = spec.dim;
  if (d > 10) throw std::invalid_argument("qmc: dimension above 10");
  const bool gaussian = spec.scheme == QuadScheme::QmcGaussian;
  const long n = 1L << spec.qmc_log2_points;
  const int reps = 8;
  QuadResult res;
  double vol = 1.0;
  std::vector<double> sigma(d);
  for (int k = 0; k < d; ++k) {
    sigma[k] = spec.radius_axis(k) / 3.0;
    vol *= gaussian ? std::sqrt(2.0 * M_PI) * sigma[k] : 2.0 * spec.radius_axis(k);
  }
  std::uint64_t seed = spec.qmc_seed;
  std::vector<cplx> means(reps);
  Eigen::VectorXd x(d);
  for (int r = 0; r < reps; ++r) {
    std::vector<double> shift(d);
    for (int k = 0; k < d; ++k)
      shift[k] = double(splitmix64(seed) >> 11) * (1.0 / 9007199254740992.0);
    cplx acc(0, 0);
    for (long i = 0; i < n; ++i) {
      double zsq = 0;
      for (int k = 0; k < d; ++k) {
        double u = std::fmod(double(i) * (double(gen[k]) / double(n)) + shift[k], 1.0);
        if (gaussian) {
          u = std::min(std::max(u, 1e-13), 1.0 - 1e-13);
          const double z = inv_norm_cdf(u);
          x[k] = sigma[k] * z;
          zsq += z * z;
        } else {
          x[k] = (2.0 * u - 1.0) * spec.radius_axis(k);
        }
      }
      acc += gaussian ? f(x) * std::exp(0.5 * zsq) : f(x);
    }
    means[r] = acc * (vol / double(n));
  }
  cplx mean(0, 0);
  for (const cplx& m : means) mean += m;
  mean /= double(reps);
  double var = 0;
  for (const cplx& m : means) var += std::norm(m - mean);
  var /= double(reps * (reps - 1));
  res.value = mean;
  res.err_est = 2.0 * std::sqrt(var);
  res.evals = long(n) * reps;
  res.converged = res.err_est <= std::max(spec.abs_tol, spec.rel_tol * std::abs(mean));
  if (!res.converged) res.notes.push_back("qmc: error target not reached");
  return res;
}

}  // namespace detail

/// Integrate f over the truncated box given by the spec.
inline QuadResult integrate(const Integrand& f, const QuadSpec& spec) {
  switch (spec.scheme) {
    case QuadScheme::AdaptiveSubdivision:
      if (spec.dim > 3) return detail::qmc_nd(f, spec);
      return detail::adaptive_nd(f, spec);
    case QuadScheme::TensorRule:
      return detail::tensor_nd(f, spec);
    case QuadScheme::Qmc:
    case QuadScheme::QmcGaussian:
      return detail::qmc_nd(f, spec);
  }
  throw std::logic_error("integrate: bad scheme");
}

namespace detail {

/// Adaptive 1D over [a, b] (plain GK15 bisection), deterministic.
inline QuadResult adaptive_1d(const Integrand1D& f, double a, double b, double abs_tol,
                              double rel_tol, long max_evals) {
  struct Seg {
    double a, b;
    cplx val;
    double err;
    long id;
  };
  struct Worse {
    bool operator()(const Seg& x, const Seg& y) const {
      if (x.err != y.err) return x.err < y.err;
      return x.id > y.id;
    }
  };
  QuadResult res;
  if (!(b > a)) {
    res.converged = true;
    return res;
  }
  long evals = 0, next_id = 0;
  auto make = [&](double lo, double hi) {
    Seg s{lo, hi, {0, 0}, 0, next_id++};
    cplx k, g;
    gk15_1d(f, lo, hi, k, g);
    evals += 15;
    s.val = k;
    s.err = std::abs(k - g);
    return s;
  };
  std::priority_queue<Seg, std::vector<Seg>, Worse> heap;
  std::vector<Seg> done;
  Seg root = make(a, b);
  cplx total = root.val;
  double toterr = root.err;
  heap.push(root);
  const double span = b - a;
  while (true) {
    const double tol = std::max(abs_tol, rel_tol * std::abs(total));
    if (toterr <= tol || heap.empty() || evals >= max_evals) break;
    Seg w = heap.top();
    heap.pop();
    if (w.b - w.a < 1e-14 * span) {
      done.push_back(w);
      continue;
    }
    total -= w.val;
    toterr -= w.err;
    const double m = 0.5 * (w.a + w.b);
    Seg l = make(w.a, m), r = make(m, w.b);
    total += l.val + r.val;
    toterr += l.err + r.err;
    heap.push(l);
    heap.push(r);
  }
  std::vector<Seg> leaves = std::move(done);
  while (!heap.empty()) {
    leaves.push_back(heap.top());
    heap.pop();
  }
  std::sort(leaves.begin(), leaves.end(), [](const Seg& x, const Seg& y) { return x.id < y.id; });
  cplx sum(0, 0);
  double err = 0;
  for (const auto& s : leaves) {
    sum += s.val;
    err += s.err;
  }
  res.value = sum;
  res.err_est = err;
  res.evals = evals;
  res.converged = err <= std::max(abs_tol, rel_tol * std::abs(sum));
  return res;
}

}  // namespace detail

/// One-dimensional integral over the real line of a possibly conditionally
/// convergent oscillatory integrand (linear and 1/t phases allowed). The
/// domain is split at zero and each half line is log-mapped, which resolves
/// the oscillation accumulation of the 1/t phase at the origin. When the
/// spec carries a damping schedule, values of int f(t) exp(-eps t^2) dt are
/// extrapolated to eps = 0 through Neville's scheme, and the extrapolation
/// spread enters the error estimate.
inline QuadResult integrate_oscillatory_1d(const Integrand1D& f, const QuadSpec& spec) {
  const double T = spec.radius_axis(0);
  const double tmin = 1e-9 * T;

  auto value_at_eps = [&](double eps, QuadResult& meta) -> cplx {
    double tmax = T;
    if (eps > 0) tmax = std::min(T, std::sqrt(std::log(1.0 / (1e-18)) / eps));
    const double smin = std::log(tmin), smax = std::log(tmax);
    auto half = [&](double side) {
      Integrand1D g = [&, side, eps](double s) {
        const double t = side * std::exp(s);
        const double damp = eps > 0 ? std::exp(-eps * t * t) : 1.0;
        return f(t) * damp * std::exp(s);
      };
      return detail::adaptive_1d(g, smin, smax, 0.25 * spec.abs_tol, 0.5 * spec.rel_tol,
                                 spec.max_evals / 2);
    };
    QuadResult pos = half(+1.0), neg = half(-1.0);
    meta.evals += pos.evals + neg.evals;
    meta.err_est += pos.err_est + neg.err_est;
    meta.converged = meta.converged && pos.converged && neg.converged;
    return pos.value + neg.value;
  };

  QuadResult res;
  res.converged = true;
  if (spec.eps_schedule.empty()) {
    res.value = value_at_eps(0.0, res);
    // contribution bound for the skipped (0, tmin) gap
    res.err_est += 2.0 * tmin * std::abs(f(tmin));
    res.converged = res.converged &&
                    res.err_est <= std::max(spec.abs_tol, spec.rel_tol * std::abs(res.value));
    return res;
  }

  std::vector<double> eps = spec.eps_schedule;
  std::sort(eps.begin(), eps.end(), std::greater<double>());
  const int m = static_cast<int>(eps.size());
  std::vector<cplx> tab(m);
  for (int i = 0; i < m; ++i) tab[i] = value_at_eps(eps[i], res);
  // Neville extrapolation to eps = 0
  std::vector<cplx> cur = tab;
  cplx prev = cur.back();
  for (int level = 1; level < m; ++level) {
    for (int i = 0; i + level < m; ++i) {
      const double e0 = eps[i], e1 = eps[i + level];
      cur[i] = (e0 * cur[i + 1] - e1 * cur[i]) / (e0 - e1);
    }
    cur.resize(m - level);
    prev = cur.back();
  }
  res.value = cur[0];
  res.err_est += std::abs(cur[0] - prev) + 2.0 * tmin * std::abs(f(std::max(tmin, 1e-300)));
  res.converged = res.converged &&
                  res.err_est <= std::max(spec.abs_tol, spec.rel_tol * std::abs(res.value));
  if (!res.converged) res.notes.push_back("oscillatory_1d: error target not reached");
  return res;
}

/// Iterated integral with a prescribed axis order: order[0] is integrated
/// first (innermost), order.back() last. Cost is exponential in k; k <= 3.
inline QuadResult iterated(const Integrand& f, const std::vector<int>& order,
                           const std::vector<QuadSpec>& inner_specs) {
  const int k = static_cast<int>(order.size());
  if (k > 3) throw std::invalid_argument("iterated: more than 3 axes");
  if (static_cast<int>(inner_specs.size()) != k)
    throw std::invalid_argument("iterated: one spec per axis required");
  QuadResult meta;
  meta.converged = true;

  // recursive evaluation: level k-1 is the outermost axis
  std::function<cplx(int, Eigen::VectorXd&)> level = [&](int li, Eigen::VectorXd& x) -> cplx {
    const int axis = order[li];
    const QuadSpec& s = inner_specs[li];
    Integrand1D g = [&, li, axis](double t) {
      x[axis] = t;
      if (li == 0) return f(x);
      return level(li - 1, x);
    };
    QuadResult r = detail::adaptive_1d(g, -s.radius_axis(0), s.radius_axis(0), s.abs_tol,
                                       s.rel_tol, s.max_evals);
    meta.evals += r.evals;
    if (li == k - 1) {
      meta.err_est += r.err_est;
      meta.converged = meta.converged && r.converged;
    }
    return r.value;
  };

  Eigen::VectorXd x = Eigen::VectorXd::Zero(k);
  meta.value = level(k - 1, x);
  if (!meta.converged) meta.notes.push_back("iterated: inner integral missed its target");
  return meta;
}

/// Deterministic worker pool: `count` tasks, results written to fixed slots,
/// callers reduce in index order. The outcome never depends on the number
/// of workers.
template <class Body>
void parallel_for(int workers, long count, Body&& body) {
  workers = std::max(1, workers);
  if (workers == 1 || count <= 1) {
    for (long i = 0; i < count; ++i) body(i);
    return;
  }
  std::vector<std::thread> pool;
  std::atomic<long> next{0};
  for (int w = 0; w < workers; ++w)
    pool.emplace_back([&] {
      while (true) {
        const long i = next.fetch_add(1);
        if (i >= count) break;
        body(i);
      }
    });
  for (auto& t : pool) t.join();
}

}  // namespace klab

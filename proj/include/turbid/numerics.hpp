#pragma once

// Scalar numerics shared across the library: adaptive Gauss-Kronrod
// quadrature, bracketed root finding, golden-section extremum refinement,
// and linear-interpolation sample quantiles.

#include <algorithm>
#include <cmath>
#include <cstddef>
#include <functional>
#include <stdexcept>
#include <vector>

namespace turbid::num {

using Fn = std::function<double(double)>;

struct QuadResult {
  double value;
  double error;  // Kronrod-Gauss error estimate
};

// 7-15 Gauss-Kronrod pair on [a, b].
inline QuadResult gk15(const Fn& f, double a, double b) {
  static const double xk[8] = {
      0.991455371120813, 0.949107912342759, 0.864864423359769,
      0.741531185599394, 0.586087235467691, 0.405845151377397,
      0.207784955007898, 0.0};
  static const double wk[8] = {
      0.022935322010529, 0.063092092629979, 0.104790010322250,
      0.140653259715525, 0.169004726639267, 0.190350578064785,
      0.204432940075298, 0.209482141084728};
  static const double wg[4] = {
      0.129484966168870, 0.279705391489277, 0.381830050505119,
      0.417959183673469};
  const double mid = 0.5 * (a + b);
  const double half = 0.5 * (b - a);
  const double f_mid = f(mid);
  double kron = wk[7] * f_mid;
  double gauss = wg[3] * f_mid;
  for (int i = 0; i < 7; ++i) {
    const double fa = f(mid - half * xk[i]);
    const double fb = f(mid + half * xk[i]);
    kron += wk[i] * (fa + fb);
    if (i % 2 == 1) gauss += wg[i / 2] * (fa + fb);
  }
  kron *= half;
  gauss *= half;
  return {kron, std::abs(kron - gauss)};
}

struct Panel {
  double a, b, integral;
};

namespace detail {
// A few levels are forced so narrow features between the initial Kronrod
// nodes cannot silently vanish (their error estimate would read zero).
inline void quad_adapt(const Fn& f, double a, double b, double tol, int depth,
                       std::vector<Panel>& out) {
  if (depth >= 6) {
    QuadResult r = gk15(f, a, b);
    if (r.error <= tol || depth >= 48) {
      out.push_back({a, b, r.value});
      return;
    }
  }
  const double mid = 0.5 * (a + b);
  quad_adapt(f, a, mid, 0.5 * tol, depth + 1, out);
  quad_adapt(f, mid, b, 0.5 * tol, depth + 1, out);
}
}  // namespace detail

// Adaptive quadrature, absolute tolerance. Panels come back sorted, which is
// what the cumulative-cdf cache wants.
inline std::vector<Panel> quad_panels(const Fn& f, double a, double b,
                                      double tol = 1e-10) {
  if (!(a < b)) throw std::invalid_argument("quad: empty interval");
  std::vector<Panel> panels;
  detail::quad_adapt(f, a, b, tol, 0, panels);
  return panels;
}

inline double quad(const Fn& f, double a, double b, double tol = 1e-10) {
  double total = 0.0;
  for (const Panel& p : quad_panels(f, a, b, tol)) total += p.integral;
  return total;
}

// Brent's method on a sign-changing bracket.
inline double brentq(const Fn& f, double a, double b, double tol = 1e-10,
                     int max_iter = 200) {
  double fa = f(a), fb = f(b);
  if (fa == 0.0) return a;
  if (fb == 0.0) return b;
  if ((fa > 0.0) == (fb > 0.0))
    throw std::invalid_argument("brentq: root not bracketed");
  double c = a, fc = fa;
  double d = b - a, e = d;
  for (int it = 0; it < max_iter; ++it) {
    if ((fb > 0.0) == (fc > 0.0)) {
      c = a;
      fc = fa;
      d = e = b - a;
    }
    if (std::abs(fc) < std::abs(fb)) {
      a = b;
      b = c;
      c = a;
      fa = fb;
      fb = fc;
      fc = fa;
    }
    const double eps = 2.0 * 2.220446049250313e-16 * std::abs(b) + 0.5 * tol;
    const double m = 0.5 * (c - b);
    if (std::abs(m) <= eps || fb == 0.0) return b;
    if (std::abs(e) < eps || std::abs(fa) <= std::abs(fb)) {
      d = e = m;
    } else {
      double p, q;
      const double s = fb / fa;
      if (a == c) {
        p = 2.0 * m * s;
        q = 1.0 - s;
      } else {
        const double qq = fa / fc;
        const double r = fb / fc;
        p = s * (2.0 * m * qq * (qq - r) - (b - a) * (r - 1.0));
        q = (qq - 1.0) * (r - 1.0) * (s - 1.0);
      }
      if (p > 0.0) q = -q;
      p = std::abs(p);
      if (2.0 * p < std::min(3.0 * m * q - std::abs(eps * q), std::abs(e * q))) {
        e = d;
        d = p / q;
      } else {
        d = e = m;
      }
    }
    a = b;
    fa = fb;
    b += (std::abs(d) > eps) ? d : (m > 0.0 ? eps : -eps);
    fb = f(b);
  }
  return b;
}

// Golden-section search for a local maximum inside [a, b]; approximate by
// construction, refine only down to tol.
inline double golden_max(const Fn& f, double a, double b, double tol = 1e-9) {
  const double invphi = 0.6180339887498949;
  double x1 = b - invphi * (b - a);
  double x2 = a + invphi * (b - a);
  double f1 = f(x1), f2 = f(x2);
  while (b - a > tol) {
    if (f1 < f2) {
      a = x1;
      x1 = x2;
      f1 = f2;
      x2 = a + invphi * (b - a);
      f2 = f(x2);
    } else {
      b = x2;
      x2 = x1;
      f2 = f1;
      x1 = b - invphi * (b - a);
      f1 = f(x1);
    }
  }
  return 0.5 * (a + b);
}

inline double golden_min(const Fn& f, double a, double b, double tol = 1e-9) {
  return golden_max([&](double x) { return -f(x); }, a, b, tol);
}

// Linear-interpolation quantile of a sorted sample (the numpy default rule).
inline double quantile_sorted(const std::vector<double>& xs, double q) {
  if (xs.empty()) throw std::invalid_argument("quantile of empty sample");
  if (q <= 0.0) return xs.front();
  if (q >= 1.0) return xs.back();
  const double h = q * static_cast<double>(xs.size() - 1);
  const std::size_t i = static_cast<std::size_t>(h);
  if (i + 1 >= xs.size()) return xs.back();
  const double frac = h - static_cast<double>(i);
  return xs[i] + frac * (xs[i + 1] - xs[i]);
}

inline double normal_pdf(double x) {
  return 0.3989422804014327 * std::exp(-0.5 * x * x);
}

inline double normal_cdf(double x) {
  return 0.5 * std::erfc(-x * 0.7071067811865476);
}

}  // namespace turbid::num

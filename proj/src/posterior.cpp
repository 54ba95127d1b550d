#include "turbid/posterior.hpp"

#include <algorithm>
#include <cmath>
#include <stdexcept>

#include "turbid/numerics.hpp"

namespace turbid {

PosteriorCurve::PosteriorCurve(Interval support, Fn eval,
                               std::vector<double> extremum_preimages)
    : support_(support),
      eval_(std::move(eval)),
      preimages_(std::move(extremum_preimages)) {
  if (preimages_.size() < 2)
    throw std::invalid_argument("PosteriorCurve: need at least 2 preimages");
  if (preimages_.front() != support_.lo || preimages_.back() != support_.hi)
    throw std::invalid_argument(
        "PosteriorCurve: preimages must span the support exactly");
  for (std::size_t i = 1; i < preimages_.size(); ++i)
    if (!(preimages_[i] > preimages_[i - 1]))
      throw std::invalid_argument(
          "PosteriorCurve: preimages must be strictly increasing");
  // Each piece must be monotone (jumps at the shared endpoints are fine as
  // long as they continue the piece's direction). Sample and fail loudly.
  for (std::size_t i = 1; i < preimages_.size(); ++i) {
    const double a = preimages_[i - 1], b = preimages_[i];
    int dir = 0;
    double prev = eval_(a);
    for (int k = 1; k <= 16; ++k) {
      const double v = eval_(a + (b - a) * k / 16.0);
      if (v > prev + 1e-6) {
        if (dir < 0)
          throw std::invalid_argument(
              "PosteriorCurve: segment not monotone between preimages");
        dir = 1;
      } else if (v < prev - 1e-6) {
        if (dir > 0)
          throw std::invalid_argument(
              "PosteriorCurve: segment not monotone between preimages");
        dir = -1;
      }
      prev = v;
    }
  }
}

namespace {

// Pin down a discontinuity inside [l, r] by attaching midpoints to whichever
// one-sided value they resemble.
double bisect_jump(const PosteriorCurve::Fn& eval, double l, double r) {
  double vl = eval(l), vr = eval(r);
  while (r - l > 1e-13) {
    const double m = 0.5 * (l + r);
    const double vm = eval(m);
    if (std::abs(vm - vl) <= std::abs(vm - vr)) {
      l = m;
      vl = vm;
    } else {
      r = m;
      vr = vm;
    }
  }
  return 0.5 * (l + r);
}

}  // namespace

std::vector<double> discover_extremum_preimages(
    const PosteriorCurve::Fn& eval, Interval support, int grid_points) {
  if (grid_points < 5)
    throw std::invalid_argument("discover_extremum_preimages: grid too small");
  const double lo = support.lo, hi = support.hi;
  const double h = (hi - lo) / (grid_points - 1);
  std::vector<double> vals(grid_points);
  for (int i = 0; i < grid_points; ++i) vals[i] = eval(lo + i * h);

  std::vector<double> pre{lo};
  auto push_guarded = [&](double x) {
    if (x > pre.back() + 1e-9 && x < hi - 1e-9) pre.push_back(x);
  };
  auto slope_sign = [&](int i) {
    const double d = vals[i + 1] - vals[i];
    if (d > 1e-13) return 1;
    if (d < -1e-13) return -1;
    return 0;
  };

  int last_sign = 0;
  for (int i = 0; i + 1 < grid_points; ++i) {
    const int s = slope_sign(i);
    if (s == 0) continue;
    if (last_sign != 0 && s != last_sign) {
      const bool is_max = last_sign > 0;
      const double a = std::max(lo, lo + (i - 1) * h);
      const double b = std::min(hi, lo + (i + 1) * h);
      const double x = is_max ? num::golden_max(eval, a, b, 1e-10)
                              : num::golden_min(eval, a, b, 1e-10);
      const double probe = 1e-7;
      const double pl = std::max(lo, x - probe);
      const double pr = std::min(hi, x + probe);
      if (std::abs(eval(pr) - eval(pl)) > 1e-3) {
        // Extremum sits on a discontinuity. Locate it exactly, then decide
        // whether the neighboring runs continue in the same direction (the
        // jump itself reverses: emit a bracketing pair so every piece stays
        // monotone) or oppose (a one-sided extremum: a single split point
        // on the extremal side suffices).
        const double jump = bisect_jump(eval, pl, pr);
        const double step = 1e-7;
        const double left_dir = eval(jump - step) - eval(jump - 2.0 * step);
        const double right_dir = eval(jump + 2.0 * step) - eval(jump + step);
        const double eps = 1e-9;
        if (left_dir * right_dir > 0.0) {
          push_guarded(jump - eps);
          push_guarded(jump + eps);
        } else {
          double best = jump;
          double best_v = eval(jump);
          for (double cand : {jump - eps, jump + eps}) {
            const double v = eval(cand);
            if ((is_max && v > best_v) || (!is_max && v < best_v)) {
              best = cand;
              best_v = v;
            }
          }
          push_guarded(best);
        }
      } else {
        push_guarded(x);
      }
    }
    last_sign = s;
  }
  pre.push_back(hi);
  return pre;
}

PosteriorCurve make_posterior(Interval support, PosteriorCurve::Fn eval) {
  auto pre = discover_extremum_preimages(eval, support);
  return PosteriorCurve(support, std::move(eval), std::move(pre));
}

}  // namespace turbid

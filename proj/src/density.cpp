#include "turbid/density.hpp"

#include <algorithm>
#include <cmath>
#include <fstream>
#include <stdexcept>

#include "turbid/csv.hpp"
#include "turbid/numerics.hpp"

namespace turbid {

struct ScoreDensity::Impl {
  Interval support;
  Kind kind = Kind::analytic;
  Fn pdf;
  Fn cdf;       // raw; wrapper clamps
  double mass = 0.0;
  void validate() const;
};

namespace {

constexpr double kMassTol = 1e-6;

}  // namespace

void ScoreDensity::Impl::validate() const {
  const Impl& im = *this;
  if (!(im.support.width() > 0.0))
    throw std::invalid_argument("ScoreDensity: support width must be > 0");
  if (std::abs(im.mass - 1.0) > kMassTol)
    throw std::invalid_argument(
        "ScoreDensity: pdf mass deviates from 1 by more than 1e-6 (got " +
        fmt_g(im.mass) + ")");
  // Spot-check nonnegativity and cdf monotonicity on a coarse grid. Cheap
  // insurance; the analytic modules already guarantee both.
  const int n = 257;
  double prev_cdf = -1e-12;
  for (int i = 0; i < n; ++i) {
    const double s =
        im.support.lo + im.support.width() * i / static_cast<double>(n - 1);
    if (im.pdf(s) < -1e-12)
      throw std::invalid_argument("ScoreDensity: negative pdf value");
    const double c = im.cdf(s);
    if (c < prev_cdf - 1e-9)
      throw std::invalid_argument("ScoreDensity: cdf not monotone");
    prev_cdf = c;
  }
  if (std::abs(im.cdf(im.support.lo)) > kMassTol ||
      std::abs(im.cdf(im.support.hi) - 1.0) > kMassTol)
    throw std::invalid_argument("ScoreDensity: cdf endpoints not 0/1");
}

ScoreDensity ScoreDensity::analytic(Interval support, Fn pdf, Fn cdf,
                                    Kind kind) {
  auto im = std::make_shared<Impl>();
  im->support = support;
  im->kind = kind;
  im->pdf = std::move(pdf);
  im->cdf = std::move(cdf);
  im->mass = num::quad(im->pdf, support.lo, support.hi, 1e-10);
  im->validate();
  return ScoreDensity(std::move(im));
}

ScoreDensity ScoreDensity::from_pdf(Interval support, Fn pdf, Kind kind) {
  if (!(support.width() > 0.0))
    throw std::invalid_argument("ScoreDensity: support width must be > 0");
  auto panels =
      std::make_shared<std::vector<num::Panel>>(num::quad_panels(
          pdf, support.lo, support.hi, 1e-11));
  auto prefix = std::make_shared<std::vector<double>>();
  prefix->reserve(panels->size() + 1);
  prefix->push_back(0.0);
  for (const auto& p : *panels) prefix->push_back(prefix->back() + p.integral);
  const double mass = prefix->back();

  auto im = std::make_shared<Impl>();
  im->support = support;
  im->kind = kind;
  im->pdf = pdf;
  im->mass = mass;
  // Normalize the cumulative table by the measured mass so the cdf ends at 1
  // exactly even when the quadrature leaves ~1e-11 slack.
  im->cdf = [panels, prefix, pdf, mass, support](double s) {
    if (s <= support.lo) return 0.0;
    if (s >= support.hi) return 1.0;
    // first panel with b >= s
    auto it = std::lower_bound(
        panels->begin(), panels->end(), s,
        [](const num::Panel& p, double v) { return p.b < v; });
    if (it == panels->end()) return 1.0;
    const auto idx = static_cast<std::size_t>(it - panels->begin());
    const double partial =
        (s > it->a) ? num::gk15(pdf, it->a, s).value : 0.0;
    return ((*prefix)[idx] + partial) / mass;
  };
  im->validate();
  return ScoreDensity(std::move(im));
}

ScoreDensity ScoreDensity::mixture(
    const std::vector<std::pair<double, ScoreDensity>>& parts) {
  if (parts.empty())
    throw std::invalid_argument("ScoreDensity::mixture: no components");
  double wsum = 0.0;
  Interval hull = parts.front().second.support();
  for (const auto& [w, d] : parts) {
    if (w < 0.0)
      throw std::invalid_argument("ScoreDensity::mixture: negative weight");
    wsum += w;
    hull.lo = std::min(hull.lo, d.support().lo);
    hull.hi = std::max(hull.hi, d.support().hi);
  }
  if (std::abs(wsum - 1.0) > 1e-9)
    throw std::invalid_argument("ScoreDensity::mixture: weights must sum to 1");
  auto comps = std::make_shared<
      std::vector<std::pair<double, ScoreDensity>>>(parts);
  Fn pdf = [comps](double s) {
    double acc = 0.0;
    for (const auto& [w, d] : *comps) acc += w * d.pdf(s);
    return acc;
  };
  Fn cdf = [comps](double s) {
    double acc = 0.0;
    for (const auto& [w, d] : *comps) acc += w * d.cdf(s);
    return acc;
  };
  return analytic(hull, std::move(pdf), std::move(cdf), Kind::mixture);
}

double ScoreDensity::pdf(double s) const {
  if (!impl_->support.contains(s)) return 0.0;
  return impl_->pdf(s);
}

double ScoreDensity::cdf(double s) const {
  if (s <= impl_->support.lo) return 0.0;
  if (s >= impl_->support.hi) return 1.0;
  return std::clamp(impl_->cdf(s), 0.0, 1.0);
}

double ScoreDensity::quantile(double q) const {
  if (q < 0.0 || q > 1.0)
    throw std::invalid_argument("quantile: q outside [0, 1]");
  if (q == 0.0) return impl_->support.lo;
  if (q == 1.0) return impl_->support.hi;
  return num::brentq([this, q](double s) { return cdf(s) - q; },
                     impl_->support.lo, impl_->support.hi, 1e-12);
}

const Interval& ScoreDensity::support() const { return impl_->support; }
ScoreDensity::Kind ScoreDensity::kind() const { return impl_->kind; }
double ScoreDensity::mass() const { return impl_->mass; }

void density_to_csv(const std::string& path, const ScoreDensity& d,
                    int points) {
  std::ofstream out(path);
  if (!out) throw std::runtime_error("cannot open " + path);
  out << "s,pdf,cdf\n";
  const Interval sup = d.support();
  for (int i = 0; i < points; ++i) {
    const double s =
        sup.lo + sup.width() * i / static_cast<double>(points - 1);
    out << fmt_g(s) << ',' << fmt_g(d.pdf(s)) << ',' << fmt_g(d.cdf(s))
        << '\n';
  }
}

}  // namespace turbid

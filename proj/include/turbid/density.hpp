#pragma once

// Score densities as value types: a support interval plus pdf/cdf callables.
// Copies are cheap (shared immutable state), construction validates mass.

#include <functional>
#include <memory>
#include <string>
#include <utility>
#include <vector>

namespace turbid {

struct Interval {
  double lo = 0.0;
  double hi = 0.0;
  double width() const { return hi - lo; }
  bool contains(double s) const { return s >= lo && s <= hi; }
};

class ScoreDensity {
 public:
  enum class Kind { analytic, quadrature, kde, mixture };
  using Fn = std::function<double(double)>;

  // Both pdf and cdf supplied in closed form. The cdf must hit 0/1 at the
  // support endpoints within 1e-6.
  static ScoreDensity analytic(Interval support, Fn pdf, Fn cdf,
                               Kind kind = Kind::analytic);

  // cdf built by cumulative adaptive quadrature over the pdf (memoized panel
  // table; partial panels finished with one Gauss-Kronrod pass).
  static ScoreDensity from_pdf(Interval support, Fn pdf,
                               Kind kind = Kind::quadrature);

  // Convex combination of components; support is the hull.
  static ScoreDensity mixture(
      const std::vector<std::pair<double, ScoreDensity>>& parts);

  double pdf(double s) const;  // 0 outside support
  double cdf(double s) const;  // clamped to [0, 1]
  double quantile(double q) const;

  const Interval& support() const;
  Kind kind() const;
  double mass() const;  // integral of the raw pdf over support (approx 1)

 private:
  struct Impl;
  explicit ScoreDensity(std::shared_ptr<const Impl> impl)
      : impl_(std::move(impl)) {}
  std::shared_ptr<const Impl> impl_;
};

// 1001-row "s,pdf,cdf" table over the support.
void density_to_csv(const std::string& path, const ScoreDensity& d,
                    int points = 1001);

}  // namespace turbid

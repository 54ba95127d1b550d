#pragma once

// Posterior curves over a score interval, carrying the preimages of their
// extrema. The preimage list is what turns a non-monotone curve into a
// telescoping sum over monotone segments when building exact ROC curves.

#include <functional>
#include <vector>

#include "turbid/density.hpp"

namespace turbid {

class PosteriorCurve {
 public:
  using Fn = std::function<double(double)>;

  // preimages must be strictly increasing and start/end exactly at the
  // support endpoints; each consecutive pair brackets one monotone piece.
  PosteriorCurve(Interval support, Fn eval,
                 std::vector<double> extremum_preimages);

  double operator()(double s) const { return eval_(s); }
  const Interval& support() const { return support_; }
  const std::vector<double>& extremum_preimages() const { return preimages_; }
  bool monotone() const { return preimages_.size() == 2; }
  std::size_t segment_count() const { return preimages_.size() - 1; }

 private:
  Interval support_;
  Fn eval_;
  std::vector<double> preimages_;
};

// Grid scan (central differences) plus golden-section refinement of interior
// extrema. Jump discontinuities come out as a single preimage at the jump.
std::vector<double> discover_extremum_preimages(
    const PosteriorCurve::Fn& eval, Interval support, int grid_points = 4097);

// Convenience: discovery + construction in one step.
PosteriorCurve make_posterior(Interval support, PosteriorCurve::Fn eval);

}  // namespace turbid

#pragma once

// ROC construction, exact and empirical. The multibranched variant handles
// non-monotone decision statistics: each point is a telescoping sum of class
// cdfs over the statistic's monotone segments, so curves may bend back,
// cross the diagonal, or split into branches.

#include <string>
#include <vector>

#include "turbid/density.hpp"
#include "turbid/posterior.hpp"

namespace turbid {

struct RocPoint {
  double fpr = 0.0;
  double tpr = 0.0;
  double theta = 0.0;  // decision threshold that realizes this point
  int branch = 0;      // contiguous run of structurally identical points
};

class RocCurve {
 public:
  // Points must arrive theta-descending and include (0,0) and (1,1).
  explicit RocCurve(std::vector<RocPoint> points);

  const std::vector<RocPoint>& points() const { return points_; }
  int branch_count() const { return branch_count_; }
  // Signed area via the trapezoid rule over consecutive points; backtracking
  // segments subtract, so improper curves can score below 1/2.
  double auc() const { return auc_; }

  void to_csv(const std::string& path) const;
  void to_svg(const std::string& path) const;

 private:
  std::vector<RocPoint> points_;
  int branch_count_ = 1;
  double auc_ = 0.0;
};

// Proper ROC for a monotone score statistic: sweep the threshold from high
// to low; (fpr, tpr) = (1 - F0(t), 1 - F1(t)).
RocCurve roc_monotone_sweep(const ScoreDensity& d0, const ScoreDensity& d1,
                            int points = 1001);

// Exact ROC for an arbitrary piecewise-monotone statistic. Thresholds are in
// statistic space; pass an empty grid to get a 512-point uniform grid merged
// with the statistic's extremum values.
RocCurve roc_multibranched(const PosteriorCurve& stat, const ScoreDensity& d0,
                           const ScoreDensity& d1,
                           std::vector<double> thetas = {});

std::vector<double> default_theta_grid(const PosteriorCurve& stat,
                                       int points = 512);

// Finite-sample ROC over scored samples: thresholds at each distinct value,
// ties grouped. Throws if either class is absent.
RocCurve empirical_roc(const std::vector<double>& values,
                       const std::vector<int>& labels, int target_label = 1);

struct OperatingPoint {
  double fpr = 0.0;
  double tpr = 0.0;
  double theta = 0.0;
  double youden = 0.0;  // tpr - fpr
};

// Maximizer of tpr - fpr; ties resolved toward lower fpr, then higher theta.
OperatingPoint youden_point(const RocCurve& curve);

// Accuracy of "score >= theta predicts 1" under the given mix.
double accuracy_at(double theta, const ScoreDensity& d0,
                   const ScoreDensity& d1, double prior1);

// tpr of the polyline at a given fpr (points first sorted by fpr).
double tpr_at_fpr(const RocCurve& curve, double fpr);

// Sup-norm distance between two curves viewed as fpr -> tpr polylines.
double sup_distance(const RocCurve& a, const RocCurve& b, int grid = 512);

}  // namespace turbid

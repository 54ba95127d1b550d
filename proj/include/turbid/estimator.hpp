#pragma once

// Data-driven reconstruction of the analytic machinery: Gaussian-kernel
// density estimates of class conditionals, their crossing points, and
// repaired decision rules fitted from labeled score samples.

#include <cstddef>
#include <string>
#include <utility>
#include <vector>

#include "turbid/campaign.hpp"
#include "turbid/density.hpp"

namespace turbid {

// Uniformly weighted standard-normal-kernel estimate.
struct KdeEstimate {
  std::vector<double> centers;
  double bandwidth = 0.0;
};

// 0.9 * min(stddev, IQR/1.34) * n^(-1/5). Throws when n < 2 or the spread
// is zero; a silently floored bandwidth would mask degenerate data.
double silverman_bandwidth(const std::vector<double>& samples);

// Kernel mixture as an evaluable density. Support extends 8 bandwidths past
// the extreme samples. Below 5000 centers the sum is exact; above, centers
// are pooled into 4096 bins and kernels truncated at 8 bandwidths, bounding
// the pdf error by (bin/2) * max|K'|/B^2.
ScoreDensity kde_density(const std::vector<double>& samples, double bandwidth);

// Sorted simple roots of d0.pdf - d1.pdf on the interval; tangencies are
// not reported. The default interval spans both densities' middle 99.8%.
std::vector<double> find_crossovers(const ScoreDensity& d0,
                                    const ScoreDensity& d1, Interval search);
std::vector<double> find_crossovers(const ScoreDensity& d0,
                                    const ScoreDensity& d1);

// Silverman-bandwidth KDE per class, then the repaired rule over the pair.
MitigationArtifact empirical_repair(const std::vector<double>& scores0,
                                    const std::vector<double>& scores1,
                                    double prior_mal, double threshold = 0.0,
                                    std::string scenario = "empirical");

// Per-sample pre-activation rows for a k-way scorer.
struct MulticlassScores {
  std::vector<std::vector<double>> per_class_preactivations;  // n rows of k
  std::size_t target_class = 0;
};

// Margin of the target class against its best rival, halved:
// s = (row[target] - max of the others) / 2.
std::vector<double> unfold_scores(const MulticlassScores& m);

// CSV with header `score,label`; returns (class-0 scores, class-1 scores).
std::pair<std::vector<double>, std::vector<double>> load_class_scores_csv(
    const std::string& path);

}  // namespace turbid

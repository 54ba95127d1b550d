#include "turbid/estimator.hpp"

#include <algorithm>
#include <cmath>
#include <cstddef>
#include <fstream>
#include <limits>
#include <memory>
#include <stdexcept>

#include "turbid/numerics.hpp"

namespace turbid {

namespace {

constexpr double kKernelReach = 8.0;  // kernels treated as zero past 8 bandwidths
constexpr std::size_t kNaiveLimit = 5000;
constexpr std::size_t kPoolBins = 4096;

}  // namespace

double silverman_bandwidth(const std::vector<double>& samples) {
  const std::size_t n = samples.size();
  if (n < 2) throw std::invalid_argument("silverman_bandwidth: need at least 2 samples");
  double mean = 0.0;
  for (double x : samples) mean += x;
  mean /= static_cast<double>(n);
  double ss = 0.0;
  for (double x : samples) ss += (x - mean) * (x - mean);
  const double sd = std::sqrt(ss / static_cast<double>(n - 1));
  std::vector<double> sorted = samples;
  std::sort(sorted.begin(), sorted.end());
  const double iqr =
      num::quantile_sorted(sorted, 0.75) - num::quantile_sorted(sorted, 0.25);
  const double spread = std::min(sd, iqr / 1.34);
  if (!(spread > 0.0))
    throw std::invalid_argument("silverman_bandwidth: zero-spread sample");
  return 0.9 * spread * std::pow(static_cast<double>(n), -0.2);
}

ScoreDensity kde_density(const std::vector<double>& samples, double bandwidth) {
  if (samples.empty()) throw std::invalid_argument("kde_density: empty sample");
  if (!(bandwidth > 0.0) || !std::isfinite(bandwidth))
    throw std::invalid_argument("kde_density: bandwidth must be positive");
  const auto [mn_it, mx_it] = std::minmax_element(samples.begin(), samples.end());
  const double lo = *mn_it - kKernelReach * bandwidth;
  const double hi = *mx_it + kKernelReach * bandwidth;
  const double inv_n = 1.0 / static_cast<double>(samples.size());
  const double b = bandwidth;
  const double range = *mx_it - *mn_it;

  if (samples.size() < kNaiveLimit || !(range > 0.0)) {
    auto centers = std::make_shared<std::vector<double>>(samples);
    auto pdf = [centers, b, inv_n](double s) {
      double acc = 0.0;
      for (double c : *centers) acc += num::normal_pdf((s - c) / b);
      return acc * inv_n / b;
    };
    auto cdf = [centers, b, inv_n](double s) {
      double acc = 0.0;
      for (double c : *centers) acc += num::normal_cdf((s - c) / b);
      return acc * inv_n;
    };
    return ScoreDensity::analytic({lo, hi}, pdf, cdf, ScoreDensity::Kind::kde);
  }

  // Pool centers into equal-width bins over the sample range; each bin
  // contributes one kernel at its midpoint, weighted by its count.
  const double smin = *mn_it;
  const double w = range / static_cast<double>(kPoolBins);
  auto counts = std::make_shared<std::vector<double>>(kPoolBins, 0.0);
  for (double x : samples) {
    auto idx = static_cast<std::size_t>((x - smin) / w);
    if (idx >= kPoolBins) idx = kPoolBins - 1;
    (*counts)[idx] += 1.0;
  }
  const double first_mid = smin + 0.5 * w;
  const double reach = kKernelReach * b;
  auto pdf = [counts, b, inv_n, first_mid, w, reach](double s) {
    // Only bins within the kernel reach contribute.
    const double fl = (s - reach - first_mid) / w;
    const double fh = (s + reach - first_mid) / w;
    std::size_t i0 = fl <= 0.0 ? 0 : static_cast<std::size_t>(fl);
    if (i0 >= kPoolBins) return 0.0;
    std::size_t i1 = fh < 0.0 ? 0 : std::min(kPoolBins - 1, static_cast<std::size_t>(fh) + 1);
    double acc = 0.0;
    for (std::size_t i = i0; i <= i1; ++i) {
      const double c = first_mid + static_cast<double>(i) * w;
      if ((*counts)[i] != 0.0) acc += (*counts)[i] * num::normal_pdf((s - c) / b);
    }
    return acc * inv_n / b;
  };
  auto cdf = [counts, b, inv_n, first_mid, w, reach](double s) {
    double acc = 0.0;
    for (std::size_t i = 0; i < kPoolBins; ++i) {
      if ((*counts)[i] == 0.0) continue;
      const double d = s - (first_mid + static_cast<double>(i) * w);
      if (d >= reach) {
        acc += (*counts)[i];
      } else if (d > -reach) {
        acc += (*counts)[i] * num::normal_cdf(d / b);
      }
    }
    return acc * inv_n;
  };
  return ScoreDensity::analytic({lo, hi}, pdf, cdf, ScoreDensity::Kind::kde);
}

std::vector<double> find_crossovers(const ScoreDensity& d0,
                                    const ScoreDensity& d1, Interval search) {
  if (!(search.hi > search.lo))
    throw std::invalid_argument("find_crossovers: empty search interval");
  auto g = [&](double s) { return d0.pdf(s) - d1.pdf(s); };
  constexpr std::size_t kScan = 100000;
  const double step = search.width() / static_cast<double>(kScan);
  std::vector<double> roots;
  double prev_s = search.lo;
  double prev_g = g(prev_s);
  for (std::size_t i = 1; i <= kScan; ++i) {
    const double s = i == kScan ? search.hi : search.lo + static_cast<double>(i) * step;
    const double gs = g(s);
    if ((prev_g < 0.0 && gs > 0.0) || (prev_g > 0.0 && gs < 0.0)) {
      roots.push_back(num::brentq(g, prev_s, s, 1e-12));
    } else if (gs == 0.0 && prev_g != 0.0 && i < kScan) {
      // Grid point landed on the root itself; look past it for the sign flip.
      const double nxt = g(search.lo + static_cast<double>(i + 1) * step);
      if ((prev_g < 0.0 && nxt > 0.0) || (prev_g > 0.0 && nxt < 0.0))
        roots.push_back(s);
    }
    prev_s = s;
    prev_g = gs;
  }
  return roots;
}

std::vector<double> find_crossovers(const ScoreDensity& d0,
                                    const ScoreDensity& d1) {
  const double lo = std::min(d0.quantile(0.001), d1.quantile(0.001));
  const double hi = std::max(d0.quantile(0.999), d1.quantile(0.999));
  return find_crossovers(d0, d1, {lo, hi});
}

MitigationArtifact empirical_repair(const std::vector<double>& scores0,
                                    const std::vector<double>& scores1,
                                    double prior_mal, double threshold,
                                    std::string scenario) {
  const ScoreDensity k0 = kde_density(scores0, silverman_bandwidth(scores0));
  const ScoreDensity k1 = kde_density(scores1, silverman_bandwidth(scores1));
  // Repair only where there is data; past the extreme samples the posterior
  // is pure kernel-tail extrapolation.
  Interval envelope{
      std::min(*std::min_element(scores0.begin(), scores0.end()),
               *std::min_element(scores1.begin(), scores1.end())),
      std::max(*std::max_element(scores0.begin(), scores0.end()),
               *std::max_element(scores1.begin(), scores1.end()))};
  return repair_posterior(k0, k1, prior_mal, threshold, std::move(scenario),
                          envelope);
}

std::vector<double> unfold_scores(const MulticlassScores& m) {
  std::vector<double> out;
  out.reserve(m.per_class_preactivations.size());
  std::size_t k = 0;
  for (const auto& row : m.per_class_preactivations) {
    if (k == 0) {
      k = row.size();
      if (k < 2) throw std::invalid_argument("unfold_scores: need at least 2 classes");
      if (m.target_class >= k)
        throw std::invalid_argument("unfold_scores: target class out of range");
    } else if (row.size() != k) {
      throw std::invalid_argument("unfold_scores: ragged rows");
    }
    double rival = -std::numeric_limits<double>::infinity();
    for (std::size_t j = 0; j < k; ++j) {
      if (j != m.target_class) rival = std::max(rival, row[j]);
    }
    out.push_back(0.5 * (row[m.target_class] - rival));
  }
  return out;
}

std::pair<std::vector<double>, std::vector<double>> load_class_scores_csv(
    const std::string& path) {
  std::ifstream in(path);
  if (!in) throw std::runtime_error("load_class_scores_csv: cannot open " + path);
  std::string line;
  if (!std::getline(in, line))
    throw std::runtime_error("load_class_scores_csv: empty file " + path);
  if (line != "score,label")
    throw std::runtime_error("load_class_scores_csv: bad header in " + path);
  std::pair<std::vector<double>, std::vector<double>> out;
  std::size_t lineno = 1;
  while (std::getline(in, line)) {
    ++lineno;
    if (line.empty()) continue;
    const auto comma = line.find(',');
    std::size_t used = 0;
    double score = 0.0;
    int label = -1;
    try {
      score = std::stod(line.substr(0, comma), &used);
      if (comma != std::string::npos) label = std::stoi(line.substr(comma + 1));
    } catch (const std::exception&) {
      used = 0;
    }
    if (comma == std::string::npos || used != comma || (label != 0 && label != 1))
      throw std::runtime_error("load_class_scores_csv: bad record at line " +
                               std::to_string(lineno) + " of " + path);
    (label == 0 ? out.first : out.second).push_back(score);
  }
  return out;
}

}  // namespace turbid

#pragma once

// Reference scoring model: raw scores uniform on [lo, hi], labels flipped by
// additive logistic noise. All class-conditional cdfs here are closed form
// (integrals of the logistic cdf are softplus differences), so samplers can
// invert them exactly instead of leaning on quadrature.

#include <cstdint>
#include <string>
#include <vector>

#include "turbid/density.hpp"
#include "turbid/posterior.hpp"
#include "turbid/rng.hpp"

namespace turbid {

struct NoiseSpec {
  double mu = 0.0;     // decision offset: label-1 probability is 1/2 at mu
  double scale = 1.0;  // logistic scale of the label noise
};

struct ReferenceDgp {
  NoiseSpec noise{};
  double lo = -10.0;
  double hi = 10.0;
  double prior_mal = 0.5;  // class-1 weight used when mixing conditionals
  Interval support() const { return {lo, hi}; }
};

// log(1 + e^x) without overflow.
double softplus(double x);

// P(emitted label = 1 | raw score s).
double logistic_cdf(double s, const NoiseSpec& noise);

// Closed-form integral of logistic_cdf over [a, b].
double logistic_cdf_integral(const NoiseSpec& noise, double a, double b);

// Class-conditional cdf F_label(s); closed form.
double conditional_cdf(const ReferenceDgp& dgp, int label, double s);

// Fraction of emitted labels equal to 1 (0.5 for the symmetric default).
double emitted_prior(const ReferenceDgp& dgp);

ScoreDensity regular_conditional(const ReferenceDgp& dgp, int label);

// Model posterior P(1 | s); monotone by construction.
PosteriorCurve regular_posterior(const ReferenceDgp& dgp);

// Score densities conditioned on decision clarity at the given threshold:
// `clear` collects correctly decided scores, `turbid` the misdecided ones.
struct ClarityPair {
  ScoreDensity clear;
  ScoreDensity turbid;
  double p_clear;   // marginal probability of a clear sample
  double p_turbid;
};
ClarityPair turbidity_conditionals(const ReferenceDgp& dgp,
                                   double threshold = 0.0);

// P(turbid | s) under the clarity mixture with the given prior.
PosteriorCurve turbidity_posterior(const ReferenceDgp& dgp,
                                   double prior_turbid = 0.5,
                                   double threshold = 0.0);

enum class Clarity : std::uint8_t { clear = 0, turbid = 1 };

struct LabeledScoreSet {
  std::vector<double> scores;
  std::vector<int> labels;            // 0/1
  std::vector<Clarity> clarity;       // same length as scores (may be empty)
  std::uint64_t rng_seed = 0;

  std::size_t size() const { return scores.size(); }
  std::size_t count_label(int label) const;
  std::size_t count_clear() const;
  std::size_t count_turbid() const;

  void to_csv(const std::string& path) const;
  static LabeledScoreSet from_csv(const std::string& path);
};

// n iid draws; clarity recorded against `threshold` (score >= threshold
// predicts label 1).
LabeledScoreSet sample_dgp(const ReferenceDgp& dgp, std::size_t n,
                           std::uint64_t seed, double threshold = 0.0);

// Draw from the class conditional restricted to [range.lo, range.hi], by
// closed-form cdf inversion.
double sample_class_conditional(const ReferenceDgp& dgp, int label,
                                Interval range, Philox& rng);

}  // namespace turbid

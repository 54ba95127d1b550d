#include "turbid/dgp.hpp"

#include <algorithm>
#include <cmath>
#include <fstream>
#include <sstream>
#include <stdexcept>

#include "turbid/csv.hpp"

namespace turbid {

double softplus(double x) {
  if (x > 0.0) return x + std::log1p(std::exp(-x));
  return std::log1p(std::exp(x));
}

namespace {

// inverse of softplus on (0, inf)
double inv_softplus(double y) {
  if (y > 30.0) return y;  // e^-y below double resolution
  return std::log(std::expm1(y));
}

double sigmoid(double z) {
  if (z >= 0.0) return 1.0 / (1.0 + std::exp(-z));
  const double e = std::exp(z);
  return e / (1.0 + e);
}

}  // namespace

double logistic_cdf(double s, const NoiseSpec& noise) {
  return sigmoid((s - noise.mu) / noise.scale);
}

double logistic_cdf_integral(const NoiseSpec& noise, double a, double b) {
  const double c = noise.scale;
  return c * (softplus((b - noise.mu) / c) - softplus((a - noise.mu) / c));
}

double emitted_prior(const ReferenceDgp& dgp) {
  return logistic_cdf_integral(dgp.noise, dgp.lo, dgp.hi) /
         (dgp.hi - dgp.lo);
}

double conditional_cdf(const ReferenceDgp& dgp, int label, double s) {
  if (label != 0 && label != 1)
    throw std::invalid_argument("conditional_cdf: label must be 0 or 1");
  s = std::clamp(s, dgp.lo, dgp.hi);
  const double z1 = logistic_cdf_integral(dgp.noise, dgp.lo, dgp.hi);
  const double part1 = logistic_cdf_integral(dgp.noise, dgp.lo, s);
  if (label == 1) return std::clamp(part1 / z1, 0.0, 1.0);
  const double z0 = (dgp.hi - dgp.lo) - z1;
  return std::clamp(((s - dgp.lo) - part1) / z0, 0.0, 1.0);
}

ScoreDensity regular_conditional(const ReferenceDgp& dgp, int label) {
  if (label != 0 && label != 1)
    throw std::invalid_argument("regular_conditional: label must be 0 or 1");
  const double z1 = logistic_cdf_integral(dgp.noise, dgp.lo, dgp.hi);
  const double z0 = (dgp.hi - dgp.lo) - z1;
  const NoiseSpec noise = dgp.noise;
  ScoreDensity::Fn pdf, cdf;
  if (label == 1) {
    pdf = [noise, z1](double s) { return logistic_cdf(s, noise) / z1; };
  } else {
    pdf = [noise, z0](double s) {
      return (1.0 - logistic_cdf(s, noise)) / z0;
    };
  }
  ReferenceDgp copy = dgp;
  cdf = [copy, label](double s) { return conditional_cdf(copy, label, s); };
  return ScoreDensity::analytic(dgp.support(), std::move(pdf), std::move(cdf));
}

PosteriorCurve regular_posterior(const ReferenceDgp& dgp) {
  const NoiseSpec noise = dgp.noise;
  return PosteriorCurve(
      dgp.support(), [noise](double s) { return logistic_cdf(s, noise); },
      {dgp.lo, dgp.hi});
}

ClarityPair turbidity_conditionals(const ReferenceDgp& dgp, double threshold) {
  if (!(threshold > dgp.lo && threshold < dgp.hi))
    throw std::invalid_argument(
        "turbidity_conditionals: threshold must lie inside the support");
  const double pi1 = dgp.prior_mal;
  const double pi0 = 1.0 - pi1;
  const ScoreDensity d0 = regular_conditional(dgp, 0);
  const ScoreDensity d1 = regular_conditional(dgp, 1);
  const double f0_t = d0.cdf(threshold);
  const double f1_t = d1.cdf(threshold);
  // clear: correct decisions (label 0 below threshold, label 1 at or above)
  const double p_clear = pi0 * f0_t + pi1 * (1.0 - f1_t);
  const double p_turbid = 1.0 - p_clear;
  if (p_clear <= 0.0 || p_turbid <= 0.0)
    throw std::invalid_argument(
        "turbidity_conditionals: degenerate clarity split");

  auto clear_pdf = [=](double s) {
    const double raw =
        (s < threshold) ? pi0 * d0.pdf(s) : pi1 * d1.pdf(s);
    return raw / p_clear;
  };
  auto clear_cdf = [=](double s) {
    if (s < threshold) return pi0 * d0.cdf(s) / p_clear;
    return (pi0 * f0_t + pi1 * (d1.cdf(s) - f1_t)) / p_clear;
  };
  auto turbid_pdf = [=](double s) {
    const double raw =
        (s < threshold) ? pi1 * d1.pdf(s) : pi0 * d0.pdf(s);
    return raw / p_turbid;
  };
  auto turbid_cdf = [=](double s) {
    if (s < threshold) return pi1 * d1.cdf(s) / p_turbid;
    return (pi1 * f1_t + pi0 * (d0.cdf(s) - f0_t)) / p_turbid;
  };
  ScoreDensity clear = ScoreDensity::analytic(
      dgp.support(), clear_pdf, clear_cdf, ScoreDensity::Kind::mixture);
  ScoreDensity turbid = ScoreDensity::analytic(
      dgp.support(), turbid_pdf, turbid_cdf, ScoreDensity::Kind::mixture);
  return {std::move(clear), std::move(turbid), p_clear, p_turbid};
}

PosteriorCurve turbidity_posterior(const ReferenceDgp& dgp,
                                   double prior_turbid, double threshold) {
  if (!(prior_turbid > 0.0 && prior_turbid < 1.0))
    throw std::invalid_argument(
        "turbidity_posterior: prior must be in (0, 1)");
  ClarityPair pair = turbidity_conditionals(dgp, threshold);
  ScoreDensity clear = pair.clear;
  ScoreDensity turbid = pair.turbid;
  auto eval = [clear, turbid, prior_turbid](double s) {
    const double num = prior_turbid * turbid.pdf(s);
    const double den = num + (1.0 - prior_turbid) * clear.pdf(s);
    return num / den;
  };
  return make_posterior(dgp.support(), eval);
}

std::size_t LabeledScoreSet::count_label(int label) const {
  return static_cast<std::size_t>(
      std::count(labels.begin(), labels.end(), label));
}

std::size_t LabeledScoreSet::count_clear() const {
  return static_cast<std::size_t>(
      std::count(clarity.begin(), clarity.end(), Clarity::clear));
}

std::size_t LabeledScoreSet::count_turbid() const {
  return static_cast<std::size_t>(
      std::count(clarity.begin(), clarity.end(), Clarity::turbid));
}

void LabeledScoreSet::to_csv(const std::string& path) const {
  std::ofstream out(path);
  if (!out) throw std::runtime_error("cannot open " + path);
  out << "score,label,clarity\n";
  for (std::size_t i = 0; i < scores.size(); ++i) {
    out << fmt_g(scores[i]) << ',' << labels[i] << ','
        << (clarity.empty()
                ? "-"
                : (clarity[i] == Clarity::clear ? "e" : "d"))
        << '\n';
  }
}

LabeledScoreSet LabeledScoreSet::from_csv(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw std::runtime_error("cannot open " + path);
  LabeledScoreSet set;
  std::string line;
  std::size_t lineno = 0;
  while (std::getline(in, line)) {
    ++lineno;
    if (lineno == 1 || line.empty()) continue;  // header
    std::istringstream row(line);
    std::string score_s, label_s, clar_s;
    if (!std::getline(row, score_s, ',') ||
        !std::getline(row, label_s, ',') || !std::getline(row, clar_s))
      throw std::runtime_error("malformed score CSV at line " +
                               std::to_string(lineno));
    set.scores.push_back(std::stod(score_s));
    const int label = std::stoi(label_s);
    if (label != 0 && label != 1)
      throw std::runtime_error("bad label at line " + std::to_string(lineno));
    set.labels.push_back(label);
    if (clar_s == "e")
      set.clarity.push_back(Clarity::clear);
    else if (clar_s == "d")
      set.clarity.push_back(Clarity::turbid);
    else if (clar_s != "-")
      throw std::runtime_error("bad clarity flag at line " +
                               std::to_string(lineno));
  }
  if (!set.clarity.empty() && set.clarity.size() != set.scores.size())
    throw std::runtime_error("inconsistent clarity column in " + path);
  return set;
}

LabeledScoreSet sample_dgp(const ReferenceDgp& dgp, std::size_t n,
                           std::uint64_t seed, double threshold) {
  LabeledScoreSet set;
  set.rng_seed = seed;
  set.scores.reserve(n);
  set.labels.reserve(n);
  set.clarity.reserve(n);
  Philox rng(seed);
  for (std::size_t i = 0; i < n; ++i) {
    const double s = rng.uniform(dgp.lo, dgp.hi);
    const int label = rng.uniform01() < logistic_cdf(s, dgp.noise) ? 1 : 0;
    const int predicted = s >= threshold ? 1 : 0;
    set.scores.push_back(s);
    set.labels.push_back(label);
    set.clarity.push_back(predicted == label ? Clarity::clear
                                             : Clarity::turbid);
  }
  return set;
}

double sample_class_conditional(const ReferenceDgp& dgp, int label,
                                Interval range, Philox& rng) {
  if (label != 0 && label != 1)
    throw std::invalid_argument("sample_class_conditional: bad label");
  if (!(range.lo >= dgp.lo && range.hi <= dgp.hi && range.width() > 0.0))
    throw std::invalid_argument(
        "sample_class_conditional: range outside support");
  // Class 0 is the mirror image of class 1: 1 - sigmoid((s-mu)/c) equals
  // sigmoid((t - (-mu))/c) at t = -s, so sample the mirrored class-1 law.
  NoiseSpec noise = dgp.noise;
  double a = range.lo, b = range.hi;
  const bool mirrored = (label == 0);
  if (mirrored) {
    noise.mu = -noise.mu;
    const double na = -b, nb = -a;
    a = na;
    b = nb;
  }
  const double c = noise.scale;
  const double mass = logistic_cdf_integral(noise, a, b);
  const double u = rng.open01();
  const double y = softplus((a - noise.mu) / c) + u * mass / c;
  const double s = noise.mu + c * inv_softplus(y);
  const double clamped = std::clamp(s, a, b);
  return mirrored ? -clamped : clamped;
}

}  // namespace turbid

#include "turbid/campaign.hpp"

#include <algorithm>
#include <cmath>
#include <memory>
#include <stdexcept>

#include <json.hpp>

#include "turbid/numerics.hpp"

namespace turbid {

using nlohmann::json;

const char* scenario_kind_name(ScenarioKind k) {
  switch (k) {
    case ScenarioKind::regular: return "regular";
    case ScenarioKind::symmetric_toxic: return "symmetric-toxic";
    case ScenarioKind::asymmetric_toxic: return "asymmetric-toxic";
    case ScenarioKind::covariate_shift: return "covariate-shift";
    case ScenarioKind::high_confidence: return "high-confidence";
  }
  throw std::logic_error("unknown scenario kind");
}

ScenarioKind scenario_kind_from_name(const std::string& s) {
  if (s == "regular") return ScenarioKind::regular;
  if (s == "symmetric-toxic") return ScenarioKind::symmetric_toxic;
  if (s == "asymmetric-toxic") return ScenarioKind::asymmetric_toxic;
  if (s == "covariate-shift") return ScenarioKind::covariate_shift;
  if (s == "high-confidence") return ScenarioKind::high_confidence;
  throw std::invalid_argument("unknown scenario kind: " + s);
}

namespace {

void check_frac(double f, const char* what) {
  if (!(f >= 0.0 && f <= 1.0))
    throw std::invalid_argument(std::string(what) + " outside [0, 1]");
}

}  // namespace

CampaignScenario CampaignScenario::regular(const ReferenceDgp& dgp,
                                           double threshold) {
  CampaignScenario sc;
  sc.kind = ScenarioKind::regular;
  sc.threshold = threshold;
  sc.prior_mal = dgp.prior_mal;
  // Natural fractions: exactly the mass each class already places on its
  // correct side, so the mixture reassembles the untouched conditionals.
  sc.clear_frac0 = conditional_cdf(dgp, 0, threshold);
  sc.clear_frac1 = 1.0 - conditional_cdf(dgp, 1, threshold);
  sc.name = "regular";
  return sc;
}

CampaignScenario CampaignScenario::symmetric(double prior_mal,
                                             double threshold) {
  CampaignScenario sc;
  sc.kind = ScenarioKind::symmetric_toxic;
  sc.clear_frac0 = 0.5;
  sc.clear_frac1 = 0.5;
  sc.prior_mal = prior_mal;
  sc.threshold = threshold;
  sc.name = "symmetric-toxic";
  return sc;
}

CampaignScenario CampaignScenario::asymmetric(const ReferenceDgp& dgp,
                                              double clear_frac1,
                                              double threshold) {
  CampaignScenario sc;
  sc.kind = ScenarioKind::asymmetric_toxic;
  sc.clear_frac0 = conditional_cdf(dgp, 0, threshold);
  sc.clear_frac1 = clear_frac1;
  sc.prior_mal = dgp.prior_mal;
  sc.threshold = threshold;
  sc.name = "asymmetric-toxic";
  return sc;
}

std::string CampaignScenario::to_json() const {
  json j{{"kind", scenario_kind_name(kind)},
         {"clear_frac_class0", clear_frac0},
         {"clear_frac_class1", clear_frac1},
         {"prior_mal", prior_mal},
         {"threshold", threshold},
         {"name", name}};
  return j.dump();
}

CampaignScenario CampaignScenario::from_json(const std::string& text) {
  const json j = json::parse(text);
  CampaignScenario sc;
  sc.kind = scenario_kind_from_name(j.at("kind").get<std::string>());
  sc.clear_frac0 = j.at("clear_frac_class0").get<double>();
  sc.clear_frac1 = j.at("clear_frac_class1").get<double>();
  sc.prior_mal = j.at("prior_mal").get<double>();
  sc.threshold = j.value("threshold", 0.0);
  sc.name = j.value("name", scenario_kind_name(sc.kind));
  check_frac(sc.clear_frac0, "clear_frac0");
  check_frac(sc.clear_frac1, "clear_frac1");
  check_frac(sc.prior_mal, "prior_mal");
  return sc;
}

ScoreDensity truncate_density(const ScoreDensity& d, double threshold,
                              bool below) {
  const double m = d.cdf(threshold);
  const Interval sup = d.support();
  if (below) {
    if (!(m > 0.0))
      throw std::invalid_argument("truncate_density: no mass below threshold");
    return ScoreDensity::analytic(
        sup,
        [d, threshold, m](double s) {
          return s < threshold ? d.pdf(s) / m : 0.0;
        },
        [d, threshold, m](double s) { return std::min(d.cdf(s), m) / m; },
        ScoreDensity::Kind::mixture);
  }
  if (!(m < 1.0))
    throw std::invalid_argument("truncate_density: no mass above threshold");
  return ScoreDensity::analytic(
      sup,
      [d, threshold, m](double s) {
        return s >= threshold ? d.pdf(s) / (1.0 - m) : 0.0;
      },
      [d, m](double s) {
        return std::max(0.0, d.cdf(s) - m) / (1.0 - m);
      },
      ScoreDensity::Kind::mixture);
}

ToxicPair toxic_conditionals(const ReferenceDgp& dgp,
                             const CampaignScenario& sc) {
  if (sc.kind == ScenarioKind::covariate_shift ||
      sc.kind == ScenarioKind::high_confidence)
    throw std::invalid_argument(
        "toxic_conditionals: scenario kind has no tail-mixture form");
  check_frac(sc.clear_frac0, "clear_frac0");
  check_frac(sc.clear_frac1, "clear_frac1");
  const ScoreDensity d0 = regular_conditional(dgp, 0);
  const ScoreDensity d1 = regular_conditional(dgp, 1);
  const double f0t = d0.cdf(sc.threshold);
  const double f1t = d1.cdf(sc.threshold);
  if (!(f0t > 0.0 && f0t < 1.0 && f1t > 0.0 && f1t < 1.0))
    throw std::invalid_argument(
        "toxic_conditionals: threshold leaves an empty decision cell");
  // Class 0 is clear below the threshold, class 1 at or above it.
  ScoreDensity tox0 = ScoreDensity::mixture(
      {{sc.clear_frac0, truncate_density(d0, sc.threshold, true)},
       {1.0 - sc.clear_frac0, truncate_density(d0, sc.threshold, false)}});
  ScoreDensity tox1 = ScoreDensity::mixture(
      {{sc.clear_frac1, truncate_density(d1, sc.threshold, false)},
       {1.0 - sc.clear_frac1, truncate_density(d1, sc.threshold, true)}});
  return {std::move(tox0), std::move(tox1)};
}

double critical_cutoff(const ReferenceDgp& dgp, double prior_turbid,
                       double threshold) {
  if (!(prior_turbid > 0.0 && prior_turbid < 1.0))
    throw std::invalid_argument("critical_cutoff: prior outside (0, 1)");
  ClarityPair pair = turbidity_conditionals(dgp, threshold);
  auto excess = [&](double s) {
    return prior_turbid * pair.turbid.pdf(s) -
           (1.0 - prior_turbid) * pair.clear.pdf(s);
  };
  const double eps = 1e-9 * (dgp.hi - dgp.lo);
  try {
    return num::brentq(excess, threshold + eps, dgp.hi, 1e-12);
  } catch (const std::invalid_argument&) {
    throw std::domain_error(
        "critical_cutoff: turbidity posterior never crosses 1/2 above the "
        "threshold");
  }
}

PosteriorCurve augmented_posterior(const ReferenceDgp& dgp, double cutoff) {
  if (!(cutoff > 0.0 && -cutoff > dgp.lo && cutoff < dgp.hi))
    throw std::invalid_argument(
        "augmented_posterior: cutoff must satisfy lo < -cutoff < 0 < cutoff "
        "< hi");
  const NoiseSpec noise = dgp.noise;
  auto eval = [noise, cutoff](double s) {
    // Inside the flip zone the posterior is mirrored; the zone is closed so
    // every published segment stays monotone with jumps at its ends.
    if (std::abs(s) <= cutoff) return logistic_cdf(-s, noise);
    return logistic_cdf(s, noise);
  };
  return PosteriorCurve(dgp.support(), eval,
                        {dgp.lo, -cutoff, 0.0, cutoff, dgp.hi});
}

int MitigationArtifact::decide(double s) const {
  std::size_t i = 0;
  while (i < breakpoints.size() && s >= breakpoints[i]) ++i;
  return region_flags.at(i);
}

double MitigationArtifact::posterior_at(double s) const {
  if (posterior) return posterior(s);
  if (grid_s.size() < 2)
    throw std::runtime_error("MitigationArtifact: no posterior available");
  if (s <= grid_s.front()) return grid_p.front();
  if (s >= grid_s.back()) return grid_p.back();
  const auto it = std::lower_bound(grid_s.begin(), grid_s.end(), s);
  const std::size_t i = static_cast<std::size_t>(it - grid_s.begin());
  const double x0 = grid_s[i - 1], x1 = grid_s[i];
  const double w = (s - x0) / (x1 - x0);
  return grid_p[i - 1] + w * (grid_p[i] - grid_p[i - 1]);
}

std::string MitigationArtifact::to_json() const {
  json j{{"scenario_id", scenario_id},
         {"created_at", created_at},
         {"ref_threshold", ref_threshold},
         {"prior_mal", prior_mal},
         {"support", {support.lo, support.hi}},
         {"breakpoints", breakpoints},
         {"region_flags", region_flags},
         {"grid_s", grid_s},
         {"grid_p", grid_p},
         {"degenerate", degenerate}};
  json rev = json::array();
  for (const auto& [a, b] : reversal_intervals) rev.push_back({a, b});
  j["reversal_intervals"] = rev;
  return j.dump();
}

MitigationArtifact MitigationArtifact::from_json(const std::string& text) {
  const json j = json::parse(text);
  MitigationArtifact art;
  art.scenario_id = j.at("scenario_id").get<std::string>();
  art.created_at = j.value("created_at", std::int64_t{0});
  art.ref_threshold = j.at("ref_threshold").get<double>();
  art.prior_mal = j.at("prior_mal").get<double>();
  art.support = {j.at("support").at(0).get<double>(),
                 j.at("support").at(1).get<double>()};
  art.breakpoints = j.at("breakpoints").get<std::vector<double>>();
  art.region_flags = j.at("region_flags").get<std::vector<int>>();
  for (const auto& pair : j.at("reversal_intervals"))
    art.reversal_intervals.emplace_back(pair.at(0).get<double>(),
                                        pair.at(1).get<double>());
  art.grid_s = j.at("grid_s").get<std::vector<double>>();
  art.grid_p = j.at("grid_p").get<std::vector<double>>();
  art.degenerate = j.at("degenerate").get<bool>();
  if (art.region_flags.size() != art.breakpoints.size() + 1)
    throw std::invalid_argument(
        "MitigationArtifact: region_flags must outnumber breakpoints by 1");
  return art;
}

MitigationArtifact repair_posterior(const ScoreDensity& toxic0,
                                    const ScoreDensity& toxic1,
                                    double prior_mal, double threshold,
                                    std::string scenario, Interval scan) {
  if (!(prior_mal > 0.0 && prior_mal < 1.0))
    throw std::invalid_argument("repair_posterior: prior outside (0, 1)");
  MitigationArtifact art;
  art.scenario_id = std::move(scenario);
  art.ref_threshold = threshold;
  art.prior_mal = prior_mal;
  if (scan.hi > scan.lo) {
    art.support = scan;
  } else {
    art.support = {std::min(toxic0.support().lo, toxic1.support().lo),
                   std::max(toxic0.support().hi, toxic1.support().hi)};
  }

  auto hit_degenerate = std::make_shared<bool>(false);
  ScoreDensity t0 = toxic0, t1 = toxic1;
  art.posterior = [t0, t1, prior_mal, hit_degenerate](double s) {
    const double num = prior_mal * t1.pdf(s);
    const double den = num + (1.0 - prior_mal) * t0.pdf(s);
    if (den <= 0.0) {
      *hit_degenerate = true;
      return 0.5;  // no evidence either way
    }
    return num / den;
  };

  // 1/2-crossings: sign scan on a fine grid, then bracketed refinement.
  // A jump through 1/2 converges to the jump point itself.
  const int n = 4097;
  const double lo = art.support.lo, hi = art.support.hi;
  const double h = (hi - lo) / (n - 1);
  double prev = art.posterior(lo) - 0.5;
  for (int i = 1; i < n; ++i) {
    const double x = lo + i * h;
    const double cur = art.posterior(x) - 0.5;
    if (prev * cur < 0.0) {
      const double root = num::brentq(
          [&](double s) { return art.posterior(s) - 0.5; }, x - h, x, 1e-12);
      if (art.breakpoints.empty() || root > art.breakpoints.back() + 1e-6)
        art.breakpoints.push_back(root);
    }
    prev = cur;
  }

  std::vector<double> edges{lo};
  edges.insert(edges.end(), art.breakpoints.begin(), art.breakpoints.end());
  edges.push_back(hi);
  for (std::size_t i = 1; i < edges.size(); ++i) {
    const double mid = 0.5 * (edges[i - 1] + edges[i]);
    art.region_flags.push_back(art.posterior(mid) >= 0.5 ? 1 : 0);
  }

  // Reversal intervals exist only for genuinely non-threshold rules; with
  // one crossing or none the repair is just a (possibly moved) threshold.
  if (art.breakpoints.size() >= 2) {
    std::vector<double> redges = edges;
    if (threshold > lo && threshold < hi) {
      redges.push_back(threshold);
      std::sort(redges.begin(), redges.end());
      redges.erase(std::unique(redges.begin(), redges.end(),
                               [](double a, double b) {
                                 return std::abs(a - b) < 1e-12;
                               }),
                   redges.end());
    }
    bool open = false;
    double start = 0.0;
    for (std::size_t i = 1; i < redges.size(); ++i) {
      const double mid = 0.5 * (redges[i - 1] + redges[i]);
      const bool repaired = art.posterior(mid) >= 0.5;
      const bool original = mid >= threshold;
      if (repaired != original) {
        if (!open) {
          open = true;
          start = redges[i - 1];
        }
      } else if (open) {
        art.reversal_intervals.emplace_back(start, redges[i - 1]);
        open = false;
      }
    }
    if (open) art.reversal_intervals.emplace_back(start, redges.back());
  }

  const int grid_n = 1001;
  art.grid_s.reserve(grid_n);
  art.grid_p.reserve(grid_n);
  for (int i = 0; i < grid_n; ++i) {
    const double s = lo + (hi - lo) * i / static_cast<double>(grid_n - 1);
    art.grid_s.push_back(s);
    art.grid_p.push_back(art.posterior(s));
  }
  art.degenerate = *hit_degenerate;
  return art;
}

PosteriorCurve to_posterior_curve(const MitigationArtifact& art) {
  if (art.posterior) return make_posterior(art.support, art.posterior);
  MitigationArtifact copy = art;  // keep the grid alive in the closure
  return make_posterior(art.support,
                        [copy](double s) { return copy.posterior_at(s); });
}

ToxicPair covariate_shift_env(const ReferenceDgp& dgp, double threshold) {
  ClarityPair pair = turbidity_conditionals(dgp, threshold);
  ScoreDensity marginal =
      ScoreDensity::mixture({{0.5, pair.clear}, {0.5, pair.turbid}});
  const NoiseSpec noise = dgp.noise;
  auto raw0 = [marginal, noise](double s) {
    return (1.0 - logistic_cdf(s, noise)) * marginal.pdf(s);
  };
  auto raw1 = [marginal, noise](double s) {
    return logistic_cdf(s, noise) * marginal.pdf(s);
  };
  const Interval sup = marginal.support();
  const double z0 = num::quad(raw0, sup.lo, sup.hi, 1e-11);
  const double z1 = num::quad(raw1, sup.lo, sup.hi, 1e-11);
  ScoreDensity d0 = ScoreDensity::from_pdf(
      sup, [raw0, z0](double s) { return raw0(s) / z0; });
  ScoreDensity d1 = ScoreDensity::from_pdf(
      sup, [raw1, z1](double s) { return raw1(s) / z1; });
  return {std::move(d0), std::move(d1)};
}

LabeledScoreSet sample_campaign(const ReferenceDgp& dgp,
                                const CampaignScenario& sc, std::size_t n,
                                std::uint64_t seed) {
  LabeledScoreSet set;
  set.rng_seed = seed;
  set.scores.reserve(n);
  set.labels.reserve(n);
  set.clarity.reserve(n);
  Philox rng(seed);
  const double th = sc.threshold;
  const Interval below{dgp.lo, th};
  const Interval above{th, dgp.hi};

  if (sc.kind == ScenarioKind::covariate_shift) {
    // Draw from the clarity mixture, then label through the untouched
    // mechanism; the drift is purely in the marginal.
    const double pi1 = dgp.prior_mal;
    const double pi0 = 1.0 - pi1;
    const double f0t = conditional_cdf(dgp, 0, th);
    const double f1t = conditional_cdf(dgp, 1, th);
    const double p_clear = pi0 * f0t + pi1 * (1.0 - f1t);
    const double w_clear_below = pi0 * f0t / p_clear;
    const double p_turbid = 1.0 - p_clear;
    const double w_turbid_below = pi1 * f1t / p_turbid;
    for (std::size_t i = 0; i < n; ++i) {
      const bool clear_branch = rng.uniform01() < 0.5;
      double s;
      if (clear_branch) {
        s = rng.uniform01() < w_clear_below
                ? sample_class_conditional(dgp, 0, below, rng)
                : sample_class_conditional(dgp, 1, above, rng);
      } else {
        s = rng.uniform01() < w_turbid_below
                ? sample_class_conditional(dgp, 1, below, rng)
                : sample_class_conditional(dgp, 0, above, rng);
      }
      const int label =
          rng.uniform01() < logistic_cdf(s, dgp.noise) ? 1 : 0;
      const int predicted = s >= th ? 1 : 0;
      set.scores.push_back(s);
      set.labels.push_back(label);
      set.clarity.push_back(predicted == label ? Clarity::clear
                                               : Clarity::turbid);
    }
    return set;
  }

  for (std::size_t i = 0; i < n; ++i) {
    const int label = rng.uniform01() < sc.prior_mal ? 1 : 0;
    const double cf = label == 1 ? sc.clear_frac1 : sc.clear_frac0;
    const bool clear = rng.uniform01() < cf;
    // Clear class-1 mass sits at or above the threshold, clear class-0
    // below; turbid is the mirror.
    const Interval range = (label == 1) == clear ? above : below;
    set.scores.push_back(sample_class_conditional(dgp, label, range, rng));
    set.labels.push_back(label);
    set.clarity.push_back(clear ? Clarity::clear : Clarity::turbid);
  }
  return set;
}

AttackResult high_confidence_attack(const BlackBoxScorer& scorer,
                                    const std::vector<std::uint8_t>& seed_input,
                                    double bar, int max_chunk_trials,
                                    std::uint64_t rng_seed) {
  if (!scorer.score)
    throw std::invalid_argument("high_confidence_attack: scorer not set");
  if (seed_input.size() > scorer.max_input_size)
    throw std::invalid_argument(
        "high_confidence_attack: seed exceeds the scorer's input limit");

  AttackResult out;
  out.adversarial_input = seed_input;
  out.adversarial_input.resize(scorer.max_input_size, 0x00);
  out.confidence = -1.0;

  auto check = [&](const std::vector<std::uint8_t>& cand) {
    ++out.trials;
    const double v = scorer.score(cand);
    if (v > out.confidence) {
      out.confidence = v;
      out.adversarial_input = cand;
    }
    return out.confidence > bar;
  };

  // Phase 1: constant padding fills 0x01..0xff (the zero fill is the
  // starting state itself).
  std::vector<std::uint8_t> cand = out.adversarial_input;
  for (int fill = 0x01; fill <= 0xff; ++fill) {
    std::fill(cand.begin() + seed_input.size(), cand.end(),
              static_cast<std::uint8_t>(fill));
    if (check(cand)) {
      out.success = true;
      out.phase = AttackPhase::constant_fill;
      return out;
    }
  }

  // Phase 2: random chunk rewrites over the padding, keeping improvements.
  Philox rng(rng_seed);
  const std::size_t pad_begin = seed_input.size();
  const std::size_t pad_len = scorer.max_input_size - pad_begin;
  if (pad_len > 0) {
    for (int t = 0; t < max_chunk_trials; ++t) {
      cand = out.adversarial_input;
      const std::size_t off = pad_begin + rng.below(pad_len);
      const std::size_t max_len =
          std::min<std::size_t>(256, scorer.max_input_size - off);
      const std::size_t len = 1 + rng.below(max_len);
      for (std::size_t k = 0; k < len; ++k)
        cand[off + k] = static_cast<std::uint8_t>(
            cand[off + k] + static_cast<std::uint8_t>(rng.below(256)));
      if (check(cand)) {
        out.success = true;
        out.phase = AttackPhase::random_chunk;
        return out;
      }
    }
  }
  out.phase = AttackPhase::failed;
  return out;
}

BlackBoxScorer byte_mean_scorer(std::size_t max_size) {
  return {[](const std::vector<std::uint8_t>& x) {
            if (x.empty()) return 0.0;
            double sum = 0.0;
            for (std::uint8_t b : x) sum += b;
            return sum / (255.0 * static_cast<double>(x.size()));
          },
          max_size};
}

BlackBoxScorer byte_diversity_scorer(std::size_t max_size) {
  return {[](const std::vector<std::uint8_t>& x) {
            bool seen[256] = {};
            for (std::uint8_t b : x) seen[b] = true;
            int distinct = 0;
            for (bool s : seen) distinct += s;
            return distinct / 256.0;
          },
          max_size};
}

BlackBoxScorer constant_scorer(double value, std::size_t max_size) {
  return {[value](const std::vector<std::uint8_t>&) { return value; },
          max_size};
}

}  // namespace turbid

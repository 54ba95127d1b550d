#pragma once

// Adversarial campaign models: class conditionals reshaped by an opponent
// steering samples across the decision threshold, the degraded posteriors
// that result, and the repaired decision rules recovered from them.

#include <cstdint>
#include <string>
#include <vector>

#include "turbid/density.hpp"
#include "turbid/dgp.hpp"
#include "turbid/posterior.hpp"

namespace turbid {

enum class ScenarioKind {
  regular,
  symmetric_toxic,
  asymmetric_toxic,
  covariate_shift,
  high_confidence,
};

const char* scenario_kind_name(ScenarioKind k);
ScenarioKind scenario_kind_from_name(const std::string& s);

struct CampaignScenario {
  ScenarioKind kind = ScenarioKind::symmetric_toxic;
  // P(correct side of the threshold | class); the campaign's control knobs.
  double clear_frac0 = 0.5;
  double clear_frac1 = 0.5;
  double prior_mal = 0.5;
  double threshold = 0.0;
  std::string name = "symmetric-toxic";

  // Fractions at their natural values: reproduces the regular conditionals.
  static CampaignScenario regular(const ReferenceDgp& dgp,
                                  double threshold = 0.0);
  static CampaignScenario symmetric(double prior_mal = 0.5,
                                    double threshold = 0.0);
  // Class 0 untouched; class-1 clear fraction forced to the given value.
  static CampaignScenario asymmetric(const ReferenceDgp& dgp,
                                     double clear_frac1 = 0.375,
                                     double threshold = 0.0);

  std::string to_json() const;
  static CampaignScenario from_json(const std::string& text);
};

struct ToxicPair {
  ScoreDensity d0;
  ScoreDensity d1;
};

// Normalized restriction of a density to one side of a threshold.
ScoreDensity truncate_density(const ScoreDensity& d, double threshold,
                              bool below);

// Class conditionals under a clarity-targeting campaign: each class is a
// cf-weighted mix of its correctly-decided and misdecided tails.
ToxicPair toxic_conditionals(const ReferenceDgp& dgp,
                             const CampaignScenario& sc);

// Score above the threshold at which the turbidity posterior crosses 1/2;
// bounds the zone where flipping decisions is worth it.
double critical_cutoff(const ReferenceDgp& dgp, double prior_turbid = 0.5,
                       double threshold = 0.0);

// Decision statistic that flips the model posterior inside [-cutoff, cutoff]
// and keeps it outside. Carries the five published segment boundaries.
PosteriorCurve augmented_posterior(const ReferenceDgp& dgp, double cutoff);

// Deployable repaired decision rule: where the repaired posterior crosses
// 1/2, what to decide between crossings, and a dense fallback table.
struct MitigationArtifact {
  std::string scenario_id;
  std::int64_t created_at = 0;  // logical timestamp
  double ref_threshold = 0.0;
  double prior_mal = 0.5;
  Interval support{};
  std::vector<double> breakpoints;  // ascending 1/2-crossings
  std::vector<int> region_flags;    // decision per region; breakpoints+1 many
  std::vector<std::pair<double, double>> reversal_intervals;
  std::vector<double> grid_s;  // dense posterior table (serialized form)
  std::vector<double> grid_p;
  bool degenerate = false;  // hit 0/0 while evaluating the posterior
  PosteriorCurve::Fn posterior;  // exact evaluator; null after deserialize

  // True when the repaired rule is a plain (possibly shifted) threshold
  // rule: at most one crossing, nothing to reverse.
  bool threshold_only() const { return breakpoints.size() <= 1; }
  int decide(double s) const;
  double posterior_at(double s) const;  // falls back to the grid table

  std::string to_json() const;
  static MitigationArtifact from_json(const std::string& text);
};

// `scan` restricts the crossing search and grid; a zero-width scan means
// the hull of both supports. Fitted densities pass their data envelope here
// so kernel-tail noise outside the evidence cannot mint breakpoints.
MitigationArtifact repair_posterior(const ScoreDensity& toxic0,
                                    const ScoreDensity& toxic1,
                                    double prior_mal, double threshold = 0.0,
                                    std::string scenario = "",
                                    Interval scan = {0.0, 0.0});

// Piecewise-monotone curve over the artifact's posterior, for exact ROCs.
PosteriorCurve to_posterior_curve(const MitigationArtifact& art);

// Environment that moves the marginal to the clarity mixture but leaves the
// label mechanism alone; the recovered posterior is the model posterior.
ToxicPair covariate_shift_env(const ReferenceDgp& dgp, double threshold = 0.0);

// Draw labeled scores from a campaign scenario.
LabeledScoreSet sample_campaign(const ReferenceDgp& dgp,
                                const CampaignScenario& sc, std::size_t n,
                                std::uint64_t seed);

// --- black-box probing -----------------------------------------------------

struct BlackBoxScorer {
  std::function<double(const std::vector<std::uint8_t>&)> score;
  std::size_t max_input_size = 4096;
};

enum class AttackPhase { constant_fill, random_chunk, failed };

struct AttackResult {
  bool success = false;
  AttackPhase phase = AttackPhase::failed;
  double confidence = 0.0;  // best score seen
  int trials = 0;           // total scorer invocations
  std::vector<std::uint8_t> adversarial_input;
};

// Pad the seed to the scorer's max size with zeros, then climb: constant
// fills 0x01..0xff over the padding, then random chunk rewrites, keeping
// improvements. Stops as soon as the score clears `bar`.
AttackResult high_confidence_attack(const BlackBoxScorer& scorer,
                                    const std::vector<std::uint8_t>& seed_input,
                                    double bar = 0.97,
                                    int max_chunk_trials = 1000,
                                    std::uint64_t rng_seed = 0);

// Built-in scorers for the CLI and tests.
BlackBoxScorer byte_mean_scorer(std::size_t max_size = 4096);
BlackBoxScorer byte_diversity_scorer(std::size_t max_size = 4096);
BlackBoxScorer constant_scorer(double value, std::size_t max_size = 4096);

}  // namespace turbid

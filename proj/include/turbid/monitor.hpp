#pragma once

// Streaming detector-health management: rolling score histograms, campaign
// declaration with hysteresis, mitigation deployment from a precomputed
// scenario table (or fitted on demand), and restoration once the stream
// returns to normal.

#include <cstdint>
#include <deque>
#include <iosfwd>
#include <optional>
#include <string>
#include <unordered_map>
#include <utility>
#include <vector>

#include <json.hpp>

#include "turbid/campaign.hpp"
#include "turbid/dgp.hpp"

namespace turbid {

// One scored observation; the label may arrive later under the same id.
struct StreamRecord {
  std::string id;
  double score = 0.0;
  std::optional<int> label;
  std::int64_t ts = 0;
};

// JSONL lines {"id": string, "score": number, "label": 0|1|null, "ts": int}.
// Malformed lines raise with their line number.
std::vector<StreamRecord> read_stream_jsonl(std::istream& in);
std::vector<StreamRecord> read_stream_jsonl_file(const std::string& path);

struct MonitorPolicy {
  std::size_t window_capacity = 5000;
  std::size_t bins = 50;
  std::size_t min_samples = 1000;  // evaluations below this are skipped
  double error_baseline = 0.0693;  // labeled error rate of the healthy stream
  double lowconf_baseline = 0.0619;  // band occupancy of the healthy stream
  double declare_mult = 3.0;
  int persistence = 2;  // consecutive breaches (or normals) to switch
  double lowconf_lo = 0.35;  // regular-posterior band counted as low confidence
  double lowconf_hi = 0.65;
  bool prophylactic = false;  // route transform through the table up front
  std::size_t fingerprint_min_labeled = 50;  // per class
  double table_distance_bound = 0.125;  // beyond this, fit on demand
};

// Windowed score histograms, split by label when one is known.
struct HistogramPair {
  std::vector<double> bin_edges;
  std::vector<std::size_t> counts0, counts1, unlabeled_counts;
  std::size_t window_capacity = 5000;
  std::size_t total() const;
};

// Coordinates of a campaign in scenario space: per-class clear fractions at
// the reference threshold plus the class-1 prior.
struct Fingerprint {
  double clear_frac0 = 0.5;
  double clear_frac1 = 0.5;
  double prior_mal = 0.5;
  ScenarioKind kind = ScenarioKind::symmetric_toxic;
  double distance_to(const Fingerprint& other) const;
};

struct MitigationTable {
  struct Entry {
    Fingerprint fingerprint;
    MitigationArtifact artifact;
  };
  std::vector<Entry> entries;

  std::string to_json() const;
  static MitigationTable from_json(const std::string& text);
};

// 5x5x3 lattice over (clear_frac0, clear_frac1, prior) plus the healthy
// fingerprint, whose entry is the identity transform.
std::vector<Fingerprint> default_fingerprint_grid();

// Simulate each gridded scenario and fit its repaired rule; healthy-kind
// entries get the exact identity artifact instead of a fit.
MitigationTable precompute_table(const ReferenceDgp& dgp,
                                 const std::vector<Fingerprint>& grid,
                                 std::uint64_t seed);

// Identity mitigation: decisions bitwise-equal to the raw threshold rule.
MitigationArtifact identity_artifact(const ReferenceDgp& dgp,
                                     double threshold = 0.0);

struct MonitorEvent {
  std::uint64_t seq = 0;
  std::string kind;  // ingest | evaluate | transition | select | select-deferred
  std::int64_t ts = 0;  // logical: records ingested so far
  nlohmann::json payload;
};

enum class HealthMode { regular, suspected, mitigated, restoring };
const char* mode_name(HealthMode mode);

class HealthState {
 public:
  explicit HealthState(ReferenceDgp dgp = {}, MonitorPolicy policy = {},
                       double threshold = 0.0);

  void set_table(MitigationTable table);
  const std::optional<MitigationTable>& table() const { return table_; }

  // Folds a batch into the window. A labeled record whose id is already
  // present attaches its label to the existing entry instead of appending.
  void ingest(const std::vector<StreamRecord>& batch);

  // One health check: skipped below min_samples, otherwise updates the mode
  // machine. Mitigation is selected when entering the mitigated mode.
  void evaluate();
  void evaluate(const MonitorPolicy& policy);

  // (posterior value, decision). Mitigated mode (or prophylactic, once a
  // selection exists) routes through the artifact; otherwise the healthy
  // posterior and raw threshold apply.
  std::pair<double, int> transform(double score) const;

  HealthMode mode() const { return mode_; }
  double error_rate() const { return error_rate_; }
  double lowconf_rate() const { return lowconf_rate_; }
  const std::optional<MitigationArtifact>& active_mitigation() const {
    return active_mitigation_;
  }
  const HistogramPair& window() const { return window_; }
  const std::vector<MonitorEvent>& history() const { return history_; }
  const MonitorPolicy& policy() const { return policy_; }
  double threshold() const { return threshold_; }
  std::size_t window_total() const { return records_.size(); }
  std::size_t labeled_total() const { return labeled0_ + labeled1_; }

  // Clear fractions and prior from the windowed labeled data; throws until
  // both classes have policy.fingerprint_min_labeled labels.
  Fingerprint estimate_fingerprint() const;

  std::string to_json() const;     // full snapshot, deterministic
  std::string events_jsonl() const;

 private:
  friend MitigationArtifact select_mitigation(const HealthState&,
                                              const MitigationTable&, double*);
  struct Rec {
    double score;
    std::optional<int> label;
    std::string id;
  };

  void add_record(const StreamRecord& r);
  void attach_label(Rec& rec, int label);
  void evict_front();
  std::size_t bin_of(double score) const;
  void count(const Rec& rec, int sign);
  void refresh_rates();
  void push_event(std::string kind, nlohmann::json payload);
  void enter_mitigated();

  ReferenceDgp dgp_;
  MonitorPolicy policy_;
  double threshold_;
  double band_lo_, band_hi_;  // score band mapping to the low-confidence zone

  HealthMode mode_ = HealthMode::regular;
  std::deque<Rec> records_;
  std::unordered_map<std::string, std::uint64_t> id_to_seq_;
  std::uint64_t next_rec_seq_ = 0;  // seq of the next appended record
  HistogramPair window_;
  std::size_t labeled0_ = 0, labeled1_ = 0;
  std::size_t clear0_ = 0, clear1_ = 0;
  std::size_t lowconf_ = 0;
  double error_rate_ = 0.0;
  double lowconf_rate_ = 0.0;
  int breach_streak_ = 0;
  int normal_streak_ = 0;
  std::optional<MitigationArtifact> active_mitigation_;
  std::optional<MitigationArtifact> standby_mitigation_;  // kept while restoring
  std::optional<MitigationArtifact> prophylactic_selection_;
  std::optional<MitigationTable> table_;
  std::vector<MonitorEvent> history_;
  std::uint64_t event_seq_ = 0;
  std::int64_t ingested_total_ = 0;
};

// Nearest table entry to the windowed fingerprint; beyond the distance
// bound the rule is fitted from the window instead. Throws when labels are
// too scarce to fingerprint.
MitigationArtifact select_mitigation(const HealthState& state,
                                     const MitigationTable& table,
                                     double* distance_out = nullptr);

// Re-drives ingest/evaluate events through a fresh state; the result must
// match the original snapshot exactly.
HealthState replay_events(const std::string& events_jsonl,
                          const ReferenceDgp& dgp, const MonitorPolicy& policy,
                          const std::optional<MitigationTable>& table);

}  // namespace turbid

#include "turbid/monitor.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <fstream>
#include <limits>
#include <sstream>
#include <stdexcept>

#include "turbid/estimator.hpp"

namespace turbid {

using nlohmann::json;

std::vector<StreamRecord> read_stream_jsonl(std::istream& in) {
  std::vector<StreamRecord> out;
  std::string line;
  std::size_t lineno = 0;
  while (std::getline(in, line)) {
    ++lineno;
    if (line.empty()) continue;
    try {
      const json j = json::parse(line);
      StreamRecord r;
      r.id = j.at("id").get<std::string>();
      if (!j.at("score").is_number())
        throw std::runtime_error("score must be a number");
      r.score = j["score"].get<double>();
      if (j.contains("label") && !j["label"].is_null()) {
        const int lab = j["label"].get<int>();
        if (lab != 0 && lab != 1)
          throw std::runtime_error("label must be 0, 1, or null");
        r.label = lab;
      }
      r.ts = j.value("ts", std::int64_t{0});
      out.push_back(std::move(r));
    } catch (const std::exception& e) {
      throw std::runtime_error("stream line " + std::to_string(lineno) + ": " +
                               e.what());
    }
  }
  return out;
}

std::vector<StreamRecord> read_stream_jsonl_file(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw std::runtime_error("cannot open stream file " + path);
  return read_stream_jsonl(in);
}

std::size_t HistogramPair::total() const {
  std::size_t n = 0;
  for (std::size_t c : counts0) n += c;
  for (std::size_t c : counts1) n += c;
  for (std::size_t c : unlabeled_counts) n += c;
  return n;
}

double Fingerprint::distance_to(const Fingerprint& other) const {
  const double d0 = clear_frac0 - other.clear_frac0;
  const double d1 = clear_frac1 - other.clear_frac1;
  const double dp = prior_mal - other.prior_mal;
  return std::sqrt(d0 * d0 + d1 * d1 + dp * dp);
}

std::string MitigationTable::to_json() const {
  json j;
  j["entries"] = json::array();
  for (const auto& e : entries) {
    json fp{{"clear_frac_class0", e.fingerprint.clear_frac0},
            {"clear_frac_class1", e.fingerprint.clear_frac1},
            {"prior_mal", e.fingerprint.prior_mal},
            {"kind", scenario_kind_name(e.fingerprint.kind)}};
    j["entries"].push_back(
        {{"fingerprint", fp}, {"artifact", json::parse(e.artifact.to_json())}});
  }
  return j.dump(2);
}

MitigationTable MitigationTable::from_json(const std::string& text) {
  const json j = json::parse(text);
  MitigationTable t;
  for (const auto& e : j.at("entries")) {
    Entry entry;
    const auto& fp = e.at("fingerprint");
    entry.fingerprint.clear_frac0 = fp.at("clear_frac_class0").get<double>();
    entry.fingerprint.clear_frac1 = fp.at("clear_frac_class1").get<double>();
    entry.fingerprint.prior_mal = fp.at("prior_mal").get<double>();
    entry.fingerprint.kind =
        scenario_kind_from_name(fp.at("kind").get<std::string>());
    entry.artifact = MitigationArtifact::from_json(e.at("artifact").dump());
    t.entries.push_back(std::move(entry));
  }
  return t;
}

std::vector<Fingerprint> default_fingerprint_grid() {
  std::vector<Fingerprint> grid;
  const double fracs[] = {0.1, 0.3, 0.5, 0.7, 0.9};
  const double priors[] = {0.25, 0.5, 0.75};
  for (double cf0 : fracs)
    for (double cf1 : fracs)
      for (double prior : priors)
        grid.push_back({cf0, cf1, prior, ScenarioKind::symmetric_toxic});
  const ReferenceDgp dgp;
  const double healthy = conditional_cdf(dgp, 0, 0.0);  // P(correct | class 0)
  grid.push_back({healthy, healthy, 0.5, ScenarioKind::regular});
  return grid;
}

MitigationArtifact identity_artifact(const ReferenceDgp& dgp,
                                     double threshold) {
  MitigationArtifact art;
  art.scenario_id = "regular-identity";
  art.ref_threshold = threshold;
  art.prior_mal = dgp.prior_mal;
  art.support = dgp.support();
  art.breakpoints = {threshold};
  art.region_flags = {0, 1};
  const NoiseSpec noise = dgp.noise;
  art.posterior = [noise](double s) { return logistic_cdf(s, noise); };
  const int n = 1001;
  art.grid_s.reserve(n);
  art.grid_p.reserve(n);
  for (int i = 0; i < n; ++i) {
    const double s =
        art.support.lo + art.support.width() * i / double(n - 1);
    art.grid_s.push_back(s);
    art.grid_p.push_back(art.posterior(s));
  }
  return art;
}

MitigationTable precompute_table(const ReferenceDgp& dgp,
                                 const std::vector<Fingerprint>& grid,
                                 std::uint64_t seed) {
  if (grid.empty())
    throw std::invalid_argument("precompute_table: empty fingerprint grid");
  MitigationTable table;
  std::uint64_t idx = 0;
  for (const Fingerprint& fp : grid) {
    MitigationTable::Entry entry;
    entry.fingerprint = fp;
    if (fp.kind == ScenarioKind::regular) {
      entry.artifact = identity_artifact(dgp);
    } else {
      char name[64];
      std::snprintf(name, sizeof name, "table-%.2f-%.2f-%.2f", fp.clear_frac0,
                    fp.clear_frac1, fp.prior_mal);
      CampaignScenario sc;
      sc.kind = fp.kind;
      sc.clear_frac0 = fp.clear_frac0;
      sc.clear_frac1 = fp.clear_frac1;
      sc.prior_mal = fp.prior_mal;
      sc.threshold = 0.0;
      sc.name = name;
      // Generous draw: kernel smoothing biases fitted crossings outward by
      // O(bandwidth^2), and the bandwidth only shrinks like n^(-1/5).
      const LabeledScoreSet set =
          sample_campaign(dgp, sc, 160000, seed + 1000003 * idx);
      std::vector<double> s0, s1;
      for (std::size_t i = 0; i < set.size(); ++i)
        (set.labels[i] == 0 ? s0 : s1).push_back(set.scores[i]);
      entry.artifact = empirical_repair(s0, s1, fp.prior_mal, 0.0, name);
    }
    table.entries.push_back(std::move(entry));
    ++idx;
  }
  return table;
}

const char* mode_name(HealthMode mode) {
  switch (mode) {
    case HealthMode::regular: return "regular";
    case HealthMode::suspected: return "suspected";
    case HealthMode::mitigated: return "mitigated";
    case HealthMode::restoring: return "restoring";
  }
  throw std::logic_error("unknown health mode");
}

HealthState::HealthState(ReferenceDgp dgp, MonitorPolicy policy,
                         double threshold)
    : dgp_(dgp), policy_(policy), threshold_(threshold) {
  if (policy_.bins == 0 || policy_.window_capacity == 0)
    throw std::invalid_argument("HealthState: bins and capacity must be positive");
  // Scores whose healthy posterior lies in the low-confidence band.
  auto inv = [&](double p) {
    return dgp_.noise.mu + dgp_.noise.scale * std::log(p / (1.0 - p));
  };
  band_lo_ = inv(policy_.lowconf_lo);
  band_hi_ = inv(policy_.lowconf_hi);
  const Interval sup = dgp_.support();
  window_.window_capacity = policy_.window_capacity;
  window_.bin_edges.resize(policy_.bins + 1);
  for (std::size_t i = 0; i <= policy_.bins; ++i)
    window_.bin_edges[i] = sup.lo + sup.width() * double(i) / double(policy_.bins);
  window_.counts0.assign(policy_.bins, 0);
  window_.counts1.assign(policy_.bins, 0);
  window_.unlabeled_counts.assign(policy_.bins, 0);
}

void HealthState::set_table(MitigationTable table) {
  table_ = std::move(table);
}

std::size_t HealthState::bin_of(double score) const {
  const double lo = window_.bin_edges.front();
  const double hi = window_.bin_edges.back();
  if (score <= lo) return 0;
  if (score >= hi) return policy_.bins - 1;
  auto idx = static_cast<std::size_t>((score - lo) / (hi - lo) * policy_.bins);
  return std::min(idx, policy_.bins - 1);
}

void HealthState::count(const Rec& rec, int sign) {
  const std::size_t b = bin_of(rec.score);
  auto bump = [sign](std::size_t& c) {
    if (sign > 0)
      ++c;
    else
      --c;
  };
  if (rec.label) {
    bump((*rec.label == 0 ? window_.counts0 : window_.counts1)[b]);
    bump(*rec.label == 0 ? labeled0_ : labeled1_);
    const bool clear = (*rec.label == 1) == (rec.score >= threshold_);
    if (clear) bump(*rec.label == 0 ? clear0_ : clear1_);
  } else {
    bump(window_.unlabeled_counts[b]);
  }
  if (rec.score >= band_lo_ && rec.score <= band_hi_) bump(lowconf_);
}

void HealthState::evict_front() {
  Rec& rec = records_.front();
  count(rec, -1);
  const std::uint64_t base = next_rec_seq_ - records_.size();
  auto it = id_to_seq_.find(rec.id);
  if (it != id_to_seq_.end() && it->second == base) id_to_seq_.erase(it);
  records_.pop_front();
}

void HealthState::add_record(const StreamRecord& r) {
  if (r.label && *r.label != 0 && *r.label != 1)
    throw std::invalid_argument("ingest: label must be 0 or 1");
  if (r.label) {
    auto it = id_to_seq_.find(r.id);
    if (it != id_to_seq_.end()) {
      const std::uint64_t base = next_rec_seq_ - records_.size();
      if (it->second >= base) {  // still in the window: attach the label
        Rec& rec = records_[it->second - base];
        count(rec, -1);
        rec.label = r.label;
        count(rec, +1);
        return;
      }
    }
  }
  records_.push_back(Rec{r.score, r.label, r.id});
  id_to_seq_[r.id] = next_rec_seq_++;
  count(records_.back(), +1);
  while (records_.size() > policy_.window_capacity) evict_front();
}

void HealthState::refresh_rates() {
  const std::size_t labeled = labeled0_ + labeled1_;
  error_rate_ =
      labeled == 0
          ? 0.0
          : double(labeled - clear0_ - clear1_) / double(labeled);
  lowconf_rate_ =
      records_.empty() ? 0.0 : double(lowconf_) / double(records_.size());
}

void HealthState::push_event(std::string kind, json payload) {
  history_.push_back(
      {event_seq_++, std::move(kind), ingested_total_, std::move(payload)});
}

void HealthState::ingest(const std::vector<StreamRecord>& batch) {
  if (batch.empty()) throw std::invalid_argument("ingest: empty batch");
  json records = json::array();
  for (const StreamRecord& r : batch) {
    add_record(r);
    json jr{{"id", r.id}, {"score", r.score}, {"ts", r.ts}};
    jr["label"] = r.label ? json(*r.label) : json(nullptr);
    records.push_back(std::move(jr));
  }
  ingested_total_ += static_cast<std::int64_t>(batch.size());
  refresh_rates();
  push_event("ingest",
             {{"n", batch.size()}, {"records", std::move(records)}});
}

void HealthState::enter_mitigated() {
  static const MitigationTable kEmpty{};
  const MitigationTable& tbl = table_ ? *table_ : kEmpty;
  try {
    double dist = std::numeric_limits<double>::infinity();
    MitigationArtifact art = select_mitigation(*this, tbl, &dist);
    art.created_at = ingested_total_;
    active_mitigation_ = std::move(art);
    mode_ = HealthMode::mitigated;
    json sel{{"scenario", active_mitigation_->scenario_id}};
    sel["distance"] = std::isfinite(dist) ? json(dist) : json(nullptr);
    push_event("select", std::move(sel));
  } catch (const std::exception& e) {
    // Not enough labels to fingerprint yet (or the window is degenerate);
    // stay suspected.
    push_event("select-deferred", {{"reason", e.what()}});
  }
}

void HealthState::evaluate() { evaluate(policy_); }

void HealthState::evaluate(const MonitorPolicy& p) {
  json ev{{"mode", mode_name(mode_)}, {"window", records_.size()}};
  if (records_.size() < p.min_samples) {
    ev["skipped"] = true;
    push_event("evaluate", std::move(ev));
    return;
  }
  const bool breach = error_rate_ > p.declare_mult * p.error_baseline ||
                      lowconf_rate_ > p.declare_mult * p.lowconf_baseline;
  if (breach) {
    ++breach_streak_;
    normal_streak_ = 0;
  } else {
    ++normal_streak_;
    breach_streak_ = 0;
  }
  ev["error_rate"] = error_rate_;
  ev["lowconf_rate"] = lowconf_rate_;
  ev["breach"] = breach;
  push_event("evaluate", std::move(ev));

  const HealthMode from = mode_;
  switch (mode_) {
    case HealthMode::regular:
      if (breach) mode_ = HealthMode::suspected;
      break;
    case HealthMode::suspected:
      if (!breach)
        mode_ = HealthMode::regular;
      else if (breach_streak_ >= p.persistence)
        enter_mitigated();
      break;
    case HealthMode::mitigated:
      if (!breach) {
        standby_mitigation_ = std::move(active_mitigation_);
        active_mitigation_.reset();
        mode_ = HealthMode::restoring;
      }
      break;
    case HealthMode::restoring:
      if (breach) {
        active_mitigation_ = std::move(standby_mitigation_);
        standby_mitigation_.reset();
        mode_ = HealthMode::mitigated;
      } else if (normal_streak_ >= p.persistence) {
        standby_mitigation_.reset();
        mode_ = HealthMode::regular;
      }
      break;
  }
  if (mode_ != from)
    push_event("transition",
               {{"from", mode_name(from)}, {"to", mode_name(mode_)}});

  if (p.prophylactic && table_) {
    try {
      double dist = std::numeric_limits<double>::infinity();
      MitigationArtifact art = select_mitigation(*this, *table_, &dist);
      prophylactic_selection_ = std::move(art);
      json sel{{"purpose", "prophylactic"},
               {"scenario", prophylactic_selection_->scenario_id}};
      sel["distance"] = std::isfinite(dist) ? json(dist) : json(nullptr);
      push_event("select", std::move(sel));
    } catch (const std::runtime_error&) {
      // keep whatever selection we had; the healthy path covers the rest
    }
  }
}

std::pair<double, int> HealthState::transform(double score) const {
  const MitigationArtifact* art = nullptr;
  if (mode_ == HealthMode::mitigated && active_mitigation_)
    art = &*active_mitigation_;
  else if (policy_.prophylactic && prophylactic_selection_)
    art = &*prophylactic_selection_;
  if (art) return {art->posterior_at(score), art->decide(score)};
  return {logistic_cdf(score, dgp_.noise), score >= threshold_ ? 1 : 0};
}

Fingerprint HealthState::estimate_fingerprint() const {
  if (labeled0_ < policy_.fingerprint_min_labeled ||
      labeled1_ < policy_.fingerprint_min_labeled)
    throw std::runtime_error(
        "estimate_fingerprint: fewer than " +
        std::to_string(policy_.fingerprint_min_labeled) +
        " labeled samples in a class; wait for more labels or use "
        "prophylactic mode");
  Fingerprint fp;
  fp.clear_frac0 = double(clear0_) / double(labeled0_);
  fp.clear_frac1 = double(clear1_) / double(labeled1_);
  fp.prior_mal = double(labeled1_) / double(labeled0_ + labeled1_);
  return fp;
}

std::string HealthState::to_json() const {
  json j;
  j["mode"] = mode_name(mode_);
  j["threshold"] = threshold_;
  j["error_rate"] = error_rate_;
  j["lowconf_rate"] = lowconf_rate_;
  j["window"] = {{"capacity", window_.window_capacity},
                 {"bin_edges", window_.bin_edges},
                 {"counts0", window_.counts0},
                 {"counts1", window_.counts1},
                 {"unlabeled_counts", window_.unlabeled_counts}};
  j["counters"] = {{"labeled0", labeled0_}, {"labeled1", labeled1_},
                   {"clear0", clear0_},     {"clear1", clear1_},
                   {"lowconf", lowconf_},   {"window_total", records_.size()},
                   {"ingested", ingested_total_}};
  j["streaks"] = {{"breach", breach_streak_}, {"normal", normal_streak_}};
  j["events"] = event_seq_;
  j["active_mitigation"] = active_mitigation_
                               ? json::parse(active_mitigation_->to_json())
                               : json(nullptr);
  j["standby_mitigation"] = standby_mitigation_
                                ? json::parse(standby_mitigation_->to_json())
                                : json(nullptr);
  j["prophylactic_selection"] =
      prophylactic_selection_ ? json::parse(prophylactic_selection_->to_json())
                              : json(nullptr);
  return j.dump(2);
}

std::string HealthState::events_jsonl() const {
  std::string out;
  for (const MonitorEvent& e : history_) {
    json j{{"seq", e.seq}, {"kind", e.kind}, {"ts", e.ts},
           {"payload", e.payload}};
    out += j.dump();
    out += '\n';
  }
  return out;
}

MitigationArtifact select_mitigation(const HealthState& state,
                                     const MitigationTable& table,
                                     double* distance_out) {
  const MonitorPolicy& pol = state.policy();
  if (state.mode() != HealthMode::suspected &&
      state.mode() != HealthMode::mitigated && !pol.prophylactic)
    throw std::logic_error(
        "select_mitigation: no campaign suspected and prophylactic mode off");
  const Fingerprint fp = state.estimate_fingerprint();

  double best = std::numeric_limits<double>::infinity();
  const MitigationTable::Entry* nearest = nullptr;
  for (const auto& e : table.entries) {
    const double d = fp.distance_to(e.fingerprint);
    if (d < best) {
      best = d;
      nearest = &e;
    }
  }
  if (distance_out) *distance_out = best;
  if (nearest && best <= pol.table_distance_bound) return nearest->artifact;

  // Off the table: fit the repaired rule from the window itself.
  std::vector<double> s0, s1;
  for (const auto& rec : state.records_) {
    if (!rec.label) continue;
    (*rec.label == 0 ? s0 : s1).push_back(rec.score);
  }
  return empirical_repair(s0, s1, fp.prior_mal, state.threshold(),
                          "window-fit");
}

HealthState replay_events(const std::string& events_jsonl,
                          const ReferenceDgp& dgp, const MonitorPolicy& policy,
                          const std::optional<MitigationTable>& table) {
  HealthState st(dgp, policy);
  if (table) st.set_table(*table);
  std::istringstream in(events_jsonl);
  std::string line;
  std::size_t lineno = 0;
  while (std::getline(in, line)) {
    ++lineno;
    if (line.empty()) continue;
    json j;
    try {
      j = json::parse(line);
    } catch (const std::exception& e) {
      throw std::runtime_error("event line " + std::to_string(lineno) + ": " +
                               e.what());
    }
    const std::string kind = j.at("kind").get<std::string>();
    if (kind == "ingest") {
      std::vector<StreamRecord> batch;
      for (const auto& jr : j.at("payload").at("records")) {
        StreamRecord r;
        r.id = jr.at("id").get<std::string>();
        r.score = jr.at("score").get<double>();
        if (!jr.at("label").is_null()) r.label = jr["label"].get<int>();
        r.ts = jr.at("ts").get<std::int64_t>();
        batch.push_back(std::move(r));
      }
      st.ingest(batch);
    } else if (kind == "evaluate") {
      st.evaluate();
    }
    // transition/select events are derived; re-running the drivers
    // regenerates them.
  }
  return st;
}

}  // namespace turbid

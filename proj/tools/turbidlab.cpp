// turbidlab: single binary driving the library end to end — figure data
// exports, Monte Carlo sampling runs, black-box attack sweeps, stream
// monitoring, and mitigation-table precomputation.
//
// Every command is deterministic given its flags; randomized commands refuse
// to run without --seed. Exit status 0 means every requested file was written
// and the internal density checks passed.

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <cstdio>
#include <filesystem>
#include <fstream>
#include <iostream>
#include <sstream>
#include <stdexcept>
#include <string>
#include <utility>
#include <vector>

#include <CLI11.hpp>
#include <json.hpp>

#include "turbid/campaign.hpp"
#include "turbid/csv.hpp"
#include "turbid/dgp.hpp"
#include "turbid/estimator.hpp"
#include "turbid/monitor.hpp"
#include "turbid/roc.hpp"
#include "turbid/svg.hpp"

namespace fs = std::filesystem;
using namespace turbid;

namespace {

struct GlobalOpts {
  std::uint64_t seed = 0;
  bool seed_set = false;
  std::string out = ".";
  std::string format = "csv";

  bool svg() const { return format == "svg"; }
  std::string path(const std::string& name) const {
    return (fs::path(out) / name).string();
  }
};

void ensure_outdir(const GlobalOpts& g) {
  std::error_code ec;
  fs::create_directories(g.out, ec);
  if (ec || !fs::is_directory(g.out))
    throw std::runtime_error("cannot create output directory " + g.out);
}

void require_seed(const GlobalOpts& g, const char* cmd) {
  if (!g.seed_set)
    throw std::runtime_error(std::string(cmd) +
                             " draws random samples; pass --seed <u64>");
}

std::ofstream open_out(const std::string& path) {
  std::ofstream out(path);
  if (!out) throw std::runtime_error("cannot open " + path);
  return out;
}

std::string slurp(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw std::runtime_error("cannot open " + path);
  std::ostringstream ss;
  ss << in.rdbuf();
  return ss.str();
}

void check_mass(const ScoreDensity& d, const std::string& what) {
  if (std::abs(d.mass() - 1.0) > 1e-6)
    throw std::runtime_error(what + ": density mass is " + fmt_g(d.mass()) +
                             ", expected 1");
}

std::vector<double> linspace(Interval range, int points) {
  std::vector<double> xs(points);
  for (int i = 0; i < points; ++i)
    xs[i] = range.lo + (range.hi - range.lo) * i / (points - 1);
  xs.back() = range.hi;
  return xs;
}

// "s,<name>_pdf,<name>_cdf,... ,posterior" table over a shared grid.
void write_set_csv(const std::string& path, Interval range,
                   const std::vector<std::pair<std::string, ScoreDensity>>& ds,
                   const PosteriorCurve& post) {
  auto out = open_out(path);
  out << 's';
  for (const auto& [name, d] : ds) out << ',' << name << "_pdf," << name << "_cdf";
  out << ",posterior\n";
  for (double s : linspace(range, 1001)) {
    out << fmt_g(s);
    for (const auto& [name, d] : ds) out << ',' << fmt_g(d.pdf(s)) << ',' << fmt_g(d.cdf(s));
    out << ',' << fmt_g(post(s)) << '\n';
  }
}

// Generic "s,<col>..." table from named evaluators.
using NamedFn = std::pair<std::string, std::function<double(double)>>;
void write_curves_csv(const std::string& path, Interval range,
                      const std::vector<NamedFn>& cols) {
  auto out = open_out(path);
  out << 's';
  for (const auto& [name, fn] : cols) out << ',' << name;
  out << '\n';
  for (double s : linspace(range, 1001)) {
    out << fmt_g(s);
    for (const auto& [name, fn] : cols) out << ',' << fmt_g(fn(s));
    out << '\n';
  }
}

void curves_svg(const std::string& path, Interval range,
                const std::vector<NamedFn>& cols) {
  static const char* palette[] = {"#1f6fb2", "#d1495b", "#3a9d5c", "#8d6cab",
                                  "#c98a2b"};
  std::vector<SvgSeries> series;
  double ymin = 0.0, ymax = 0.0;
  int ci = 0;
  for (const auto& [name, fn] : cols) {
    SvgSeries s;
    s.color = palette[ci++ % 5];
    for (double x : linspace(range, 401)) {
      const double y = fn(x);
      ymin = std::min(ymin, y);
      ymax = std::max(ymax, y);
      s.points.emplace_back(x, y);
    }
    series.push_back(std::move(s));
  }
  if (!(ymax > ymin)) ymax = ymin + 1.0;
  write_svg_lines(path, series, {range.lo, range.hi}, {ymin, 1.05 * ymax});
}

void multi_roc_svg(const std::string& path,
                   const std::vector<const RocCurve*>& curves) {
  static const char* palette[] = {"#1f6fb2", "#d1495b", "#3a9d5c"};
  std::vector<SvgSeries> series;
  int ci = 0;
  for (const RocCurve* c : curves) {
    SvgSeries s;
    s.color = palette[ci++ % 3];
    for (const RocPoint& p : c->points()) s.points.emplace_back(p.fpr, p.tpr);
    series.push_back(std::move(s));
  }
  write_svg_lines(path, series, {0.0, 1.0}, {0.0, 1.0}, /*diagonal=*/true);
}

void write_roc(const GlobalOpts& g, const std::string& base,
               const RocCurve& curve) {
  curve.to_csv(g.path(base + ".csv"));
  if (g.svg()) curve.to_svg(g.path(base + ".svg"));
}

// ---------------------------------------------------------------------------

int cmd_figures(const GlobalOpts& g, const std::string& scenario_path) {
  const ReferenceDgp dgp;
  const Interval full = dgp.support();

  const ScoreDensity d0 = regular_conditional(dgp, 0);
  const ScoreDensity d1 = regular_conditional(dgp, 1);
  check_mass(d0, "class-0 conditional");
  check_mass(d1, "class-1 conditional");
  write_set_csv(g.path("regular_set.csv"), full,
                {{"class0", d0}, {"class1", d1}}, regular_posterior(dgp));
  write_roc(g, "regular_roc", roc_monotone_sweep(d0, d1));

  const ClarityPair cp = turbidity_conditionals(dgp);
  check_mass(cp.clear, "clear conditional");
  check_mass(cp.turbid, "turbid conditional");
  const PosteriorCurve tpost = turbidity_posterior(dgp);
  write_set_csv(g.path("turbidity_set.csv"), full,
                {{"clear", cp.clear}, {"turbid", cp.turbid}}, tpost);
  write_roc(g, "turbidity_roc", roc_multibranched(tpost, cp.clear, cp.turbid));

  const double cutoff = critical_cutoff(dgp);
  const PosteriorCurve reg_post = regular_posterior(dgp);
  const PosteriorCurve aug = augmented_posterior(dgp, cutoff);
  write_curves_csv(g.path("inversion_posterior.csv"), full,
                   {{"regular", [&](double s) { return reg_post(s); }},
                    {"augmented", [&](double s) { return aug(s); }}});
  write_roc(g, "inversion_roc", roc_multibranched(aug, d0, d1));

  const CampaignScenario sym = CampaignScenario::symmetric();
  const CampaignScenario asym =
      scenario_path.empty() ? CampaignScenario::asymmetric(dgp)
                            : CampaignScenario::from_json(slurp(scenario_path));
  const ToxicPair tsym = toxic_conditionals(dgp, sym);
  const ToxicPair tasym = toxic_conditionals(dgp, asym);
  check_mass(tsym.d0, "symmetric toxic class 0");
  check_mass(tsym.d1, "symmetric toxic class 1");
  check_mass(tasym.d0, "asymmetric toxic class 0");
  check_mass(tasym.d1, "asymmetric toxic class 1");

  const RocCurve pinch_sym = roc_monotone_sweep(tsym.d0, tsym.d1);
  const RocCurve pinch_asym = roc_monotone_sweep(tasym.d0, tasym.d1);
  const MitigationArtifact art =
      repair_posterior(tsym.d0, tsym.d1, sym.prior_mal, sym.threshold, sym.name);
  const RocCurve repaired =
      roc_multibranched(to_posterior_curve(art), tsym.d0, tsym.d1);
  {
    auto out = open_out(g.path("campaign_roc.csv"));
    out << "scenario,fpr,tpr,theta,branch\n";
    auto emit = [&](const char* key, const RocCurve& c) {
      for (const RocPoint& p : c.points())
        out << key << ',' << fmt_g(p.fpr) << ',' << fmt_g(p.tpr) << ','
            << fmt_g(p.theta) << ',' << p.branch << '\n';
    };
    emit("pinch_sym", pinch_sym);
    emit("pinch_asym", pinch_asym);
    emit("repaired_sym", repaired);
  }
  write_curves_csv(g.path("repair_posterior.csv"), art.support,
                   {{"posterior", [&](double s) { return art.posterior_at(s); }},
                    {"decision", [&](double s) { return double(art.decide(s)); }}});
  if (g.svg()) {
    curves_svg(g.path("regular_set.svg"), full,
               {{"pdf0", [&](double s) { return d0.pdf(s); }},
                {"pdf1", [&](double s) { return d1.pdf(s); }},
                {"posterior", [&](double s) { return reg_post(s); }}});
    curves_svg(g.path("turbidity_set.svg"), full,
               {{"clear", [&](double s) { return cp.clear.pdf(s); }},
                {"turbid", [&](double s) { return cp.turbid.pdf(s); }},
                {"posterior", [&](double s) { return tpost(s); }}});
    curves_svg(g.path("inversion_posterior.svg"), full,
               {{"regular", [&](double s) { return reg_post(s); }},
                {"augmented", [&](double s) { return aug(s); }}});
    multi_roc_svg(g.path("campaign_roc.svg"),
                  {&pinch_sym, &pinch_asym, &repaired});
    curves_svg(g.path("repair_posterior.svg"), art.support,
               {{"posterior", [&](double s) { return art.posterior_at(s); }}});
  }
  std::cout << "figures: 8 data files written to " << g.out << "\n";
  return 0;
}

int cmd_simulate(const GlobalOpts& g, std::size_t n, bool toxic,
                 double threshold) {
  require_seed(g, "simulate");
  const ReferenceDgp dgp;
  const LabeledScoreSet set =
      toxic ? sample_campaign(dgp, CampaignScenario::symmetric(0.5, threshold),
                              n, g.seed)
            : sample_dgp(dgp, n, g.seed, threshold);
  set.to_csv(g.path("samples.csv"));

  const std::size_t n1 = set.count_label(1);
  const bool both = n1 > 0 && n1 < set.size();
  if (both) {
    const RocCurve roc = empirical_roc(set.scores, set.labels);
    write_roc(g, "empirical_roc", roc);
  } else {
    open_out(g.path("empirical_roc.csv")) << "fpr,tpr,theta,branch\n";
  }

  const std::size_t clear = set.count_clear();
  const std::size_t turbid = set.count_turbid();
  std::cout << "samples: " << set.size() << "\nclear: " << clear
            << "\nturbid: " << turbid << "\n";
  if (set.size() > 0) {
    char buf[32];
    std::snprintf(buf, sizeof buf, "%.4f",
                  double(clear) / double(set.size()));
    std::cout << "accuracy: " << buf << "\n";
  }
  return 0;
}

BlackBoxScorer make_scorer(const std::string& id) {
  if (id == "byte_mean") return byte_mean_scorer();
  if (id == "byte_diversity") return byte_diversity_scorer();
  if (id == "constant") return constant_scorer(0.5);
  throw std::runtime_error("unknown scorer " + id);
}

std::vector<std::uint8_t> decode_hex(const std::string& hex) {
  if (hex.size() % 2 != 0)
    throw std::runtime_error("hex payload has odd length");
  auto nib = [](char c) -> int {
    if (c >= '0' && c <= '9') return c - '0';
    if (c >= 'a' && c <= 'f') return c - 'a' + 10;
    if (c >= 'A' && c <= 'F') return c - 'A' + 10;
    throw std::runtime_error(std::string("bad hex digit '") + c + "'");
  };
  std::vector<std::uint8_t> bytes(hex.size() / 2);
  for (std::size_t i = 0; i < bytes.size(); ++i)
    bytes[i] = std::uint8_t(nib(hex[2 * i]) << 4 | nib(hex[2 * i + 1]));
  return bytes;
}

int cmd_attack(const GlobalOpts& g, const std::string& scorer_id,
               const std::string& seeds_path, std::size_t count, double bar,
               int budget) {
  require_seed(g, "attack");
  const BlackBoxScorer scorer = make_scorer(scorer_id);

  std::vector<std::pair<std::string, std::vector<std::uint8_t>>> inputs;
  if (!seeds_path.empty()) {
    std::ifstream in(seeds_path);
    if (!in) throw std::runtime_error("cannot open " + seeds_path);
    std::string line;
    std::size_t lineno = 0;
    while (std::getline(in, line)) {
      ++lineno;
      if (line.empty()) continue;
      try {
        const nlohmann::json j = nlohmann::json::parse(line);
        inputs.emplace_back(j.at("id").get<std::string>(),
                            decode_hex(j.at("hex").get<std::string>()));
      } catch (const std::exception& e) {
        throw std::runtime_error("seeds line " + std::to_string(lineno) +
                                 ": " + e.what());
      }
    }
  } else {
    // No file: synthesize `count` 64-byte seed inputs from the rng seed.
    Philox rng(g.seed);
    for (std::size_t i = 0; i < count; ++i) {
      char id[32];
      std::snprintf(id, sizeof id, "gen-%03u", unsigned(i));
      std::vector<std::uint8_t> bytes(64);
      for (auto& b : bytes) b = std::uint8_t(rng.next_u32() & 0xff);
      inputs.emplace_back(id, std::move(bytes));
    }
  }

  auto out = open_out(g.path("attack_results.csv"));
  out << "id,success,phase,confidence,trials,input_size\n";
  std::size_t successes = 0;
  for (std::size_t i = 0; i < inputs.size(); ++i) {
    const auto& [id, bytes] = inputs[i];
    const AttackResult r = high_confidence_attack(
        scorer, bytes, bar, budget, g.seed + 1000003 * (i + 1));
    successes += r.success;
    const char* phase = r.phase == AttackPhase::constant_fill ? "constant_fill"
                        : r.phase == AttackPhase::random_chunk ? "random_chunk"
                                                               : "failed";
    out << id << ',' << int(r.success) << ',' << phase << ','
        << fmt_g(r.confidence) << ',' << r.trials << ','
        << r.adversarial_input.size() << '\n';
  }
  std::cout << "attack: " << successes << "/" << inputs.size()
            << " seeds cleared " << fmt_g(bar) << "\n";
  return 0;
}

int cmd_monitor(const GlobalOpts& g, const std::string& stream_path,
                const std::string& table_path, bool prophylactic,
                std::size_t batch_size) {
  const ReferenceDgp dgp;
  MonitorPolicy pol;
  pol.prophylactic = prophylactic;
  HealthState st(dgp, pol);
  if (!table_path.empty())
    st.set_table(MitigationTable::from_json(slurp(table_path)));

  const std::vector<StreamRecord> records =
      read_stream_jsonl_file(stream_path);

  // Replay in batches; each record is scored with the transform that was
  // live when it arrived, as a deployed monitor would.
  auto tout = open_out(g.path("transformed.csv"));
  tout << "id,score,posterior,decision\n";
  for (std::size_t start = 0; start < records.size(); start += batch_size) {
    const std::size_t stop = std::min(records.size(), start + batch_size);
    std::vector<StreamRecord> batch(records.begin() + start,
                                    records.begin() + stop);
    for (const StreamRecord& r : batch) {
      const auto [p, d] = st.transform(r.score);
      tout << r.id << ',' << fmt_g(r.score) << ',' << fmt_g(p) << ',' << d
           << '\n';
    }
    st.ingest(batch);
    st.evaluate();
  }

  open_out(g.path("state.json")) << st.to_json() << '\n';
  open_out(g.path("events.jsonl")) << st.events_jsonl();

  // Before/after ROC over the labeled slice of the stream: raw score versus
  // the final transform's posterior.
  std::vector<double> scores, post;
  std::vector<int> labels;
  for (const StreamRecord& r : records)
    if (r.label) {
      scores.push_back(r.score);
      post.push_back(st.transform(r.score).first);
      labels.push_back(*r.label);
    }
  const std::size_t n1 = std::size_t(std::count(labels.begin(), labels.end(), 1));
  if (n1 > 0 && n1 < labels.size()) {
    write_roc(g, "roc_before", empirical_roc(scores, labels));
    write_roc(g, "roc_after", empirical_roc(post, labels));
  } else {
    open_out(g.path("roc_before.csv")) << "fpr,tpr,theta,branch\n";
    open_out(g.path("roc_after.csv")) << "fpr,tpr,theta,branch\n";
  }

  std::cout << "trace: regular";
  std::size_t deployments = 0;
  for (const MonitorEvent& e : st.history()) {
    if (e.kind == "transition") {
      const std::string to = e.payload.at("to").get<std::string>();
      std::cout << " -> " << to;
      deployments += to == "mitigated";
    }
  }
  std::cout << "\nmode: " << mode_name(st.mode())
            << "\ndeployments: " << deployments << "\n";
  return 0;
}

int cmd_precompute(const GlobalOpts& g) {
  require_seed(g, "precompute");
  const ReferenceDgp dgp;
  const MitigationTable table =
      precompute_table(dgp, default_fingerprint_grid(), g.seed);
  open_out(g.path("table.json")) << table.to_json() << '\n';
  std::cout << "precompute: " << table.entries.size() << " entries\n";
  return 0;
}

int cmd_roc(const GlobalOpts& g, const std::string& kind,
            const std::string& scenario_path) {
  const ReferenceDgp dgp;
  RocCurve curve = [&] {
    if (!scenario_path.empty()) {
      const CampaignScenario sc =
          CampaignScenario::from_json(slurp(scenario_path));
      const ToxicPair tp = toxic_conditionals(dgp, sc);
      check_mass(tp.d0, "scenario class 0");
      check_mass(tp.d1, "scenario class 1");
      return roc_monotone_sweep(tp.d0, tp.d1);
    }
    const ScoreDensity d0 = regular_conditional(dgp, 0);
    const ScoreDensity d1 = regular_conditional(dgp, 1);
    if (kind == "regular") return roc_monotone_sweep(d0, d1);
    if (kind == "turbidity") {
      const ClarityPair cp = turbidity_conditionals(dgp);
      return roc_multibranched(turbidity_posterior(dgp), cp.clear, cp.turbid);
    }
    // "augmented": the inverted statistic over the regular conditionals.
    return roc_multibranched(
        augmented_posterior(dgp, critical_cutoff(dgp)), d0, d1);
  }();
  write_roc(g, "roc", curve);
  std::cout << "roc: auc " << fmt_g(curve.auc()) << ", "
            << curve.branch_count() << " branch(es)\n";
  return 0;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"turbidity-detection lab: figure data, simulations, attack "
               "sweeps, stream monitoring"};
  app.require_subcommand(1);

  GlobalOpts g;
  app.add_option("--seed", g.seed, "rng seed (required for random commands)");
  app.add_option("--out", g.out, "output directory")->capture_default_str();
  app.add_option("--format", g.format, "csv | svg (svg adds plot siblings)")
      ->check(CLI::IsMember({"csv", "svg"}))
      ->capture_default_str();

  std::string scenario_path, seeds_path, stream_path, table_path;
  std::string scorer_id = "byte_mean", roc_kind = "regular";
  std::size_t sim_n = 10000, attack_count = 100, batch_size = 1000;
  bool toxic = false, prophylactic = false;
  double threshold = 0.0, bar = 0.97;
  int budget = 1000;

  CLI::App* fig = app.add_subcommand("figures", "export figure data tables");
  fig->add_option("--scenario", scenario_path,
                  "campaign json replacing the built-in asymmetric scenario");

  CLI::App* sim = app.add_subcommand("simulate", "labeled Monte Carlo draws");
  sim->add_option("-n,--samples", sim_n, "sample count")->capture_default_str();
  sim->add_flag("--toxic", toxic, "draw clarity-balanced (accuracy near 1/2)");
  sim->add_option("--threshold", threshold, "decision threshold")
      ->capture_default_str();

  CLI::App* atk = app.add_subcommand("attack", "black-box confidence climbing");
  atk->add_option("--scorer", scorer_id, "byte_mean | byte_diversity | constant")
      ->check(CLI::IsMember({"byte_mean", "byte_diversity", "constant"}))
      ->capture_default_str();
  atk->add_option("--seeds", seeds_path, "jsonl seed inputs {id, hex}");
  atk->add_option("--count", attack_count,
                  "synthesized seed inputs when --seeds is absent")
      ->capture_default_str();
  atk->add_option("--bar", bar, "confidence bar")->capture_default_str();
  atk->add_option("--budget", budget, "chunk-phase trial budget")
      ->capture_default_str();

  CLI::App* mon = app.add_subcommand("monitor", "replay a recorded stream");
  mon->add_option("--stream", stream_path, "jsonl stream file")->required();
  mon->add_option("--table", table_path, "precomputed mitigation table json");
  mon->add_flag("--prophylactic", prophylactic,
                "route decisions through the table from the start");
  mon->add_option("--batch", batch_size, "records per evaluation window")
      ->capture_default_str();

  CLI::App* pre = app.add_subcommand("precompute",
                                     "fit the mitigation table over the grid");

  CLI::App* roc = app.add_subcommand("roc", "export one exact roc curve");
  roc->add_option("--kind", roc_kind, "regular | turbidity | augmented")
      ->check(CLI::IsMember({"regular", "turbidity", "augmented"}));
  roc->add_option("--scenario", scenario_path, "campaign json (overrides --kind)");

  for (CLI::App* sub : {fig, sim, atk, mon, pre, roc}) sub->fallthrough();

  CLI11_PARSE(app, argc, argv);
  g.seed_set = app.count("--seed") > 0;

  try {
    ensure_outdir(g);
    if (fig->parsed()) return cmd_figures(g, scenario_path);
    if (sim->parsed()) return cmd_simulate(g, sim_n, toxic, threshold);
    if (atk->parsed())
      return cmd_attack(g, scorer_id, seeds_path, attack_count, bar, budget);
    if (mon->parsed())
      return cmd_monitor(g, stream_path, table_path, prophylactic, batch_size);
    if (pre->parsed()) return cmd_precompute(g);
    if (roc->parsed()) return cmd_roc(g, roc_kind, scenario_path);
  } catch (const std::exception& e) {
    std::cerr << "turbidlab: " << e.what() << "\n";
    return 1;
  }
  return 0;
}

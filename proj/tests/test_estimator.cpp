#include <doctest.h>

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <filesystem>
#include <fstream>
#include <vector>

#include "turbid/campaign.hpp"
#include "turbid/dgp.hpp"
#include "turbid/estimator.hpp"
#include "turbid/numerics.hpp"
#include "turbid/rng.hpp"

using namespace turbid;

namespace {

// Hand-checked bandwidth for {1..8}: sd = sqrt(6) beats IQR/1.34 = 3.5/1.34,
// so B = 0.9 * sqrt(6) * 8^(-1/5).
constexpr double kHandBandwidth = 1.4544544918317595;
constexpr double kInvSqrt2Pi = 0.3989422804014327;
constexpr double kPiThird = 1.0471975511965976;
constexpr double kClarityBoundary = 2.597334288604036;

double l1_distance(const ScoreDensity& a, const ScoreDensity& b, double lo,
                   double hi, int n) {
  const double h = (hi - lo) / (n - 1);
  double acc = 0.0;
  for (int i = 0; i < n; ++i) {
    const double s = lo + i * h;
    const double w = (i == 0 || i == n - 1) ? 0.5 : 1.0;
    acc += w * std::abs(a.pdf(s) - b.pdf(s));
  }
  return acc * h;
}

}  // namespace

TEST_CASE("silverman bandwidth matches the closed form on a hand sample") {
  const std::vector<double> xs{1, 2, 3, 4, 5, 6, 7, 8};
  CHECK(silverman_bandwidth(xs) == doctest::Approx(kHandBandwidth).epsilon(1e-12));

  std::vector<double> scaled;
  for (double x : xs) scaled.push_back(10.0 * x);
  CHECK(silverman_bandwidth(scaled) ==
        doctest::Approx(10.0 * kHandBandwidth).epsilon(1e-12));
}

TEST_CASE("silverman bandwidth rejects degenerate samples") {
  CHECK_THROWS_AS(silverman_bandwidth({}), std::invalid_argument);
  CHECK_THROWS_AS(silverman_bandwidth({3.0}), std::invalid_argument);
  CHECK_THROWS_AS(silverman_bandwidth({3.0, 3.0}), std::invalid_argument);
  CHECK_THROWS_AS(silverman_bandwidth({3.0, 3.0, 3.0, 3.0}),
                  std::invalid_argument);
}

TEST_CASE("silverman bandwidth tracks the reference rate on normal draws") {
  Philox rng(4101);
  std::vector<double> xs;
  for (int i = 0; i < 1000; ++i) xs.push_back(rng.normal());
  const double b = silverman_bandwidth(xs);
  // 0.9 * 1000^(-1/5) = 0.226 for a unit-spread sample.
  CHECK(b > 0.19);
  CHECK(b < 0.27);
}

TEST_CASE("single-kernel kde reproduces the standard normal") {
  const ScoreDensity k = kde_density({0.0}, 1.0);
  CHECK(k.kind() == ScoreDensity::Kind::kde);
  CHECK(k.support().lo == doctest::Approx(-8.0).epsilon(1e-12));
  CHECK(k.support().hi == doctest::Approx(8.0).epsilon(1e-12));
  CHECK(k.pdf(0.0) == doctest::Approx(kInvSqrt2Pi).epsilon(1e-12));
  CHECK(k.pdf(1.0) == doctest::Approx(k.pdf(-1.0)).epsilon(1e-14));
  CHECK(k.cdf(0.0) == doctest::Approx(0.5).epsilon(1e-12));
  CHECK(k.quantile(0.5) == doctest::Approx(0.0).epsilon(1e-9));
}

TEST_CASE("kde rejects empty samples and non-positive bandwidths") {
  CHECK_THROWS_AS(kde_density({}, 1.0), std::invalid_argument);
  CHECK_THROWS_AS(kde_density({1.0, 2.0}, 0.0), std::invalid_argument);
  CHECK_THROWS_AS(kde_density({1.0, 2.0}, -0.5), std::invalid_argument);
}

TEST_CASE("small-sample kde equals a brute-force kernel sum") {
  const std::vector<double> centers{-2.0, -1.2, -0.3, 0.4, 0.9, 2.2, 3.1};
  const double b = 0.5;
  const ScoreDensity k = kde_density(centers, b);

  for (int i = 0; i <= 100; ++i) {
    const double s = -4.0 + 8.0 * i / 100.0;
    double pdf = 0.0, cdf = 0.0;
    for (double c : centers) {
      pdf += num::normal_pdf((s - c) / b);
      cdf += num::normal_cdf((s - c) / b);
    }
    pdf /= centers.size() * b;
    cdf /= centers.size();
    CHECK(k.pdf(s) == doctest::Approx(pdf).epsilon(1e-12));
    CHECK(k.cdf(s) == doctest::Approx(cdf).epsilon(1e-12));
  }

  const double mass =
      num::quad([&](double s) { return k.pdf(s); }, k.support().lo,
                k.support().hi, 1e-12);
  CHECK(mass == doctest::Approx(1.0).epsilon(1e-9));
}

TEST_CASE("pooled kde tracks the exact kernel sum within quantization error") {
  Philox rng(4102);
  std::vector<double> xs;
  for (int i = 0; i < 6000; ++i) xs.push_back(rng.normal());
  const double b = silverman_bandwidth(xs);
  const ScoreDensity k = kde_density(xs, b);

  for (int i = 0; i <= 20; ++i) {
    const double s = -3.0 + 6.0 * i / 20.0;
    double pdf = 0.0, cdf = 0.0;
    for (double c : xs) {
      pdf += num::normal_pdf((s - c) / b);
      cdf += num::normal_cdf((s - c) / b);
    }
    pdf /= xs.size() * b;
    cdf /= xs.size();
    CHECK(std::abs(k.pdf(s) - pdf) < 5e-4);
    CHECK(std::abs(k.cdf(s) - cdf) < 1e-4);
  }
}

TEST_CASE("kde error against the generating density shrinks with sample size") {
  const ReferenceDgp dgp;
  const ScoreDensity truth = regular_conditional(dgp, 1);
  std::vector<double> l1s;
  int n = 1000;
  for (unsigned seed : {4111u, 4112u, 4113u}) {
    Philox rng(seed);
    std::vector<double> xs;
    xs.reserve(n);
    for (int i = 0; i < n; ++i)
      xs.push_back(sample_class_conditional(dgp, 1, dgp.support(), rng));
    const ScoreDensity k = kde_density(xs, silverman_bandwidth(xs));
    l1s.push_back(l1_distance(k, truth, -10.0, 10.0, 1501));
    n *= 10;
  }
  CHECK(l1s[0] > l1s[1]);
  CHECK(l1s[1] > l1s[2]);
  CHECK(l1s[2] < 0.05);
}

TEST_CASE("crossover search recovers the class boundary of the reference pair") {
  const ReferenceDgp dgp;
  const auto roots =
      find_crossovers(regular_conditional(dgp, 0), regular_conditional(dgp, 1));
  REQUIRE(roots.size() == 1);
  CHECK(std::abs(roots[0]) < 1e-9);
}

TEST_CASE("crossover search finds both clarity boundaries") {
  const ReferenceDgp dgp;
  const ClarityPair pair = turbidity_conditionals(dgp, 0.0);
  const auto roots = find_crossovers(pair.clear, pair.turbid);
  REQUIRE(roots.size() == 2);
  CHECK(roots[0] == doctest::Approx(-kClarityBoundary).epsilon(1e-9));
  CHECK(roots[1] == doctest::Approx(kClarityBoundary).epsilon(1e-9));
}

TEST_CASE("crossover search pins a synthetic three-crossing pair exactly") {
  // Flat density against a sine-modulated one; the modulation integrates to
  // zero over the symmetric range, so both masses are exactly 1.
  const ScoreDensity flat = ScoreDensity::analytic(
      {-10.0, 10.0}, [](double) { return 0.05; },
      [](double s) { return (s + 10.0) / 20.0; });
  const ScoreDensity wavy = ScoreDensity::analytic(
      {-10.0, 10.0},
      [](double s) { return (1.0 + 0.5 * std::sin(3.0 * s)) / 20.0; },
      [](double s) {
        return (s + 10.0) / 20.0 +
               (std::cos(30.0) - std::cos(3.0 * s)) / 120.0;
      });

  const auto roots = find_crossovers(wavy, flat, {-1.5, 1.5});
  REQUIRE(roots.size() == 3);
  CHECK(roots[0] == doctest::Approx(-kPiThird).epsilon(1e-9));
  CHECK(std::abs(roots[1]) < 1e-9);
  CHECK(roots[2] == doctest::Approx(kPiThird).epsilon(1e-9));
}

TEST_CASE("identical densities cross nowhere and empty intervals are rejected") {
  const ScoreDensity flat = ScoreDensity::analytic(
      {-10.0, 10.0}, [](double) { return 0.05; },
      [](double s) { return (s + 10.0) / 20.0; });
  CHECK(find_crossovers(flat, flat, {-5.0, 5.0}).empty());
  CHECK_THROWS_AS(find_crossovers(flat, flat, {2.0, 2.0}),
                  std::invalid_argument);
}

TEST_CASE("empirical repair rediscovers the symmetric-campaign structure") {
  const ReferenceDgp dgp;
  const LabeledScoreSet set =
      sample_campaign(dgp, CampaignScenario::symmetric(), 40000, 4120);
  std::vector<double> s0, s1;
  for (std::size_t i = 0; i < set.size(); ++i)
    (set.labels[i] == 0 ? s0 : s1).push_back(set.scores[i]);
  REQUIRE(s0.size() > 5000);  // both classes must take the pooled-kde path
  REQUIRE(s1.size() > 5000);

  const MitigationArtifact art = empirical_repair(s0, s1, 0.5, 0.0, "sym-fit");
  CHECK(art.scenario_id == "sym-fit");
  REQUIRE(art.breakpoints.size() == 3);
  CHECK(std::abs(art.breakpoints[0] + kClarityBoundary) < 0.15);
  CHECK(std::abs(art.breakpoints[1]) < 0.15);
  CHECK(std::abs(art.breakpoints[2] - kClarityBoundary) < 0.15);
  CHECK(art.region_flags == std::vector<int>{0, 1, 0, 1});
  CHECK_FALSE(art.threshold_only());
  // The fitted middle crossing sits a hair off the raw threshold, so the
  // reversal zone may be split by a sliver of agreement around it; check
  // the covered span rather than the interval count.
  REQUIRE(!art.reversal_intervals.empty());
  CHECK(std::abs(art.reversal_intervals.front().first + kClarityBoundary) < 0.15);
  CHECK(std::abs(art.reversal_intervals.back().second - kClarityBoundary) < 0.15);
  double covered = 0.0;
  for (const auto& [a, b] : art.reversal_intervals) covered += b - a;
  CHECK(covered > 2.0 * kClarityBoundary - 0.3);
}

TEST_CASE("empirical repair on well-separated classes is threshold-only") {
  Philox rng(4127);
  std::vector<double> s0, s1;
  for (int i = 0; i < 200; ++i) {
    s0.push_back(-5.0 + 0.5 * rng.normal());
    s1.push_back(5.0 + 0.5 * rng.normal());
  }
  const MitigationArtifact art = empirical_repair(s0, s1, 0.5);
  CHECK(art.threshold_only());
  CHECK(art.reversal_intervals.empty());
}

TEST_CASE("empirical repair resolves a four-crossing block layout") {
  // Class 1 occupies three uniform blocks, class 0 the two gaps between
  // them; the repaired rule must alternate across four crossings.
  Philox rng(4131);
  std::vector<double> s0, s1;
  for (int i = 0; i < 3000; ++i) {
    const double c1[] = {-8.0, 0.0, 8.0};
    s1.push_back(c1[rng.below(3)] + rng.uniform(-1.0, 1.0));
    const double c0[] = {-4.0, 4.0};
    s0.push_back(c0[rng.below(2)] + rng.uniform(-1.0, 1.0));
  }
  const MitigationArtifact art = empirical_repair(s0, s1, 0.5);
  REQUIRE(art.breakpoints.size() == 4);
  CHECK(std::abs(art.breakpoints[0] + 6.0) < 1.2);
  CHECK(std::abs(art.breakpoints[1] + 2.0) < 1.2);
  CHECK(std::abs(art.breakpoints[2] - 2.0) < 1.2);
  CHECK(std::abs(art.breakpoints[3] - 6.0) < 1.2);
  CHECK(art.region_flags == std::vector<int>{1, 0, 1, 0, 1});
  CHECK(art.decide(-8.0) == 1);
  CHECK(art.decide(-4.0) == 0);
  CHECK(art.decide(0.0) == 1);
  CHECK(art.decide(4.0) == 0);
  CHECK(art.decide(8.0) == 1);
}

TEST_CASE("unfolding reduces multiclass rows to target-vs-best-rival margins") {
  MulticlassScores m;
  m.per_class_preactivations = {{1.0, 5.0, 3.0}};
  m.target_class = 1;
  CHECK(unfold_scores(m) == std::vector<double>{1.0});

  m.per_class_preactivations = {{3.0, 1.0, 2.0}, {2.0, 2.0, 2.0}};
  m.target_class = 0;
  const auto out = unfold_scores(m);
  REQUIRE(out.size() == 2);
  CHECK(out[0] == doctest::Approx(0.5).epsilon(1e-15));
  CHECK(out[1] == doctest::Approx(0.0).epsilon(1e-15));
}

TEST_CASE("unfolding a two-class row is half the score difference") {
  MulticlassScores m;
  m.per_class_preactivations = {{-1.25, 2.75}};
  m.target_class = 1;
  CHECK(unfold_scores(m)[0] == doctest::Approx(2.0).epsilon(1e-15));
}

TEST_CASE("unfolding is invariant to a constant shift of the row") {
  Philox rng(4140);
  MulticlassScores m, shifted;
  m.target_class = shifted.target_class = 2;
  for (int i = 0; i < 50; ++i) {
    std::vector<double> row, row2;
    for (int j = 0; j < 5; ++j) row.push_back(rng.uniform(-3.0, 3.0));
    for (double v : row) row2.push_back(v + 7.25);
    m.per_class_preactivations.push_back(row);
    shifted.per_class_preactivations.push_back(row2);
  }
  const auto a = unfold_scores(m);
  const auto b = unfold_scores(shifted);
  for (std::size_t i = 0; i < a.size(); ++i)
    CHECK(a[i] == doctest::Approx(b[i]).epsilon(1e-12));
}

TEST_CASE("unfolding validates row shape and target index") {
  MulticlassScores m;
  m.per_class_preactivations = {{1.0}};
  m.target_class = 0;
  CHECK_THROWS_AS(unfold_scores(m), std::invalid_argument);

  m.per_class_preactivations = {{1.0, 2.0}, {1.0, 2.0, 3.0}};
  CHECK_THROWS_AS(unfold_scores(m), std::invalid_argument);

  m.per_class_preactivations = {{1.0, 2.0}};
  m.target_class = 2;
  CHECK_THROWS_AS(unfold_scores(m), std::invalid_argument);
}

TEST_CASE("score csv loader splits classes and flags bad records") {
  namespace fs = std::filesystem;
  const fs::path good = fs::temp_directory_path() / "turbid_scores_good.csv";
  {
    std::ofstream out(good);
    out << "score,label\n1.5,0\n-2.25,1\n3,1\n";
  }
  const auto [c0, c1] = load_class_scores_csv(good.string());
  CHECK(c0 == std::vector<double>{1.5});
  CHECK(c1 == std::vector<double>{-2.25, 3.0});
  fs::remove(good);

  const fs::path bad = fs::temp_directory_path() / "turbid_scores_bad.csv";
  {
    std::ofstream out(bad);
    out << "score,label\n1.5,0\noops,1\n";
  }
  bool threw = false;
  try {
    load_class_scores_csv(bad.string());
  } catch (const std::runtime_error& e) {
    threw = true;
    CHECK(std::string(e.what()).find("line 3") != std::string::npos);
  }
  CHECK(threw);
  fs::remove(bad);

  const fs::path nohdr = fs::temp_directory_path() / "turbid_scores_hdr.csv";
  {
    std::ofstream out(nohdr);
    out << "s,l\n1.5,0\n";
  }
  CHECK_THROWS_AS(load_class_scores_csv(nohdr.string()), std::runtime_error);
  fs::remove(nohdr);
}

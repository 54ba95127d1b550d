#include "turbid/roc.hpp"

#include <algorithm>
#include <cmath>
#include <fstream>
#include <set>
#include <stdexcept>

#include "turbid/csv.hpp"
#include "turbid/numerics.hpp"
#include "turbid/svg.hpp"

namespace turbid {

RocCurve::RocCurve(std::vector<RocPoint> points) : points_(std::move(points)) {
  if (points_.size() < 2)
    throw std::invalid_argument("RocCurve: need at least 2 points");
  for (std::size_t i = 0; i < points_.size(); ++i) {
    RocPoint& p = points_[i];
    if (p.fpr < -1e-9 || p.fpr > 1.0 + 1e-9 || p.tpr < -1e-9 ||
        p.tpr > 1.0 + 1e-9)
      throw std::invalid_argument("RocCurve: coordinates outside [0, 1]");
    p.fpr = std::clamp(p.fpr, 0.0, 1.0);
    p.tpr = std::clamp(p.tpr, 0.0, 1.0);
    if (i > 0 && p.theta > points_[i - 1].theta + 1e-12)
      throw std::invalid_argument("RocCurve: thetas must be non-increasing");
  }
  const RocPoint& first = points_.front();
  const RocPoint& last = points_.back();
  if (std::abs(first.fpr) > 1e-9 || std::abs(first.tpr) > 1e-9 ||
      std::abs(last.fpr - 1.0) > 1e-9 || std::abs(last.tpr - 1.0) > 1e-9)
    throw std::invalid_argument(
        "RocCurve: curve must run from (0,0) to (1,1)");
  std::set<int> ids;
  for (const RocPoint& p : points_) ids.insert(p.branch);
  branch_count_ = static_cast<int>(ids.size());
  auc_ = 0.0;
  for (std::size_t i = 1; i < points_.size(); ++i)
    auc_ += 0.5 * (points_[i].tpr + points_[i - 1].tpr) *
            (points_[i].fpr - points_[i - 1].fpr);
}

void RocCurve::to_csv(const std::string& path) const {
  std::ofstream out(path);
  if (!out) throw std::runtime_error("cannot open " + path);
  out << "fpr,tpr,theta,branch\n";
  for (const RocPoint& p : points_)
    out << fmt_g(p.fpr) << ',' << fmt_g(p.tpr) << ',' << fmt_g(p.theta)
        << ',' << p.branch << '\n';
}

void RocCurve::to_svg(const std::string& path) const {
  static const char* palette[] = {"#1f6fb2", "#d1495b", "#3a9d5c", "#8d6cab",
                                  "#c98a2b", "#4f6d7a"};
  std::vector<SvgSeries> series;
  SvgSeries cur;
  int cur_branch = points_.front().branch;
  cur.color = palette[0];
  for (const RocPoint& p : points_) {
    if (p.branch != cur_branch) {
      series.push_back(cur);
      cur = SvgSeries{};
      cur_branch = p.branch;
      cur.color = palette[series.size() % 6];
    }
    cur.points.emplace_back(p.fpr, p.tpr);
  }
  series.push_back(cur);
  write_svg_lines(path, series, {0.0, 1.0}, {0.0, 1.0}, /*diagonal=*/true);
}

RocCurve roc_monotone_sweep(const ScoreDensity& d0, const ScoreDensity& d1,
                            int points) {
  if (points < 2)
    throw std::invalid_argument("roc_monotone_sweep: need >= 2 points");
  const double lo = std::min(d0.support().lo, d1.support().lo);
  const double hi = std::max(d0.support().hi, d1.support().hi);
  std::vector<RocPoint> pts;
  pts.reserve(points);
  for (int i = 0; i < points; ++i) {
    const double t = hi - (hi - lo) * i / static_cast<double>(points - 1);
    pts.push_back({1.0 - d0.cdf(t), 1.0 - d1.cdf(t), t, 1});
  }
  return RocCurve(std::move(pts));
}

std::vector<double> default_theta_grid(const PosteriorCurve& stat,
                                       int points) {
  std::vector<double> thetas;
  thetas.reserve(points + stat.extremum_preimages().size() + 2);
  for (int k = 1; k <= points; ++k)
    thetas.push_back(static_cast<double>(k) / (points + 1));
  for (double s : stat.extremum_preimages()) thetas.push_back(stat(s));
  thetas.push_back(0.0);
  thetas.push_back(1.0);
  std::sort(thetas.begin(), thetas.end(), std::greater<>());
  thetas.erase(std::unique(thetas.begin(), thetas.end(),
                           [](double a, double b) {
                             return std::abs(a - b) < 1e-15;
                           }),
               thetas.end());
  return thetas;
}

RocCurve roc_multibranched(const PosteriorCurve& stat, const ScoreDensity& d0,
                           const ScoreDensity& d1,
                           std::vector<double> thetas) {
  const auto& pre = stat.extremum_preimages();

  struct Segment {
    double a, b;    // score interval
    double va, vb;  // statistic at the endpoints
    int dir;        // +1 rising, -1 falling, 0 flat
  };
  std::vector<Segment> segs;
  for (std::size_t i = 1; i < pre.size(); ++i) {
    Segment s{pre[i - 1], pre[i], stat(pre[i - 1]), stat(pre[i]), 0};
    if (s.vb > s.va + 1e-12)
      s.dir = 1;
    else if (s.vb < s.va - 1e-12)
      s.dir = -1;
    segs.push_back(s);
  }
  // The telescoping signs assume the first moving piece rises; if it falls,
  // a degenerate leading piece restores the parity.
  for (const Segment& s : segs) {
    if (s.dir == 0) continue;
    if (s.dir < 0)
      segs.insert(segs.begin(),
                  {pre.front(), pre.front(), segs.front().va,
                   segs.front().va, 0});
    break;
  }

  if (thetas.empty()) thetas = default_theta_grid(stat);
  std::sort(thetas.begin(), thetas.end(), std::greater<>());

  const double base = (segs.size() % 2 == 1) ? 1.0 : 0.0;
  std::vector<RocPoint> pts;
  std::vector<std::vector<int>> masks;
  pts.reserve(thetas.size());
  for (double theta : thetas) {
    double fpr = base, tpr = base;
    std::vector<int> mask(segs.size(), 0);
    for (std::size_t i = 0; i < segs.size(); ++i) {
      const Segment& sg = segs[i];
      const double vlo = std::min(sg.va, sg.vb);
      const double vhi = std::max(sg.va, sg.vb);
      double c;
      if (sg.a == sg.b) {
        c = sg.a;
      } else if (theta > vhi) {
        c = (sg.dir >= 0) ? sg.b : sg.a;  // level set empty in this piece
      } else if (theta < vlo) {
        c = (sg.dir >= 0) ? sg.a : sg.b;  // entire piece in the level set
        mask[i] = 2;
      } else if (theta == sg.va) {
        c = sg.a;
        mask[i] = 1;
      } else if (theta == sg.vb) {
        c = sg.b;
        mask[i] = 1;
      } else {
        // theta lies strictly inside the piece's value range, so a root is
        // bracketed up to roundoff in stat(); fall back to the nearer
        // endpoint if roundoff flips a boundary sign.
        try {
          c = num::brentq([&](double s) { return stat(s) - theta; }, sg.a,
                          sg.b, 1e-12);
        } catch (const std::invalid_argument&) {
          c = (std::abs(theta - sg.va) < std::abs(theta - sg.vb)) ? sg.a
                                                                  : sg.b;
        }
        mask[i] = 1;
      }
      const double sign = (i % 2 == 0) ? -1.0 : 1.0;
      fpr += sign * d0.cdf(c);
      tpr += sign * d1.cdf(c);
    }
    pts.push_back({std::clamp(fpr, 0.0, 1.0), std::clamp(tpr, 0.0, 1.0),
                   theta, 0});
    masks.push_back(std::move(mask));
  }

  // Branches: contiguous runs with the same root pattern. Points whose level
  // set needed no root (curve tips) attach to their neighbor's branch.
  auto roots_of = [](const std::vector<int>& m) {
    std::vector<int> r;
    for (std::size_t i = 0; i < m.size(); ++i)
      if (m[i] == 1) r.push_back(static_cast<int>(i));
    return r;
  };
  int branch = 1;
  std::vector<int> prev_roots;
  for (std::size_t i = 0; i < pts.size(); ++i) {
    const auto r = roots_of(masks[i]);
    if (!r.empty()) {
      if (!prev_roots.empty() && r != prev_roots) ++branch;
      prev_roots = r;
    }
    pts[i].branch = branch;
  }

  // Classic completion: every ROC runs from (0,0) to (1,1) even when the
  // statistic itself never realizes those rates.
  if (std::abs(pts.front().fpr) > 1e-12 || std::abs(pts.front().tpr) > 1e-12)
    pts.insert(pts.begin(),
               {0.0, 0.0, pts.front().theta, pts.front().branch});
  if (std::abs(pts.back().fpr - 1.0) > 1e-12 ||
      std::abs(pts.back().tpr - 1.0) > 1e-12)
    pts.push_back({1.0, 1.0, pts.back().theta, pts.back().branch});
  return RocCurve(std::move(pts));
}

RocCurve empirical_roc(const std::vector<double>& values,
                       const std::vector<int>& labels, int target_label) {
  if (values.size() != labels.size())
    throw std::invalid_argument("empirical_roc: size mismatch");
  if (values.empty())
    throw std::invalid_argument("empirical_roc: empty input");
  std::size_t pos = 0, neg = 0;
  for (int l : labels) {
    if (l == target_label)
      ++pos;
    else
      ++neg;
  }
  if (pos == 0 || neg == 0)
    throw std::invalid_argument(
        "empirical_roc: both classes must be present");

  std::vector<std::size_t> order(values.size());
  for (std::size_t i = 0; i < order.size(); ++i) order[i] = i;
  std::sort(order.begin(), order.end(), [&](std::size_t a, std::size_t b) {
    return values[a] > values[b];
  });

  std::vector<RocPoint> pts;
  pts.push_back({0.0, 0.0, values[order.front()] + 1.0, 1});
  std::size_t tp = 0, fp = 0;
  std::size_t i = 0;
  while (i < order.size()) {
    const double v = values[order[i]];
    // Consume the whole tie group: one operating point per distinct value.
    while (i < order.size() && values[order[i]] == v) {
      if (labels[order[i]] == target_label)
        ++tp;
      else
        ++fp;
      ++i;
    }
    pts.push_back({static_cast<double>(fp) / neg,
                   static_cast<double>(tp) / pos, v, 1});
  }
  return RocCurve(std::move(pts));
}

OperatingPoint youden_point(const RocCurve& curve) {
  const RocPoint* best = nullptr;
  for (const RocPoint& p : curve.points()) {
    if (!best) {
      best = &p;
      continue;
    }
    const double j = p.tpr - p.fpr;
    const double jb = best->tpr - best->fpr;
    if (j > jb + 1e-12 ||
        (std::abs(j - jb) <= 1e-12 &&
         (p.fpr < best->fpr - 1e-12 ||
          (std::abs(p.fpr - best->fpr) <= 1e-12 && p.theta > best->theta))))
      best = &p;
  }
  return {best->fpr, best->tpr, best->theta, best->tpr - best->fpr};
}

double accuracy_at(double theta, const ScoreDensity& d0,
                   const ScoreDensity& d1, double prior1) {
  if (prior1 < 0.0 || prior1 > 1.0)
    throw std::invalid_argument("accuracy_at: prior outside [0, 1]");
  return (1.0 - prior1) * d0.cdf(theta) + prior1 * (1.0 - d1.cdf(theta));
}

namespace {

double interp_tpr(const std::vector<RocPoint>& sorted, double fpr) {
  if (fpr <= sorted.front().fpr) return sorted.front().tpr;
  if (fpr >= sorted.back().fpr) return sorted.back().tpr;
  auto it = std::lower_bound(
      sorted.begin(), sorted.end(), fpr,
      [](const RocPoint& p, double v) { return p.fpr < v; });
  const RocPoint& hi = *it;
  const RocPoint& lo = *(it - 1);
  if (hi.fpr == lo.fpr) return std::max(lo.tpr, hi.tpr);
  const double w = (fpr - lo.fpr) / (hi.fpr - lo.fpr);
  return lo.tpr + w * (hi.tpr - lo.tpr);
}

std::vector<RocPoint> fpr_sorted(const RocCurve& c) {
  std::vector<RocPoint> pts = c.points();
  std::stable_sort(pts.begin(), pts.end(),
                   [](const RocPoint& a, const RocPoint& b) {
                     return a.fpr < b.fpr;
                   });
  return pts;
}

}  // namespace

double tpr_at_fpr(const RocCurve& curve, double fpr) {
  return interp_tpr(fpr_sorted(curve), fpr);
}

double sup_distance(const RocCurve& a, const RocCurve& b, int grid) {
  const auto sa = fpr_sorted(a);
  const auto sb = fpr_sorted(b);
  double worst = 0.0;
  for (int i = 0; i <= grid; ++i) {
    const double x = static_cast<double>(i) / grid;
    worst = std::max(worst,
                     std::abs(interp_tpr(sa, x) - interp_tpr(sb, x)));
  }
  return worst;
}

}  // namespace turbid

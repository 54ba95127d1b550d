#pragma once

// Tiny standalone SVG writer: an axes box plus one polyline per series.
// Enough for eyeballing curves without pulling in a plotting stack.

#include <fstream>
#include <stdexcept>
#include <string>
#include <utility>
#include <vector>

#include "turbid/csv.hpp"

namespace turbid {

struct SvgSeries {
  std::vector<std::pair<double, double>> points;
  std::string color = "#1f6fb2";
};

inline void write_svg_lines(const std::string& path,
                            const std::vector<SvgSeries>& series,
                            std::pair<double, double> x_range,
                            std::pair<double, double> y_range,
                            bool diagonal = false) {
  const double w = 480.0, h = 480.0, m = 40.0;
  const double xspan = x_range.second - x_range.first;
  const double yspan = y_range.second - y_range.first;
  if (!(xspan > 0.0) || !(yspan > 0.0))
    throw std::invalid_argument("write_svg_lines: empty axis range");
  auto px = [&](double x) {
    return m + (x - x_range.first) / xspan * (w - 2.0 * m);
  };
  auto py = [&](double y) {
    return h - m - (y - y_range.first) / yspan * (h - 2.0 * m);
  };
  std::ofstream out(path);
  if (!out) throw std::runtime_error("cannot open " + path);
  out << "<svg xmlns=\"http://www.w3.org/2000/svg\" width=\"480\" "
         "height=\"480\" viewBox=\"0 0 480 480\">\n";
  out << "<rect x=\"" << m << "\" y=\"" << m << "\" width=\"" << w - 2 * m
      << "\" height=\"" << h - 2 * m
      << "\" fill=\"none\" stroke=\"#333\" stroke-width=\"1\"/>\n";
  if (diagonal)
    out << "<line x1=\"" << px(x_range.first) << "\" y1=\""
        << py(y_range.first) << "\" x2=\"" << px(x_range.second)
        << "\" y2=\"" << py(y_range.second)
        << "\" stroke=\"#bbb\" stroke-dasharray=\"4 3\"/>\n";
  for (const auto& s : series) {
    if (s.points.empty()) continue;
    out << "<polyline fill=\"none\" stroke=\"" << s.color
        << "\" stroke-width=\"1.5\" points=\"";
    for (const auto& [x, y] : s.points)
      out << fmt_g(px(x)) << ',' << fmt_g(py(y)) << ' ';
    out << "\"/>\n";
  }
  out << "</svg>\n";
}

}  // namespace turbid

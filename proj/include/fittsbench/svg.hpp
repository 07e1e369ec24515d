#pragma once

#include <algorithm>
#include <cmath>
#include <string>
#include <vector>

#include "fittsbench/common.hpp"

namespace fitts {

// ---------------------------------------------------------------------------
// Hand-built SVG scatter plot: axes, ticks, points, fitted line, and an R^2
// annotation. No plotting dependency, so the bytes are deterministic and
// diffable in CI.
// ---------------------------------------------------------------------------

struct ScatterPlotSpec {
  std::string title;
  std::string x_label;
  std::string y_label;
  std::vector<double> xs, ys;
  bool draw_line = false;
  double intercept = 0.0;
  double slope = 0.0;
  double r_squared = 0.0;
  std::string comment;  // embedded provenance (config hash, seed)
};

namespace detail {

inline std::string svg_num(double v) { return fmt_g(v, 6); }

inline double nice_tick(double span) {
  if (!(span > 0.0)) return 1.0;
  const double raw = span / 5.0;
  const double mag = std::pow(10.0, std::floor(std::log10(raw)));
  const double norm = raw / mag;
  double step = 10.0;
  if (norm <= 1.0) step = 1.0;
  else if (norm <= 2.0) step = 2.0;
  else if (norm <= 5.0) step = 5.0;
  return step * mag;
}

}  // namespace detail

inline std::string render_scatter_svg(const ScatterPlotSpec& spec) {
  if (spec.xs.size() != spec.ys.size())
    throw ContractError("render_scatter_svg: xs/ys size mismatch");

  const double width = 640, height = 480;
  const double ml = 70, mr = 20, mt = 40, mb = 55;  // margins
  const double pw = width - ml - mr, ph = height - mt - mb;

  double x_min = 0, x_max = 1, y_min = 0, y_max = 1;
  if (!spec.xs.empty()) {
    x_min = *std::min_element(spec.xs.begin(), spec.xs.end());
    x_max = *std::max_element(spec.xs.begin(), spec.xs.end());
    y_min = *std::min_element(spec.ys.begin(), spec.ys.end());
    y_max = *std::max_element(spec.ys.begin(), spec.ys.end());
  }
  const double x_pad = (x_max - x_min) > 0 ? 0.08 * (x_max - x_min) : 0.5;
  const double y_pad = (y_max - y_min) > 0 ? 0.08 * (y_max - y_min) : 0.5;
  x_min -= x_pad; x_max += x_pad;
  y_min -= y_pad; y_max += y_pad;

  const auto px = [&](double x) { return ml + (x - x_min) / (x_max - x_min) * pw; };
  const auto py = [&](double y) { return mt + ph - (y - y_min) / (y_max - y_min) * ph; };

  std::string s;
  s += "<svg xmlns=\"http://www.w3.org/2000/svg\" width=\"640\" height=\"480\" "
       "viewBox=\"0 0 640 480\">\n";
  if (!spec.comment.empty()) s += "<!-- " + spec.comment + " -->\n";
  s += "<rect width=\"640\" height=\"480\" fill=\"white\"/>\n";

  // axes
  s += "<line x1=\"" + detail::svg_num(ml) + "\" y1=\"" + detail::svg_num(mt + ph) +
       "\" x2=\"" + detail::svg_num(ml + pw) + "\" y2=\"" + detail::svg_num(mt + ph) +
       "\" stroke=\"black\"/>\n";
  s += "<line x1=\"" + detail::svg_num(ml) + "\" y1=\"" + detail::svg_num(mt) +
       "\" x2=\"" + detail::svg_num(ml) + "\" y2=\"" + detail::svg_num(mt + ph) +
       "\" stroke=\"black\"/>\n";

  const double x_tick = detail::nice_tick(x_max - x_min);
  for (double t = std::ceil(x_min / x_tick) * x_tick; t <= x_max + 1e-12; t += x_tick) {
    const double x = px(t);
    s += "<line x1=\"" + detail::svg_num(x) + "\" y1=\"" + detail::svg_num(mt + ph) +
         "\" x2=\"" + detail::svg_num(x) + "\" y2=\"" + detail::svg_num(mt + ph + 5) +
         "\" stroke=\"black\"/>\n";
    s += "<text x=\"" + detail::svg_num(x) + "\" y=\"" + detail::svg_num(mt + ph + 20) +
         "\" font-size=\"12\" text-anchor=\"middle\">" + fmt_g(t, 4) + "</text>\n";
  }
  const double y_tick = detail::nice_tick(y_max - y_min);
  for (double t = std::ceil(y_min / y_tick) * y_tick; t <= y_max + 1e-12; t += y_tick) {
    const double y = py(t);
    s += "<line x1=\"" + detail::svg_num(ml - 5) + "\" y1=\"" + detail::svg_num(y) +
         "\" x2=\"" + detail::svg_num(ml) + "\" y2=\"" + detail::svg_num(y) +
         "\" stroke=\"black\"/>\n";
    s += "<text x=\"" + detail::svg_num(ml - 8) + "\" y=\"" + detail::svg_num(y + 4) +
         "\" font-size=\"12\" text-anchor=\"end\">" + fmt_g(t, 4) + "</text>\n";
  }

  if (spec.draw_line && !spec.xs.empty()) {
    const double yl = spec.intercept + spec.slope * x_min;
    const double yr = spec.intercept + spec.slope * x_max;
    s += "<line x1=\"" + detail::svg_num(px(x_min)) + "\" y1=\"" +
         detail::svg_num(py(yl)) + "\" x2=\"" + detail::svg_num(px(x_max)) +
         "\" y2=\"" + detail::svg_num(py(yr)) +
         "\" stroke=\"#c43131\" stroke-width=\"1.5\"/>\n";
  }

  for (std::size_t i = 0; i < spec.xs.size(); ++i) {
    s += "<circle cx=\"" + detail::svg_num(px(spec.xs[i])) + "\" cy=\"" +
         detail::svg_num(py(spec.ys[i])) +
         "\" r=\"3\" fill=\"#2b6cb0\" fill-opacity=\"0.6\"/>\n";
  }

  s += "<text x=\"" + detail::svg_num(width / 2) +
       "\" y=\"22\" font-size=\"15\" text-anchor=\"middle\">" + spec.title +
       "</text>\n";
  s += "<text x=\"" + detail::svg_num(ml + pw / 2) + "\" y=\"" +
       detail::svg_num(height - 14) + "\" font-size=\"13\" text-anchor=\"middle\">" +
       spec.x_label + "</text>\n";
  s += "<text x=\"18\" y=\"" + detail::svg_num(mt + ph / 2) +
       "\" font-size=\"13\" text-anchor=\"middle\" transform=\"rotate(-90 18 " +
       detail::svg_num(mt + ph / 2) + ")\">" + spec.y_label + "</text>\n";
  if (spec.draw_line) {
    s += "<text x=\"" + detail::svg_num(ml + 10) + "\" y=\"" +
         detail::svg_num(mt + 18) + "\" font-size=\"13\">R&#178; = " +
         fmt_g(spec.r_squared, 4) + "</text>\n";
  }
  s += "</svg>\n";
  return s;
}

}  // namespace fitts

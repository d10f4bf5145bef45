#pragma once
// Minimal self-contained SVG emitters for the CLI's optional plots: a 2D
// heatmap of a gridded density and a line chart. The CSV artifacts carry the
// numbers; these exist only for quick visual checks, so no external plotting
// stack is pulled in.

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <fstream>
#include <span>
#include <stdexcept>
#include <string>

#include "fpz/grid.hpp"

namespace fpz::plot {

// Five-stop dark-blue → green → yellow color ramp over t ∈ [0, 1].
inline std::string ramp(double t) {
  static constexpr double stops[5][3] = {{68, 1, 84},
                                         {59, 82, 139},
                                         {33, 145, 140},
                                         {94, 201, 98},
                                         {253, 231, 37}};
  t = std::clamp(t, 0.0, 1.0) * 4.0;
  const int i = std::min(3, static_cast<int>(t));
  const double f = t - i;
  char buf[8];
  std::snprintf(buf, sizeof buf, "#%02x%02x%02x",
                static_cast<int>(stops[i][0] + f * (stops[i + 1][0] - stops[i][0])),
                static_cast<int>(stops[i][1] + f * (stops[i + 1][1] - stops[i][1])),
                static_cast<int>(stops[i][2] + f * (stops[i + 1][2] - stops[i][2])));
  return buf;
}

inline void svg_heatmap(const grid::GridDensity& g, const std::string& path,
                        const std::string& title) {
  if (g.dim() != 2) throw std::invalid_argument("svg_heatmap: need a 2D grid");
  const int bx = g.bins[0], by = g.bins[1];
  const double w = 640, h = 640, mx = 60, my = 40;
  double vmax = 0;
  for (double v : g.values) vmax = std::max(vmax, v);
  if (vmax <= 0) vmax = 1;

  std::ofstream out(path);
  if (!out) throw std::runtime_error("svg_heatmap: cannot write " + path);
  out << "<svg xmlns='http://www.w3.org/2000/svg' width='" << w + 2 * mx << "' height='"
      << h + 2 * my << "'>\n";
  out << "<text x='" << mx << "' y='" << my - 12 << "' font-family='sans-serif' font-size='15'>"
      << title << "</text>\n";
  const double cw = w / bx, ch = h / by;
  char buf[224];
  for (int i = 0; i < bx; ++i)
    for (int j = 0; j < by; ++j) {
      const double v = g.values[static_cast<std::size_t>(i) * by + j];
      // row 0 of axis 1 sits at the bottom
      std::snprintf(buf, sizeof buf,
                    "<rect x='%.2f' y='%.2f' width='%.2f' height='%.2f' fill='%s'/>\n",
                    mx + i * cw, my + h - (j + 1) * ch, cw + 0.5, ch + 0.5,
                    ramp(v / vmax).c_str());
      out << buf;
    }
  std::snprintf(buf, sizeof buf,
                "<text x='%.1f' y='%.1f' font-family='sans-serif' font-size='12'>[%g, %g] x "
                "[%g, %g], max %.4g</text>\n",
                mx, my + h + 24, g.box.lo[0], g.box.hi[0], g.box.lo[1], g.box.hi[1], vmax);
  out << buf << "</svg>\n";
}

inline void svg_line(std::span<const double> xs, std::span<const double> ys,
                     const std::string& path, const std::string& title, bool log_y = false) {
  if (xs.size() != ys.size() || xs.size() < 2)
    throw std::invalid_argument("svg_line: need matching series of length >= 2");
  const double w = 720, h = 400, mx = 70, my = 40;
  auto ty = [&](double v) { return log_y ? std::log10(std::max(v, 1e-300)) : v; };
  double x0 = xs[0], x1 = xs[0], y0 = ty(ys[0]), y1 = ty(ys[0]);
  for (std::size_t i = 0; i < xs.size(); ++i) {
    x0 = std::min(x0, xs[i]);
    x1 = std::max(x1, xs[i]);
    y0 = std::min(y0, ty(ys[i]));
    y1 = std::max(y1, ty(ys[i]));
  }
  if (x1 == x0) x1 = x0 + 1;
  if (y1 == y0) y1 = y0 + 1;

  std::ofstream out(path);
  if (!out) throw std::runtime_error("svg_line: cannot write " + path);
  out << "<svg xmlns='http://www.w3.org/2000/svg' width='" << w + 2 * mx << "' height='"
      << h + 2 * my << "'>\n";
  out << "<text x='" << mx << "' y='" << my - 12 << "' font-family='sans-serif' font-size='15'>"
      << title << (log_y ? " (log scale)" : "") << "</text>\n";
  out << "<rect x='" << mx << "' y='" << my << "' width='" << w << "' height='" << h
      << "' fill='none' stroke='#999'/>\n<polyline fill='none' stroke='#2166ac' "
         "stroke-width='1.5' points='";
  char buf[144];
  for (std::size_t i = 0; i < xs.size(); ++i) {
    std::snprintf(buf, sizeof buf, "%.2f,%.2f ", mx + w * (xs[i] - x0) / (x1 - x0),
                  my + h - h * (ty(ys[i]) - y0) / (y1 - y0));
    out << buf;
  }
  out << "'/>\n";
  auto label = [&](double v) {
    std::snprintf(buf, sizeof buf, "%.4g", log_y ? std::pow(10.0, v) : v);
    return std::string(buf);
  };
  out << "<text x='4' y='" << my + 10 << "' font-family='sans-serif' font-size='12'>"
      << label(y1) << "</text>\n<text x='4' y='" << my + h << "' font-family='sans-serif' "
      << "font-size='12'>" << label(y0) << "</text>\n<text x='" << mx << "' y='" << my + h + 20
      << "' font-family='sans-serif' font-size='12'>" << x0 << "</text>\n<text x='" << mx + w - 40
      << "' y='" << my + h + 20 << "' font-family='sans-serif' font-size='12'>" << x1
      << "</text>\n</svg>\n";
}

}  // namespace fpz::plot

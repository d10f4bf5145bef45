#include "fpz/grid.hpp"

#include <cinttypes>
#include <cmath>
#include <cstdio>
#include <fstream>
#include <map>
#include <sstream>
#include <stdexcept>

namespace fpz::grid {

std::int64_t GridDensity::cell_count() const {
  std::int64_t c = 1;
  for (int b : bins) c *= b;
  return c;
}

double GridDensity::cell_volume() const {
  double v = 1.0;
  for (int j = 0; j < dim(); ++j) v *= (box.hi[j] - box.lo[j]) / bins[j];
  return v;
}

std::int64_t GridDensity::index(std::span<const int> idx) const {
  std::int64_t flat = 0;
  for (int j = 0; j < dim(); ++j) {
    if (idx[j] < 0 || idx[j] >= bins[j]) throw std::out_of_range("grid index");
    flat = flat * bins[j] + idx[j];
  }
  return flat;
}

std::vector<double> GridDensity::center(std::span<const int> idx) const {
  std::vector<double> c(dim());
  for (int j = 0; j < dim(); ++j) {
    const double w = (box.hi[j] - box.lo[j]) / bins[j];
    c[j] = box.lo[j] + (idx[j] + 0.5) * w;
  }
  return c;
}

double GridDensity::mass() const {
  double s = 0;
  for (double v : values) s += v;
  return s * cell_volume();
}

GridDensity make_grid(const sys::Box& box, std::span<const int> bins) {
  box.validate();
  if (static_cast<int>(bins.size()) != box.dim())
    throw std::invalid_argument("make_grid: bins/box dimension mismatch");
  GridDensity g;
  g.box = box;
  g.bins.assign(bins.begin(), bins.end());
  for (int b : g.bins)
    if (b < 1) throw std::invalid_argument("make_grid: bins must be >= 1");
  if (g.cell_count() > 100'000'000) throw std::invalid_argument("make_grid: too many cells");
  g.values.assign(g.cell_count(), 0.0);
  return g;
}

void write_csv(const GridDensity& g, const std::string& path) {
  std::FILE* f = std::fopen(path.c_str(), "w");
  if (!f) throw std::runtime_error("write_csv: cannot open " + path);
  std::fprintf(f, "# out_of_box_fraction %.17g\n", g.out_of_box_fraction);
  std::fprintf(f, "# box");
  for (int j = 0; j < g.dim(); ++j) std::fprintf(f, " %.17g %.17g", g.box.lo[j], g.box.hi[j]);
  std::fprintf(f, "\n# bins");
  for (int b : g.bins) std::fprintf(f, " %d", b);
  std::fprintf(f, "\n");
  for (int j = 0; j < g.dim(); ++j) std::fprintf(f, "x%d,", j);
  std::fprintf(f, "value\n");

  std::vector<int> idx(g.dim(), 0);
  for (std::int64_t flat = 0; flat < g.cell_count(); ++flat) {
    const std::vector<double> c = g.center(idx);
    for (int j = 0; j < g.dim(); ++j) std::fprintf(f, "%.17g,", c[j]);
    std::fprintf(f, "%.17g\n", g.values[static_cast<size_t>(flat)]);
    for (int j = g.dim() - 1; j >= 0; --j) {
      if (++idx[j] < g.bins[j]) break;
      idx[j] = 0;
    }
  }
  if (std::fclose(f) != 0) throw std::runtime_error("write_csv: close failed for " + path);
}

GridDensity read_csv(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw std::runtime_error("read_csv: cannot open " + path);
  GridDensity g;
  std::string line;

  if (!std::getline(in, line) || line.rfind("# out_of_box_fraction", 0) != 0)
    throw std::runtime_error("read_csv: missing out_of_box_fraction line");
  g.out_of_box_fraction = std::stod(line.substr(22));

  if (!std::getline(in, line) || line.rfind("# box", 0) != 0)
    throw std::runtime_error("read_csv: missing box line");
  {
    std::istringstream ss(line.substr(5));
    double lo, hi;
    while (ss >> lo >> hi) {
      g.box.lo.push_back(lo);
      g.box.hi.push_back(hi);
    }
  }
  if (!std::getline(in, line) || line.rfind("# bins", 0) != 0)
    throw std::runtime_error("read_csv: missing bins line");
  {
    std::istringstream ss(line.substr(6));
    int b;
    while (ss >> b) g.bins.push_back(b);
  }
  std::getline(in, line);  // column header
  g.values.reserve(static_cast<size_t>(g.cell_count()));
  while (std::getline(in, line)) {
    if (line.empty()) continue;
    const size_t pos = line.find_last_of(',');
    g.values.push_back(std::stod(line.substr(pos + 1)));
  }
  if (static_cast<std::int64_t>(g.values.size()) != g.cell_count())
    throw std::runtime_error("read_csv: row count does not match bins");
  return g;
}

}  // namespace fpz::grid

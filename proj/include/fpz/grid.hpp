#pragma once
#include <cstdint>
#include <span>
#include <string>
#include <vector>

#include "fpz/systems.hpp"

namespace fpz::grid {

// Piecewise-constant density on a regular grid: values live at cell centers,
// row-major over `bins`. Mass that fell outside the box during estimation is
// tracked separately so in-box mass + out_of_box_fraction can close to 1.
struct GridDensity {
  sys::Box box;
  std::vector<int> bins;
  std::vector<double> values;
  double out_of_box_fraction = 0;

  int dim() const { return static_cast<int>(bins.size()); }
  std::int64_t cell_count() const;
  double cell_volume() const;
  std::int64_t index(std::span<const int> idx) const;
  std::vector<double> center(std::span<const int> idx) const;
  // in-box probability mass, Σ value·cellvol
  double mass() const;
};

GridDensity make_grid(const sys::Box& box, std::span<const int> bins);

// CSV with one row per cell: center coordinates, then the value.
void write_csv(const GridDensity& g, const std::string& path);
GridDensity read_csv(const std::string& path);

}  // namespace fpz::grid

#pragma once
#include <cstdint>
#include <span>
#include <vector>

#include "fpz/grid.hpp"
#include "fpz/systems.hpp"

namespace fpz::mc {

// Final-time particle ensemble of dX = μ(X)dt + √(2D) dW.
struct Ensemble {
  int dim = 0;
  std::vector<double> particles;  // n×d row-major final positions
  double time = 0;                // S·h
  double h = 0;

  std::int64_t count() const {
    return dim ? static_cast<std::int64_t>(particles.size()) / dim : 0;
  }
};

// x ← x + μ(x)h + √(2D)·noise. The caller draws noise ~ N(0, hI).
void euler_maruyama_step(const sys::DriftSystem& system, std::span<double> x, double h,
                         std::span<const double> noise);

// Evolves n particles from a standard-normal initial draw for `steps` steps.
// Each particle runs on its own (seed, index)-derived stream, so results are
// independent of scheduling and partial reruns. Any coordinate leaving
// [−1e6, 1e6] counts as a blow-up; if any particle blows up the run aborts
// with the total count in the diagnostic.
Ensemble simulate(const sys::DriftSystem& system, std::int64_t n, double h,
                  std::int64_t steps, std::uint64_t seed);

// Cell-count density estimate: value = count/(n·cell_volume). Points on the
// upper boundary clamp into the last cell; everything outside the box goes
// into out_of_box_fraction, so in-box mass + that fraction equals 1.
grid::GridDensity histogram(const Ensemble& ensemble, const sys::Box& box,
                            std::span<const int> bins);

}  // namespace fpz::mc

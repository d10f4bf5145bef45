#include "fpz/montecarlo.hpp"

#include <omp.h>

#include <cmath>
#include <stdexcept>
#include <string>

#include "fpz/rng.hpp"

namespace fpz::mc {

namespace {

constexpr double kBlowupBound = 1e6;

// step with caller-provided drift scratch — the hot inner-loop form
inline void em_step(const sys::DriftSystem& s, std::span<double> x, double h,
                    std::span<const double> noise, std::span<double> mu) {
  sys::drift<double>(s, x, mu);
  const double sigma = std::sqrt(2.0 * s.diffusion);
  for (size_t j = 0; j < x.size(); ++j) x[j] += mu[j] * h + sigma * noise[j];
}

}  // namespace

void euler_maruyama_step(const sys::DriftSystem& system, std::span<double> x, double h,
                         std::span<const double> noise) {
  if (!(h > 0)) throw std::invalid_argument("euler-maruyama: step size must be > 0");
  if (static_cast<int>(x.size()) != system.dim || noise.size() != x.size())
    throw std::invalid_argument("euler-maruyama: dimension mismatch");
  std::vector<double> mu(x.size());
  em_step(system, x, h, noise, mu);
}

Ensemble simulate(const sys::DriftSystem& system, std::int64_t n, double h,
                  std::int64_t steps, std::uint64_t seed) {
  if (n < 1) throw std::invalid_argument("simulate: need at least one particle");
  if (steps < 0) throw std::invalid_argument("simulate: negative step count");
  if (steps > 0 && !(h > 0)) throw std::invalid_argument("simulate: step size must be > 0");

  const int d = system.dim;
  Ensemble e;
  e.dim = d;
  e.h = h;
  e.time = static_cast<double>(steps) * h;
  e.particles.resize(static_cast<size_t>(n) * d);

  std::int64_t blowups = 0;
#pragma omp parallel reduction(+ : blowups)
  {
    std::vector<double> x(d), noise(d), mu(d);
#pragma omp for schedule(static)
    for (std::int64_t i = 0; i < n; ++i) {
      rng::Stream st(seed, rng::StreamTag::particle, static_cast<std::uint64_t>(i));
      for (int j = 0; j < d; ++j) x[j] = st.normal();  // p₀ = standard normal
      const double sqh = std::sqrt(h);
      bool dead = false;
      for (std::int64_t k = 0; k < steps && !dead; ++k) {
        for (int j = 0; j < d; ++j) noise[j] = sqh * st.normal();
        em_step(system, x, h, noise, mu);
        for (int j = 0; j < d; ++j)
          if (!(std::abs(x[j]) <= kBlowupBound)) {  // catches NaN too
            dead = true;
            break;
          }
      }
      if (dead) ++blowups;
      for (int j = 0; j < d; ++j) e.particles[static_cast<size_t>(i) * d + j] = x[j];
    }
  }
  if (blowups > 0)
    throw std::runtime_error("simulate: " + std::to_string(blowups) + " of " +
                             std::to_string(n) + " particles blew up (coordinate beyond 1e6)");
  return e;
}

grid::GridDensity histogram(const Ensemble& ensemble, const sys::Box& box,
                            std::span<const int> bins) {
  box.validate();
  if (static_cast<int>(bins.size()) != box.dim() || box.dim() != ensemble.dim)
    throw std::invalid_argument("histogram: box/bins/ensemble dimension mismatch");
  grid::GridDensity g = grid::make_grid(box, bins);
  const int d = ensemble.dim;
  const std::int64_t n = ensemble.count();
  if (n == 0) throw std::invalid_argument("histogram: empty ensemble");

  std::vector<std::int64_t> counts(static_cast<size_t>(g.cell_count()), 0);
  std::int64_t outside = 0;
  std::vector<int> idx(d);
  for (std::int64_t i = 0; i < n; ++i) {
    const double* x = ensemble.particles.data() + static_cast<size_t>(i) * d;
    bool in = true;
    for (int j = 0; j < d; ++j) {
      if (x[j] < box.lo[j] || x[j] > box.hi[j]) {
        in = false;
        break;
      }
      const double w = (box.hi[j] - box.lo[j]) / bins[j];
      int c = static_cast<int>((x[j] - box.lo[j]) / w);
      if (c >= bins[j]) c = bins[j] - 1;  // x == hi clamps into the last cell
      idx[j] = c;
    }
    if (in)
      ++counts[static_cast<size_t>(g.index(idx))];
    else
      ++outside;
  }
  const double cv = g.cell_volume();
  for (size_t c = 0; c < counts.size(); ++c)
    g.values[c] = static_cast<double>(counts[c]) / (static_cast<double>(n) * cv);
  g.out_of_box_fraction = static_cast<double>(outside) / static_cast<double>(n);
  return g;
}

}  // namespace fpz::mc

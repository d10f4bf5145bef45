#include <doctest.h>

#include <omp.h>

#include <cmath>
#include <cstdint>
#include <vector>

#include "fpz/grid.hpp"
#include "fpz/montecarlo.hpp"
#include "fpz/systems.hpp"

using namespace fpz;

TEST_CASE("euler_maruyama_step algebra") {
  const sys::DriftSystem ring = sys::make_system("ring", 2, 1.0);
  std::vector<double> x{1.0, 1.0};  // μ = (−4, −4) here
  const std::vector<double> noise{0.3, -0.2};
  mc::euler_maruyama_step(ring, x, 0.01, noise);
  const double s = std::sqrt(2.0);  // √(2D)
  CHECK(x[0] == doctest::Approx(1.0 - 0.04 + s * 0.3).epsilon(1e-15));
  CHECK(x[1] == doctest::Approx(1.0 - 0.04 - s * 0.2).epsilon(1e-15));

  std::vector<double> bad{1.0};
  CHECK_THROWS(mc::euler_maruyama_step(ring, bad, 0.01, noise));
  CHECK_THROWS(mc::euler_maruyama_step(ring, x, 0.0, noise));
}

TEST_CASE("simulate: shapes, determinism, and per-particle streams") {
  const sys::DriftSystem ring = sys::make_system("ring", 2, 1.0);
  const mc::Ensemble a = mc::simulate(ring, 50, 0.01, 20, 3);
  CHECK(a.dim == 2);
  CHECK(a.count() == 50);
  CHECK(a.h == 0.01);
  CHECK(a.time == doctest::Approx(0.2));

  const mc::Ensemble b = mc::simulate(ring, 50, 0.01, 20, 3);
  CHECK(a.particles == b.particles);
  const mc::Ensemble c = mc::simulate(ring, 50, 0.01, 20, 4);
  CHECK(a.particles != c.particles);

  // each particle owns its stream: a shorter run is a prefix of a longer one
  const mc::Ensemble d = mc::simulate(ring, 20, 0.01, 20, 3);
  for (size_t i = 0; i < d.particles.size(); ++i) CHECK(d.particles[i] == a.particles[i]);

  // ...and the result is independent of the OpenMP thread count
  const int saved = omp_get_max_threads();
  omp_set_num_threads(1);
  const mc::Ensemble s1 = mc::simulate(ring, 30, 0.01, 10, 7);
  omp_set_num_threads(std::max(2, saved));
  const mc::Ensemble s2 = mc::simulate(ring, 30, 0.01, 10, 7);
  omp_set_num_threads(saved);
  CHECK(s1.particles == s2.particles);

  CHECK_THROWS(mc::simulate(ring, 0, 0.01, 10, 1));
  CHECK_THROWS(mc::simulate(ring, 10, -1.0, 10, 1));
  CHECK_THROWS(mc::simulate(ring, 10, 0.01, -1, 1));
}

TEST_CASE("simulate with zero steps draws the standard-normal start") {
  const sys::DriftSystem ring = sys::make_system("ring", 2, 1.0);
  const mc::Ensemble e = mc::simulate(ring, 40000, 0.01, 0, 11);
  CHECK(e.time == 0.0);
  double mean = 0, var = 0;
  for (double v : e.particles) mean += v;
  mean /= static_cast<double>(e.particles.size());
  for (double v : e.particles) var += (v - mean) * (v - mean);
  var /= static_cast<double>(e.particles.size() - 1);
  CHECK(std::abs(mean) < 4.0 / std::sqrt(static_cast<double>(e.particles.size())));
  CHECK(var == doctest::Approx(1.0).epsilon(0.03));
}

TEST_CASE("histogram counts cells exactly") {
  mc::Ensemble e;
  e.dim = 2;
  // box [0,1]² with 2×2 cells of volume 0.25
  e.particles = {
      0.1,  0.1,   // cell (0,0)
      0.3,  0.2,   // cell (0,0)
      0.9,  0.1,   // cell (1,0)
      1.0,  1.0,   // upper corner clamps into cell (1,1)
      0.0,  0.0,   // lower corner lands in cell (0,0)
      1.5,  0.5,   // outside
      -0.2, 0.5,   // outside
      0.2,  0.75,  // cell (0,1)
  };
  sys::Box box;
  box.lo = {0, 0};
  box.hi = {1, 1};
  const grid::GridDensity g = mc::histogram(e, box, std::vector<int>{2, 2});
  const double cv = 0.25;
  const double n = 8;
  CHECK(g.values[0] == doctest::Approx(3 / (n * cv)));  // (0,0)
  CHECK(g.values[1] == doctest::Approx(1 / (n * cv)));  // (0,1)
  CHECK(g.values[2] == doctest::Approx(1 / (n * cv)));  // (1,0)
  CHECK(g.values[3] == doctest::Approx(1 / (n * cv)));  // (1,1)
  CHECK(g.out_of_box_fraction == doctest::Approx(2.0 / 8.0));
  CHECK(g.mass() + g.out_of_box_fraction == doctest::Approx(1.0).epsilon(1e-12));

  CHECK_THROWS(mc::histogram(e, box, std::vector<int>{2}));
  mc::Ensemble empty;
  empty.dim = 2;
  CHECK_THROWS(mc::histogram(empty, box, std::vector<int>{2, 2}));
}

TEST_CASE("ensemble relaxes toward the ring density") {
  const sys::DriftSystem ring = sys::make_system("ring", 2, 1.0);
  const mc::Ensemble e = mc::simulate(ring, 20000, 0.01, 200, 1);
  const grid::GridDensity g = mc::histogram(e, ring.domain, std::vector<int>{25, 25});
  CHECK(g.mass() + g.out_of_box_fraction == doctest::Approx(1.0).epsilon(1e-12));
  CHECK(g.mass() > 0.95);  // the ring traps essentially all mass in Ω_I

  // density near the ring radius dominates the well at the origin (p ratio e)
  std::vector<int> at_ring{18, 12};   // center ≈ (0.96, 0)
  std::vector<int> at_origin{12, 12};  // center ≈ (0, 0)
  const double pr = g.values[static_cast<size_t>(g.index(at_ring))];
  const double p0 = g.values[static_cast<size_t>(g.index(at_origin))];
  CHECK(pr > 1.5 * p0);
}

TEST_CASE("exploding trajectories abort with a blow-up diagnostic") {
  const sys::DriftSystem ring = sys::make_system("ring", 2, 1.0);
  try {
    mc::simulate(ring, 5, 1e9, 3, 1);
    FAIL("expected a throw");
  } catch (const std::runtime_error& e) {
    CHECK(std::string(e.what()).find("blew up") != std::string::npos);
  }
}

#include <doctest.h>

#include <cmath>
#include <numbers>
#include <vector>

#include "fpz/quadrature.hpp"

using namespace fpz;

namespace {

double pow_int(double x, int k) {
  double r = 1;
  for (int i = 0; i < k; ++i) r *= x;
  return r;
}

}  // namespace

TEST_CASE("gl_rule matches tabulated low-order rules") {
  // n = 1: midpoint, weight 2
  quad::QuadRule r1 = quad::gl_rule(1);
  REQUIRE(r1.order() == 1);
  CHECK(r1.nodes[0] == doctest::Approx(0.0).epsilon(1e-15));
  CHECK(r1.weights[0] == doctest::Approx(2.0));

  // n = 2: ±1/√3, weights 1
  quad::QuadRule r2 = quad::gl_rule(2);
  CHECK(r2.nodes[0] == doctest::Approx(-1.0 / std::sqrt(3.0)).epsilon(1e-15));
  CHECK(r2.nodes[1] == doctest::Approx(+1.0 / std::sqrt(3.0)).epsilon(1e-15));
  CHECK(r2.weights[0] == doctest::Approx(1.0));
  CHECK(r2.weights[1] == doctest::Approx(1.0));

  // n = 3: 0, ±√(3/5); weights 8/9, 5/9
  quad::QuadRule r3 = quad::gl_rule(3);
  CHECK(r3.nodes[0] == doctest::Approx(-std::sqrt(0.6)).epsilon(1e-15));
  CHECK(r3.nodes[1] == doctest::Approx(0.0).epsilon(1e-15));
  CHECK(r3.nodes[2] == doctest::Approx(+std::sqrt(0.6)).epsilon(1e-15));
  CHECK(r3.weights[0] == doctest::Approx(5.0 / 9.0));
  CHECK(r3.weights[1] == doctest::Approx(8.0 / 9.0));
  CHECK(r3.weights[2] == doctest::Approx(5.0 / 9.0));

  // n = 5 from standard tables
  quad::QuadRule r5 = quad::gl_rule(5);
  CHECK(r5.nodes[4] == doctest::Approx(0.9061798459386640).epsilon(1e-14));
  CHECK(r5.nodes[3] == doctest::Approx(0.5384693101056831).epsilon(1e-14));
  CHECK(r5.weights[2] == doctest::Approx(128.0 / 225.0).epsilon(1e-14));
  CHECK(r5.weights[3] == doctest::Approx(0.4786286704993665).epsilon(1e-14));
  CHECK(r5.weights[4] == doctest::Approx(0.2369268850561891).epsilon(1e-14));
}

TEST_CASE("gl_rule structural invariants for n up to 32") {
  for (int n = 1; n <= 32; ++n) {
    quad::QuadRule r = quad::gl_rule(n);
    REQUIRE(r.order() == n);
    double wsum = 0;
    for (int i = 0; i < n; ++i) {
      wsum += r.weights[i];
      CHECK(r.weights[i] > 0);
      if (i > 0) CHECK(r.nodes[i] > r.nodes[i - 1]);
      // symmetry of nodes and weights
      CHECK(r.nodes[i] == doctest::Approx(-r.nodes[n - 1 - i]).epsilon(1e-14));
      CHECK(r.weights[i] == doctest::Approx(r.weights[n - 1 - i]).epsilon(1e-14));
    }
    CHECK(wsum == doctest::Approx(2.0).epsilon(1e-14));
  }
  CHECK_THROWS(quad::gl_rule(0));
  CHECK_THROWS(quad::gl_rule(33));
}

TEST_CASE("gl_rule integrates monomials exactly up to degree 2n-1") {
  for (int n = 1; n <= 10; ++n) {
    quad::QuadRule r = quad::gl_rule(n);
    for (int k = 0; k <= 2 * n - 1; ++k) {
      double s = 0;
      for (int i = 0; i < n; ++i) s += r.weights[i] * pow_int(r.nodes[i], k);
      const double exact = (k % 2 == 1) ? 0.0 : 2.0 / (k + 1);
      CHECK(std::abs(s - exact) <= 1e-13);
    }
    // degree 2n must NOT be exact (rules are sharp)
    double s = 0;
    for (int i = 0; i < n; ++i) s += r.weights[i] * pow_int(r.nodes[i], 2 * n);
    CHECK(std::abs(s - 2.0 / (2 * n + 1)) > 1e-10);
  }
}

TEST_CASE("integrate_1d composite rule") {
  // ∫₀^π sin = 2
  const double s = quad::integrate_1d([](double x) { return std::sin(x); }, 0,
                                      std::numbers::pi, 20, 8);
  CHECK(s == doctest::Approx(2.0).epsilon(1e-14));
  // ∫₋₁² x³ = (16−1)/4
  const double c = quad::integrate_1d([](double x) { return x * x * x; }, -1, 2, 3, 2);
  CHECK(c == doctest::Approx(15.0 / 4.0).epsilon(1e-13));
  // Gaussian over a wide interval ≈ √π
  const double gauss = quad::integrate_1d([](double x) { return std::exp(-x * x); },
                                          -10, 10, 60, 8);
  CHECK(gauss == doctest::Approx(std::sqrt(std::numbers::pi)).epsilon(1e-13));
  CHECK_THROWS(quad::integrate_1d([](double) { return 1.0; }, 0, 1, 0, 4));
}

TEST_CASE("gl_error_bound closed form") {
  // 2M/(2n)!·(h/2)^(2n); pinned reference values computed independently
  CHECK(quad::gl_error_bound(1.0, 1, 1.0) == doctest::Approx(0.25).epsilon(1e-15));
  // n=2, h=1: 2/24·(1/2)^4 = 1/192
  CHECK(quad::gl_error_bound(1.0, 2, 1.0) == doctest::Approx(1.0 / 192.0).epsilon(1e-15));
  // scaling in M is linear
  CHECK(quad::gl_error_bound(7.0, 2, 1.0) ==
        doctest::Approx(7.0 / 192.0).epsilon(1e-15));
  // the two production presets
  CHECK(quad::gl_error_bound(1.0, 10, 1.0 / 3.0) ==
        doctest::Approx(2.2487e-34).epsilon(1e-3));
  CHECK(quad::gl_error_bound(1.0, 8, 20.0 / 165.0) ==
        doctest::Approx(3.174e-33).epsilon(1e-3));
  CHECK_THROWS(quad::gl_error_bound(1.0, 1, 0.0));
  CHECK_THROWS(quad::gl_error_bound(1.0, 1, 1.5));
}

TEST_CASE("tensor_integrate over boxes") {
  sys::Box b2;
  b2.lo = {0, 0};
  b2.hi = {1, 2};
  // ∫∫ x·y² over [0,1]×[0,2] = 1/2 · 8/3
  const double v = quad::tensor_integrate(
      [](std::span<const double> x) { return x[0] * x[1] * x[1]; }, b2, 4, 4);
  CHECK(v == doctest::Approx(4.0 / 3.0).epsilon(1e-13));

  // separable Gaussian in 3D → π^{3/2}
  sys::Box b3;
  b3.lo = {-8, -8, -8};
  b3.hi = {8, 8, 8};
  const double g = quad::tensor_integrate(
      [](std::span<const double> x) {
        return std::exp(-(x[0] * x[0] + x[1] * x[1] + x[2] * x[2]));
      },
      b3, 16, 8);
  CHECK(g == doctest::Approx(std::pow(std::numbers::pi, 1.5)).epsilon(1e-12));

  sys::Box b5;
  b5.lo = {0, 0, 0, 0, 0};
  b5.hi = {1, 1, 1, 1, 1};
  CHECK_THROWS(quad::tensor_integrate(
      [](std::span<const double>) { return 1.0; }, b5, 2, 2));
}

TEST_CASE("tensor_integrate_batch agrees with the pointwise form") {
  sys::Box b;
  b.lo = {-1, 0};
  b.hi = {2, 1};
  auto f = [](std::span<const double> x) { return std::cos(x[0]) * (1 + x[1]); };
  const double ref = quad::tensor_integrate(f, b, 6, 6);
  const double bat = quad::tensor_integrate_batch(
      [](const double* pts, int count, int dim, double* out) {
        for (int i = 0; i < count; ++i)
          out[i] = std::cos(pts[i * dim]) * (1 + pts[i * dim + 1]);
      },
      b, 6, 6);
  CHECK(bat == doctest::Approx(ref).epsilon(1e-15));
  // (sin 2 + sin 1) · 3/2
  CHECK(bat == doctest::Approx((std::sin(2.0) + std::sin(1.0)) * 1.5).epsilon(1e-13));
}

TEST_CASE("marginalize integrates out axes onto a kept-axis grid") {
  // density(x,y,z) = g(x)·g(y)·g(z) with g = 1D standard normal pdf;
  // integrating out z leaves g(x)·g(y) at the kept-plane cell centers.
  auto g1 = [](double t) {
    return std::exp(-0.5 * t * t) / std::sqrt(2.0 * std::numbers::pi);
  };
  sys::Box b;
  b.lo = {-8, -8, -8};
  b.hi = {8, 8, 8};
  const std::vector<int> integrate_out{2};
  const std::vector<int> out_bins{8, 8};
  grid::GridDensity m = quad::marginalize(
      [&](std::span<const double> x) { return g1(x[0]) * g1(x[1]) * g1(x[2]); }, b,
      integrate_out, 24, 8, out_bins);
  REQUIRE(m.dim() == 2);
  REQUIRE(m.bins == out_bins);
  CHECK(m.box.lo == std::vector<double>{-8, -8});
  CHECK(m.box.hi == std::vector<double>{8, 8});
  std::vector<int> idx(2);
  for (idx[0] = 0; idx[0] < 8; ++idx[0])
    for (idx[1] = 0; idx[1] < 8; ++idx[1]) {
      const std::vector<double> c = m.center(idx);
      const double want = g1(c[0]) * g1(c[1]);
      CHECK(m.values[static_cast<size_t>(m.index(idx))] ==
            doctest::Approx(want).epsilon(1e-10));
    }

  // integrating out two axes of the same density leaves the 1D marginal
  const std::vector<int> both{0, 2};
  const std::vector<int> bins1{16};
  grid::GridDensity m1 = quad::marginalize(
      [&](std::span<const double> x) { return g1(x[0]) * g1(x[1]) * g1(x[2]); }, b, both,
      24, 8, bins1);
  REQUIRE(m1.dim() == 1);
  std::vector<int> i1(1);
  for (i1[0] = 0; i1[0] < 16; ++i1[0]) {
    const double c = m1.center(i1)[0];
    CHECK(m1.values[static_cast<size_t>(i1[0])] ==
          doctest::Approx(g1(c)).epsilon(1e-10));
  }
}

#include <doctest.h>

#include <cmath>
#include <vector>

#include "fpz/autodiff.hpp"
#include "fpz/fp_operator.hpp"
#include "fpz/network.hpp"
#include "fpz/rng.hpp"
#include "fpz/systems.hpp"

using namespace fpz;

TEST_CASE("residual_parts and assemble_residual algebra") {
  const std::vector<double> mu{1, 2}, grad{3, 4}, second{0.5, 0.25};
  const auto parts = fpo::residual_parts<double>(7.0, mu, grad, second);
  CHECK(parts.div_mu == 7.0);
  CHECK(parts.advection == doctest::Approx(11.0));
  CHECK(parts.grad_sq == doctest::Approx(25.0));
  CHECK(parts.laplacian == doctest::Approx(0.75));
  // (D·gsq − adv) + (D·lap − div) with D = 2
  CHECK(fpo::assemble_residual(parts, 2.0) == doctest::Approx(33.5));
  CHECK(fpo::assemble_residual(parts, 0.5) == doctest::Approx((12.5 - 11.0) + (0.375 - 7.0)));
}

TEST_CASE("log_residual_at uses supplied derivatives") {
  // drift of the 2D ring at (1, 1) is (−4, −4) with divergence −24
  const sys::DriftSystem ring = sys::make_system("ring", 2, 1.0);
  const std::vector<double> x{1, 1}, grad{3, 4}, second{0.5, 0.25};
  const auto rs = fpo::log_residual_at<double>(ring, x, grad, second);
  // −div − μ·∇f + D(‖∇f‖² + Δf) = 24 − (−12−16) + 25 + 0.75
  CHECK(rs.residual == doctest::Approx(24.0 + 28.0 + 25.75));
  CHECK(rs.parts.div_mu == doctest::Approx(-24.0));
  CHECK(rs.parts.advection == doctest::Approx(-28.0));
  CHECK(rs.x == x);
}

TEST_CASE("log_residual of the network matches a by-hand assembly") {
  const sys::DriftSystem ring = sys::make_system("ring", 2, 1.0);
  const net::ParamsD p = net::glorot_init<double>(net::Architecture{2, 4, 2}, 8);
  const std::vector<double> x{0.7, -1.1};

  const auto rs = fpo::log_residual<double>(ring, p, x);
  const ad::Dual2<double> f = ad::forward_dual<double>(p, x);
  std::vector<double> mu(2);
  sys::drift<double>(ring, x, mu);
  const double div = sys::drift_divergence<double>(ring, x);
  const auto parts = fpo::residual_parts<double>(div, mu, f.g, f.h);
  CHECK(rs.residual == doctest::Approx(fpo::assemble_residual(parts, ring.diffusion))
                           .epsilon(1e-15));
  CHECK(rs.parts.grad_sq == doctest::Approx(parts.grad_sq).epsilon(1e-15));
  CHECK(rs.parts.laplacian == doctest::Approx(parts.laplacian).epsilon(1e-15));
}

namespace {

// closed-form derivatives of f = −V/D for the ring potential V = (‖x‖²−1)²
void ring_f_derivs(const std::vector<double>& x, double diff, std::vector<double>& grad,
                   std::vector<double>& second) {
  const int d = static_cast<int>(x.size());
  grad.resize(d);
  second.resize(d);
  for (int p = 0; p < d / 2; ++p) {
    const double r = x[2 * p] * x[2 * p] + x[2 * p + 1] * x[2 * p + 1];
    for (int k = 2 * p; k <= 2 * p + 1; ++k) {
      grad[k] = -(4.0 * (r - 1.0) * x[k]) / diff;
      second[k] = -(4.0 * (r - 1.0) + 8.0 * x[k] * x[k]) / diff;
    }
  }
}

}  // namespace

TEST_CASE("analytic log-density annihilates the log-form residual") {
  for (int d : {2, 6}) {
    const sys::DriftSystem ring = sys::make_system("ring", d, 1.0);
    rng::Stream st(17, rng::StreamTag::misc, 0);
    std::vector<double> x(d), grad, second;
    for (int trial = 0; trial < 200; ++trial) {
      for (int j = 0; j < d; ++j) x[j] = st.uniform(ring.domain.lo[j], ring.domain.hi[j]);
      ring_f_derivs(x, ring.diffusion, grad, second);
      const auto rs = fpo::log_residual_at<double>(ring, x, grad, second);
      CHECK(std::abs(rs.residual) <= 1e-11);
    }
  }
}

TEST_CASE("direct operator annihilates the analytic density") {
  const sys::DriftSystem ring = sys::make_system("ring", 2, 1.0);
  rng::Stream st(18, rng::StreamTag::misc, 0);
  std::vector<double> x(2), grad, second;
  for (int trial = 0; trial < 200; ++trial) {
    for (int j = 0; j < 2; ++j) x[j] = st.uniform(-1.5, 1.5);
    ring_f_derivs(x, ring.diffusion, grad, second);
    // p = exp f, ∇p = p∇f, ∂²p = p((∂f)² + ∂²f)
    double r = 0;
    for (double v : x) r += v * v;
    const double p = std::exp(-(r - 1) * (r - 1) / ring.diffusion);
    std::vector<double> gp(2);
    double lap = 0;
    for (int k = 0; k < 2; ++k) {
      gp[k] = p * grad[k];
      lap += p * (grad[k] * grad[k] + second[k]);
    }
    const double lp = fpo::fpo_residual<double>(ring, x, p, gp, lap);
    CHECK(std::abs(lp) <= 1e-12 * std::max(1.0, p));
  }
}

TEST_CASE("direct operator algebra with arbitrary inputs") {
  const sys::DriftSystem ring = sys::make_system("ring", 2, 1.0);
  const std::vector<double> x{1, 1};  // μ = (−4,−4), ∇·μ = −24
  const std::vector<double> gp{0.5, -0.25};
  // −p·∇·μ − μ·∇p + D·Δp = 24·p + (2 − 1) + 0.125
  const double lp = fpo::fpo_residual<double>(ring, x, 3.0, gp, 0.125);
  CHECK(lp == doctest::Approx(72.0 - (-4 * 0.5 + -4 * -0.25) + 0.125));
}

TEST_CASE("loss is the mean squared residual") {
  const sys::DriftSystem ring = sys::make_system("ring", 2, 1.0);
  const net::ParamsD p = net::glorot_init<double>(net::Architecture{2, 3, 2}, 44);
  const int n = 9;
  rng::Stream st(19, rng::StreamTag::misc, 0);
  std::vector<double> pts(static_cast<size_t>(n) * 2);
  for (auto& v : pts) v = st.uniform(-2.0, 2.0);

  double acc = 0;
  for (int i = 0; i < n; ++i) {
    const std::vector<double> x{pts[2 * i], pts[2 * i + 1]};
    const auto rs = fpo::log_residual<double>(ring, p, x);
    acc += rs.residual * rs.residual;
  }
  CHECK(fpo::loss<double>(ring, p, pts.data(), n) ==
        doctest::Approx(acc / n).epsilon(1e-14));
  CHECK_THROWS(fpo::loss<double>(ring, p, pts.data(), 0));
}

#include "fpz/systems.hpp"

#include <algorithm>
#include <limits>

namespace fpz::sys {

double Box::volume() const {
  double v = 1.0;
  for (int j = 0; j < dim(); ++j) v *= hi[j] - lo[j];
  return v;
}

Box Box::inflated(double factor) const {
  Box out = *this;
  for (int j = 0; j < dim(); ++j) {
    const double c = 0.5 * (lo[j] + hi[j]);
    const double half = 0.5 * (hi[j] - lo[j]) * factor;
    out.lo[j] = c - half;
    out.hi[j] = c + half;
  }
  return out;
}

bool Box::contains(std::span<const double> x) const {
  for (int j = 0; j < dim(); ++j)
    if (x[j] < lo[j] || x[j] > hi[j]) return false;
  return true;
}

void Box::validate() const {
  if (lo.size() != hi.size()) throw std::invalid_argument("box: lo/hi size mismatch");
  if (lo.empty()) throw std::invalid_argument("box: empty");
  for (size_t j = 0; j < lo.size(); ++j)
    if (!(lo[j] < hi[j])) throw std::invalid_argument("box: lo must be < hi on every axis");
}

namespace {

Box cube(int dim, double lo, double hi) {
  return Box{std::vector<double>(dim, lo), std::vector<double>(dim, hi)};
}

// Ring family, any even dimension 2n: u = ‖x‖², L*u = −8 Σ r_p(r_p−1) + 2dD
// with r_p the squared radius of coordinate pair p. With γ = 4D+6,
// Cauchy–Schwarz over the pair radii gives the threshold
// rho_m = n/2 + √(n(2n+2dD+γ)/8), which is 1/2+√(D+1) at n = 1 and tight
// whenever all pair radii coincide.
LyapunovSpec ring_lyapunov(int dim, double D) {
  LyapunovSpec spec;
  const int n = dim / 2;
  spec.gamma = 4.0 * D + 6.0;
  spec.rho_m = 0.5 * n + std::sqrt(n * (2.0 * n + 2.0 * dim * D + spec.gamma) / 8.0);
  spec.u = [](std::span<const double> x) {
    double s = 0;
    for (double xi : x) s += xi * xi;
    return s;
  };
  spec.lstar_u = [dim, D](std::span<const double> x) {
    double acc = 0;
    for (int p = 0; p < dim / 2; ++p) {
      const double r = x[2 * p] * x[2 * p] + x[2 * p + 1] * x[2 * p + 1];
      acc += r * (r - 1.0);
    }
    return -8.0 * acc + 2.0 * dim * D;
  };
  return spec;
}

LyapunovSpec hypersphere_lyapunov(int dim, double D) {
  LyapunovSpec spec;
  spec.gamma = 4.0 * D + 6.0;
  spec.rho_m = 0.5 + std::sqrt((2.0 + 2.0 * dim * D + spec.gamma) / 8.0);
  spec.u = [](std::span<const double> x) {
    double s = 0;
    for (double xi : x) s += xi * xi;
    return s;
  };
  spec.lstar_u = [dim, D](std::span<const double> x) {
    double s = 0;
    for (double xi : x) s += xi * xi;
    return -8.0 * s * (s - 1.0) + 2.0 * dim * D;
  };
  return spec;
}

// u = ρx² + αy² + α(z−2ρ)², for which L*u collapses to a negative-definite
// quadratic plus the constant 2D(2α+ρ).
LyapunovSpec lorenz_lyapunov(double alpha, double beta, double rho, double D) {
  LyapunovSpec spec;
  spec.gamma = 1.0;
  spec.rho_m = 4.0 * alpha * beta * rho * rho + 2.0 * D * (2.0 * alpha + rho) + 1.0;
  spec.u = [alpha, rho](std::span<const double> x) {
    const double dz = x[2] - 2.0 * rho;
    return rho * x[0] * x[0] + alpha * x[1] * x[1] + alpha * dz * dz;
  };
  spec.lstar_u = [alpha, beta, rho, D](std::span<const double> x) {
    return -2.0 * alpha * rho * x[0] * x[0] - 2.0 * alpha * x[1] * x[1] -
           2.0 * alpha * beta * x[2] * x[2] + 4.0 * alpha * beta * rho * x[2] +
           2.0 * D * (2.0 * alpha + rho);
  };
  return spec;
}

// u = ‖x‖², L*u = 2(x sin y + y sin z + z sin x) − 2b‖x‖² + 6D ≤
// 2√3‖x‖ − 2b‖x‖² + 6D, giving the conservative threshold below.
LyapunovSpec thomas_lyapunov(double b, double D) {
  LyapunovSpec spec;
  spec.gamma = 1.0 / (4.0 * b);
  const double root = std::sqrt(3.0) / (2.0 * b) + std::sqrt(1.0 + 6.0 * b * D) / b;
  spec.rho_m = root * root;
  spec.u = [](std::span<const double> x) {
    return x[0] * x[0] + x[1] * x[1] + x[2] * x[2];
  };
  spec.lstar_u = [b, D](std::span<const double> x) {
    const double u = x[0] * x[0] + x[1] * x[1] + x[2] * x[2];
    return 2.0 * (x[0] * std::sin(x[1]) + x[1] * std::sin(x[2]) + x[2] * std::sin(x[0])) -
           2.0 * b * u + 6.0 * D;
  };
  return spec;
}

}  // namespace

DriftSystem make_system(const std::string& name, int dim, double diffusion,
                        const SystemOverrides& ov) {
  if (!(diffusion > 0)) throw std::invalid_argument("make_system: diffusion must be positive");

  DriftSystem s;
  s.name = name;
  s.dim = dim;
  s.diffusion = diffusion;

  if (name == "ring") {
    if (dim < 2 || dim % 2 != 0)
      throw std::invalid_argument("make_system: ring needs an even dimension >= 2");
    s.kind = Kind::ring;
    s.domain = cube(dim, -2.0, 2.0);
    s.lyapunov = ring_lyapunov(dim, diffusion);
  } else if (name == "lorenz63") {
    if (dim != 3) throw std::invalid_argument("make_system: lorenz63 is three-dimensional");
    s.kind = Kind::lorenz63;
    s.domain = Box{{-30, -40, 0}, {30, 40, 70}};
    if (ov.alpha) s.alpha = *ov.alpha;
    if (ov.beta) s.beta = *ov.beta;
    if (ov.rho) s.rho = *ov.rho;
    s.lyapunov = lorenz_lyapunov(s.alpha, s.beta, s.rho, diffusion);
  } else if (name == "thomas") {
    if (dim != 3) throw std::invalid_argument("make_system: thomas is three-dimensional");
    s.kind = Kind::thomas;
    s.domain = cube(3, -10.0, 10.0);
    if (ov.b) s.b = *ov.b;
    s.lyapunov = thomas_lyapunov(s.b, diffusion);
  } else {
    throw std::invalid_argument("make_system: unknown system '" + name + "'");
  }

  if (ov.domain) {
    ov.domain->validate();
    if (ov.domain->dim() != dim)
      throw std::invalid_argument("make_system: domain dimension mismatch");
    s.domain = *ov.domain;
  }
  s.domain.validate();
  return s;
}

DriftSystem make_hypersphere(int dim, double diffusion) {
  if (dim < 1) throw std::invalid_argument("make_hypersphere: dimension must be >= 1");
  if (!(diffusion > 0))
    throw std::invalid_argument("make_hypersphere: diffusion must be positive");
  DriftSystem s;
  s.kind = Kind::hypersphere;
  s.name = "hypersphere";
  s.dim = dim;
  s.diffusion = diffusion;
  s.domain = cube(dim, -2.0, 2.0);
  s.lyapunov = hypersphere_lyapunov(dim, diffusion);
  return s;
}

bool has_analytic_density(const DriftSystem& s) { return s.has_potential(); }

std::vector<double> sample_uniform(const Box& box, int n, rng::Stream& stream) {
  if (n < 1) throw std::invalid_argument("sample_uniform: need n >= 1");
  box.validate();
  const int d = box.dim();
  std::vector<double> out(static_cast<size_t>(n) * d);
  for (int i = 0; i < n; ++i)
    for (int j = 0; j < d; ++j) out[static_cast<size_t>(i) * d + j] = stream.uniform(box.lo[j], box.hi[j]);
  return out;
}

LyapunovReport lyapunov_report(const DriftSystem& s, int n, rng::Stream& stream) {
  if (!s.lyapunov) throw std::invalid_argument("lyapunov_report: system has no certificate");
  if (n < 1) throw std::invalid_argument("lyapunov_report: need n >= 1");
  const LyapunovSpec& spec = *s.lyapunov;

  LyapunovReport rep;
  rep.worst_margin = -std::numeric_limits<double>::infinity();

  const Box boxes[2] = {s.domain, s.domain.inflated(2.0)};
  for (const Box& box : boxes) {
    const std::vector<double> pts = sample_uniform(box, n, stream);
    for (int i = 0; i < n; ++i) {
      std::span<const double> x(pts.data() + static_cast<size_t>(i) * s.dim, s.dim);
      rep.n_sampled++;
      const double u = spec.u(x);
      rep.max_u_seen = std::max(rep.max_u_seen, u);
      if (u > spec.rho_m) {
        rep.n_checked++;
        const double margin = spec.lstar_u(x) + spec.gamma;
        rep.worst_margin = std::max(rep.worst_margin, margin);
        if (margin > 0) rep.n_violations++;
      }
    }
  }
  return rep;
}

}  // namespace fpz::sys

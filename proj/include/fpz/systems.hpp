#pragma once
#include <cmath>
#include <cstdint>
#include <functional>
#include <optional>
#include <span>
#include <stdexcept>
#include <string>
#include <vector>

#include "fpz/rng.hpp"

namespace fpz::sys {

// Axis-aligned box, used both as the integration domain Ω_I and as histogram
// support.
struct Box {
  std::vector<double> lo, hi;

  int dim() const { return static_cast<int>(lo.size()); }
  double volume() const;
  Box inflated(double factor) const;  // scaled about the center
  bool contains(std::span<const double> x) const;
  void validate() const;  // lo < hi per axis, matching sizes
};

enum class Kind { ring, lorenz63, thomas, hypersphere };

// Certificate data for geometric ergodicity: outside the sublevel set
// {u ≤ rho_m} the adjoint generator satisfies L*u ≤ −gamma.
struct LyapunovSpec {
  std::function<double(std::span<const double>)> u;
  std::function<double(std::span<const double>)> lstar_u;
  double gamma = 0;
  double rho_m = 0;
};

// A drift-diffusion system dX = μ(X)dt + √(2D) dW with an interest box Ω_I.
// Fields for all families live side by side; `kind` selects which are live.
struct DriftSystem {
  Kind kind = Kind::ring;
  std::string name;
  int dim = 2;
  double diffusion = 1.0;  // D
  Box domain;              // Ω_I

  double b = 0.2;                              // thomas
  double alpha = 10, beta = 8.0 / 3.0, rho = 28;  // lorenz63

  std::optional<LyapunovSpec> lyapunov;

  bool has_potential() const { return kind == Kind::ring || kind == Kind::hypersphere; }
};

// Optional parameter overrides for make_system; absent fields keep defaults.
struct SystemOverrides {
  std::optional<Box> domain;
  std::optional<double> b, alpha, beta, rho;
};

// name ∈ {ring, lorenz63, thomas}; ring needs even dim ≥ 2, the other two
// dim == 3. diffusion ≤ 0 or a bad name/dim is an error.
DriftSystem make_system(const std::string& name, int dim, double diffusion,
                        const SystemOverrides& overrides = {});

// The near-zero-potential sphere system used by the precision experiment;
// kept out of make_system's name set on purpose.
DriftSystem make_hypersphere(int dim, double diffusion);

// ---- pointwise evaluations, templated so the 32-bit experiment runs the
// ---- exact same expressions in float

template <class T>
void drift(const DriftSystem& s, std::span<const T> x, std::span<T> out) {
  const int d = s.dim;
  switch (s.kind) {
    case Kind::ring:
      for (int p = 0; p < d / 2; ++p) {
        const T a = x[2 * p], bb = x[2 * p + 1];
        const T r = a * a + bb * bb;
        const T c = T(-4) * (r - T(1));
        out[2 * p] = c * a;
        out[2 * p + 1] = c * bb;
      }
      return;
    case Kind::hypersphere: {
      T ssum = T(0);
      for (int j = 0; j < d; ++j) ssum += x[j] * x[j];
      const T c = T(-4) * (ssum - T(1));
      for (int j = 0; j < d; ++j) out[j] = c * x[j];
      return;
    }
    case Kind::lorenz63:
      out[0] = T(s.alpha) * (x[1] - x[0]);
      out[1] = x[0] * (T(s.rho) - x[2]) - x[1];
      out[2] = x[0] * x[1] - T(s.beta) * x[2];
      return;
    case Kind::thomas:
      // z-component uses −b·z, completing the cyclic symmetry of the family
      out[0] = std::sin(x[1]) - T(s.b) * x[0];
      out[1] = std::sin(x[2]) - T(s.b) * x[1];
      out[2] = std::sin(x[0]) - T(s.b) * x[2];
      return;
  }
  throw std::logic_error("drift: unreachable");
}

template <class T>
T drift_divergence(const DriftSystem& s, std::span<const T> x) {
  const int d = s.dim;
  switch (s.kind) {
    case Kind::ring: {
      T acc = T(0);
      for (int p = 0; p < d / 2; ++p) {
        const T r = x[2 * p] * x[2 * p] + x[2 * p + 1] * x[2 * p + 1];
        acc += T(8) * (T(2) * r - T(1));
      }
      return -acc;
    }
    case Kind::hypersphere: {
      T ssum = T(0);
      for (int j = 0; j < d; ++j) ssum += x[j] * x[j];
      return -(T(4 * d) * (ssum - T(1)) + T(8) * ssum);
    }
    case Kind::lorenz63:
      return T(-(s.alpha + 1.0 + s.beta));
    case Kind::thomas:
      return T(-3.0 * s.b);
  }
  throw std::logic_error("drift_divergence: unreachable");
}

// Potential V with μ = −∇V; only the gradient families have one.
template <class T>
T potential(const DriftSystem& s, std::span<const T> x) {
  const int d = s.dim;
  switch (s.kind) {
    case Kind::ring: {
      T acc = T(0);
      for (int p = 0; p < d / 2; ++p) {
        const T r = x[2 * p] * x[2 * p] + x[2 * p + 1] * x[2 * p + 1];
        const T e = r - T(1);
        acc += e * e;
      }
      return acc;
    }
    case Kind::hypersphere: {
      T ssum = T(0);
      for (int j = 0; j < d; ++j) ssum += x[j] * x[j];
      const T e = ssum - T(1);
      return e * e;
    }
    default:
      throw std::invalid_argument("potential: system '" + s.name + "' is not a gradient system");
  }
}

bool has_analytic_density(const DriftSystem& s);

// log of the unnormalized stationary density, −V/D (gradient systems only)
template <class T>
T analytic_log_density(const DriftSystem& s, std::span<const T> x) {
  if (!s.has_potential())
    throw std::invalid_argument("analytic_log_density: no closed form for '" + s.name + "'");
  return potential<T>(s, x) / T(-s.diffusion);
}

// n×d row-major uniform draws over the box; n ≥ 1 required
std::vector<double> sample_uniform(const Box& box, int n, rng::Stream& stream);

struct LyapunovReport {
  int n_sampled = 0;     // total points drawn (interest box + inflated box)
  int n_checked = 0;     // points with u(x) > rho_m
  int n_violations = 0;  // checked points with L*u + gamma > 0
  double worst_margin = 0;  // max of L*u + gamma over checked points
  double max_u_seen = 0;
};

// Samples n points of Ω_I and n of the 2×-inflated box, then evaluates the
// drift condition wherever u exceeds rho_m.
LyapunovReport lyapunov_report(const DriftSystem& s, int n, rng::Stream& stream);

}  // namespace fpz::sys

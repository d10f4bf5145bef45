#pragma once
#include <cstdint>
#include <map>
#include <span>
#include <string>
#include <utility>
#include <vector>

#include "fpz/grid.hpp"
#include "fpz/network.hpp"
#include "fpz/systems.hpp"
#include "fpz/trainer.hpp"

namespace fpz::an {

// ---- scalar statistics

// Sample Pearson correlation; lengths must match and be ≥ 2 with nonzero
// variance on both sides.
double pearson(std::span<const double> x, std::span<const double> y);

// Least-squares fit of a₀·exp(−a₁k) + a₂ by scanning a₁ over a refined
// log-spaced grid and solving the induced 2×2 linear problem for (a₀, a₂).
struct ExpFit {
  double a0 = 0, a1 = 0, a2 = 0;
  double rms = 0;
};
ExpFit exp_fit(std::span<const double> k, std::span<const double> d);

// v = mantissa·10^exponent with 1 ≤ |mantissa| < 10; (0, 0) for v = 0.
struct MantissaExponent {
  double mantissa = 0;
  int exponent = 0;
};
MantissaExponent mantissa_exponent(double v);

// ---- precision survey of the analytic zero (gradient systems only)
//
// Samples Ω_I uniformly, pushes f = −V/D through the same dual arithmetic
// and residual assembly the trainer uses — in the scalar type T — and bins
// the base-10 exponents of the nonzero residuals.

struct ExponentHistogram {
  std::map<int, std::int64_t> counts;  // exponent → nonzero-sample count
  std::int64_t zero_count = 0;
  std::int64_t total = 0;

  int majority_exponent() const;  // exponent with the largest count
  int max_exponent() const;       // largest exponent present
};

struct ResidualSurvey {
  ExponentHistogram hist;
  double max_abs = 0;
};

template <class T>
ResidualSurvey analytic_residual_survey(const sys::DriftSystem& system, std::int64_t n,
                                        std::uint64_t seed);

// ---- distance from the analytic stationary density

struct SupOptions {
  std::vector<int> bins;   // per kept axis; defaults to 200 each
  int subintervals = 60;   // composite-GL pieces per axis for normalization
  int gl_n = 8;
  int slice_u = -1, slice_v = -1;  // kept axes when dim > 3; default middle pair
};

struct SupReport {
  double sup_error = 0;   // max |c·exp(n_θ) − p_true| over the grid
  double c = 0;           // 1/∫ exp(n_θ), the learned normalization
  double max_p_true = 0;  // max of the truth over the same grid
  bool sliced = false;    // dim > 3: evaluated on a 2D slice, other axes 0
  int ax_u = 0, ax_v = 1;
};

// Truth and learned field are both normalized to unit mass over Ω_I (the
// slice's 2D sub-box in slice mode); the sup runs over cell centers of a
// uniform grid. Systems without a closed-form density are rejected.
template <class T>
SupReport sup_distance(const sys::DriftSystem& system, const net::Params<T>& params,
                       const SupOptions& opt = {});

// ∫ exp(n_θ) over a box (dim ≤ 4), the normalization integral Z.
template <class T>
double learned_mass(const net::Params<T>& params, const sys::Box& box, int subintervals = 60,
                    int gl_n = 8);

// c·exp(n_θ) sampled at the cell centers of a grid, c normalizing over the box.
template <class T>
grid::GridDensity network_density_grid(const net::Params<T>& params, const sys::Box& box,
                                       std::span<const int> bins, int subintervals = 60,
                                       int gl_n = 8);

// Compares a gridded density estimate against the analytic density
// normalized over the whole space (integrated on a 2×-inflated box), with
// the truth averaged over each cell by a small per-cell GL rule.
struct GridCompare {
  double mean_abs_error = 0;
  double sup_error = 0;
  double max_truth = 0;
};
GridCompare compare_to_truth(const grid::GridDensity& g, const sys::DriftSystem& system,
                             int cell_gl_n = 4);

// ---- loss/distance co-evolution across checkpoints

struct DistanceTrace {
  std::vector<std::int64_t> iterations;
  std::vector<double> loss;
  std::vector<double> distance;
  std::vector<double> normalization;  // c per checkpoint
};

// Pairs each checkpoint's sup-distance with the trace loss recorded at the
// same iteration (the latest row at or before it).
template <class T>
DistanceTrace distance_trace(
    const sys::DriftSystem& system,
    const std::vector<std::pair<std::int64_t, net::Params<T>>>& checkpoints,
    std::span<const train::TraceRow> trace, const SupOptions& opt = {});

// ---- dimension scaling

struct ScalingTable {
  std::vector<int> dims;
  std::vector<double> ms_per_iteration;
  double slope = 0, intercept = 0;  // least-squares ms ≈ slope·d + intercept
};
ScalingTable scaling_table(std::span<const std::pair<int, double>> runs);

extern template ResidualSurvey analytic_residual_survey<float>(const sys::DriftSystem&, std::int64_t, std::uint64_t);
extern template ResidualSurvey analytic_residual_survey<double>(const sys::DriftSystem&, std::int64_t, std::uint64_t);
extern template SupReport sup_distance<float>(const sys::DriftSystem&, const net::Params<float>&, const SupOptions&);
extern template SupReport sup_distance<double>(const sys::DriftSystem&, const net::Params<double>&, const SupOptions&);
extern template double learned_mass<float>(const net::Params<float>&, const sys::Box&, int, int);
extern template double learned_mass<double>(const net::Params<double>&, const sys::Box&, int, int);
extern template grid::GridDensity network_density_grid<float>(const net::Params<float>&, const sys::Box&, std::span<const int>, int, int);
extern template grid::GridDensity network_density_grid<double>(const net::Params<double>&, const sys::Box&, std::span<const int>, int, int);
extern template DistanceTrace distance_trace<float>(const sys::DriftSystem&, const std::vector<std::pair<std::int64_t, net::Params<float>>>&, std::span<const train::TraceRow>, const SupOptions&);
extern template DistanceTrace distance_trace<double>(const sys::DriftSystem&, const std::vector<std::pair<std::int64_t, net::Params<double>>>&, std::span<const train::TraceRow>, const SupOptions&);

}  // namespace fpz::an

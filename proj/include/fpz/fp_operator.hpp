#pragma once
#include <span>
#include <vector>

#include "fpz/autodiff.hpp"
#include "fpz/network.hpp"
#include "fpz/residual_core.hpp"
#include "fpz/systems.hpp"

namespace fpz::fpo {

// Residual of the log-transformed stationarity equation at one point,
// together with its constituent parts (useful for diagnostics and the
// precision experiment).
template <class T>
struct ResidualSample {
  std::vector<T> x;
  T residual{};
  ResidualParts<T> parts;
};

// Evaluates the log-form residual of the network at x:
//   −∇·μ − μ·∇n_θ + D(‖∇n_θ‖² + Δn_θ)
template <class T>
ResidualSample<T> log_residual(const sys::DriftSystem& system, const net::Params<T>& params,
                               std::span<const T> x);

// Same residual for an externally supplied candidate log-density f given its
// derivatives at x (no network involved).
template <class T>
ResidualSample<T> log_residual_at(const sys::DriftSystem& system, std::span<const T> x,
                                  std::span<const T> grad_f, std::span<const T> second_f);

// Direct (untransformed) stationarity operator applied to a candidate
// density p with caller-supplied derivatives:
//   (L p)(x) = −p·∇·μ − μ·∇p + D·Δp
template <class T>
T fpo_residual(const sys::DriftSystem& system, std::span<const T> x, T p,
               std::span<const T> grad_p, T lap_p);

// Mean squared residual over a batch (row-major n×d). Reference
// implementation; the training loop uses the batched kernel instead.
template <class T>
double loss(const sys::DriftSystem& system, const net::Params<T>& params, const T* points,
            int n);

extern template ResidualSample<float> log_residual<float>(const sys::DriftSystem&, const net::Params<float>&, std::span<const float>);
extern template ResidualSample<double> log_residual<double>(const sys::DriftSystem&, const net::Params<double>&, std::span<const double>);
extern template ResidualSample<float> log_residual_at<float>(const sys::DriftSystem&, std::span<const float>, std::span<const float>, std::span<const float>);
extern template ResidualSample<double> log_residual_at<double>(const sys::DriftSystem&, std::span<const double>, std::span<const double>, std::span<const double>);
extern template float fpo_residual<float>(const sys::DriftSystem&, std::span<const float>, float, std::span<const float>, float);
extern template double fpo_residual<double>(const sys::DriftSystem&, std::span<const double>, double, std::span<const double>, double);
extern template double loss<float>(const sys::DriftSystem&, const net::Params<float>&, const float*, int);
extern template double loss<double>(const sys::DriftSystem&, const net::Params<double>&, const double*, int);

}  // namespace fpz::fpo

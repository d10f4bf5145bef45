#include "fpz/fp_operator.hpp"

#include <stdexcept>

namespace fpz::fpo {

template <class T>
ResidualSample<T> log_residual_at(const sys::DriftSystem& system, std::span<const T> x,
                                  std::span<const T> grad_f, std::span<const T> second_f) {
  const int d = system.dim;
  if (static_cast<int>(x.size()) != d || static_cast<int>(grad_f.size()) != d ||
      static_cast<int>(second_f.size()) != d)
    throw std::invalid_argument("log_residual_at: dimension mismatch");
  std::vector<T> mu(d);
  sys::drift<T>(system, x, mu);
  const T div = sys::drift_divergence<T>(system, x);

  ResidualSample<T> out;
  out.x.assign(x.begin(), x.end());
  out.parts = residual_parts<T>(div, mu, grad_f, second_f);
  out.residual = assemble_residual(out.parts, static_cast<T>(system.diffusion));
  return out;
}

template <class T>
ResidualSample<T> log_residual(const sys::DriftSystem& system, const net::Params<T>& params,
                               std::span<const T> x) {
  if (system.dim != params.arch.input_dim)
    throw std::invalid_argument("log_residual: system/network dimension mismatch");
  const ad::Dual2<T> nd = ad::forward_dual<T>(params, x);
  return log_residual_at<T>(system, x, nd.g, nd.h);
}

template <class T>
T fpo_residual(const sys::DriftSystem& system, std::span<const T> x, T p,
               std::span<const T> grad_p, T lap_p) {
  const int d = system.dim;
  if (static_cast<int>(x.size()) != d || static_cast<int>(grad_p.size()) != d)
    throw std::invalid_argument("fpo_residual: dimension mismatch");
  std::vector<T> mu(d);
  sys::drift<T>(system, x, mu);
  const T div = sys::drift_divergence<T>(system, x);
  T adv = T(0);
  for (int k = 0; k < d; ++k) adv += mu[k] * grad_p[k];
  return -p * div - adv + static_cast<T>(system.diffusion) * lap_p;
}

template <class T>
double loss(const sys::DriftSystem& system, const net::Params<T>& params, const T* points,
            int n) {
  if (n < 1) throw std::invalid_argument("loss: empty batch");
  double acc = 0;
  for (int i = 0; i < n; ++i) {
    std::span<const T> x(points + static_cast<size_t>(i) * system.dim, system.dim);
    const T r = log_residual<T>(system, params, x).residual;
    acc += static_cast<double>(r) * static_cast<double>(r);
  }
  return acc / n;
}

template ResidualSample<float> log_residual<float>(const sys::DriftSystem&, const net::Params<float>&, std::span<const float>);
template ResidualSample<double> log_residual<double>(const sys::DriftSystem&, const net::Params<double>&, std::span<const double>);
template ResidualSample<float> log_residual_at<float>(const sys::DriftSystem&, std::span<const float>, std::span<const float>, std::span<const float>);
template ResidualSample<double> log_residual_at<double>(const sys::DriftSystem&, std::span<const double>, std::span<const double>, std::span<const double>);
template float fpo_residual<float>(const sys::DriftSystem&, std::span<const float>, float, std::span<const float>, float);
template double fpo_residual<double>(const sys::DriftSystem&, std::span<const double>, double, std::span<const double>, double);
template double loss<float>(const sys::DriftSystem&, const net::Params<float>&, const float*, int);
template double loss<double>(const sys::DriftSystem&, const net::Params<double>&, const double*, int);

}  // namespace fpz::fpo

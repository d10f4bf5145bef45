#pragma once
#include <cstdint>
#include <memory>
#include <vector>

#include "fpz/autodiff.hpp"
#include "fpz/network.hpp"
#include "fpz/systems.hpp"

namespace fpz::kernels {

// Batched residual-loss/gradient evaluator. Samples are processed in fixed
// blocks; network algebra within a block runs as dense matrix products over
// stacked derivative planes. Each block accumulates into its own buffer and
// buffers are reduced in block order, so results are bitwise independent of
// the OpenMP thread count (though not of the block size, which is part of
// the run configuration like any blocking choice).
template <class T>
class BatchEngine {
 public:
  BatchEngine(const sys::DriftSystem& system, const net::Architecture& arch,
              int block_size = 128);
  ~BatchEngine();
  BatchEngine(BatchEngine&&) noexcept;
  BatchEngine& operator=(BatchEngine&&) noexcept;

  // mean squared log-form residual over points (row-major n×d) and its
  // parameter gradient
  ad::LossGrad<T> loss_grad(const net::Params<T>& params, const T* points, int n);

  // plain network values over points
  void forward_values(const net::Params<T>& params, const T* points, int n, T* out);

 private:
  struct Impl;
  std::unique_ptr<Impl> impl_;
};

// One-shot conveniences (construct an engine internally).
template <class T>
ad::LossGrad<T> batch_loss_grad(const sys::DriftSystem& system, const net::Params<T>& params,
                                const T* points, int n, int block_size = 128);

template <class T>
void batch_forward(const net::Params<T>& params, const T* points, int n, T* out,
                   int block_size = 512);

// Serial reference path (per-sample tape), kept as the slow twin the batched
// kernel is validated and benchmarked against.
template <class T>
ad::LossGrad<T> batch_loss_grad_reference(const sys::DriftSystem& system,
                                          const net::Params<T>& params, const T* points, int n);

extern template class BatchEngine<float>;
extern template class BatchEngine<double>;
extern template ad::LossGrad<float> batch_loss_grad<float>(const sys::DriftSystem&, const net::Params<float>&, const float*, int, int);
extern template ad::LossGrad<double> batch_loss_grad<double>(const sys::DriftSystem&, const net::Params<double>&, const double*, int, int);
extern template void batch_forward<float>(const net::Params<float>&, const float*, int, float*, int);
extern template void batch_forward<double>(const net::Params<double>&, const double*, int, double*, int);
extern template ad::LossGrad<float> batch_loss_grad_reference<float>(const sys::DriftSystem&, const net::Params<float>&, const float*, int);
extern template ad::LossGrad<double> batch_loss_grad_reference<double>(const sys::DriftSystem&, const net::Params<double>&, const double*, int);

}  // namespace fpz::kernels

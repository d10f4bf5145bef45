#pragma once
#include <cstdint>
#include <span>
#include <string>
#include <vector>

#include "fpz/network.hpp"
#include "fpz/systems.hpp"

namespace fpz::ad {

// Forward-mode dual carrying a value, the d first derivatives along the
// coordinate axes, and the d pure second derivatives ∂²/∂x_k² — no mixed
// terms, which is all the divergence-form residual needs.
template <class T>
struct Dual2 {
  T v{};
  std::vector<T> g, h;

  Dual2() = default;
  explicit Dual2(int d) : g(d, T(0)), h(d, T(0)) {}
  int dim() const { return static_cast<int>(g.size()); }

  static Dual2 constant(T value, int d) {
    Dual2 out(d);
    out.v = value;
    return out;
  }
  // coordinate j of an input point: unit first derivative along axis j
  static Dual2 input(T value, int d, int j) {
    Dual2 out(d);
    out.v = value;
    out.g[j] = T(1);
    return out;
  }
};

template <class T>
Dual2<T> operator+(const Dual2<T>& a, const Dual2<T>& b) {
  Dual2<T> z(a.dim());
  z.v = a.v + b.v;
  for (int k = 0; k < z.dim(); ++k) {
    z.g[k] = a.g[k] + b.g[k];
    z.h[k] = a.h[k] + b.h[k];
  }
  return z;
}

template <class T>
Dual2<T> operator-(const Dual2<T>& a, const Dual2<T>& b) {
  Dual2<T> z(a.dim());
  z.v = a.v - b.v;
  for (int k = 0; k < z.dim(); ++k) {
    z.g[k] = a.g[k] - b.g[k];
    z.h[k] = a.h[k] - b.h[k];
  }
  return z;
}

// product rule through second order: (ab)'' = a''b + 2a'b' + ab''
template <class T>
Dual2<T> operator*(const Dual2<T>& a, const Dual2<T>& b) {
  Dual2<T> z(a.dim());
  z.v = a.v * b.v;
  for (int k = 0; k < z.dim(); ++k) {
    z.g[k] = a.g[k] * b.v + a.v * b.g[k];
    z.h[k] = a.h[k] * b.v + T(2) * a.g[k] * b.g[k] + a.v * b.h[k];
  }
  return z;
}

template <class T>
Dual2<T> operator*(T s, const Dual2<T>& a) {
  Dual2<T> z(a.dim());
  z.v = s * a.v;
  for (int k = 0; k < z.dim(); ++k) {
    z.g[k] = s * a.g[k];
    z.h[k] = s * a.h[k];
  }
  return z;
}

template <class T>
Dual2<T> operator+(const Dual2<T>& a, T c) {
  Dual2<T> z = a;
  z.v += c;
  return z;
}

// chain rule for scalar φ: g → φ'(v)g, h → φ''(v)g² + φ'(v)h
template <class T>
Dual2<T> apply_unary(const Dual2<T>& a, T val, T d1, T d2) {
  Dual2<T> z(a.dim());
  z.v = val;
  for (int k = 0; k < z.dim(); ++k) {
    z.g[k] = d1 * a.g[k];
    z.h[k] = d2 * a.g[k] * a.g[k] + d1 * a.h[k];
  }
  return z;
}

template <class T>
Dual2<T> tanh(const Dual2<T>& a) {
  using std::tanh;
  const T t = tanh(a.v);
  const T d1 = T(1) - t * t;
  return apply_unary(a, t, d1, T(-2) * t * d1);
}

template <class T>
Dual2<T> exp(const Dual2<T>& a) {
  using std::exp;
  const T e = exp(a.v);
  return apply_unary(a, e, e, e);
}

// ---- per-sample network evaluation with duals (reference path)

template <class T>
Dual2<T> forward_dual(const net::Params<T>& p, std::span<const T> x);

template <class T>
std::vector<T> input_gradient(const net::Params<T>& p, std::span<const T> x);

template <class T>
T input_laplacian(const net::Params<T>& p, std::span<const T> x);

// ---- reverse-over-forward tape
//
// Records the gated-cell computation as a list of vector-valued primitive
// nodes (affine-with-input, tanh, hadamard, add, output dot), each holding
// Dual2 values; the reverse sweep walks the list backwards propagating
// Dual2-shaped adjoints and accumulating parameter gradients. This is the
// slow, obviously-correct twin of the batched kernel.
template <class T>
class Tape {
 public:
  Tape(const net::Params<T>& params, std::span<const T> x);

  const Dual2<T>& output() const { return nodes_[output_node_].val[0]; }

  // Seeds the output adjoint and accumulates dLoss/dθ into grad (flat layout,
  // must be pre-sized/zeroed by the caller or accumulated across samples).
  void backward(const Dual2<T>& output_seed, std::span<T> grad);

 private:
  enum class Op { affine, tanh_elem, hadamard, add, output_dot };
  struct Node {
    Op op;
    int a = -1, b = -1;          // operand node indices
    std::int64_t w_off = -1, u_off = -1, b_off = -1;
    int u_cols = 0;
    std::vector<Dual2<T>> val, adj;
  };

  int push(Node n);

  const net::Params<T>* params_;
  std::vector<T> x_;
  std::vector<Node> nodes_;
  int output_node_ = -1;
};

// ---- batch loss and parameter gradient, reference implementation
//
// loss = (1/n) Σ residual(x_i)²  with the log-form residual; the returned
// gradient follows the flat parameter layout.
template <class T>
struct LossGrad {
  double loss = 0;
  std::vector<T> grad;
};

template <class T>
LossGrad<T> loss_param_gradient(const sys::DriftSystem& system, const net::Params<T>& params,
                                const T* points, int n);

// ---- finite-difference cross-check

struct FdOptions {
  int n_points = 8;          // evaluation points for ∇/Δ checks
  int n_param_coords = 20;   // random θ coordinates for the loss-grad check
  int batch_n = 50;          // batch size behind the loss-grad check
  double step_grad = 1e-5;
  double step_lap = 1e-4;
  double step_param = 1e-5;
  double tol_grad = 1e-6;
  double tol_lap = 1e-4;
  double tol_param = 1e-5;
  std::uint64_t seed = 1;
};

struct FdCheck {
  std::string quantity;
  double max_rel_err = 0;
  int n_checked = 0;
  double tolerance = 0;
  bool within_tolerance = false;
};

struct FdReport {
  std::vector<FdCheck> checks;
  bool enforced = false;  // false for 32-bit runs: numbers are report-only
  bool passed = false;
};

// Relative errors are measured as |ad − fd| / max(|ad|, |fd|, floor) with a
// floor tied to the quantity's overall scale, so zero-gradient coordinates
// (e.g. dead blocks) compare as exact instead of 0/0. Any step == 0 is an
// error.
template <class T>
FdReport finite_difference_report(const sys::DriftSystem& system, const net::Params<T>& params,
                                  const FdOptions& opt = {});

// explicit instantiations live in autodiff.cpp
extern template Dual2<float> forward_dual<float>(const net::Params<float>&, std::span<const float>);
extern template Dual2<double> forward_dual<double>(const net::Params<double>&, std::span<const double>);
extern template std::vector<float> input_gradient<float>(const net::Params<float>&, std::span<const float>);
extern template std::vector<double> input_gradient<double>(const net::Params<double>&, std::span<const double>);
extern template float input_laplacian<float>(const net::Params<float>&, std::span<const float>);
extern template double input_laplacian<double>(const net::Params<double>&, std::span<const double>);
extern template class Tape<float>;
extern template class Tape<double>;
extern template LossGrad<float> loss_param_gradient<float>(const sys::DriftSystem&, const net::Params<float>&, const float*, int);
extern template LossGrad<double> loss_param_gradient<double>(const sys::DriftSystem&, const net::Params<double>&, const double*, int);
extern template FdReport finite_difference_report<float>(const sys::DriftSystem&, const net::Params<float>&, const FdOptions&);
extern template FdReport finite_difference_report<double>(const sys::DriftSystem&, const net::Params<double>&, const FdOptions&);

}  // namespace fpz::ad

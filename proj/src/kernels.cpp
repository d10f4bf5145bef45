#include "fpz/kernels.hpp"

#include <omp.h>

#include <Eigen/Dense>
#include <algorithm>
#include <array>
#include <stdexcept>

#include "fpz/residual_core.hpp"

namespace fpz::kernels {

namespace {

template <class T>
using Mat = Eigen::Matrix<T, Eigen::Dynamic, Eigen::Dynamic>;
template <class T>
using Vec = Eigen::Matrix<T, Eigen::Dynamic, 1>;
template <class T>
using Row = Eigen::Matrix<T, 1, Eigen::Dynamic>;
template <class T>
using MapRowMat = Eigen::Map<const Eigen::Matrix<T, Eigen::Dynamic, Eigen::Dynamic, Eigen::RowMajor>>;
template <class T>
using MapRowMatMut = Eigen::Map<Eigen::Matrix<T, Eigen::Dynamic, Eigen::Dynamic, Eigen::RowMajor>>;
template <class T>
using MapVec = Eigen::Map<const Vec<T>>;
template <class T>
using MapVecMut = Eigen::Map<Vec<T>>;

// per-layer parameter offsets, same arithmetic the layout object pins down
struct GateOff {
  std::int64_t w, u, b;
  int u_cols;
};

GateOff gate_off(const net::Architecture& a, int layer, int gate) {
  const std::int64_t d = a.input_dim, m = a.hidden;
  const std::int64_t per1 = 2 * m * d + m, pern = m * d + m * m + m;
  const std::int64_t base =
      layer == 1 ? 0 : 4 * per1 + static_cast<std::int64_t>(layer - 2) * 4 * pern;
  const std::int64_t per = layer == 1 ? per1 : pern;
  GateOff o;
  o.w = base + gate * per;
  o.u = o.w + m * d;
  o.u_cols = layer == 1 ? a.input_dim : a.hidden;
  o.b = o.u + m * o.u_cols;
  return o;
}

}  // namespace

// Derivative planes: matrices are m × (B·C) with C = 1+2d components laid out
// [value | ∂₁..∂_d | ∂₁²..∂_d²], each slice B columns wide. The whole-network
// algebra then runs as a handful of GEMMs per layer plus elementwise chain
// rules on the planes.
template <class T>
struct BatchEngine<T>::Impl {
  sys::DriftSystem system;
  net::Architecture arch;
  int B;   // block width (samples per block)
  int d, m, L, C;
  std::int64_t n_params;
  std::int64_t wout_off = 0, bout_off = 0;

  struct Work {
    Mat<T> X;                             // d×B sample values
    std::vector<std::array<Mat<T>, 4>> P, A;  // per layer, per gate: m×BC
    std::vector<Mat<T>> Cc, TC, H;            // per layer: m×BC
    Mat<T> Abar[4], Hbar, Hprevbar, Cbar, Cbar_prev, TCbar;
    Row<T> out, nbar;
    std::vector<T> mu;
    int alloc_cols = 0, adj_cols = 0;
  };
  // Bitwise run-to-run stability requires every buffer Eigen reduces over to
  // sit at a reproducible alignment: SIMD kernels peel unaligned heads, and
  // the peel width changes summation grouping. Eigen-owned matrices are
  // always max-aligned; raw buffers we map must be too, hence the aligned
  // allocator here and the theta copy below instead of mapping caller memory.
  template <class U>
  using avec = std::vector<U, Eigen::aligned_allocator<U>>;
  std::vector<Work> works;              // one per OpenMP thread
  std::vector<avec<T>> block_grads;
  std::vector<double> block_losses;
  avec<T> theta_scratch;

  Impl(const sys::DriftSystem& sys_in, const net::Architecture& a, int block)
      : system(sys_in), arch(a), B(block) {
    a.validate();
    if (system.dim != a.input_dim)
      throw std::invalid_argument("batch engine: system/network dimension mismatch");
    if (block < 1) throw std::invalid_argument("batch engine: block size must be >= 1");
    d = a.input_dim;
    m = a.hidden;
    L = a.layers;
    C = 1 + 2 * d;
    n_params = net::param_count(a);
    const net::ParamLayout layout = net::ParamLayout::make(a);
    wout_off = layout.block("w_out").offset;
    bout_off = layout.block("b_out").offset;
    works.resize(static_cast<size_t>(omp_get_max_threads()));
  }

  // grow a workspace to `cols` plane columns; value-only forwards request B
  // columns, full dual passes B·C (adjoint buffers only then)
  void ensure(Work& w, int cols, bool adjoints) {
    w.mu.resize(d);
    if (w.alloc_cols < cols) {
      w.X.resize(d, B);
      w.P.resize(L);
      w.A.resize(L);
      w.Cc.resize(L);
      w.TC.resize(L);
      w.H.resize(L);
      for (int l = 0; l < L; ++l) {
        for (int g = 0; g < 4; ++g) {
          w.P[l][g].resize(m, cols);
          w.A[l][g].resize(m, cols);
        }
        w.Cc[l].resize(m, cols);
        w.TC[l].resize(m, cols);
        w.H[l].resize(m, cols);
      }
      w.out.resize(cols);
      w.alloc_cols = cols;
    }
    if (adjoints && w.adj_cols < cols) {
      for (auto& mtx : w.Abar) mtx.resize(m, cols);
      w.Hbar.resize(m, cols);
      w.Hprevbar.resize(m, cols);
      w.Cbar.resize(m, cols);
      w.Cbar_prev.resize(m, cols);
      w.TCbar.resize(m, cols);
      w.nbar.resize(cols);
      w.adj_cols = cols;
    }
  }

  // plane p of a full matrix (p = 0 value, 1..d gradients, d+1..2d seconds)
  auto pl(Mat<T>& M, int p) { return M.middleCols(p * B, B); }
  auto pl(const Mat<T>& M, int p) const { return M.middleCols(p * B, B); }

  // z = a⊙b through second order (set or accumulate)
  template <bool Acc>
  void hadamard(Mat<T>& Z, const Mat<T>& Am, const Mat<T>& Bm) {
    auto assign = [](auto dst, const auto& src) {
      if constexpr (Acc)
        dst += src;
      else
        dst = src;
    };
    assign(pl(Z, 0), pl(Am, 0).cwiseProduct(pl(Bm, 0)));
    for (int k = 1; k <= d; ++k) {
      assign(pl(Z, k), pl(Am, k).cwiseProduct(pl(Bm, 0)) + pl(Am, 0).cwiseProduct(pl(Bm, k)));
      assign(pl(Z, d + k),
             pl(Am, d + k).cwiseProduct(pl(Bm, 0)) + T(2) * pl(Am, k).cwiseProduct(pl(Bm, k)) +
                 pl(Am, 0).cwiseProduct(pl(Bm, d + k)));
    }
  }

  // A = tanh(P) through second order
  void tanh_chain(const Mat<T>& P, Mat<T>& A) {
    pl(A, 0) = pl(P, 0).array().tanh().matrix();
    for (int k = 1; k <= d; ++k) {
      auto t = pl(A, 0).array();
      auto pg = pl(P, k).array();
      auto ph = pl(P, d + k).array();
      auto d1 = T(1) - t.square();
      pl(A, k) = (d1 * pg).matrix();
      pl(A, d + k) = ((T(-2) * t * d1) * pg.square() + d1 * ph).matrix();
    }
  }

  // adjoint of a in z = a⊙b: ā = f(z̄, b)
  template <bool Acc>
  void hadamard_adj(Mat<T>& Abar_out, const Mat<T>& Zbar, const Mat<T>& Bm) {
    if constexpr (Acc)
      pl(Abar_out, 0) += pl(Zbar, 0).cwiseProduct(pl(Bm, 0));
    else
      pl(Abar_out, 0) = pl(Zbar, 0).cwiseProduct(pl(Bm, 0));
    for (int k = 1; k <= d; ++k) {
      pl(Abar_out, 0) +=
          pl(Zbar, k).cwiseProduct(pl(Bm, k)) + pl(Zbar, d + k).cwiseProduct(pl(Bm, d + k));
      auto gterm = pl(Zbar, k).cwiseProduct(pl(Bm, 0)) +
                   T(2) * pl(Zbar, d + k).cwiseProduct(pl(Bm, k));
      auto hterm = pl(Zbar, d + k).cwiseProduct(pl(Bm, 0));
      if constexpr (Acc) {
        pl(Abar_out, k) += gterm;
        pl(Abar_out, d + k) += hterm;
      } else {
        pl(Abar_out, k) = gterm;
        pl(Abar_out, d + k) = hterm;
      }
    }
  }

  // accumulate the adjoint through z = tanh(p) into Pbar, given p's planes
  // and t = tanh(p) values
  void tanh_adj_acc(Mat<T>& Pbar, const Mat<T>& Zbar, const Mat<T>& P, const Mat<T>& Tmat) {
    auto t = pl(Tmat, 0).array();
    auto d1 = T(1) - t.square();
    pl(Pbar, 0) += (d1 * pl(Zbar, 0).array()).matrix();
    for (int k = 1; k <= d; ++k) {
      auto pg = pl(P, k).array();
      auto ph = pl(P, d + k).array();
      auto d2 = T(-2) * t * d1;
      auto d3 = (T(6) * t.square() - T(2)) * d1;
      pl(Pbar, 0) +=
          (d2 * pg * pl(Zbar, k).array() + (d3 * pg.square() + d2 * ph) * pl(Zbar, d + k).array())
              .matrix();
      pl(Pbar, k) +=
          (d1 * pl(Zbar, k).array() + T(2) * d2 * pg * pl(Zbar, d + k).array()).matrix();
      pl(Pbar, d + k) += (d1 * pl(Zbar, d + k).array()).matrix();
    }
  }

  // in-place variant: Z holds z̄ on entry and p̄ on exit (value plane first,
  // then gradient planes, then second planes — later stages only read planes
  // not yet overwritten)
  void tanh_adj_inplace(Mat<T>& Z, const Mat<T>& P, const Mat<T>& Tmat) {
    auto t = pl(Tmat, 0).array();
    auto d1 = T(1) - t.square();
    pl(Z, 0) = (d1 * pl(Z, 0).array()).matrix();  // elementwise: alias-safe
    for (int k = 1; k <= d; ++k) {
      auto pg = pl(P, k).array();
      auto ph = pl(P, d + k).array();
      auto d2 = T(-2) * t * d1;
      auto d3 = (T(6) * t.square() - T(2)) * d1;
      pl(Z, 0) +=
          (d2 * pg * pl(Z, k).array() + (d3 * pg.square() + d2 * ph) * pl(Z, d + k).array())
              .matrix();
      pl(Z, k) = (d1 * pl(Z, k).array() + T(2) * d2 * pg * pl(Z, d + k).array()).matrix();
      pl(Z, d + k) = (d1 * pl(Z, d + k).array()).matrix();
    }
  }

  // forward through the gated cells for one block, all derivative planes
  void forward_block(const T* th, Work& w) {
    for (int l = 1; l <= L; ++l) {
      const Mat<T>* Hprev = l > 1 ? &w.H[l - 2] : nullptr;
      for (int g = 0; g < 4; ++g) {
        if (l == 1 && g == 0) continue;  // forget gate multiplies c₀ = 0
        const GateOff off = gate_off(arch, l, g);
        MapRowMat<T> W(th + off.w, m, d);
        MapVec<T> bias(th + off.b, m);
        Mat<T>& P = w.P[l - 1][g];
        if (l > 1) {
          MapRowMat<T> U(th + off.u, m, off.u_cols);
          P.noalias() = U * (*Hprev);
        } else {
          P.setZero();
        }
        pl(P, 0).noalias() += W * w.X;
        pl(P, 0).colwise() += bias;
        for (int k = 0; k < d; ++k) {
          const Vec<T> wcol = W.col(k);  // ∂x/∂x_k = e_k ⇒ plane shift by W's column
          pl(P, 1 + k).colwise() += wcol;
        }
        tanh_chain(P, w.A[l - 1][g]);
      }
      // c ← f⊙c_prev + g⊙s;  h ← r⊙tanh(c)
      if (l == 1) {
        hadamard<false>(w.Cc[0], w.A[0][1], w.A[0][3]);
      } else {
        hadamard<false>(w.Cc[l - 1], w.A[l - 1][0], w.Cc[l - 2]);
        hadamard<true>(w.Cc[l - 1], w.A[l - 1][1], w.A[l - 1][3]);
      }
      tanh_chain(w.Cc[l - 1], w.TC[l - 1]);
      hadamard<false>(w.H[l - 1], w.A[l - 1][2], w.TC[l - 1]);
    }
  }

  // one block of the loss/grad pass: samples [start, start+valid)
  void run_block(const T* th, const T* pts, int n_total, int start, int valid, Work& w,
                 avec<T>& gbuf, double& loss_out) {
    ensure(w, B * C, true);
    const T D = static_cast<T>(system.diffusion);

    // load block, padding the tail by replicating the last sample (padded
    // columns get zero adjoint seeds, so they contribute nothing)
    for (int s = 0; s < B; ++s) {
      const int src = start + (s < valid ? s : valid - 1);
      for (int j = 0; j < d; ++j) w.X(j, s) = pts[static_cast<size_t>(src) * d + j];
    }

    forward_block(th, w);

    MapVec<T> wout(th + wout_off, m);

    w.out.noalias() = wout.transpose() * w.H[L - 1];
    w.out.leftCols(B).array() += th[bout_off];

    // residuals and adjoint seeds
    w.nbar.setZero();
    double loss = 0;
    for (int s = 0; s < valid; ++s) {
      std::span<const T> x(w.X.data() + static_cast<size_t>(s) * d, d);
      sys::drift<T>(system, x, w.mu);
      const T div = sys::drift_divergence<T>(system, x);
      T adv = T(0), gsq = T(0), lap = T(0);
      for (int k = 0; k < d; ++k) {
        const T gk = w.out(0, (1 + k) * B + s);
        const T hk = w.out(0, (1 + d + k) * B + s);
        adv += w.mu[k] * gk;
        gsq += gk * gk;
        lap += hk;
      }
      const T r = fpo::assemble_residual<T>({div, adv, gsq, lap}, D);
      loss += static_cast<double>(r) * static_cast<double>(r);
      const T wgt = T(2) * r / static_cast<T>(n_total);
      for (int k = 0; k < d; ++k) {
        const T gk = w.out(0, (1 + k) * B + s);
        w.nbar(0, (1 + k) * B + s) = wgt * (T(2) * D * gk - w.mu[k]);
        w.nbar(0, (1 + d + k) * B + s) = wgt * D;
      }
    }
    loss_out = loss;

    // reverse sweep
    w.Hbar.noalias() = wout * w.nbar;
    MapVecMut<T> gwout(gbuf.data() + wout_off, m);
    gwout.noalias() += w.H[L - 1] * w.nbar.transpose();
    gbuf[static_cast<size_t>(bout_off)] += w.nbar.leftCols(B).sum();

    w.Cbar.setZero();
    for (int l = L; l >= 1; --l) {
      hadamard_adj<false>(w.Abar[2], w.Hbar, w.TC[l - 1]);
      hadamard_adj<false>(w.TCbar, w.Hbar, w.A[l - 1][2]);
      tanh_adj_acc(w.Cbar, w.TCbar, w.Cc[l - 1], w.TC[l - 1]);

      hadamard_adj<false>(w.Abar[1], w.Cbar, w.A[l - 1][3]);
      hadamard_adj<false>(w.Abar[3], w.Cbar, w.A[l - 1][1]);
      if (l > 1) {
        hadamard_adj<false>(w.Abar[0], w.Cbar, w.Cc[l - 2]);
        hadamard_adj<false>(w.Cbar_prev, w.Cbar, w.A[l - 1][0]);
      }

      if (l > 1) w.Hprevbar.setZero();
      for (int g = 0; g < 4; ++g) {
        if (l == 1 && g == 0) continue;
        tanh_adj_inplace(w.Abar[g], w.P[l - 1][g], w.A[l - 1][g]);  // now holds P̄
        const GateOff off = gate_off(arch, l, g);
        MapRowMatMut<T> gW(gbuf.data() + off.w, m, d);
        MapVecMut<T> gb(gbuf.data() + off.b, m);
        gW.noalias() += pl(w.Abar[g], 0) * w.X.transpose();
        for (int k = 0; k < d; ++k) gW.col(k) += pl(w.Abar[g], 1 + k).rowwise().sum();
        gb += pl(w.Abar[g], 0).rowwise().sum();
        if (l > 1) {
          MapRowMat<T> U(th + off.u, m, off.u_cols);
          MapRowMatMut<T> gU(gbuf.data() + off.u, m, off.u_cols);
          gU.noalias() += w.Abar[g] * w.H[l - 2].transpose();
          w.Hprevbar.noalias() += U.transpose() * w.Abar[g];
        }
      }
      if (l > 1) {
        std::swap(w.Hbar, w.Hprevbar);
        std::swap(w.Cbar, w.Cbar_prev);
      }
    }
  }

  // value-only forward for one block (uses the value planes of the same
  // workspace)
  void run_block_values(const T* th, const T* pts, int start, int valid, Work& w, T* out) {
    ensure(w, B, false);
    for (int s = 0; s < B; ++s) {
      const int src = start + (s < valid ? s : valid - 1);
      for (int j = 0; j < d; ++j) w.X(j, s) = pts[static_cast<size_t>(src) * d + j];
    }
    for (int l = 1; l <= L; ++l) {
      for (int g = 0; g < 4; ++g) {
        if (l == 1 && g == 0) continue;
        const GateOff off = gate_off(arch, l, g);
        MapRowMat<T> W(th + off.w, m, d);
        MapVec<T> bias(th + off.b, m);
        auto Pv = pl(w.P[l - 1][g], 0);
        if (l > 1) {
          MapRowMat<T> U(th + off.u, m, off.u_cols);
          Pv.noalias() = U * pl(w.H[l - 2], 0);
        } else {
          Pv.setZero();
        }
        Pv.noalias() += W * w.X;
        Pv.colwise() += bias;
        pl(w.A[l - 1][g], 0) = Pv.array().tanh().matrix();
      }
      if (l == 1) {
        pl(w.Cc[0], 0) = pl(w.A[0][1], 0).cwiseProduct(pl(w.A[0][3], 0));
      } else {
        pl(w.Cc[l - 1], 0) = pl(w.A[l - 1][0], 0).cwiseProduct(pl(w.Cc[l - 2], 0)) +
                             pl(w.A[l - 1][1], 0).cwiseProduct(pl(w.A[l - 1][3], 0));
      }
      pl(w.TC[l - 1], 0) = pl(w.Cc[l - 1], 0).array().tanh().matrix();
      pl(w.H[l - 1], 0) = pl(w.A[l - 1][2], 0).cwiseProduct(pl(w.TC[l - 1], 0));
    }
    MapVec<T> wout(th + wout_off, m);
    const T bout = th[bout_off];
    Row<T> vals = wout.transpose() * pl(w.H[L - 1], 0);
    for (int s = 0; s < valid; ++s) out[start + s] = vals(0, s) + bout;
  }
};

template <class T>
BatchEngine<T>::BatchEngine(const sys::DriftSystem& system, const net::Architecture& arch,
                            int block_size)
    : impl_(std::make_unique<Impl>(system, arch, block_size)) {}

template <class T>
BatchEngine<T>::~BatchEngine() = default;
template <class T>
BatchEngine<T>::BatchEngine(BatchEngine&&) noexcept = default;
template <class T>
BatchEngine<T>& BatchEngine<T>::operator=(BatchEngine&&) noexcept = default;

template <class T>
ad::LossGrad<T> BatchEngine<T>::loss_grad(const net::Params<T>& params, const T* points, int n) {
  Impl& im = *impl_;
  if (n < 1) throw std::invalid_argument("batch engine: empty batch");
  if (params.arch != im.arch) throw std::invalid_argument("batch engine: architecture mismatch");
  if (static_cast<std::int64_t>(params.theta.size()) != im.n_params)
    throw std::invalid_argument("batch engine: parameter vector has wrong length");

  const int nblocks = (n + im.B - 1) / im.B;
  im.block_grads.resize(static_cast<size_t>(nblocks));
  im.block_losses.assign(static_cast<size_t>(nblocks), 0.0);
  for (auto& g : im.block_grads) g.assign(static_cast<size_t>(im.n_params), T(0));
  im.theta_scratch.assign(params.theta.begin(), params.theta.end());
  const T* th = im.theta_scratch.data();

#pragma omp parallel for schedule(dynamic)
  for (int blk = 0; blk < nblocks; ++blk) {
    auto& w = im.works[static_cast<size_t>(omp_get_thread_num())];
    const int start = blk * im.B;
    const int valid = std::min(im.B, n - start);
    im.run_block(th, points, n, start, valid, w, im.block_grads[static_cast<size_t>(blk)],
                 im.block_losses[static_cast<size_t>(blk)]);
  }

  // ordered reduction: results do not depend on the thread schedule
  ad::LossGrad<T> out;
  out.grad.assign(static_cast<size_t>(im.n_params), T(0));
  MapVecMut<T> acc(out.grad.data(), im.n_params);
  double loss = 0;
  for (int blk = 0; blk < nblocks; ++blk) {
    acc += MapVec<T>(im.block_grads[static_cast<size_t>(blk)].data(), im.n_params);
    loss += im.block_losses[static_cast<size_t>(blk)];
  }
  out.loss = loss / n;
  return out;
}

template <class T>
void BatchEngine<T>::forward_values(const net::Params<T>& params, const T* points, int n,
                                    T* out) {
  Impl& im = *impl_;
  if (n < 1) throw std::invalid_argument("batch engine: empty batch");
  if (params.arch != im.arch) throw std::invalid_argument("batch engine: architecture mismatch");
  const int nblocks = (n + im.B - 1) / im.B;
  im.theta_scratch.assign(params.theta.begin(), params.theta.end());
  const T* th = im.theta_scratch.data();
#pragma omp parallel for schedule(dynamic)
  for (int blk = 0; blk < nblocks; ++blk) {
    auto& w = im.works[static_cast<size_t>(omp_get_thread_num())];
    const int start = blk * im.B;
    const int valid = std::min(im.B, n - start);
    im.run_block_values(th, points, start, valid, w, out);
  }
}

template <class T>
ad::LossGrad<T> batch_loss_grad(const sys::DriftSystem& system, const net::Params<T>& params,
                                const T* points, int n, int block_size) {
  BatchEngine<T> engine(system, params.arch, block_size);
  return engine.loss_grad(params, points, n);
}

template <class T>
void batch_forward(const net::Params<T>& params, const T* points, int n, T* out,
                   int block_size) {
  // forward evaluation has no drift dependence; any valid system of the right
  // dimension would do, so build a placeholder engine around the ring family
  sys::DriftSystem dummy;
  dummy.kind = sys::Kind::hypersphere;
  dummy.name = "eval";
  dummy.dim = params.arch.input_dim;
  dummy.diffusion = 1.0;
  BatchEngine<T> engine(dummy, params.arch, block_size);
  engine.forward_values(params, points, n, out);
}

template <class T>
ad::LossGrad<T> batch_loss_grad_reference(const sys::DriftSystem& system,
                                          const net::Params<T>& params, const T* points,
                                          int n) {
  return ad::loss_param_gradient<T>(system, params, points, n);
}

template class BatchEngine<float>;
template class BatchEngine<double>;
template ad::LossGrad<float> batch_loss_grad<float>(const sys::DriftSystem&, const net::Params<float>&, const float*, int, int);
template ad::LossGrad<double> batch_loss_grad<double>(const sys::DriftSystem&, const net::Params<double>&, const double*, int, int);
template void batch_forward<float>(const net::Params<float>&, const float*, int, float*, int);
template void batch_forward<double>(const net::Params<double>&, const double*, int, double*, int);
template ad::LossGrad<float> batch_loss_grad_reference<float>(const sys::DriftSystem&, const net::Params<float>&, const float*, int);
template ad::LossGrad<double> batch_loss_grad_reference<double>(const sys::DriftSystem&, const net::Params<double>&, const double*, int);

}  // namespace fpz::kernels

#include "fpz/autodiff.hpp"

#include <cmath>
#include <stdexcept>

#include "fpz/residual_core.hpp"

namespace fpz::ad {

namespace {

// tanh derivatives from t = tanh(x): φ' = 1−t², φ'' = −2tφ', φ''' = (6t²−2)φ'
template <class T>
void tanh_derivs(T t, T& d1, T& d2, T& d3) {
  d1 = T(1) - t * t;
  d2 = T(-2) * t * d1;
  d3 = (T(6) * t * t - T(2)) * d1;
}

// offsets of one layer's gate blocks (duplicated from the network layout on
// purpose: the layout test pins both against ParamLayout)
struct GateOffsets {
  std::int64_t w, u, b;
};

template <class T>
GateOffsets gate_offsets(const net::Architecture& a, int layer, int gate) {
  const std::int64_t d = a.input_dim, m = a.hidden;
  const std::int64_t per_gate_1 = 2 * m * d + m;
  const std::int64_t per_gate_n = m * d + m * m + m;
  const std::int64_t base =
      layer == 1 ? 0 : 4 * per_gate_1 + static_cast<std::int64_t>(layer - 2) * 4 * per_gate_n;
  const std::int64_t per_gate = layer == 1 ? per_gate_1 : per_gate_n;
  const std::int64_t u_cols = layer == 1 ? d : m;
  GateOffsets off;
  off.w = base + gate * per_gate;
  off.u = off.w + m * d;
  off.b = off.u + m * u_cols;
  return off;
}

}  // namespace

// ---- Tape ------------------------------------------------------------

template <class T>
int Tape<T>::push(Node n) {
  nodes_.push_back(std::move(n));
  return static_cast<int>(nodes_.size()) - 1;
}

template <class T>
Tape<T>::Tape(const net::Params<T>& params, std::span<const T> x) : params_(&params) {
  const net::Architecture& a = params.arch;
  a.validate();
  if (static_cast<int>(x.size()) != a.input_dim)
    throw std::invalid_argument("tape: input dimension mismatch");
  if (static_cast<std::int64_t>(params.theta.size()) != net::param_count(a))
    throw std::invalid_argument("tape: parameter vector has wrong length");
  x_.assign(x.begin(), x.end());

  const int d = a.input_dim, m = a.hidden;
  const T* th = params.theta.data();

  // input duals, reused by every affine node
  std::vector<Dual2<T>> xd(d);
  for (int j = 0; j < d; ++j) xd[j] = Dual2<T>::input(x_[j], d, j);

  int h_prev = -1, c_prev = -1;
  for (int layer = 1; layer <= a.layers; ++layer) {
    int gate_tanh[4];
    for (int g = 0; g < 4; ++g) {
      const GateOffsets off = gate_offsets<T>(a, layer, g);
      Node aff;
      aff.op = Op::affine;
      aff.a = layer == 1 ? -1 : h_prev;
      aff.w_off = off.w;
      aff.u_off = layer == 1 ? -1 : off.u;
      aff.b_off = off.b;
      aff.u_cols = layer == 1 ? d : m;
      aff.val.assign(m, Dual2<T>(d));
      for (int i = 0; i < m; ++i) {
        Dual2<T> acc = Dual2<T>::constant(th[off.b + i], d);
        for (int j = 0; j < d; ++j) acc = acc + th[off.w + static_cast<std::int64_t>(i) * d + j] * xd[j];
        if (layer > 1)
          for (int j = 0; j < m; ++j)
            acc = acc + th[off.u + static_cast<std::int64_t>(i) * m + j] * nodes_[h_prev].val[j];
        aff.val[i] = acc;
      }
      const int aff_id = push(std::move(aff));

      Node tn;
      tn.op = Op::tanh_elem;
      tn.a = aff_id;
      tn.val.reserve(m);
      for (int i = 0; i < m; ++i) tn.val.push_back(tanh(nodes_[aff_id].val[i]));
      gate_tanh[g] = push(std::move(tn));
    }

    auto hadamard = [&](int na, int nb) {
      Node hn;
      hn.op = Op::hadamard;
      hn.a = na;
      hn.b = nb;
      hn.val.reserve(m);
      for (int i = 0; i < m; ++i) hn.val.push_back(nodes_[na].val[i] * nodes_[nb].val[i]);
      return push(std::move(hn));
    };

    // c ← f⊙c_prev + g⊙s (first layer: c_prev ≡ 0, so only the g⊙s half)
    const int gs = hadamard(gate_tanh[1], gate_tanh[3]);
    int c_new;
    if (layer == 1) {
      c_new = gs;
    } else {
      const int fc = hadamard(gate_tanh[0], c_prev);
      Node an;
      an.op = Op::add;
      an.a = fc;
      an.b = gs;
      an.val.reserve(m);
      for (int i = 0; i < m; ++i) an.val.push_back(nodes_[fc].val[i] + nodes_[gs].val[i]);
      c_new = push(std::move(an));
    }

    Node tc;
    tc.op = Op::tanh_elem;
    tc.a = c_new;
    tc.val.reserve(m);
    for (int i = 0; i < m; ++i) tc.val.push_back(tanh(nodes_[c_new].val[i]));
    const int tc_id = push(std::move(tc));

    h_prev = hadamard(gate_tanh[2], tc_id);
    c_prev = c_new;
  }

  const net::ParamLayout layout = net::ParamLayout::make(a);
  Node out;
  out.op = Op::output_dot;
  out.a = h_prev;
  out.w_off = layout.block("w_out").offset;
  out.b_off = layout.block("b_out").offset;
  Dual2<T> acc = Dual2<T>::constant(th[out.b_off], d);
  for (int i = 0; i < m; ++i) acc = acc + th[out.w_off + i] * nodes_[h_prev].val[i];
  out.val.push_back(acc);
  output_node_ = push(std::move(out));
}

template <class T>
void Tape<T>::backward(const Dual2<T>& output_seed, std::span<T> grad) {
  const net::Architecture& a = params_->arch;
  const int d = a.input_dim, m = a.hidden;
  const T* th = params_->theta.data();
  if (static_cast<std::int64_t>(grad.size()) != net::param_count(a))
    throw std::invalid_argument("tape backward: gradient vector has wrong length");

  for (Node& n : nodes_) n.adj.assign(n.val.size(), Dual2<T>(d));
  nodes_[output_node_].adj[0] = output_seed;

  // dual-shaped dot product ⟨adjoint, value⟩ — the parameter gradient of a
  // scalar coefficient multiplying a dual operand
  auto dual_dot = [d](const Dual2<T>& za, const Dual2<T>& vb) {
    T acc = za.v * vb.v;
    for (int k = 0; k < d; ++k) acc += za.g[k] * vb.g[k] + za.h[k] * vb.h[k];
    return acc;
  };
  // adjoint of a in z = a⊙b:
  //   ā.v += z̄.v b.v + Σ z̄.g b.g + Σ z̄.h b.h
  //   ā.g[k] += z̄.g[k] b.v + 2 z̄.h[k] b.g[k]
  //   ā.h[k] += z̄.h[k] b.v
  auto hadamard_adj = [d](Dual2<T>& abar, const Dual2<T>& zbar, const Dual2<T>& b) {
    abar.v += zbar.v * b.v;
    for (int k = 0; k < d; ++k) {
      abar.v += zbar.g[k] * b.g[k] + zbar.h[k] * b.h[k];
      abar.g[k] += zbar.g[k] * b.v + T(2) * zbar.h[k] * b.g[k];
      abar.h[k] += zbar.h[k] * b.v;
    }
  };
  // adjoint through tanh with pre-activation duals p and t = tanh(p.v):
  //   p̄.v += φ' z̄.v + φ'' Σ p.g z̄.g + Σ (φ''' p.g² + φ'' p.h) z̄.h
  //   p̄.g[k] += φ' z̄.g[k] + 2 φ'' p.g[k] z̄.h[k]
  //   p̄.h[k] += φ' z̄.h[k]
  auto tanh_adj = [d](Dual2<T>& pbar, const Dual2<T>& zbar, const Dual2<T>& p, T t) {
    T d1, d2, d3;
    tanh_derivs(t, d1, d2, d3);
    pbar.v += d1 * zbar.v;
    for (int k = 0; k < d; ++k) {
      pbar.v += d2 * p.g[k] * zbar.g[k] + (d3 * p.g[k] * p.g[k] + d2 * p.h[k]) * zbar.h[k];
      pbar.g[k] += d1 * zbar.g[k] + T(2) * d2 * p.g[k] * zbar.h[k];
      pbar.h[k] += d1 * zbar.h[k];
    }
  };

  for (int ni = static_cast<int>(nodes_.size()) - 1; ni >= 0; --ni) {
    Node& n = nodes_[ni];
    switch (n.op) {
      case Op::output_dot: {
        Node& hn = nodes_[n.a];
        const Dual2<T>& zbar = n.adj[0];
        grad[static_cast<size_t>(n.b_off)] += zbar.v;
        for (int i = 0; i < m; ++i) {
          grad[static_cast<size_t>(n.w_off + i)] += dual_dot(zbar, hn.val[i]);
          // h̄ += w_i · z̄ component-wise
          Dual2<T>& hb = hn.adj[i];
          const T w = th[n.w_off + i];
          hb.v += w * zbar.v;
          for (int k = 0; k < d; ++k) {
            hb.g[k] += w * zbar.g[k];
            hb.h[k] += w * zbar.h[k];
          }
        }
        break;
      }
      case Op::hadamard: {
        Node& an = nodes_[n.a];
        Node& bn = nodes_[n.b];
        for (size_t i = 0; i < n.val.size(); ++i) {
          hadamard_adj(an.adj[i], n.adj[i], bn.val[i]);
          hadamard_adj(bn.adj[i], n.adj[i], an.val[i]);
        }
        break;
      }
      case Op::add: {
        Node& an = nodes_[n.a];
        Node& bn = nodes_[n.b];
        for (size_t i = 0; i < n.val.size(); ++i) {
          const Dual2<T>& zbar = n.adj[i];
          for (Dual2<T>* tgt : {&an.adj[i], &bn.adj[i]}) {
            tgt->v += zbar.v;
            for (int k = 0; k < d; ++k) {
              tgt->g[k] += zbar.g[k];
              tgt->h[k] += zbar.h[k];
            }
          }
        }
        break;
      }
      case Op::tanh_elem: {
        Node& pn = nodes_[n.a];
        for (size_t i = 0; i < n.val.size(); ++i)
          tanh_adj(pn.adj[i], n.adj[i], pn.val[i], n.val[i].v);
        break;
      }
      case Op::affine: {
        // out[i] = b[i] + Σ_j W[i,j]·x_j + Σ_j U[i,j]·h_prev[j]
        std::vector<Dual2<T>> xd(d);
        for (int j = 0; j < d; ++j) xd[j] = Dual2<T>::input(x_[j], d, j);
        for (int i = 0; i < m; ++i) {
          const Dual2<T>& zbar = n.adj[i];
          grad[static_cast<size_t>(n.b_off + i)] += zbar.v;
          for (int j = 0; j < d; ++j)
            grad[static_cast<size_t>(n.w_off + static_cast<std::int64_t>(i) * d + j)] +=
                dual_dot(zbar, xd[j]);
          if (n.a >= 0) {
            Node& hn = nodes_[n.a];
            for (int j = 0; j < m; ++j) {
              grad[static_cast<size_t>(n.u_off + static_cast<std::int64_t>(i) * m + j)] +=
                  dual_dot(zbar, hn.val[j]);
              Dual2<T>& hb = hn.adj[j];
              const T u = th[n.u_off + static_cast<std::int64_t>(i) * m + j];
              hb.v += u * zbar.v;
              for (int k = 0; k < d; ++k) {
                hb.g[k] += u * zbar.g[k];
                hb.h[k] += u * zbar.h[k];
              }
            }
          }
        }
        break;
      }
    }
  }
}

// ---- dual forward without a tape --------------------------------------

template <class T>
Dual2<T> forward_dual(const net::Params<T>& p, std::span<const T> x) {
  // A tape already computes exactly this; reuse it (the overhead does not
  // matter on the reference path).
  Tape<T> tape(p, x);
  return tape.output();
}

template <class T>
std::vector<T> input_gradient(const net::Params<T>& p, std::span<const T> x) {
  return forward_dual(p, x).g;
}

template <class T>
T input_laplacian(const net::Params<T>& p, std::span<const T> x) {
  const Dual2<T> out = forward_dual(p, x);
  T acc = T(0);
  for (T v : out.h) acc += v;
  return acc;
}

// ---- reference loss + gradient ----------------------------------------

template <class T>
LossGrad<T> loss_param_gradient(const sys::DriftSystem& system, const net::Params<T>& params,
                                const T* points, int n) {
  if (n < 1) throw std::invalid_argument("loss_param_gradient: empty batch");
  if (system.dim != params.arch.input_dim)
    throw std::invalid_argument("loss_param_gradient: system/network dimension mismatch");
  const int d = system.dim;
  const T D = static_cast<T>(system.diffusion);

  LossGrad<T> out;
  out.grad.assign(static_cast<size_t>(net::param_count(params.arch)), T(0));
  std::vector<T> mu(d);
  double loss = 0;

  for (int i = 0; i < n; ++i) {
    std::span<const T> x(points + static_cast<size_t>(i) * d, d);
    Tape<T> tape(params, x);
    const Dual2<T>& nd = tape.output();

    sys::drift<T>(system, x, mu);
    const T div = sys::drift_divergence<T>(system, x);
    const auto parts = fpo::residual_parts<T>(div, mu, nd.g, nd.h);
    const T r = fpo::assemble_residual(parts, D);
    loss += static_cast<double>(r) * static_cast<double>(r);

    // seed: ∂loss/∂g_k = (2r/n)(2D g_k − μ_k), ∂loss/∂h_k = (2r/n)·D
    const T w = T(2) * r / static_cast<T>(n);
    Dual2<T> seed(d);
    for (int k = 0; k < d; ++k) {
      seed.g[k] = w * (T(2) * D * nd.g[k] - mu[k]);
      seed.h[k] = w * D;
    }
    tape.backward(seed, out.grad);
  }
  out.loss = loss / n;
  return out;
}

// ---- finite differences ------------------------------------------------

namespace {

template <class T>
double loss_only(const sys::DriftSystem& system, const net::Params<T>& params, const T* points,
                 int n) {
  const int d = system.dim;
  const T D = static_cast<T>(system.diffusion);
  std::vector<T> mu(d);
  double loss = 0;
  for (int i = 0; i < n; ++i) {
    std::span<const T> x(points + static_cast<size_t>(i) * d, d);
    const Dual2<T> nd = forward_dual(params, x);
    sys::drift<T>(system, x, mu);
    const T div = sys::drift_divergence<T>(system, x);
    const T r = fpo::assemble_residual(fpo::residual_parts<T>(div, mu, nd.g, nd.h), D);
    loss += static_cast<double>(r) * static_cast<double>(r);
  }
  return loss / n;
}

double rel_err(double a, double b, double floor) {
  const double denom = std::max({std::abs(a), std::abs(b), floor});
  return std::abs(a - b) / denom;
}

}  // namespace

template <class T>
FdReport finite_difference_report(const sys::DriftSystem& system, const net::Params<T>& params,
                                  const FdOptions& opt) {
  if (opt.step_grad == 0 || opt.step_lap == 0 || opt.step_param == 0)
    throw std::invalid_argument("finite_difference_report: zero step size");
  if (system.dim != params.arch.input_dim)
    throw std::invalid_argument("finite_difference_report: dimension mismatch");

  const int d = system.dim;
  rng::Stream stream(opt.seed, rng::StreamTag::misc, 17);
  FdReport report;
  report.enforced = std::is_same_v<T, double>;

  const std::vector<double> pts = sys::sample_uniform(system.domain, opt.n_points, stream);

  // ∇n_θ vs central differences
  {
    FdCheck chk{"input_gradient", 0, 0, opt.tol_grad, false};
    for (int i = 0; i < opt.n_points; ++i) {
      std::vector<T> x(d);
      for (int j = 0; j < d; ++j) x[j] = static_cast<T>(pts[static_cast<size_t>(i) * d + j]);
      const std::vector<T> g = input_gradient<T>(params, x);
      double gmax = 0;
      for (T v : g) gmax = std::max(gmax, std::abs(static_cast<double>(v)));
      const double floor = 1e-12 * (1.0 + gmax);
      std::vector<T> xp = x;
      for (int j = 0; j < d; ++j) {
        const T eps = static_cast<T>(opt.step_grad);
        xp[j] = x[j] + eps;
        const double fp = static_cast<double>(net::forward<T>(params, xp));
        xp[j] = x[j] - eps;
        const double fm = static_cast<double>(net::forward<T>(params, xp));
        xp[j] = x[j];
        const double fd = (fp - fm) / (2.0 * static_cast<double>(eps));
        chk.max_rel_err = std::max(chk.max_rel_err, rel_err(static_cast<double>(g[j]), fd, floor));
        chk.n_checked++;
      }
    }
    chk.within_tolerance = chk.max_rel_err <= chk.tolerance;
    report.checks.push_back(chk);
  }

  // Δn_θ vs second-order central differences
  {
    FdCheck chk{"input_laplacian", 0, 0, opt.tol_lap, false};
    for (int i = 0; i < opt.n_points; ++i) {
      std::vector<T> x(d);
      for (int j = 0; j < d; ++j) x[j] = static_cast<T>(pts[static_cast<size_t>(i) * d + j]);
      const double lap = static_cast<double>(input_laplacian<T>(params, x));
      const double f0 = static_cast<double>(net::forward<T>(params, x));
      double fd = 0;
      std::vector<T> xp = x;
      const T eps = static_cast<T>(opt.step_lap);
      for (int j = 0; j < d; ++j) {
        xp[j] = x[j] + eps;
        const double fp = static_cast<double>(net::forward<T>(params, xp));
        xp[j] = x[j] - eps;
        const double fm = static_cast<double>(net::forward<T>(params, xp));
        xp[j] = x[j];
        fd += (fp - 2.0 * f0 + fm) / (static_cast<double>(eps) * static_cast<double>(eps));
      }
      chk.max_rel_err = std::max(chk.max_rel_err, rel_err(lap, fd, 1e-10 * (1.0 + std::abs(lap))));
      chk.n_checked++;
    }
    chk.within_tolerance = chk.max_rel_err <= chk.tolerance;
    report.checks.push_back(chk);
  }

  // dLoss/dθ_j vs central differences on random coordinates
  {
    FdCheck chk{"loss_param_gradient", 0, 0, opt.tol_param, false};
    const std::vector<double> bpts = sys::sample_uniform(system.domain, opt.batch_n, stream);
    std::vector<T> batch(bpts.size());
    for (size_t i = 0; i < bpts.size(); ++i) batch[i] = static_cast<T>(bpts[i]);

    const LossGrad<T> lg = loss_param_gradient<T>(system, params, batch.data(), opt.batch_n);
    double gmax = 0;
    for (T v : lg.grad) gmax = std::max(gmax, std::abs(static_cast<double>(v)));
    const double floor = 1e-8 * (1.0 + gmax);

    const std::int64_t total = net::param_count(params.arch);
    net::Params<T> pert = params;
    for (int c = 0; c < opt.n_param_coords; ++c) {
      const auto j = static_cast<std::int64_t>(stream.uniform01() * static_cast<double>(total));
      const T eps = static_cast<T>(opt.step_param);
      const T orig = pert.theta[static_cast<size_t>(j)];
      pert.theta[static_cast<size_t>(j)] = orig + eps;
      const double lp = loss_only<T>(system, pert, batch.data(), opt.batch_n);
      pert.theta[static_cast<size_t>(j)] = orig - eps;
      const double lm = loss_only<T>(system, pert, batch.data(), opt.batch_n);
      pert.theta[static_cast<size_t>(j)] = orig;
      const double fd = (lp - lm) / (2.0 * static_cast<double>(eps));
      chk.max_rel_err = std::max(
          chk.max_rel_err, rel_err(static_cast<double>(lg.grad[static_cast<size_t>(j)]), fd, floor));
      chk.n_checked++;
    }
    chk.within_tolerance = chk.max_rel_err <= chk.tolerance;
    report.checks.push_back(chk);
  }

  report.passed = true;
  for (const FdCheck& c : report.checks)
    if (report.enforced && !c.within_tolerance) report.passed = false;
  return report;
}

template Dual2<float> forward_dual<float>(const net::Params<float>&, std::span<const float>);
template Dual2<double> forward_dual<double>(const net::Params<double>&, std::span<const double>);
template std::vector<float> input_gradient<float>(const net::Params<float>&, std::span<const float>);
template std::vector<double> input_gradient<double>(const net::Params<double>&, std::span<const double>);
template float input_laplacian<float>(const net::Params<float>&, std::span<const float>);
template double input_laplacian<double>(const net::Params<double>&, std::span<const double>);
template class Tape<float>;
template class Tape<double>;
template LossGrad<float> loss_param_gradient<float>(const sys::DriftSystem&, const net::Params<float>&, const float*, int);
template LossGrad<double> loss_param_gradient<double>(const sys::DriftSystem&, const net::Params<double>&, const double*, int);
template FdReport finite_difference_report<float>(const sys::DriftSystem&, const net::Params<float>&, const FdOptions&);
template FdReport finite_difference_report<double>(const sys::DriftSystem&, const net::Params<double>&, const FdOptions&);

}  // namespace fpz::ad

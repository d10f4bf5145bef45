#include "fpz/analysis.hpp"

#include <omp.h>

#include <algorithm>
#include <cmath>
#include <stdexcept>

#include "fpz/kernels.hpp"
#include "fpz/quadrature.hpp"
#include "fpz/residual_core.hpp"
#include "fpz/rng.hpp"

namespace fpz::an {

double pearson(std::span<const double> x, std::span<const double> y) {
  const size_t n = x.size();
  if (n != y.size()) throw std::invalid_argument("pearson: length mismatch");
  if (n < 2) throw std::invalid_argument("pearson: need at least two samples");
  double mx = 0, my = 0;
  for (size_t i = 0; i < n; ++i) {
    mx += x[i];
    my += y[i];
  }
  mx /= static_cast<double>(n);
  my /= static_cast<double>(n);
  double sxx = 0, syy = 0, sxy = 0;
  for (size_t i = 0; i < n; ++i) {
    const double dx = x[i] - mx, dy = y[i] - my;
    sxx += dx * dx;
    syy += dy * dy;
    sxy += dx * dy;
  }
  if (sxx == 0 || syy == 0) throw std::invalid_argument("pearson: zero variance");
  return sxy / std::sqrt(sxx * syy);
}

namespace {

struct LinFit {
  double a0 = 0, a2 = 0, rms = 0;
  bool degenerate = false;
};

// least squares of d ≈ a0·exp(−a1 k) + a2 for fixed a1
LinFit solve_for_rate(std::span<const double> k, std::span<const double> d, double a1) {
  const size_t n = k.size();
  double suu = 0, su = 0, sud = 0, sd = 0;
  std::vector<double> u(n);
  for (size_t i = 0; i < n; ++i) {
    u[i] = std::exp(-a1 * k[i]);
    suu += u[i] * u[i];
    su += u[i];
    sud += u[i] * d[i];
    sd += d[i];
  }
  LinFit fit;
  const double nn = static_cast<double>(n);
  const double det = suu * nn - su * su;
  if (!(det > 1e-12 * std::max(suu * nn, 1e-300))) {
    fit.degenerate = true;
    fit.a0 = 0;
    fit.a2 = sd / nn;
  } else {
    fit.a0 = (sud * nn - su * sd) / det;
    fit.a2 = (suu * sd - su * sud) / det;
  }
  double ss = 0;
  for (size_t i = 0; i < n; ++i) {
    const double r = fit.a0 * u[i] + fit.a2 - d[i];
    ss += r * r;
  }
  fit.rms = std::sqrt(ss / nn);
  return fit;
}

}  // namespace

ExpFit exp_fit(std::span<const double> k, std::span<const double> d) {
  if (k.size() != d.size()) throw std::invalid_argument("exp_fit: length mismatch");
  if (k.size() < 4) throw std::invalid_argument("exp_fit: need at least four samples");
  const auto [kmin_it, kmax_it] = std::minmax_element(k.begin(), k.end());
  const double range = *kmax_it - *kmin_it;
  if (!(range > 0)) throw std::invalid_argument("exp_fit: abscissae are all equal");
  double min_gap = range;
  {
    std::vector<double> ks(k.begin(), k.end());
    std::sort(ks.begin(), ks.end());
    for (size_t i = 1; i < ks.size(); ++i)
      if (ks[i] - ks[i - 1] > 0) min_gap = std::min(min_gap, ks[i] - ks[i - 1]);
  }

  double lo = 1e-2 / range, hi = 1e2 / min_gap;
  double best_a1 = lo, best_rms = std::numeric_limits<double>::infinity();
  LinFit best;
  auto scan = [&](double a, double b, int steps) {
    const double ratio = std::pow(b / a, 1.0 / steps);
    double a1 = a;
    for (int i = 0; i <= steps; ++i, a1 *= ratio) {
      const LinFit f = solve_for_rate(k, d, a1);
      if (f.rms < best_rms) {
        best_rms = f.rms;
        best_a1 = a1;
        best = f;
      }
    }
  };
  scan(lo, hi, 240);
  for (int round = 0; round < 3; ++round) {
    const double span = std::pow(hi / lo, 1.0 / 240);  // current grid ratio shrinks each round
    scan(best_a1 / span, best_a1 * span, 80);
    lo = best_a1 / span;
    hi = best_a1 * span;
  }

  ExpFit out;
  out.a0 = best.a0;
  out.a1 = best.degenerate ? 0 : best_a1;
  out.a2 = best.a2;
  out.rms = best.rms;
  return out;
}

MantissaExponent mantissa_exponent(double v) {
  if (!std::isfinite(v)) throw std::invalid_argument("mantissa_exponent: non-finite input");
  if (v == 0) return {0.0, 0};
  int b = static_cast<int>(std::floor(std::log10(std::fabs(v))));
  double p = std::pow(10.0, b);
  double a = v / p;
  while (std::fabs(a) >= 10.0) {
    ++b;
    p = std::pow(10.0, b);
    a = v / p;
  }
  while (std::fabs(a) < 1.0) {
    --b;
    p = std::pow(10.0, b);
    a = v / p;
  }
  return {a, b};
}

int ExponentHistogram::majority_exponent() const {
  if (counts.empty()) throw std::runtime_error("exponent histogram: no nonzero residuals");
  auto best = counts.begin();
  for (auto it = counts.begin(); it != counts.end(); ++it)
    if (it->second > best->second) best = it;
  return best->first;
}

int ExponentHistogram::max_exponent() const {
  if (counts.empty()) throw std::runtime_error("exponent histogram: no nonzero residuals");
  return counts.rbegin()->first;
}

// ---- analytic-zero residual survey

namespace {

constexpr int kMaxSurveyDim = 32;

// Stack-allocated second-order dual mirroring the tape's dual arithmetic
// term for term (same products, same summation order), so the survey walks
// the same floating-point path the trainer's derivative engine does.
template <class T>
struct SDual {
  T v;
  T g[kMaxSurveyDim];
  T h[kMaxSurveyDim];
};

template <class T>
void sdual_input(SDual<T>& z, T value, int d, int axis) {
  z.v = value;
  for (int k = 0; k < d; ++k) {
    z.g[k] = T(0);
    z.h[k] = T(0);
  }
  z.g[axis] = T(1);
}

template <class T>
void sdual_mul(const SDual<T>& a, const SDual<T>& b, int d, SDual<T>& z) {
  z.v = a.v * b.v;
  for (int k = 0; k < d; ++k) {
    z.g[k] = a.g[k] * b.v + a.v * b.g[k];
    z.h[k] = a.h[k] * b.v + T(2) * a.g[k] * b.g[k] + a.v * b.h[k];
  }
}

template <class T>
void sdual_add_acc(SDual<T>& z, const SDual<T>& a, int d) {
  z.v += a.v;
  for (int k = 0; k < d; ++k) {
    z.g[k] += a.g[k];
    z.h[k] += a.h[k];
  }
}

// V as a dual in the exact expression shape of sys::potential
template <class T>
void potential_dual(const sys::DriftSystem& s, const T* x, SDual<T>& V) {
  const int d = s.dim;
  SDual<T> xi, xj, sq, r, term;
  switch (s.kind) {
    case sys::Kind::ring: {
      sdual_input(V, T(0), d, 0);
      V.g[0] = T(0);
      for (int p = 0; p < d / 2; ++p) {
        sdual_input(xi, x[2 * p], d, 2 * p);
        sdual_input(xj, x[2 * p + 1], d, 2 * p + 1);
        sdual_mul(xi, xi, d, r);
        sdual_mul(xj, xj, d, sq);
        sdual_add_acc(r, sq, d);
        r.v = r.v - T(1);  // constant shift: derivatives untouched
        sdual_mul(r, r, d, term);
        sdual_add_acc(V, term, d);
      }
      return;
    }
    case sys::Kind::hypersphere: {
      sdual_input(r, T(0), d, 0);
      r.g[0] = T(0);
      for (int j = 0; j < d; ++j) {
        sdual_input(xi, x[j], d, j);
        sdual_mul(xi, xi, d, sq);
        sdual_add_acc(r, sq, d);
      }
      r.v = r.v - T(1);
      sdual_mul(r, r, d, V);
      return;
    }
    default:
      throw std::invalid_argument("residual survey: system has no analytic zero");
  }
}

}  // namespace

template <class T>
ResidualSurvey analytic_residual_survey(const sys::DriftSystem& system, std::int64_t n,
                                        std::uint64_t seed) {
  if (!system.has_potential())
    throw std::invalid_argument("residual survey: system has no analytic zero");
  if (system.dim > kMaxSurveyDim)
    throw std::invalid_argument("residual survey: dimension too large");
  if (n < 1) throw std::invalid_argument("residual survey: need at least one sample");
  const int d = system.dim;

  rng::Stream st(seed, rng::StreamTag::histogram, 0);
  const std::vector<double> pts = sys::sample_uniform(system.domain, static_cast<int>(n), st);

  ResidualSurvey survey;
  survey.hist.total = n;

  const int nthreads = omp_get_max_threads();
  std::vector<std::map<int, std::int64_t>> counts(nthreads);
  std::vector<std::int64_t> zeros(nthreads, 0);
  std::vector<double> maxabs(nthreads, 0);

#pragma omp parallel
  {
    const int tid = omp_get_thread_num();
    SDual<T> V, f;
    std::vector<T> x(d), mu(d), grad(d), second(d);
    const T scale = T(-1) / static_cast<T>(system.diffusion);
#pragma omp for schedule(static)
    for (std::int64_t i = 0; i < n; ++i) {
      for (int j = 0; j < d; ++j) x[j] = static_cast<T>(pts[static_cast<size_t>(i) * d + j]);
      potential_dual<T>(system, x.data(), V);
      f.v = scale * V.v;
      for (int k = 0; k < d; ++k) {
        f.g[k] = scale * V.g[k];
        f.h[k] = scale * V.h[k];
      }
      sys::drift<T>(system, x, mu);
      const T div = sys::drift_divergence<T>(system, x);
      for (int k = 0; k < d; ++k) {
        grad[k] = f.g[k];
        second[k] = f.h[k];
      }
      const auto parts = fpo::residual_parts<T>(div, mu, grad, second);
      const T r = fpo::assemble_residual(parts, static_cast<T>(system.diffusion));
      const double rv = static_cast<double>(r);
      maxabs[tid] = std::max(maxabs[tid], std::fabs(rv));
      if (rv == 0) {
        ++zeros[tid];
      } else {
        ++counts[tid][mantissa_exponent(rv).exponent];
      }
    }
  }
  for (int t = 0; t < nthreads; ++t) {
    survey.hist.zero_count += zeros[t];
    survey.max_abs = std::max(survey.max_abs, maxabs[t]);
    for (const auto& [b, c] : counts[t]) survey.hist.counts[b] += c;
  }
  return survey;
}

// ---- sup distance and friends

namespace {

// maps kept-axes coordinates into a full-dimension point, zeros elsewhere
struct Embedding {
  int full_dim = 0;
  std::vector<int> axes;  // kept axes in order

  void apply(const double* kept, double* full) const {
    for (int j = 0; j < full_dim; ++j) full[j] = 0;
    for (size_t a = 0; a < axes.size(); ++a) full[axes[a]] = kept[a];
  }
};

// batched exp(n_θ) over kept-axes points
template <class T>
void eval_learned(kernels::BatchEngine<T>& engine, const net::Params<T>& params,
                  const Embedding& emb, const double* pts, int count, double* out) {
  const int d = emb.full_dim;
  std::vector<T> full(static_cast<size_t>(count) * d);
  std::vector<double> point(d);
  const int da = static_cast<int>(emb.axes.size());
  for (int i = 0; i < count; ++i) {
    emb.apply(pts + static_cast<size_t>(i) * da, point.data());
    for (int j = 0; j < d; ++j) full[static_cast<size_t>(i) * d + j] = static_cast<T>(point[j]);
  }
  std::vector<T> vals(static_cast<size_t>(count));
  engine.forward_values(params, full.data(), count, vals.data());
  for (int i = 0; i < count; ++i) out[i] = std::exp(static_cast<double>(vals[i]));
}

double eval_truth_unnorm(const sys::DriftSystem& system, const Embedding& emb,
                         const double* kept) {
  std::vector<double> full(emb.full_dim);
  emb.apply(kept, full.data());
  return std::exp(sys::analytic_log_density<double>(system, full));
}

sys::Box sub_box(const sys::Box& box, std::span<const int> axes) {
  sys::Box b;
  for (int a : axes) {
    b.lo.push_back(box.lo[a]);
    b.hi.push_back(box.hi[a]);
  }
  return b;
}

}  // namespace

template <class T>
SupReport sup_distance(const sys::DriftSystem& system, const net::Params<T>& params,
                       const SupOptions& opt) {
  if (!system.has_potential())
    throw std::invalid_argument("sup_distance: system has no closed-form density");
  if (system.dim != params.arch.input_dim)
    throw std::invalid_argument("sup_distance: system/network dimension mismatch");
  const int d = system.dim;

  SupReport rep;
  Embedding emb;
  emb.full_dim = d;
  if (d <= 3) {
    for (int j = 0; j < d; ++j) emb.axes.push_back(j);
  } else {
    rep.sliced = true;
    rep.ax_u = opt.slice_u >= 0 ? opt.slice_u : 2 * (d / 4);
    rep.ax_v = opt.slice_v >= 0 ? opt.slice_v : 2 * (d / 4) + 1;
    if (rep.ax_u < 0 || rep.ax_v >= d || rep.ax_u >= rep.ax_v)
      throw std::invalid_argument("sup_distance: bad slice axes");
    emb.axes = {rep.ax_u, rep.ax_v};
  }
  const int da = static_cast<int>(emb.axes.size());
  const sys::Box box = sub_box(system.domain, emb.axes);

  std::vector<int> bins(opt.bins.begin(), opt.bins.end());
  if (bins.empty()) bins.assign(static_cast<size_t>(da), 200);
  if (static_cast<int>(bins.size()) != da)
    throw std::invalid_argument("sup_distance: bins/axes mismatch");

  kernels::BatchEngine<T> engine(system, params.arch, 512);

  const double z_learned = quad::tensor_integrate_batch(
      [&](const double* pts, int count, int, double* out) {
        eval_learned(engine, params, emb, pts, count, out);
      },
      box, opt.subintervals, opt.gl_n);
  if (!(z_learned > 0) || !std::isfinite(z_learned))
    throw std::runtime_error("sup_distance: exp(n) integral is not positive finite");
  rep.c = 1.0 / z_learned;

  const double z_truth = quad::tensor_integrate_batch(
      [&](const double* pts, int count, int dim, double* out) {
        for (int i = 0; i < count; ++i)
          out[i] = eval_truth_unnorm(system, emb, pts + static_cast<size_t>(i) * dim);
      },
      box, opt.subintervals, opt.gl_n);

  // sweep cell centers in chunks
  grid::GridDensity centers = grid::make_grid(box, bins);
  const std::int64_t cells = centers.cell_count();
  const int chunk = 8192;
  std::vector<double> kept(static_cast<size_t>(chunk) * da);
  std::vector<double> learned(chunk);
  std::vector<int> idx(da, 0);
  std::int64_t done = 0;
  while (done < cells) {
    const int batch = static_cast<int>(std::min<std::int64_t>(chunk, cells - done));
    // decode cell index → center coordinates (row-major order)
    for (int i = 0; i < batch; ++i) {
      std::int64_t flat = done + i;
      for (int a = da - 1; a >= 0; --a) {
        idx[a] = static_cast<int>(flat % bins[a]);
        flat /= bins[a];
      }
      const std::vector<double> c = centers.center(idx);
      for (int a = 0; a < da; ++a) kept[static_cast<size_t>(i) * da + a] = c[a];
    }
    eval_learned(engine, params, emb, kept.data(), batch, learned.data());
    for (int i = 0; i < batch; ++i) {
      const double p_learn = rep.c * learned[i];
      const double p_true =
          eval_truth_unnorm(system, emb, kept.data() + static_cast<size_t>(i) * da) / z_truth;
      rep.sup_error = std::max(rep.sup_error, std::fabs(p_learn - p_true));
      rep.max_p_true = std::max(rep.max_p_true, p_true);
    }
    done += batch;
  }
  return rep;
}

template <class T>
double learned_mass(const net::Params<T>& params, const sys::Box& box, int subintervals,
                    int gl_n) {
  if (box.dim() != params.arch.input_dim)
    throw std::invalid_argument("learned_mass: box/network dimension mismatch");
  return quad::tensor_integrate_batch(
      [&](const double* pts, int count, int dim, double* out) {
        std::vector<T> tp(static_cast<size_t>(count) * dim);
        for (size_t i = 0; i < tp.size(); ++i) tp[i] = static_cast<T>(pts[i]);
        std::vector<T> vals(static_cast<size_t>(count));
        kernels::batch_forward<T>(params, tp.data(), count, vals.data(), 512);
        for (int i = 0; i < count; ++i) out[i] = std::exp(static_cast<double>(vals[i]));
      },
      box, subintervals, gl_n);
}

template <class T>
grid::GridDensity network_density_grid(const net::Params<T>& params, const sys::Box& box,
                                       std::span<const int> bins, int subintervals, int gl_n) {
  const double c = 1.0 / learned_mass(params, box, subintervals, gl_n);
  grid::GridDensity g = grid::make_grid(box, bins);
  const int d = box.dim();
  const std::int64_t cells = g.cell_count();
  const int chunk = 8192;
  std::vector<T> pts(static_cast<size_t>(chunk) * d);
  std::vector<T> vals(chunk);
  std::vector<int> idx(d, 0);
  std::int64_t done = 0;
  while (done < cells) {
    const int batch = static_cast<int>(std::min<std::int64_t>(chunk, cells - done));
    for (int i = 0; i < batch; ++i) {
      std::int64_t flat = done + i;
      for (int a = d - 1; a >= 0; --a) {
        idx[a] = static_cast<int>(flat % bins[a]);
        flat /= bins[a];
      }
      const std::vector<double> cc = g.center(idx);
      for (int a = 0; a < d; ++a) pts[static_cast<size_t>(i) * d + a] = static_cast<T>(cc[a]);
    }
    kernels::batch_forward<T>(params, pts.data(), batch, vals.data(), 512);
    for (int i = 0; i < batch; ++i)
      g.values[static_cast<size_t>(done + i)] = c * std::exp(static_cast<double>(vals[i]));
    done += batch;
  }
  return g;
}

GridCompare compare_to_truth(const grid::GridDensity& g, const sys::DriftSystem& system,
                             int cell_gl_n) {
  if (!system.has_potential())
    throw std::invalid_argument("compare_to_truth: system has no closed-form density");
  if (g.dim() != system.dim)
    throw std::invalid_argument("compare_to_truth: grid/system dimension mismatch");
  if (cell_gl_n < 1) throw std::invalid_argument("compare_to_truth: need ≥ 1 node per axis");
  const int d = g.dim();

  // whole-space normalization: the density decays like exp(−V/D), so a
  // 2×-inflated box captures the total mass to machine precision
  const double z_full = quad::tensor_integrate(
      [&](std::span<const double> x) {
        return std::exp(sys::analytic_log_density<double>(system, x));
      },
      g.box.inflated(2.0), 80, 8);

  const quad::QuadRule rule = quad::gl_rule(cell_gl_n);
  const std::int64_t cells = g.cell_count();
  GridCompare cmp;
  double abs_sum = 0;

#pragma omp parallel
  {
    std::vector<int> idx(d), node(d);
    std::vector<double> x(d);
    double local_abs = 0, local_sup = 0, local_max = 0;
#pragma omp for schedule(static)
    for (std::int64_t cell = 0; cell < cells; ++cell) {
      std::int64_t flat = cell;
      for (int a = d - 1; a >= 0; --a) {
        idx[a] = static_cast<int>(flat % g.bins[a]);
        flat /= g.bins[a];
      }
      const std::vector<double> center = g.center(idx);
      // cell average of the normalized truth: Σ (Πw)·p / 2^d
      std::fill(node.begin(), node.end(), 0);
      double acc = 0;
      while (true) {
        double w = 1;
        for (int a = 0; a < d; ++a) {
          const double half = 0.5 * (g.box.hi[a] - g.box.lo[a]) / g.bins[a];
          x[a] = center[a] + half * rule.nodes[static_cast<size_t>(node[a])];
          w *= rule.weights[static_cast<size_t>(node[a])];
        }
        acc += w * std::exp(sys::analytic_log_density<double>(system, x));
        int a = d - 1;
        while (a >= 0 && ++node[a] == cell_gl_n) node[a--] = 0;
        if (a < 0) break;
      }
      const double truth = acc / (std::pow(2.0, d) * z_full);
      const double err = std::fabs(g.values[static_cast<size_t>(cell)] - truth);
      local_abs += err;
      local_sup = std::max(local_sup, err);
      local_max = std::max(local_max, truth);
    }
#pragma omp critical
    {
      abs_sum += local_abs;
      cmp.sup_error = std::max(cmp.sup_error, local_sup);
      cmp.max_truth = std::max(cmp.max_truth, local_max);
    }
  }
  cmp.mean_abs_error = abs_sum / static_cast<double>(cells);
  return cmp;
}

template <class T>
DistanceTrace distance_trace(
    const sys::DriftSystem& system,
    const std::vector<std::pair<std::int64_t, net::Params<T>>>& checkpoints,
    std::span<const train::TraceRow> trace, const SupOptions& opt) {
  DistanceTrace out;
  for (const auto& [iter, params] : checkpoints) {
    const train::TraceRow* row = nullptr;
    for (const auto& r : trace)
      if (r.iteration <= iter) row = &r;
    if (!row)
      throw std::invalid_argument("distance_trace: no trace row at or before iteration " +
                                  std::to_string(iter));
    const SupReport rep = sup_distance(system, params, opt);
    out.iterations.push_back(iter);
    out.loss.push_back(row->loss);
    out.distance.push_back(rep.sup_error);
    out.normalization.push_back(rep.c);
  }
  return out;
}

ScalingTable scaling_table(std::span<const std::pair<int, double>> runs) {
  if (runs.size() < 2)
    throw std::invalid_argument("scaling_table: need at least two dimensions");
  ScalingTable t;
  double sx = 0, sy = 0, sxx = 0, sxy = 0;
  for (const auto& [dim, ms] : runs) {
    t.dims.push_back(dim);
    t.ms_per_iteration.push_back(ms);
    sx += dim;
    sy += ms;
    sxx += static_cast<double>(dim) * dim;
    sxy += dim * ms;
  }
  const double n = static_cast<double>(runs.size());
  const double det = n * sxx - sx * sx;
  if (det == 0) throw std::invalid_argument("scaling_table: all dimensions equal");
  t.slope = (n * sxy - sx * sy) / det;
  t.intercept = (sy - t.slope * sx) / n;
  return t;
}

template ResidualSurvey analytic_residual_survey<float>(const sys::DriftSystem&, std::int64_t, std::uint64_t);
template ResidualSurvey analytic_residual_survey<double>(const sys::DriftSystem&, std::int64_t, std::uint64_t);
template SupReport sup_distance<float>(const sys::DriftSystem&, const net::Params<float>&, const SupOptions&);
template SupReport sup_distance<double>(const sys::DriftSystem&, const net::Params<double>&, const SupOptions&);
template double learned_mass<float>(const net::Params<float>&, const sys::Box&, int, int);
template double learned_mass<double>(const net::Params<double>&, const sys::Box&, int, int);
template grid::GridDensity network_density_grid<float>(const net::Params<float>&, const sys::Box&, std::span<const int>, int, int);
template grid::GridDensity network_density_grid<double>(const net::Params<double>&, const sys::Box&, std::span<const int>, int, int);
template DistanceTrace distance_trace<float>(const sys::DriftSystem&, const std::vector<std::pair<std::int64_t, net::Params<float>>>&, std::span<const train::TraceRow>, const SupOptions&);
template DistanceTrace distance_trace<double>(const sys::DriftSystem&, const std::vector<std::pair<std::int64_t, net::Params<double>>>&, std::span<const train::TraceRow>, const SupOptions&);

}  // namespace fpz::an

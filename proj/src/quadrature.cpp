#include "fpz/quadrature.hpp"

#include <algorithm>
#include <cmath>
#include <stdexcept>

namespace fpz::quad {

namespace {

// P_n(x) and P_n'(x) by the three-term recurrence.
void legendre(int n, double x, double& p, double& dp) {
  double p0 = 1.0, p1 = x;
  if (n == 0) {
    p = 1.0;
    dp = 0.0;
    return;
  }
  for (int k = 2; k <= n; ++k) {
    const double p2 = ((2.0 * k - 1.0) * x * p1 - (k - 1.0) * p0) / k;
    p0 = p1;
    p1 = p2;
  }
  p = p1;
  dp = n * (x * p1 - p0) / (x * x - 1.0);
}

}  // namespace

QuadRule gl_rule(int n) {
  if (n < 1 || n > 32) throw std::invalid_argument("gl_rule: order must be in [1, 32]");
  QuadRule rule;
  rule.nodes.resize(n);
  rule.weights.resize(n);
  if (n == 1) {
    rule.nodes[0] = 0.0;
    rule.weights[0] = 2.0;
    return rule;
  }
  // Newton from the Chebyshev-like initial guess; roots come in ± pairs, so
  // solve the upper half and mirror for exact symmetry.
  for (int i = 0; i < (n + 1) / 2; ++i) {
    double x = std::cos(M_PI * (i + 0.75) / (n + 0.5));
    double p = 0, dp = 0;
    for (int it = 0; it < 100; ++it) {
      legendre(n, x, p, dp);
      const double dx = p / dp;
      x -= dx;
      if (std::abs(dx) < 1e-15) break;
    }
    legendre(n, x, p, dp);
    const double w = 2.0 / ((1.0 - x * x) * dp * dp);
    rule.nodes[i] = -std::abs(x);
    rule.nodes[n - 1 - i] = std::abs(x);
    rule.weights[i] = w;
    rule.weights[n - 1 - i] = w;
  }
  if (n % 2 == 1) rule.nodes[n / 2] = 0.0;  // odd rules pin the middle node
  return rule;
}

double integrate_1d(const std::function<double(double)>& f, double a, double b,
                    int subintervals, int n) {
  if (!(b > a)) throw std::invalid_argument("integrate_1d: need b > a");
  if (subintervals < 1) throw std::invalid_argument("integrate_1d: need subintervals >= 1");
  const QuadRule rule = gl_rule(n);
  const double h = (b - a) / subintervals;
  double total = 0;
  for (int s = 0; s < subintervals; ++s) {
    const double mid = a + (s + 0.5) * h;
    double acc = 0;
    for (int q = 0; q < n; ++q) acc += rule.weights[q] * f(mid + 0.5 * h * rule.nodes[q]);
    total += acc * 0.5 * h;
  }
  return total;
}

double gl_error_bound(double deriv_bound, int n, double h) {
  if (deriv_bound < 0) throw std::invalid_argument("gl_error_bound: derivative bound < 0");
  if (n < 1 || n > 32) throw std::invalid_argument("gl_error_bound: order must be in [1, 32]");
  if (!(h > 0.0) || h > 1.0)
    throw std::invalid_argument("gl_error_bound: subinterval length must be in (0, 1]");
  if (deriv_bound == 0) return 0.0;
  // 2M/(2n)! (h/2)^(2n), evaluated in log space to dodge factorial overflow
  const double log_val = std::log(2.0 * deriv_bound) - std::lgamma(2.0 * n + 1.0) +
                         2.0 * n * std::log(0.5 * h);
  return std::exp(log_val);
}

namespace {

// Per-axis composite node/weight tables for a box.
struct AxisNodes {
  std::vector<double> x, w;
};

std::vector<AxisNodes> composite_axes(const sys::Box& box, int subintervals, int n) {
  box.validate();
  if (subintervals < 1) throw std::invalid_argument("tensor quad: need subintervals >= 1");
  const QuadRule rule = gl_rule(n);
  std::vector<AxisNodes> axes(box.dim());
  for (int j = 0; j < box.dim(); ++j) {
    const double h = (box.hi[j] - box.lo[j]) / subintervals;
    axes[j].x.reserve(static_cast<size_t>(subintervals) * n);
    axes[j].w.reserve(static_cast<size_t>(subintervals) * n);
    for (int s = 0; s < subintervals; ++s) {
      const double mid = box.lo[j] + (s + 0.5) * h;
      for (int q = 0; q < n; ++q) {
        axes[j].x.push_back(mid + 0.5 * h * rule.nodes[q]);
        axes[j].w.push_back(0.5 * h * rule.weights[q]);
      }
    }
  }
  return axes;
}

}  // namespace

double tensor_integrate_batch(const BatchFn& f, const sys::Box& box, int subintervals,
                              int n) {
  const int d = box.dim();
  if (d > 4)
    throw std::invalid_argument(
        "tensor_integrate: dimension > 4 would need " + std::to_string(d) +
        "-fold tensor nodes; integrate a marginal plane or evaluate a slice instead");
  const std::vector<AxisNodes> axes = composite_axes(box, subintervals, n);

  const int per_axis = static_cast<int>(axes[0].x.size());
  std::int64_t total_pts = 1;
  for (int j = 0; j < d; ++j) total_pts *= per_axis;

  constexpr int kChunk = 8192;
  std::vector<double> pts(static_cast<size_t>(kChunk) * d), vals(kChunk), wts(kChunk);
  std::vector<int> idx(d, 0);
  double acc = 0;
  std::int64_t done = 0;
  while (done < total_pts) {
    const int count = static_cast<int>(std::min<std::int64_t>(kChunk, total_pts - done));
    for (int i = 0; i < count; ++i) {
      double w = 1.0;
      for (int j = 0; j < d; ++j) {
        pts[static_cast<size_t>(i) * d + j] = axes[j].x[idx[j]];
        w *= axes[j].w[idx[j]];
      }
      wts[i] = w;
      for (int j = d - 1; j >= 0; --j) {
        if (++idx[j] < per_axis) break;
        idx[j] = 0;
      }
    }
    f(pts.data(), count, d, vals.data());
    double chunk = 0;
    for (int i = 0; i < count; ++i) chunk += wts[i] * vals[i];
    acc += chunk;
    done += count;
  }
  return acc;
}

double tensor_integrate(const std::function<double(std::span<const double>)>& f,
                        const sys::Box& box, int subintervals, int n) {
  return tensor_integrate_batch(
      [&f](const double* pts, int count, int dim, double* out) {
        for (int i = 0; i < count; ++i)
          out[i] = f(std::span<const double>(pts + static_cast<size_t>(i) * dim, dim));
      },
      box, subintervals, n);
}

grid::GridDensity marginalize(const std::function<double(std::span<const double>)>& density,
                        const sys::Box& box, std::span<const int> axes_to_integrate,
                        int subintervals, int n, std::span<const int> out_bins) {
  const int d = box.dim();
  std::vector<bool> integrated(d, false);
  for (int a : axes_to_integrate) {
    if (a < 0 || a >= d) throw std::invalid_argument("marginalize: axis index out of range");
    if (integrated[a]) throw std::invalid_argument("marginalize: duplicate axis");
    integrated[a] = true;
  }
  std::vector<int> kept;
  for (int j = 0; j < d; ++j)
    if (!integrated[j]) kept.push_back(j);
  if (axes_to_integrate.empty()) throw std::invalid_argument("marginalize: nothing to integrate");
  if (kept.empty() || kept.size() > 2)
    throw std::invalid_argument("marginalize: keep one or two axes");
  if (out_bins.size() != kept.size())
    throw std::invalid_argument("marginalize: out_bins size must match kept axes");

  sys::Box out_box;
  for (int j : kept) {
    out_box.lo.push_back(box.lo[j]);
    out_box.hi.push_back(box.hi[j]);
  }
  grid::GridDensity out = grid::make_grid(out_box, out_bins);

  // composite tables for the integrated axes only
  sys::Box int_box;
  for (int j = 0; j < d; ++j)
    if (integrated[j]) {
      int_box.lo.push_back(box.lo[j]);
      int_box.hi.push_back(box.hi[j]);
    }
  const std::vector<AxisNodes> axes = composite_axes(int_box, subintervals, n);
  const int per_axis = static_cast<int>(axes[0].x.size());
  const int di = static_cast<int>(axes.size());
  std::int64_t inner_pts = 1;
  for (int j = 0; j < di; ++j) inner_pts *= per_axis;

  const std::int64_t cells = out.cell_count();
#pragma omp parallel for schedule(static)
  for (std::int64_t flat = 0; flat < cells; ++flat) {
    std::vector<int> cidx(kept.size());
    std::int64_t rem = flat;
    for (int j = static_cast<int>(kept.size()) - 1; j >= 0; --j) {
      cidx[j] = static_cast<int>(rem % out.bins[j]);
      rem /= out.bins[j];
    }
    const std::vector<double> kc = out.center(cidx);

    std::vector<double> x(d);
    for (size_t j = 0; j < kept.size(); ++j) x[kept[j]] = kc[j];

    std::vector<int> idx(di, 0);
    double acc = 0;
    for (std::int64_t p = 0; p < inner_pts; ++p) {
      double w = 1.0;
      int slot = 0;
      for (int j = 0; j < d; ++j) {
        if (integrated[j]) {
          x[j] = axes[slot].x[idx[slot]];
          w *= axes[slot].w[idx[slot]];
          ++slot;
        }
      }
      acc += w * density(x);
      for (int j = di - 1; j >= 0; --j) {
        if (++idx[j] < per_axis) break;
        idx[j] = 0;
      }
    }
    out.values[static_cast<size_t>(flat)] = acc;
  }
  return out;
}

}  // namespace fpz::quad

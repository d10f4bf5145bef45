#pragma once
#include <functional>
#include <span>
#include <vector>

#include "fpz/grid.hpp"
#include "fpz/systems.hpp"

namespace fpz::quad {

// Nodes/weights on the reference interval [-1, 1], ascending node order.
struct QuadRule {
  std::vector<double> nodes, weights;
  int order() const { return static_cast<int>(nodes.size()); }
};

// Gauss–Legendre rule, exact for polynomials of degree 2n−1; n in [1, 32].
QuadRule gl_rule(int n);

// Composite rule: [a, b] split into `subintervals` pieces, n-point GL on each.
double integrate_1d(const std::function<double(double)>& f, double a, double b,
                    int subintervals, int n);

// Worst-case truncation bound 2M/(2n)! · (h/2)^(2n) for one subinterval of
// length h, with M bounding |f^(2n)| there. Valid for h in (0, 1].
double gl_error_bound(double deriv_bound, int n, double h);

// Full tensor-product integral over the box; refuses dimension > 4, where the
// node count explodes — marginalize over a plane or take a slice instead.
double tensor_integrate(const std::function<double(std::span<const double>)>& f,
                        const sys::Box& box, int subintervals, int n);

// Same contract, but f consumes a whole batch of points at once (row-major
// n×d in, n values out) so callers can amortize batched evaluation.
using BatchFn =
    std::function<void(const double* pts, int count, int dim, double* out)>;
double tensor_integrate_batch(const BatchFn& f, const sys::Box& box, int subintervals,
                              int n);

// Integrates `axes_to_integrate` out of the density and tabulates the result
// on a cell-center grid over the 1 or 2 kept axes.
grid::GridDensity marginalize(const std::function<double(std::span<const double>)>& density,
                        const sys::Box& box, std::span<const int> axes_to_integrate,
                        int subintervals, int n, std::span<const int> out_bins);

}  // namespace fpz::quad

#pragma once

#include <array>
#include <vector>

namespace paro {

/// Quadrature rule on the reference simplex in barycentric coordinates.
/// Weights are normalized to sum to 1; the element integral is
/// |tau| * sum_q w_q f(x_q).
struct QuadratureRule {
  int dim = 2;
  int degree = 1;  // exact for polynomials up to this total degree
  std::vector<std::array<double, 4>> points;  // dim+1 barycentric entries used
  std::vector<double> weights;
};

/// Cached rule of at least the requested polynomial exactness.
const QuadratureRule& simplex_rule(int dim, int degree);

/// Rule obtained by recursively bisecting the reference simplex `levels`
/// times and mapping `base` into each of the 2^levels cells. Used where the
/// integrand has a local singularity.
const QuadratureRule& subdivided_rule(int dim, int degree, int levels);

}  // namespace paro

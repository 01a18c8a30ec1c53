#include "paro/quadrature.hpp"

#include <cmath>
#include <map>
#include <mutex>

#include "paro/errors.hpp"

namespace paro {

namespace {

/// Gauss-Legendre nodes/weights on [0,1], computed by Newton iteration on the
/// Legendre recurrence.
void gauss_legendre_01(int n, std::vector<double>& x, std::vector<double>& w) {
  x.resize(n);
  w.resize(n);
  for (int i = 0; i < n; ++i) {
    double t = std::cos(M_PI * (i + 0.75) / (n + 0.5));  // Chebyshev start
    double dp = 0.0;
    for (int iter = 0; iter < 100; ++iter) {
      double p0 = 1.0, p1 = t;
      for (int k = 2; k <= n; ++k) {
        const double p2 = ((2.0 * k - 1.0) * t * p1 - (k - 1.0) * p0) / k;
        p0 = p1;
        p1 = p2;
      }
      dp = n * (t * p1 - p0) / (t * t - 1.0);
      const double dt = p1 / dp;
      t -= dt;
      if (std::abs(dt) < 1e-15) break;
    }
    x[i] = 0.5 * (1.0 - t);  // nodes descend in t -> ascend on [0,1]
    w[i] = 1.0 / ((1.0 - t * t) * dp * dp);
  }
}

/// Conical-product (Duffy) rule on the reference simplex. Exact for total
/// degree p when each axis uses ceil((p + dim)/2) Gauss points, since the
/// pullback of a degree-p monomial times the map Jacobian has per-axis degree
/// at most p + dim - 1.
QuadratureRule duffy_rule(int dim, int degree) {
  const int q = (degree + dim + 1) / 2;
  std::vector<double> gx, gw;
  gauss_legendre_01(q, gx, gw);

  QuadratureRule rule;
  rule.dim = dim;
  rule.degree = degree;
  const double factorial = dim == 2 ? 2.0 : 6.0;

  if (dim == 2) {
    for (int i = 0; i < q; ++i) {
      for (int j = 0; j < q; ++j) {
        const double xi = gx[i], eta = gx[j];
        const double x = xi, y = eta * (1.0 - xi);
        const double jac = 1.0 - xi;
        rule.points.push_back({1.0 - x - y, x, y, 0.0});
        rule.weights.push_back(factorial * gw[i] * gw[j] * jac);
      }
    }
  } else {
    for (int i = 0; i < q; ++i) {
      for (int j = 0; j < q; ++j) {
        for (int k = 0; k < q; ++k) {
          const double xi = gx[i], eta = gx[j], zeta = gx[k];
          const double x = xi;
          const double y = eta * (1.0 - xi);
          const double z = zeta * (1.0 - xi) * (1.0 - eta);
          const double jac = (1.0 - xi) * (1.0 - xi) * (1.0 - eta);
          rule.points.push_back({1.0 - x - y - z, x, y, z});
          rule.weights.push_back(factorial * gw[i] * gw[j] * gw[k] * jac);
        }
      }
    }
  }
  return rule;
}

QuadratureRule make_rule(int dim, int degree) {
  QuadratureRule rule;
  rule.dim = dim;
  if (degree <= 1) {
    rule.degree = 1;
    if (dim == 2) {
      rule.points.push_back({1.0 / 3, 1.0 / 3, 1.0 / 3, 0});
    } else {
      rule.points.push_back({0.25, 0.25, 0.25, 0.25});
    }
    rule.weights.push_back(1.0);
    return rule;
  }
  if (degree == 2) {
    rule.degree = 2;
    if (dim == 2) {
      // edge midpoints
      rule.points = {{0.5, 0.5, 0, 0}, {0.5, 0, 0.5, 0}, {0, 0.5, 0.5, 0}};
      rule.weights = {1.0 / 3, 1.0 / 3, 1.0 / 3};
    } else {
      const double a = (5.0 + 3.0 * std::sqrt(5.0)) / 20.0;
      const double b = (5.0 - std::sqrt(5.0)) / 20.0;
      rule.points = {{a, b, b, b}, {b, a, b, b}, {b, b, a, b}, {b, b, b, a}};
      rule.weights = {0.25, 0.25, 0.25, 0.25};
    }
    return rule;
  }
  return duffy_rule(dim, degree);
}

using BaryCorners = std::vector<std::array<double, 4>>;  // dim+1 corners

void subdivide(int dim, const BaryCorners& corners, int levels, std::vector<BaryCorners>& out) {
  if (levels == 0) {
    out.push_back(corners);
    return;
  }
  // bisect the reference-space longest edge, first pair on ties
  int bi = 0, bj = 1;
  double best = -1.0;
  for (int i = 0; i <= dim; ++i) {
    for (int j = i + 1; j <= dim; ++j) {
      double d2 = 0.0;
      for (int k = 0; k <= dim; ++k) {
        const double d = corners[i][k] - corners[j][k];
        d2 += d * d;
      }
      if (d2 > best + 1e-14) {
        best = d2;
        bi = i;
        bj = j;
      }
    }
  }
  std::array<double, 4> mid{};
  for (int k = 0; k <= dim; ++k) mid[k] = 0.5 * (corners[bi][k] + corners[bj][k]);
  BaryCorners a = corners, b = corners;
  a[bj] = mid;
  b[bi] = mid;
  subdivide(dim, a, levels - 1, out);
  subdivide(dim, b, levels - 1, out);
}

QuadratureRule make_subdivided(int dim, int degree, int levels) {
  const QuadratureRule base = make_rule(dim, degree);
  BaryCorners ref(dim + 1);
  for (int i = 0; i <= dim; ++i) ref[i][i] = 1.0;
  std::vector<BaryCorners> cells;
  subdivide(dim, ref, levels, cells);

  QuadratureRule rule;
  rule.dim = dim;
  rule.degree = base.degree;
  const double cell_weight = 1.0 / static_cast<double>(cells.size());  // bisection halves volume
  for (const auto& cell : cells) {
    for (std::size_t q = 0; q < base.points.size(); ++q) {
      std::array<double, 4> p{};
      for (int corner = 0; corner <= dim; ++corner) {
        for (int k = 0; k <= dim; ++k) p[k] += base.points[q][corner] * cell[corner][k];
      }
      rule.points.push_back(p);
      rule.weights.push_back(base.weights[q] * cell_weight);
    }
  }
  return rule;
}

}  // namespace

const QuadratureRule& simplex_rule(int dim, int degree) {
  if (dim != 2 && dim != 3) throw InvalidArgumentError("simplex_rule: dim must be 2 or 3");
  static std::map<std::pair<int, int>, QuadratureRule> cache;
  static std::mutex mutex;
  std::lock_guard<std::mutex> lock(mutex);
  auto [it, inserted] = cache.try_emplace({dim, degree});
  if (inserted) it->second = make_rule(dim, degree);
  return it->second;
}

const QuadratureRule& subdivided_rule(int dim, int degree, int levels) {
  if (dim != 2 && dim != 3) throw InvalidArgumentError("subdivided_rule: dim must be 2 or 3");
  if (levels < 0 || levels > 12) throw InvalidArgumentError("subdivided_rule: bad level count");
  static std::map<std::tuple<int, int, int>, QuadratureRule> cache;
  static std::mutex mutex;
  std::lock_guard<std::mutex> lock(mutex);
  auto [it, inserted] = cache.try_emplace({dim, degree, levels});
  if (inserted) it->second = make_subdivided(dim, degree, levels);
  return it->second;
}

}  // namespace paro

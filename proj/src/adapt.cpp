#include "paro/adapt.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <numeric>
#include <ostream>

#include "paro/errors.hpp"
#include "paro/parallel.hpp"

namespace paro {

double ErrorIndicators::total() const {
  double s = 0.0;
  for (double e : eta) s += e * e;
  return std::sqrt(s);
}

double ErrorIndicators::max() const {
  double m = 0.0;
  for (double e : eta) m = std::max(m, e);
  return m;
}

namespace {

double face_measure(const Mesh& mesh, const InteriorFace& f) {
  if (mesh.dimension() == 2) {
    return distance(mesh.vertices()[f.v[0]], mesh.vertices()[f.v[1]]);
  }
  const Vec3 a = mesh.vertices()[f.v[0]], b = mesh.vertices()[f.v[1]], c = mesh.vertices()[f.v[2]];
  return 0.5 * norm(cross(b - a, c - a));
}

double face_diameter(const Mesh& mesh, const InteriorFace& f) {
  if (mesh.dimension() == 2) {
    return distance(mesh.vertices()[f.v[0]], mesh.vertices()[f.v[1]]);
  }
  const Vec3 a = mesh.vertices()[f.v[0]], b = mesh.vertices()[f.v[1]], c = mesh.vertices()[f.v[2]];
  return std::max({distance(a, b), distance(b, c), distance(a, c)});
}

Vec3 face_normal(const Mesh& mesh, const InteriorFace& f) {
  if (mesh.dimension() == 2) {
    const Vec3 t = mesh.vertices()[f.v[1]] - mesh.vertices()[f.v[0]];
    const double len = norm(t);
    return {t.y / len, -t.x / len, 0.0};
  }
  const Vec3 a = mesh.vertices()[f.v[0]], b = mesh.vertices()[f.v[1]], c = mesh.vertices()[f.v[2]];
  Vec3 n = cross(b - a, c - a);
  const double len = norm(n);
  return (1.0 / len) * n;
}

}  // namespace

ErrorIndicators estimate_source_residual(const FeSpace& space, const DiscreteFunction& solution,
                                         const ElemScalarFn& rhs, const ElemMatrixFn& diffusion,
                                         const ElemScalarFn& reaction, int workers) {
  if (solution.space->mesh().id() != space.mesh().id()) {
    throw LineageError("estimate: solution lives on a different mesh generation");
  }
  const Mesh& mesh = space.mesh();
  const int d = mesh.dimension();
  const QuadratureRule& rule = simplex_rule(d, 2);

  ErrorIndicators out;
  out.mesh_id = mesh.id();
  std::vector<double> eta2(mesh.element_count(), 0.0);
  std::vector<Vec3> flux(mesh.element_count());

  // interior residual: for P1 the second-order term vanishes elementwise,
  // leaving f - c u_h; flux frozen at the barycenter for the jump terms
  parallel_for(mesh.element_count(), workers, [&](std::size_t e) {
    const double h = mesh.element_diameter(e);
    const double vol = mesh.element_volume(e);
    double r2 = 0.0;
    for (std::size_t q = 0; q < rule.points.size(); ++q) {
      Vec3 x;
      for (int i = 0; i <= d; ++i) x = x + rule.points[q][i] * mesh.element_vertex(e, i);
      const double uh = evaluate_in_element(solution, e, rule.points[q]);
      const double r = rhs(e, x) - reaction(e, x) * uh;
      r2 += rule.weights[q] * vol * r * r;
    }
    eta2[e] = h * h * r2;
    flux[e] = diffusion(e, mesh.element_barycenter(e)).apply(element_gradient(solution, e));
  });

  for (const auto& f : mesh.interior_faces()) {
    const Vec3 n = face_normal(mesh, f);
    const double jump = dot(flux[f.elem[0]] - flux[f.elem[1]], n);
    const double contribution = 0.5 * face_diameter(mesh, f) * face_measure(mesh, f) * jump * jump;
    eta2[f.elem[0]] += contribution;
    eta2[f.elem[1]] += contribution;
  }

  out.eta.resize(eta2.size());
  for (std::size_t e = 0; e < eta2.size(); ++e) out.eta[e] = std::sqrt(std::max(0.0, eta2[e]));
  return out;
}

ErrorIndicators estimate_eigen_residual(const FeSpace& space, const DiscreteFunction& solution,
                                        double lambda, const DiscreteFunction& u_prev,
                                        const ElemMatrixFn& diffusion, const ElemScalarFn& reaction,
                                        int workers) {
  if (u_prev.space->mesh().id() != space.mesh().id()) {
    throw LineageError("estimate: previous iterate lives on a different mesh generation");
  }
  const DiscreteFunction* up = &u_prev;
  auto rhs = [lambda, up](std::size_t e, const Vec3& x) {
    return lambda * evaluate_in_element(*up, e, up->space->mesh().barycentric(e, x));
  };
  return estimate_source_residual(space, solution, rhs, diffusion, reaction, workers);
}

ErrorIndicators combine_max(const std::vector<ErrorIndicators>& sets) {
  if (sets.empty()) throw InvalidArgumentError("combine_max: empty input");
  ErrorIndicators out = sets.front();
  for (std::size_t k = 1; k < sets.size(); ++k) {
    if (sets[k].mesh_id != out.mesh_id || sets[k].eta.size() != out.eta.size()) {
      throw LineageError("combine_max: indicator sets from different generations");
    }
    for (std::size_t e = 0; e < out.eta.size(); ++e) {
      out.eta[e] = std::max(out.eta[e], sets[k].eta[e]);
    }
  }
  return out;
}

MarkResult dorfler_mark(const ErrorIndicators& indicators, double theta) {
  if (!(theta > 0.0 && theta < 1.0)) {
    throw InvalidArgumentError("dorfler_mark: theta must lie in (0,1)");
  }
  const std::size_t n = indicators.eta.size();
  std::vector<std::size_t> order(n);
  std::iota(order.begin(), order.end(), 0);
  std::sort(order.begin(), order.end(), [&](std::size_t a, std::size_t b) {
    if (indicators.eta[a] != indicators.eta[b]) return indicators.eta[a] > indicators.eta[b];
    return a < b;
  });

  double total2 = 0.0;
  for (double e : indicators.eta) total2 += e * e;
  const double target = theta * total2;

  MarkResult res;
  res.converged = total2 == 0.0;
  double acc = 0.0;
  for (std::size_t k = 0; k < n && acc < target; ++k) {
    acc += indicators.eta[order[k]] * indicators.eta[order[k]];
    res.marked.push_back(order[k]);
  }
  std::sort(res.marked.begin(), res.marked.end());
  return res;
}

MarkResult maximum_mark(const ErrorIndicators& indicators, double theta) {
  if (!(theta > 0.0 && theta < 1.0)) {
    throw InvalidArgumentError("maximum_mark: theta must lie in (0,1)");
  }
  MarkResult res;
  const double max_eta = indicators.max();
  if (max_eta == 0.0) {
    res.converged = true;
    return res;
  }
  const double threshold = theta * max_eta;
  for (std::size_t e = 0; e < indicators.eta.size(); ++e) {
    if (indicators.eta[e] >= threshold) res.marked.push_back(e);
  }
  return res;
}

void write_indicators_csv(std::ostream& os, const ErrorIndicators& indicators) {
  os << "element,eta\n";
  char buf[64];
  for (std::size_t e = 0; e < indicators.eta.size(); ++e) {
    std::snprintf(buf, sizeof buf, "%zu,%.12g\n", e, indicators.eta[e]);
    os << buf;
  }
}

}  // namespace paro

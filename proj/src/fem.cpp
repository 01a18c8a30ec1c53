#include "paro/fem.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <ostream>

#include "paro/errors.hpp"
#include "paro/parallel.hpp"

namespace paro {

std::shared_ptr<const FeSpace> FeSpace::create(std::shared_ptr<const Mesh> mesh, int degree) {
  if (!mesh) throw InvalidArgumentError("FeSpace: null mesh");
  if (degree != 1) {
    throw InvalidArgumentError("FeSpace: only degree 1 is implemented (degree 2 reserved)");
  }
  auto space = std::shared_ptr<FeSpace>(new FeSpace());
  space->mesh_ = std::move(mesh);
  space->degree_ = degree;
  const auto& boundary = space->mesh_->boundary_vertex_mask();
  space->vertex_to_dof_.assign(space->mesh_->vertex_count(), -1);
  for (std::uint32_t v = 0; v < space->mesh_->vertex_count(); ++v) {
    if (!boundary[v]) {
      space->vertex_to_dof_[v] = static_cast<std::int32_t>(space->dof_to_vertex_.size());
      space->dof_to_vertex_.push_back(v);
    }
  }
  return space;
}

// ---------------------------------------------------------------------------
// Coefficient helpers
// ---------------------------------------------------------------------------

ElemScalarFn constant_field(double value) {
  return [value](std::size_t, const Vec3&) { return value; };
}

ElemScalarFn field_from(PointFn f) {
  return [f = std::move(f)](std::size_t, const Vec3& x) { return f(x); };
}

ElemMatrixFn constant_diffusion(double scale) {
  const Mat3 m = Mat3::identity(scale);
  return [m](std::size_t, const Vec3&) { return m; };
}

ElemMatrixFn diffusion_from(std::function<Mat3(const Vec3&)> f) {
  return [f = std::move(f)](std::size_t, const Vec3& x) { return f(x); };
}

ElemScalarFn field_of(const DiscreteFunction& f) {
  const DiscreteFunction* fp = &f;
  return [fp](std::size_t elem, const Vec3& x) {
    const auto bary = fp->space->mesh().barycentric(elem, x);
    return evaluate_in_element(*fp, elem, bary);
  };
}

// ---------------------------------------------------------------------------
// Local geometry
// ---------------------------------------------------------------------------

std::array<Vec3, 4> barycentric_gradients(const Mesh& mesh, std::size_t e) {
  const int d = mesh.dimension();
  std::array<Vec3, 4> grad{};
  const Vec3 p0 = mesh.element_vertex(e, 0);
  if (d == 2) {
    const Vec3 a = mesh.element_vertex(e, 1) - p0;
    const Vec3 b = mesh.element_vertex(e, 2) - p0;
    const double det = a.x * b.y - a.y * b.x;
    grad[1] = {b.y / det, -b.x / det, 0.0};
    grad[2] = {-a.y / det, a.x / det, 0.0};
  } else {
    const Vec3 a = mesh.element_vertex(e, 1) - p0;
    const Vec3 b = mesh.element_vertex(e, 2) - p0;
    const Vec3 c = mesh.element_vertex(e, 3) - p0;
    const double det = dot(a, cross(b, c));
    grad[1] = (1.0 / det) * cross(b, c);
    grad[2] = (1.0 / det) * cross(c, a);
    grad[3] = (1.0 / det) * cross(a, b);
  }
  Vec3 sum;
  for (int i = 1; i <= d; ++i) sum = sum + grad[i];
  grad[0] = {-sum.x, -sum.y, -sum.z};
  return grad;
}

// ---------------------------------------------------------------------------
// Assembly core
// ---------------------------------------------------------------------------

namespace {

struct DofView {
  const FeSpace* space;
  bool eliminate;

  std::size_t count() const {
    return eliminate ? space->dof_count() : space->mesh().vertex_count();
  }
  std::int32_t global(std::uint32_t vertex) const {
    return eliminate ? space->vertex_dof(vertex) : static_cast<std::int32_t>(vertex);
  }
};

/// CSR skeleton for the vertex-adjacency pattern of the view.
SparseOperator make_pattern(const DofView& view) {
  const Mesh& mesh = view.space->mesh();
  const int nloc = mesh.dimension() + 1;
  const std::size_t n = view.count();
  std::vector<std::vector<std::uint32_t>> adj(n);
  for (std::size_t e = 0; e < mesh.element_count(); ++e) {
    const auto& el = mesh.elements()[e];
    for (int i = 0; i < nloc; ++i) {
      const std::int32_t gi = view.global(el.v[i]);
      if (gi < 0) continue;
      for (int j = 0; j < nloc; ++j) {
        const std::int32_t gj = view.global(el.v[j]);
        if (gj >= 0) adj[gi].push_back(static_cast<std::uint32_t>(gj));
      }
    }
  }
  std::vector<std::size_t> rows(n + 1, 0);
  std::size_t nnz = 0;
  for (std::size_t i = 0; i < n; ++i) {
    auto& a = adj[i];
    std::sort(a.begin(), a.end());
    a.erase(std::unique(a.begin(), a.end()), a.end());
    nnz += a.size();
    rows[i + 1] = nnz;
  }
  std::vector<std::uint32_t> cols;
  cols.reserve(nnz);
  for (const auto& a : adj) cols.insert(cols.end(), a.begin(), a.end());
  return SparseOperator(n, std::move(rows), std::move(cols), std::vector<double>(nnz, 0.0), false);
}

void scatter_local(SparseOperator& mat, const DofView& view, const Element& el, int nloc,
                   const double* local) {
  const auto& rows = mat.row_offsets();
  const auto& cols = mat.col_indices();
  auto& vals = mat.values();
  for (int i = 0; i < nloc; ++i) {
    const std::int32_t gi = view.global(el.v[i]);
    if (gi < 0) continue;
    const auto begin = cols.begin() + static_cast<std::ptrdiff_t>(rows[gi]);
    const auto end = cols.begin() + static_cast<std::ptrdiff_t>(rows[gi + 1]);
    for (int j = 0; j < nloc; ++j) {
      const std::int32_t gj = view.global(el.v[j]);
      if (gj < 0) continue;
      const auto it = std::lower_bound(begin, end, static_cast<std::uint32_t>(gj));
      vals[static_cast<std::size_t>(it - cols.begin())] += local[i * nloc + j];
    }
  }
}

/// Parallel local computation, deterministic element-order merge. Local
/// blocks land in per-element slots, so results are identical for any worker
/// count.
template <typename LocalKernel>
SparseOperator assemble_matrix(const FeSpace& space, bool eliminate, int workers,
                               LocalKernel&& kernel) {
  const Mesh& mesh = space.mesh();
  const int nloc = mesh.dimension() + 1;
  const DofView view{&space, eliminate};
  SparseOperator mat = make_pattern(view);

  const std::size_t ne = mesh.element_count();
  const std::size_t chunk = 8192;
  std::vector<double> locals(std::min(ne, chunk) * nloc * nloc);
  for (std::size_t base = 0; base < ne; base += chunk) {
    const std::size_t count = std::min(chunk, ne - base);
    parallel_for(count, workers,
                 [&](std::size_t k) { kernel(base + k, locals.data() + k * nloc * nloc); });
    for (std::size_t k = 0; k < count; ++k) {
      scatter_local(mat, view, mesh.elements()[base + k], nloc, locals.data() + k * nloc * nloc);
    }
  }
  return SparseOperator(mat.dimension(), mat.row_offsets(), mat.col_indices(),
                        std::move(mat.values()), true);
}

void check_spd_sample(const Mat3& a, int dim, std::size_t elem) {
  const double scale = std::max({std::abs(a(0, 0)), std::abs(a(1, 1)), std::abs(a(2, 2)), 1e-300});
  for (int i = 0; i < dim; ++i) {
    for (int j = i + 1; j < dim; ++j) {
      if (std::abs(a(i, j) - a(j, i)) > 1e-12 * scale) {
        throw InvalidCoefficientError("diffusion sample asymmetric on element " +
                                      std::to_string(elem));
      }
    }
  }
  // leading principal minors
  const double m1 = a(0, 0);
  const double m2 = a(0, 0) * a(1, 1) - a(0, 1) * a(1, 0);
  bool spd = m1 > 0.0 && m2 > 0.0;
  if (dim == 3) {
    const double m3 = a(0, 0) * (a(1, 1) * a(2, 2) - a(1, 2) * a(2, 1)) -
                      a(0, 1) * (a(1, 0) * a(2, 2) - a(1, 2) * a(2, 0)) +
                      a(0, 2) * (a(1, 0) * a(2, 1) - a(1, 1) * a(2, 0));
    spd = spd && m3 > 0.0;
  }
  if (!spd) {
    throw InvalidCoefficientError("diffusion sample not positive definite on element " +
                                  std::to_string(elem));
  }
}

Vec3 quad_point(const Mesh& mesh, std::size_t e, const std::array<double, 4>& bary) {
  Vec3 x;
  for (int i = 0; i <= mesh.dimension(); ++i) {
    x = x + bary[i] * mesh.element_vertex(e, i);
  }
  return x;
}

}  // namespace

SparseOperator assemble_stiffness(const FeSpace& space, const ElemMatrixFn& diffusion,
                                  const ElemScalarFn& reaction, const AssemblyOptions& opts) {
  const Mesh& mesh = space.mesh();
  const int d = mesh.dimension();
  const int nloc = d + 1;
  const QuadratureRule& rule = simplex_rule(d, opts.quad_degree);

  return assemble_matrix(space, opts.eliminate_boundary, opts.workers,
                         [&](std::size_t e, double* local) {
    const auto grad = barycentric_gradients(mesh, e);
    const double vol = mesh.element_volume(e);
    std::fill(local, local + nloc * nloc, 0.0);
    for (std::size_t q = 0; q < rule.points.size(); ++q) {
      const Vec3 x = quad_point(mesh, e, rule.points[q]);
      const Mat3 a = diffusion(e, x);
      check_spd_sample(a, d, e);
      const double c = reaction(e, x);
      const double w = rule.weights[q] * vol;
      for (int i = 0; i < nloc; ++i) {
        const Vec3 agi = a.apply(grad[i]);
        for (int j = 0; j <= i; ++j) {
          local[i * nloc + j] +=
              w * (dot(agi, grad[j]) + c * rule.points[q][i] * rule.points[q][j]);
        }
      }
    }
    for (int i = 0; i < nloc; ++i) {
      for (int j = i + 1; j < nloc; ++j) local[i * nloc + j] = local[j * nloc + i];
    }
  });
}

SparseOperator assemble_mass(const FeSpace& space, const AssemblyOptions& opts) {
  const Mesh& mesh = space.mesh();
  const int d = mesh.dimension();
  const int nloc = d + 1;
  const double denom = (d + 1.0) * (d + 2.0);

  return assemble_matrix(space, opts.eliminate_boundary, opts.workers,
                         [&](std::size_t e, double* local) {
    const double vol = mesh.element_volume(e);
    for (int i = 0; i < nloc; ++i) {
      for (int j = 0; j < nloc; ++j) {
        local[i * nloc + j] = vol * (i == j ? 2.0 : 1.0) / denom;
      }
    }
  });
}

namespace {

const QuadratureRule& pick_weighted_rule(const Mesh& mesh, std::size_t e,
                                         const SingularQuadPolicy& policy) {
  const int d = mesh.dimension();
  if (policy.singular_points.empty()) return simplex_rule(d, policy.degree);
  const double h = mesh.element_diameter(e);
  const Vec3 bc = mesh.element_barycenter(e);
  for (const Vec3& p : policy.singular_points) {
    if (distance(bc, p) < 1.5 * h) {
      const auto bary = mesh.barycentric(e, p);
      bool near = true;
      for (int i = 0; i <= d; ++i) near = near && bary[i] > -0.25;
      if (near) return subdivided_rule(d, policy.singular_degree, policy.subdivide_levels);
    }
  }
  return simplex_rule(d, policy.singular_degree);
}

}  // namespace

SparseOperator assemble_weighted_mass(const FeSpace& space, const ElemScalarFn& w,
                                      const SingularQuadPolicy& policy,
                                      const AssemblyOptions& opts) {
  const Mesh& mesh = space.mesh();
  const int d = mesh.dimension();
  const int nloc = d + 1;

  return assemble_matrix(space, opts.eliminate_boundary, opts.workers,
                         [&](std::size_t e, double* local) {
    const QuadratureRule& rule = pick_weighted_rule(mesh, e, policy);
    const double vol = mesh.element_volume(e);
    std::fill(local, local + nloc * nloc, 0.0);
    for (std::size_t q = 0; q < rule.points.size(); ++q) {
      const Vec3 x = quad_point(mesh, e, rule.points[q]);
      const double wq = w(e, x);
      if (!std::isfinite(wq)) {
        throw EvaluationError("weighted mass: non-finite coefficient on element " +
                              std::to_string(e));
      }
      const double ww = rule.weights[q] * vol * wq;
      for (int i = 0; i < nloc; ++i) {
        for (int j = 0; j <= i; ++j) {
          local[i * nloc + j] += ww * rule.points[q][i] * rule.points[q][j];
        }
      }
    }
    for (int i = 0; i < nloc; ++i) {
      for (int j = i + 1; j < nloc; ++j) local[i * nloc + j] = local[j * nloc + i];
    }
  });
}

SparseOperator assemble_weighted_mass(const FeSpace& space, const DiscreteFunction& w,
                                      const AssemblyOptions& opts) {
  if (w.space->mesh().id() != space.mesh().id()) {
    throw LineageError("weighted mass: weight lives on a different generation");
  }
  return assemble_weighted_mass(space, field_of(w), {}, opts);
}

std::vector<double> assemble_load(const FeSpace& space, const ElemScalarFn& f,
                                  const AssemblyOptions& opts) {
  const Mesh& mesh = space.mesh();
  const int d = mesh.dimension();
  const int nloc = d + 1;
  const QuadratureRule& rule = simplex_rule(d, opts.quad_degree);
  std::vector<double> rhs(opts.eliminate_boundary ? space.dof_count() : mesh.vertex_count(), 0.0);
  const DofView view{&space, opts.eliminate_boundary};

  for (std::size_t e = 0; e < mesh.element_count(); ++e) {
    const auto& el = mesh.elements()[e];
    const double vol = mesh.element_volume(e);
    for (std::size_t q = 0; q < rule.points.size(); ++q) {
      const Vec3 x = quad_point(mesh, e, rule.points[q]);
      const double fv = f(e, x) * rule.weights[q] * vol;
      for (int i = 0; i < nloc; ++i) {
        const std::int32_t gi = view.global(el.v[i]);
        if (gi >= 0) rhs[gi] += fv * rule.points[q][i];
      }
    }
  }
  return rhs;
}

// ---------------------------------------------------------------------------
// Transfer and evaluation
// ---------------------------------------------------------------------------

std::vector<double> vertex_values(const DiscreteFunction& f) {
  const FeSpace& space = *f.space;
  std::vector<double> values(space.mesh().vertex_count(), 0.0);
  for (std::size_t dof = 0; dof < space.dof_count(); ++dof) {
    values[space.dof_vertex(dof)] = f.coeffs[dof];
  }
  return values;
}

DiscreteFunction prolongate(const DiscreteFunction& f, std::shared_ptr<const FeSpace> target) {
  const Mesh& src_mesh = f.space->mesh();
  const Mesh& dst_mesh = target->mesh();
  if (!dst_mesh.is_descendant_of(src_mesh)) {
    throw LineageError("prolongate: target space is not a refinement descendant");
  }
  std::vector<double> values = vertex_values(f);
  values.resize(dst_mesh.vertex_count(), 0.0);
  // each appended vertex is the midpoint of two earlier ones, and every
  // ancestor P1 function is affine along descendant edges
  const auto& parents = dst_mesh.vertex_parents();
  for (std::size_t v = src_mesh.vertex_count(); v < dst_mesh.vertex_count(); ++v) {
    values[v] = 0.5 * (values[parents[v].first] + values[parents[v].second]);
  }
  DiscreteFunction out(std::move(target));
  for (std::size_t dof = 0; dof < out.space->dof_count(); ++dof) {
    out.coeffs[dof] = values[out.space->dof_vertex(dof)];
  }
  return out;
}

double evaluate_in_element(const DiscreteFunction& f, std::size_t elem,
                           const std::array<double, 4>& bary) {
  const FeSpace& space = *f.space;
  const auto& el = space.mesh().elements()[elem];
  double v = 0.0;
  for (int i = 0; i <= space.mesh().dimension(); ++i) {
    const std::int32_t dof = space.vertex_dof(el.v[i]);
    if (dof >= 0) v += bary[i] * f.coeffs[dof];
  }
  return v;
}

double evaluate(const DiscreteFunction& f, const Vec3& x) {
  const auto elem = f.space->mesh().locate_point(x);
  if (!elem) throw OutOfDomainError("evaluate: point outside the domain box");
  return evaluate_in_element(f, *elem, f.space->mesh().barycentric(*elem, x));
}

Vec3 element_gradient(const DiscreteFunction& f, std::size_t elem) {
  const FeSpace& space = *f.space;
  const auto grad = barycentric_gradients(space.mesh(), elem);
  const auto& el = space.mesh().elements()[elem];
  Vec3 g;
  for (int i = 0; i <= space.mesh().dimension(); ++i) {
    const std::int32_t dof = space.vertex_dof(el.v[i]);
    if (dof >= 0) g = g + f.coeffs[dof] * grad[i];
  }
  return g;
}

double integrate(const DiscreteFunction& f) {
  const Mesh& mesh = f.space->mesh();
  const std::vector<double> values = vertex_values(f);
  double total = 0.0;
  for (std::size_t e = 0; e < mesh.element_count(); ++e) {
    const auto& el = mesh.elements()[e];
    double s = 0.0;
    for (int i = 0; i <= mesh.dimension(); ++i) s += values[el.v[i]];
    total += mesh.element_volume(e) * s / (mesh.dimension() + 1);
  }
  return total;
}

double norm_l2(const DiscreteFunction& f) {
  const Mesh& mesh = f.space->mesh();
  const int d = mesh.dimension();
  const double denom = (d + 1.0) * (d + 2.0);
  const std::vector<double> values = vertex_values(f);
  double total = 0.0;
  for (std::size_t e = 0; e < mesh.element_count(); ++e) {
    const auto& el = mesh.elements()[e];
    double sum = 0.0, sq = 0.0;
    for (int i = 0; i <= d; ++i) {
      sum += values[el.v[i]];
      sq += values[el.v[i]] * values[el.v[i]];
    }
    total += mesh.element_volume(e) * (sq + sum * sum) / denom;
  }
  return std::sqrt(std::max(0.0, total));
}

double seminorm_h1(const DiscreteFunction& f) {
  const Mesh& mesh = f.space->mesh();
  double total = 0.0;
  for (std::size_t e = 0; e < mesh.element_count(); ++e) {
    const Vec3 g = element_gradient(f, e);
    total += mesh.element_volume(e) * dot(g, g);
  }
  return std::sqrt(std::max(0.0, total));
}

double norm_h1(const DiscreteFunction& f) {
  const double l2 = norm_l2(f);
  const double h1 = seminorm_h1(f);
  return std::sqrt(l2 * l2 + h1 * h1);
}

void write_function(std::ostream& os, const DiscreteFunction& f) {
  char buf[64];
  os << f.space->mesh().generation_index() << ' ' << f.space->dof_count() << '\n';
  for (double c : f.coeffs) {
    std::snprintf(buf, sizeof buf, "%.17g\n", c);
    os << buf;
  }
}

void write_vtk(std::ostream& os, const Mesh& mesh, const std::vector<double>& values,
               const std::string& name) {
  const int d = mesh.dimension();
  os << "# vtk DataFile Version 2.0\n" << name << "\nASCII\nDATASET UNSTRUCTURED_GRID\n";
  os << "POINTS " << mesh.vertex_count() << " double\n";
  char buf[128];
  for (const auto& p : mesh.vertices()) {
    std::snprintf(buf, sizeof buf, "%.9g %.9g %.9g\n", p.x, p.y, p.z);
    os << buf;
  }
  const int nloc = d + 1;
  os << "CELLS " << mesh.element_count() << ' ' << mesh.element_count() * (nloc + 1) << '\n';
  for (const auto& el : mesh.elements()) {
    os << nloc;
    for (int i = 0; i < nloc; ++i) os << ' ' << el.v[i];
    os << '\n';
  }
  os << "CELL_TYPES " << mesh.element_count() << '\n';
  for (std::size_t e = 0; e < mesh.element_count(); ++e) os << (d == 2 ? 5 : 10) << '\n';
  os << "POINT_DATA " << mesh.vertex_count() << "\nSCALARS " << name << " double 1\n"
     << "LOOKUP_TABLE default\n";
  for (double v : values) {
    std::snprintf(buf, sizeof buf, "%.9g\n", v);
    os << buf;
  }
}

}  // namespace paro

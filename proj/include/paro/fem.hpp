#pragma once

#include <functional>
#include <iosfwd>
#include <memory>
#include <vector>

#include "paro/geometry.hpp"
#include "paro/linalg.hpp"
#include "paro/mesh.hpp"
#include "paro/quadrature.hpp"

namespace paro {

/// Continuous piecewise-linear finite-element space with homogeneous
/// Dirichlet boundary conditions imposed by eliminating boundary vertices.
class FeSpace {
 public:
  static std::shared_ptr<const FeSpace> create(std::shared_ptr<const Mesh> mesh, int degree = 1);

  const Mesh& mesh() const { return *mesh_; }
  const std::shared_ptr<const Mesh>& mesh_ptr() const { return mesh_; }
  int degree() const { return degree_; }
  std::size_t dof_count() const { return dof_to_vertex_.size(); }

  /// Global dof of a vertex, -1 if the vertex is on the boundary.
  std::int32_t vertex_dof(std::uint32_t v) const { return vertex_to_dof_[v]; }
  std::uint32_t dof_vertex(std::size_t dof) const { return dof_to_vertex_[dof]; }

 private:
  FeSpace() = default;
  std::shared_ptr<const Mesh> mesh_;
  int degree_ = 1;
  std::vector<std::int32_t> vertex_to_dof_;
  std::vector<std::uint32_t> dof_to_vertex_;
};

/// Coefficient vector over a finite-element space on one mesh generation.
struct DiscreteFunction {
  std::shared_ptr<const FeSpace> space;
  std::vector<double> coeffs;

  DiscreteFunction() = default;
  explicit DiscreteFunction(std::shared_ptr<const FeSpace> s)
      : space(std::move(s)), coeffs(space->dof_count(), 0.0) {}
  DiscreteFunction(std::shared_ptr<const FeSpace> s, std::vector<double> c)
      : space(std::move(s)), coeffs(std::move(c)) {}
};

// Coefficient fields are element-aware so that discrete fields can be
// evaluated in O(1) at quadrature points.
using PointFn = std::function<double(const Vec3&)>;
using ElemScalarFn = std::function<double(std::size_t, const Vec3&)>;
using ElemMatrixFn = std::function<Mat3(std::size_t, const Vec3&)>;

ElemScalarFn constant_field(double value);
ElemScalarFn field_from(PointFn f);
ElemMatrixFn constant_diffusion(double scale);
ElemMatrixFn diffusion_from(std::function<Mat3(const Vec3&)> f);
/// P1 interpolant of a discrete function as an element-aware field. The
/// function object holds a reference; keep `f` alive while assembling.
ElemScalarFn field_of(const DiscreteFunction& f);

struct AssemblyOptions {
  bool eliminate_boundary = true;
  int workers = 1;
  int quad_degree = 2;
};

/// Quadrature policy for potentials with point singularities: such terms use
/// the higher-order rule everywhere and a locally subdivided rule on elements
/// touching a singular point.
struct SingularQuadPolicy {
  int degree = 2;
  int singular_degree = 5;
  int subdivide_levels = 2;
  std::vector<Vec3> singular_points;
};

/// Stiffness matrix of a(u, v) = int A grad u . grad v + c u v. The diffusion
/// sample must be symmetric positive definite at every quadrature point.
SparseOperator assemble_stiffness(const FeSpace& space, const ElemMatrixFn& diffusion,
                                  const ElemScalarFn& reaction, const AssemblyOptions& opts = {});

/// Mass matrix (phi_j, phi_i); exact P1 local blocks, no quadrature error.
SparseOperator assemble_mass(const FeSpace& space, const AssemblyOptions& opts = {});

/// Weighted mass matrix (w phi_j, phi_i) with the given quadrature policy.
SparseOperator assemble_weighted_mass(const FeSpace& space, const ElemScalarFn& w,
                                      const SingularQuadPolicy& policy = {},
                                      const AssemblyOptions& opts = {});
/// Same with a discrete weight function on the same generation.
SparseOperator assemble_weighted_mass(const FeSpace& space, const DiscreteFunction& w,
                                      const AssemblyOptions& opts = {});

/// Load vector (f, phi_i) over interior basis functions.
std::vector<double> assemble_load(const FeSpace& space, const ElemScalarFn& f,
                                  const AssemblyOptions& opts = {});

/// Exact transfer onto a descendant generation: P1 functions are preserved
/// pointwise under nested refinement.
DiscreteFunction prolongate(const DiscreteFunction& f, std::shared_ptr<const FeSpace> target);

/// Point evaluation (barycentric interpolation; boundary vertices count as 0).
double evaluate(const DiscreteFunction& f, const Vec3& x);
double evaluate_in_element(const DiscreteFunction& f, std::size_t elem,
                           const std::array<double, 4>& bary);

/// Values at every mesh vertex, boundary vertices zero.
std::vector<double> vertex_values(const DiscreteFunction& f);

/// Constant-per-element gradient of a P1 function.
Vec3 element_gradient(const DiscreteFunction& f, std::size_t elem);

/// Gradients of the d+1 barycentric hat functions on element e.
std::array<Vec3, 4> barycentric_gradients(const Mesh& mesh, std::size_t e);

double integrate(const DiscreteFunction& f);  // exact for P1
double norm_l2(const DiscreteFunction& f);
double seminorm_h1(const DiscreteFunction& f);
double norm_h1(const DiscreteFunction& f);

/// Plain-text export: "generation dof_count" header, one coefficient per line.
void write_function(std::ostream& os, const DiscreteFunction& f);
/// Legacy-VTK ASCII export of vertex values for visualization.
void write_vtk(std::ostream& os, const Mesh& mesh, const std::vector<double>& values,
               const std::string& name);

}  // namespace paro

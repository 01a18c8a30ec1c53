#pragma once

#include <iosfwd>
#include <optional>
#include <string>
#include <vector>

#include "paro/fem.hpp"

namespace paro {

/// Scalar potential field with its singular points (used to pick quadrature).
struct PotentialField {
  PointFn value;
  std::vector<Vec3> singular_points;
};

/// Linear second-order elliptic problem -div(A grad u) + c u = lambda u.
struct LinearProblem {
  std::function<Mat3(const Vec3&)> diffusion;
  PointFn reaction;
  Box box;
  std::vector<Vec3> singular_points;  // of the reaction term, may be empty

  /// Validated constructor: c >= 0 and A symmetric positive definite on a
  /// sample lattice plus random points.
  static LinearProblem elliptic(std::function<Mat3(const Vec3&)> diffusion, PointFn reaction,
                                const Box& box);

  /// Schroedinger-type problem -div(A grad u) + V u = lambda u where the
  /// potential may be negative or singular (hydrogen-like wells). The operator
  /// is bounded below; indefiniteness is handled by the solver's shift.
  static LinearProblem potential_well(std::function<Mat3(const Vec3&)> diffusion,
                                      PotentialField potential, const Box& box);
};

struct Nucleus {
  double charge = 1.0;  // Z_k > 0, atomic units
  Vec3 position;
};

struct Molecule {
  std::vector<Nucleus> nuclei;
  int n_electrons = 0;
};

/// Plain-text molecule format: lines "Z x y z", one line "electrons N",
/// '#' starts a comment.
Molecule parse_molecule(std::istream& is);
Molecule parse_molecule_file(const std::string& path);

/// Bare Coulomb attraction -sum_k Z_k / |x - R_k|; with smoothing epsilon > 0
/// the regularized form -sum_k Z_k / sqrt(|x - R_k|^2 + eps^2) (no singular
/// points). Evaluation exactly at a nucleus with eps = 0 raises
/// SingularPointError.
PotentialField external_potential(const Molecule& molecule, double epsilon = 0.0);

double nuclear_repulsion(const Molecule& molecule);

/// Electron density: nodal interpolant of sum_i f_i u_i^2, normalized so its
/// integral matches the total occupation.
struct Density {
  DiscreteFunction rho;
  std::vector<double> occupations;
  double raw_integral = 0.0;  // before normalization
};

Density density_from_orbitals(const std::vector<DiscreteFunction>& orbitals,
                              const std::vector<double>& occupations);

/// Linear mixing rho <- (1 - alpha) rho_in + alpha rho_out (same generation).
Density mix_density(const Density& rho_in, const Density& rho_out, double alpha);

/// Hartree potential: discrete solution of -lap V_H = 4 pi rho with
/// homogeneous Dirichlet values, solved by CG to the given tolerance.
DiscreteFunction hartree_solve(const Density& rho, const std::shared_ptr<const FeSpace>& space,
                               double tol);
/// Variant with preassembled Poisson stiffness and mass matrices.
DiscreteFunction hartree_solve_with(const SparseOperator& poisson_stiffness,
                                    const SparseOperator& mass, const Density& rho,
                                    const std::shared_ptr<const FeSpace>& space, double tol);

enum class XcModel { exchange_only, lda_pz81 };

struct LdaXc {
  double v_xc = 0.0;
  double eps_xc = 0.0;
  bool clamped = false;  // input density was negative
};

/// Dirac exchange plus (optionally) Perdew-Zunger-81 correlation, unpolarized.
LdaXc lda_vxc(double rho, XcModel model = XcModel::lda_pz81);

/// Standard Kohn-Sham total energy
///   E = sum_i f_i lambda_i - 1/2 int V_H rho + int (eps_xc - v_xc) rho + E_nn.
/// All discrete inputs must live on the same generation.
double total_energy(const std::vector<double>& lambdas, const Density& density,
                    const DiscreteFunction& v_hartree, XcModel xc, const Molecule& molecule);

/// Exact integral of the product of two P1 functions on the same space.
double integrate_product(const DiscreteFunction& u, const DiscreteFunction& v);

}  // namespace paro

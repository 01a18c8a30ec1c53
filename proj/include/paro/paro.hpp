#pragma once

#include <cstdint>
#include <optional>
#include <vector>

#include "paro/adapt.hpp"
#include "paro/fem.hpp"
#include "paro/linalg.hpp"
#include "paro/model.hpp"

namespace paro {

/// B-orthonormal discrete orbitals with eigenvalue estimates on one mesh
/// generation.
struct OrbitalSet {
  std::shared_ptr<const FeSpace> space;
  std::vector<std::vector<double>> orbitals;  // K = N or N + m coefficient vectors
  std::vector<double> lambdas;                // ascending
  double gram_defect = 0.0;                   // max |V' B V - I|

  std::size_t count() const { return orbitals.size(); }
};

enum class MarkStrategy { dorfler, maximum };
enum class ParoMode { linear, kohn_sham };

struct ParoConfig {
  std::size_t n_orbitals = 1;  // N
  std::size_t augment = 0;     // m, extra orbitals carried for stability
  MarkStrategy marking = MarkStrategy::dorfler;
  double theta = 0.5;
  double cg_tol_start = 1e-8;          // tolerance schedule: start ...
  double cg_tol = 1e-12;               // ... tightening to this floor
  double cg_tol_factor = 0.25;         // per outer iteration
  std::size_t cg_max_iter = 100000;
  int max_outer = 200;
  double mixing_alpha = 0.3;           // SCF linear density mixing
  double tol_energy = 1e-6;
  double tol_estimator = 0.0;          // 0 disables the estimator stopping test
  bool adaptive = true;
  std::size_t max_dofs = 100000;       // refinement stops past this budget
  double drop_tol = 1e-8;
  int workers = 1;
  std::uint64_t seed = 1;
  XcModel xc = XcModel::lda_pz81;
  double vext_smoothing = 0.0;
  bool timers = true;                  // wall-clock columns in the trace
  ParoMode mode = ParoMode::linear;
  // Uniform bisection rounds applied after the coarse initial guess; the
  // guess is prolongated onto the refined mesh, so fixed-mesh runs start
  // from genuinely inexact data (linear mode).
  int guess_refine_rounds = 0;
};

struct TraceRow {
  int iter = 0;
  std::size_t dofs = 0;
  std::vector<double> lambdas;  // first N
  std::optional<double> e_tot;  // Kohn-Sham mode
  double eta_total = 0.0;
  double t_meshgen = 0.0;
  double t_source = 0.0;
  double t_project = 0.0;
};

struct ParoResult {
  std::vector<TraceRow> trace;
  OrbitalSet final_orbitals;
  std::optional<Density> density;  // Kohn-Sham mode
  std::optional<double> e_tot;
  bool converged = false;
  int iterations = 0;
  long clamped_density_points = 0;
};

double gram_defect(const std::vector<std::vector<double>>& vectors, const SparseOperator& b);

/// Lowest `count` eigenpairs of the pencil (a0, b) on a coarse space, used as
/// the initial orbital data. Kohn-Sham mode passes the Hartree- and
/// xc-free_linearization for a0.
OrbitalSet initial_guess(const SparseOperator& a0, const SparseOperator& b,
                         std::shared_ptr<const FeSpace> space, std::size_t count);

struct SourceSolveOptions {
  double tol = 1e-10;
  std::size_t max_iter = 100000;
  int workers = 1;
  double sigma = 0.0;  // positive spectral shift for indefinite operators
};

/// Step 3: the K independent source solves
///   (A + sigma B) u_i^{n+1/2} = (lambda_i + sigma) B u_i^n,
/// executed concurrently (each orbital writes only its own slot, so results
/// are identical for any worker count). A failed solve is retried once with a
/// relaxed tolerance before the step fails.
std::vector<std::vector<double>> source_solve_step(const SparseOperator& a,
                                                   const SparseOperator& b,
                                                   const std::vector<std::vector<double>>& u_prev,
                                                   const std::vector<double>& lambdas,
                                                   const SourceSolveOptions& opts);

struct RitzTimings {
  double t_orthonormalize = 0.0;
  double t_pencil = 0.0;
  double t_dense = 0.0;  // the K x K eigensolve only
  double t_lift = 0.0;
};

/// Step 4: B-orthonormalize the candidates, assemble the K x K pencil of the
/// frozen form, solve it densely and lift the Ritz vectors back.
OrbitalSet rayleigh_ritz(const std::vector<std::vector<double>>& candidates,
                         const SparseOperator& a_form, const SparseOperator& b,
                         std::shared_ptr<const FeSpace> space, std::size_t min_keep,
                         double drop_tol, RitzTimings* timings = nullptr);

/// Adaptive parallel orbital-updating iteration for a linear eigenproblem.
ParoResult paro_linear(const LinearProblem& problem, int subdivisions, const ParoConfig& config);

struct KsSetup {
  Molecule molecule;
  Box box;
  int subdivisions = 4;
};

/// Adaptive parallel orbital-updating SCF for the Kohn-Sham problem
/// (occupations f_i = 2, N = N_e / 2 orbitals; N_e must be even).
ParoResult paro_kohn_sham(const KsSetup& setup, const ParoConfig& config);

/// Reference SCF on a fixed mesh: a dense eigensolve per SCF step with the
/// same mixing and energy bookkeeping. Oracle for the ParO SCF driver.
ParoResult baseline_scf(const KsSetup& setup, const ParoConfig& config);

struct ProbePoint {
  double epsilon = 0.0;
  double input_error = 0.0;  // max_i || u_i^0 - u_i* ||_0
  double d1 = 0.0;           // max_i discrete-H1 distance of u_i^1 to span(u*)
};

/// One-iteration error-propagation probe on a fixed mesh: perturbs reference
/// eigenpairs by eps in the coefficients, runs one ParO iteration, and
/// measures the H1 distance of the result to the reference eigenspace.
std::vector<ProbePoint> theorem_a1_probe(const LinearProblem& problem, int subdivisions,
                                         std::size_t n_orbitals,
                                         const std::vector<double>& epsilons, std::uint64_t seed,
                                         double cg_tol);

/// Least-squares slope of log(y) against log(x), skipping zero entries.
double loglog_slope(const std::vector<double>& x, const std::vector<double>& y);

}  // namespace paro

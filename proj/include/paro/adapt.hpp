#pragma once

#include <cstdint>
#include <vector>

#include "paro/fem.hpp"

namespace paro {

/// Per-element nonnegative error indicators for one mesh generation.
struct ErrorIndicators {
  std::vector<double> eta;  // eta(tau) >= 0
  std::uint64_t mesh_id = 0;

  double total() const;  // sqrt of the sum of squares
  double max() const;
};

/// Residual a-posteriori estimator for the source problem
///   -div(A grad u) + c u = f:
/// eta(tau)^2 = h_tau^2 ||f - c u_h||_{L2(tau)}^2
///            + 1/2 sum_{F in dtau, interior} h_F ||[A grad u_h . n]||_{L2(F)}^2.
/// For P1 the diffusion term of the interior residual vanishes elementwise
/// (A is frozen at the element barycenter for the flux jumps).
ErrorIndicators estimate_source_residual(const FeSpace& space, const DiscreteFunction& solution,
                                         const ElemScalarFn& rhs, const ElemMatrixFn& diffusion,
                                         const ElemScalarFn& reaction, int workers = 1);

/// Eigenpair variant: the source right-hand side is lambda * u_prev.
ErrorIndicators estimate_eigen_residual(const FeSpace& space, const DiscreteFunction& solution,
                                        double lambda, const DiscreteFunction& u_prev,
                                        const ElemMatrixFn& diffusion, const ElemScalarFn& reaction,
                                        int workers = 1);

/// Combines indicator sets elementwise by maximum (one shared mesh serves the
/// whole orbital set).
ErrorIndicators combine_max(const std::vector<ErrorIndicators>& sets);

struct MarkResult {
  std::vector<std::size_t> marked;  // ascending element indices
  bool converged = false;           // all indicators zero
};

/// Doerfler (bulk) marking: minimal greedy set M with
/// sum_{tau in M} eta^2 >= theta * sum eta^2. Ties broken by lower index.
MarkResult dorfler_mark(const ErrorIndicators& indicators, double theta);

/// Maximum strategy: M = { tau : eta(tau) >= theta * max eta }.
MarkResult maximum_mark(const ErrorIndicators& indicators, double theta);

/// Per-element CSV (element index, eta) for visualization.
void write_indicators_csv(std::ostream& os, const ErrorIndicators& indicators);

}  // namespace paro

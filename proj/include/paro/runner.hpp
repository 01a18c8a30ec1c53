#pragma once

#include <iosfwd>
#include <string>

#include "paro/runconfig.hpp"

namespace paro {

struct RunArtifacts {
  bool converged = false;
  int iterations = 0;
  std::string summary;  // "converged/failed, iterations, final E or lambda_1, DOFs"
  ParoResult result;
};

/// Runs the configured experiment, writing trace.csv, eigenvalues.txt,
/// mesh.txt and summary.txt into config.out_dir.
RunArtifacts run_experiment(const RunConfig& config);

/// Builds the LinearProblem for a non-molecule selector.
LinearProblem builtin_problem(const RunConfig& config);

void write_trace_csv(std::ostream& os, const ParoResult& result, std::size_t n_lambdas,
                     bool kohn_sham);

}  // namespace paro

#pragma once

#include <string>

#include "paro/paro.hpp"

namespace paro {

enum class BuiltinProblem { laplace_square, laplace_cube, oscillator, hydrogen, molecule };

/// Flat key = value run configuration (documented in the README).
struct RunConfig {
  BuiltinProblem problem = BuiltinProblem::laplace_square;
  std::string molecule_file;  // required when problem = molecule
  double box_lo = 0.0;
  double box_hi = 1.0;
  int subdivisions = 8;
  ParoConfig paro;
  std::string out_dir = ".";

  int dimension() const;
  Box box() const;
};

RunConfig parse_run_config(std::istream& is);
RunConfig parse_run_config_file(const std::string& path);

/// Built-in defaults for a problem selector (box, subdivisions, orbital
/// counts); config keys override them.
RunConfig builtin_config(BuiltinProblem problem);
BuiltinProblem problem_from_name(const std::string& name);

}  // namespace paro

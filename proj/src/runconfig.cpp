#include "paro/runconfig.hpp"

#include <algorithm>
#include <fstream>
#include <map>
#include <sstream>

#include "paro/errors.hpp"

namespace paro {

int RunConfig::dimension() const {
  switch (problem) {
    case BuiltinProblem::laplace_square:
    case BuiltinProblem::oscillator:
      return 2;
    default:
      return 3;
  }
}

Box RunConfig::box() const {
  Box b;
  b.dim = dimension();
  b.lo = {box_lo, box_lo, b.dim == 3 ? box_lo : 0.0};
  b.hi = {box_hi, box_hi, b.dim == 3 ? box_hi : 0.0};
  return b;
}

BuiltinProblem problem_from_name(const std::string& name) {
  if (name == "laplace-square") return BuiltinProblem::laplace_square;
  if (name == "laplace-cube") return BuiltinProblem::laplace_cube;
  if (name == "oscillator") return BuiltinProblem::oscillator;
  if (name == "hydrogen") return BuiltinProblem::hydrogen;
  if (name == "molecule") return BuiltinProblem::molecule;
  throw ParseError("unknown problem '" + name + "'");
}

RunConfig builtin_config(BuiltinProblem problem) {
  RunConfig c;
  c.problem = problem;
  switch (problem) {
    case BuiltinProblem::laplace_square:
      c.box_lo = 0.0;
      c.box_hi = 1.0;
      c.subdivisions = 8;
      c.paro.n_orbitals = 5;
      c.paro.augment = 2;
      c.paro.max_dofs = 50000;
      c.paro.tol_energy = 1e-8;
      break;
    case BuiltinProblem::laplace_cube:
      c.box_lo = 0.0;
      c.box_hi = 1.0;
      c.subdivisions = 4;
      c.paro.n_orbitals = 1;
      c.paro.augment = 3;
      c.paro.max_dofs = 40000;
      c.paro.tol_energy = 1e-7;
      break;
    case BuiltinProblem::oscillator:
      c.box_lo = -8.0;
      c.box_hi = 8.0;
      c.subdivisions = 16;
      c.paro.n_orbitals = 6;
      c.paro.augment = 2;
      c.paro.max_dofs = 40000;
      c.paro.tol_energy = 1e-8;
      break;
    case BuiltinProblem::hydrogen:
      c.box_lo = -10.0;
      c.box_hi = 10.0;
      c.subdivisions = 4;
      c.paro.n_orbitals = 1;
      c.paro.augment = 2;
      c.paro.max_dofs = 40000;
      c.paro.tol_energy = 1e-7;
      break;
    case BuiltinProblem::molecule:
      c.box_lo = -8.0;
      c.box_hi = 8.0;
      c.subdivisions = 4;
      c.paro.mode = ParoMode::kohn_sham;
      c.paro.augment = 2;
      c.paro.max_dofs = 30000;
      c.paro.tol_energy = 1e-6;
      break;
  }
  return c;
}

namespace {

bool parse_bool(const std::string& value, int line_no) {
  if (value == "on" || value == "true" || value == "1") return true;
  if (value == "off" || value == "false" || value == "0") return false;
  throw ParseError("line " + std::to_string(line_no) + ": expected on/off, got '" + value + "'");
}

double parse_double(const std::string& value, int line_no) {
  try {
    std::size_t used = 0;
    const double v = std::stod(value, &used);
    if (used != value.size()) throw std::invalid_argument(value);
    return v;
  } catch (const std::exception&) {
    throw ParseError("line " + std::to_string(line_no) + ": expected a number, got '" + value +
                     "'");
  }
}

long parse_int(const std::string& value, int line_no) {
  try {
    std::size_t used = 0;
    const long v = std::stol(value, &used);
    if (used != value.size()) throw std::invalid_argument(value);
    return v;
  } catch (const std::exception&) {
    throw ParseError("line " + std::to_string(line_no) + ": expected an integer, got '" + value +
                     "'");
  }
}

std::string trim(const std::string& s) {
  const auto begin = s.find_first_not_of(" \t\r");
  if (begin == std::string::npos) return "";
  const auto end = s.find_last_not_of(" \t\r");
  return s.substr(begin, end - begin + 1);
}

}  // namespace

RunConfig parse_run_config(std::istream& is) {
  // first pass: collect key/value pairs, problem selector first
  std::string line;
  int line_no = 0;
  std::vector<std::tuple<int, std::string, std::string>> entries;
  std::string problem_name = "laplace-square";
  while (std::getline(is, line)) {
    ++line_no;
    const auto hash = line.find('#');
    if (hash != std::string::npos) line.erase(hash);
    if (trim(line).empty()) continue;
    const auto eq = line.find('=');
    if (eq == std::string::npos) {
      throw ParseError("line " + std::to_string(line_no) + ": expected 'key = value'");
    }
    const std::string key = trim(line.substr(0, eq));
    const std::string value = trim(line.substr(eq + 1));
    if (key.empty() || value.empty()) {
      throw ParseError("line " + std::to_string(line_no) + ": empty key or value");
    }
    if (key == "problem") {
      problem_name = value;
    } else {
      entries.emplace_back(line_no, key, value);
    }
  }

  RunConfig c = builtin_config(problem_from_name(problem_name));

  for (const auto& [no, key, value] : entries) {
    if (key == "molecule_file") {
      c.molecule_file = value;
    } else if (key == "box_lo") {
      c.box_lo = parse_double(value, no);
    } else if (key == "box_hi") {
      c.box_hi = parse_double(value, no);
    } else if (key == "subdivisions") {
      c.subdivisions = static_cast<int>(parse_int(value, no));
    } else if (key == "out_dir") {
      c.out_dir = value;
    } else if (key == "n_orbitals") {
      c.paro.n_orbitals = static_cast<std::size_t>(parse_int(value, no));
    } else if (key == "augment") {
      c.paro.augment = static_cast<std::size_t>(parse_int(value, no));
    } else if (key == "marking") {
      if (value == "dorfler") {
        c.paro.marking = MarkStrategy::dorfler;
      } else if (value == "maximum") {
        c.paro.marking = MarkStrategy::maximum;
      } else {
        throw ParseError("line " + std::to_string(no) + ": marking must be dorfler or maximum");
      }
    } else if (key == "theta") {
      c.paro.theta = parse_double(value, no);
    } else if (key == "cg_tol") {
      c.paro.cg_tol = parse_double(value, no);
    } else if (key == "cg_tol_start") {
      c.paro.cg_tol_start = parse_double(value, no);
    } else if (key == "cg_max_iter") {
      c.paro.cg_max_iter = static_cast<std::size_t>(parse_int(value, no));
    } else if (key == "max_outer") {
      c.paro.max_outer = static_cast<int>(parse_int(value, no));
    } else if (key == "mixing_alpha") {
      c.paro.mixing_alpha = parse_double(value, no);
    } else if (key == "tol_energy") {
      c.paro.tol_energy = parse_double(value, no);
    } else if (key == "tol_estimator") {
      c.paro.tol_estimator = parse_double(value, no);
    } else if (key == "adaptive") {
      c.paro.adaptive = parse_bool(value, no);
    } else if (key == "max_dofs") {
      c.paro.max_dofs = static_cast<std::size_t>(parse_int(value, no));
    } else if (key == "drop_tol") {
      c.paro.drop_tol = parse_double(value, no);
    } else if (key == "workers") {
      c.paro.workers = static_cast<int>(parse_int(value, no));
    } else if (key == "seed") {
      c.paro.seed = static_cast<std::uint64_t>(parse_int(value, no));
    } else if (key == "xc") {
      if (value == "exchange-only") {
        c.paro.xc = XcModel::exchange_only;
      } else if (value == "lda81") {
        c.paro.xc = XcModel::lda_pz81;
      } else {
        throw ParseError("line " + std::to_string(no) + ": xc must be exchange-only or lda81");
      }
    } else if (key == "vext_smoothing") {
      c.paro.vext_smoothing = parse_double(value, no);
    } else if (key == "timers") {
      c.paro.timers = parse_bool(value, no);
    } else {
      throw ParseError("line " + std::to_string(no) + ": unknown key '" + key + "'");
    }
  }

  if (c.problem == BuiltinProblem::molecule && c.molecule_file.empty()) {
    throw ParseError("problem = molecule requires molecule_file");
  }
  if (!(c.box_hi > c.box_lo)) throw ParseError("box_hi must exceed box_lo");
  if (c.subdivisions < 1) throw ParseError("subdivisions must be >= 1");
  if (!(c.paro.theta > 0.0 && c.paro.theta < 1.0)) throw ParseError("theta must lie in (0,1)");
  if (!(c.paro.mixing_alpha > 0.0 && c.paro.mixing_alpha <= 1.0)) {
    throw ParseError("mixing_alpha must lie in (0,1]");
  }
  if (!(c.paro.tol_energy > 0.0)) throw ParseError("tol_energy must be positive");
  if (!(c.paro.cg_tol > 0.0)) throw ParseError("cg_tol must be positive");
  return c;
}

RunConfig parse_run_config_file(const std::string& path) {
  std::ifstream is(path);
  if (!is) throw ParseError("cannot open config file " + path);
  return parse_run_config(is);
}

}  // namespace paro

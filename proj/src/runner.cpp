#include "paro/runner.hpp"

#include <cstdio>
#include <filesystem>
#include <fstream>
#include <sstream>

#include "paro/errors.hpp"
#include "paro/log.hpp"

namespace paro {

namespace {

std::string fmt(double v, const char* spec = "%.12g") {
  char buf[64];
  std::snprintf(buf, sizeof buf, spec, v);
  return buf;
}

Molecule hydrogen_atom() {
  Molecule m;
  m.nuclei.push_back({1.0, {0, 0, 0}});
  m.n_electrons = 1;
  return m;
}

}  // namespace

LinearProblem builtin_problem(const RunConfig& config) {
  const Box box = config.box();
  switch (config.problem) {
    case BuiltinProblem::laplace_square:
    case BuiltinProblem::laplace_cube:
      return LinearProblem::elliptic([](const Vec3&) { return Mat3::identity(1.0); },
                                     [](const Vec3&) { return 0.0; }, box);
    case BuiltinProblem::oscillator:
      return LinearProblem::elliptic([](const Vec3&) { return Mat3::identity(0.5); },
                                     [](const Vec3& x) { return 0.5 * dot(x, x); }, box);
    case BuiltinProblem::hydrogen:
      return LinearProblem::potential_well(
          [](const Vec3&) { return Mat3::identity(0.5); },
          external_potential(hydrogen_atom(), config.paro.vext_smoothing), box);
    case BuiltinProblem::molecule:
      break;
  }
  throw InvalidArgumentError("builtin_problem: molecule runs use the Kohn-Sham driver");
}

void write_trace_csv(std::ostream& os, const ParoResult& result, std::size_t n_lambdas,
                     bool kohn_sham) {
  os << "iter,dofs";
  for (std::size_t i = 1; i <= n_lambdas; ++i) os << ",lambda_" << i;
  if (kohn_sham) os << ",e_tot";
  os << ",eta_total,t_meshgen,t_source,t_project\n";
  for (const auto& row : result.trace) {
    os << row.iter << ',' << row.dofs;
    for (std::size_t i = 0; i < n_lambdas; ++i) {
      os << ',' << (i < row.lambdas.size() ? fmt(row.lambdas[i]) : "nan");
    }
    if (kohn_sham) os << ',' << (row.e_tot ? fmt(*row.e_tot) : "nan");
    os << ',' << fmt(row.eta_total) << ',' << fmt(row.t_meshgen, "%.6f") << ','
       << fmt(row.t_source, "%.6f") << ',' << fmt(row.t_project, "%.6f") << '\n';
  }
}

RunArtifacts run_experiment(const RunConfig& config) {
  namespace fs = std::filesystem;
  fs::create_directories(config.out_dir);

  const bool kohn_sham = config.problem == BuiltinProblem::molecule;
  RunArtifacts artifacts;

  RunConfig effective = config;
  if (kohn_sham) {
    KsSetup setup;
    setup.molecule = parse_molecule_file(config.molecule_file);
    setup.box = config.box();
    setup.subdivisions = config.subdivisions;
    effective.paro.mode = ParoMode::kohn_sham;
    effective.paro.n_orbitals = static_cast<std::size_t>(setup.molecule.n_electrons / 2);
    artifacts.result = paro_kohn_sham(setup, effective.paro);
  } else {
    effective.paro.mode = ParoMode::linear;
    artifacts.result = paro_linear(builtin_problem(config), config.subdivisions, effective.paro);
  }

  const ParoResult& res = artifacts.result;
  artifacts.converged = res.converged;
  artifacts.iterations = res.iterations;

  {
    std::ofstream os(fs::path(config.out_dir) / "trace.csv");
    write_trace_csv(os, res, effective.paro.n_orbitals, kohn_sham);
  }
  {
    std::ofstream os(fs::path(config.out_dir) / "eigenvalues.txt");
    for (std::size_t i = 0; i < res.final_orbitals.lambdas.size(); ++i) {
      os << i + 1 << ' ' << fmt(res.final_orbitals.lambdas[i], "%.15g") << '\n';
    }
  }
  {
    std::ofstream os(fs::path(config.out_dir) / "mesh.txt");
    res.final_orbitals.space->mesh().dump(os);
  }

  std::ostringstream summary;
  summary << (res.converged ? "converged" : "failed") << ", " << res.iterations << " iterations, ";
  if (kohn_sham) {
    summary << "E_tot = " << fmt(res.e_tot.value_or(0.0));
  } else {
    summary << "lambda_1 = "
            << fmt(res.final_orbitals.lambdas.empty() ? 0.0 : res.final_orbitals.lambdas[0]);
  }
  summary << ", " << res.final_orbitals.space->dof_count() << " DOFs";
  artifacts.summary = summary.str();

  {
    std::ofstream os(fs::path(config.out_dir) / "summary.txt");
    os << artifacts.summary << '\n';
  }
  return artifacts;
}

}  // namespace paro

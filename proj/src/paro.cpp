#include "paro/paro.hpp"

#include <algorithm>
#include <chrono>
#include <cmath>
#include <random>

#include "paro/errors.hpp"
#include "paro/log.hpp"
#include "paro/parallel.hpp"

namespace paro {

namespace {

using Clock = std::chrono::steady_clock;

double seconds_since(Clock::time_point t0) {
  return std::chrono::duration<double>(Clock::now() - t0).count();
}

double dot_v(const std::vector<double>& a, const std::vector<double>& b) {
  double s = 0.0;
  for (std::size_t i = 0; i < a.size(); ++i) s += a[i] * b[i];
  return s;
}

/// Solves a small SPD system in place by unpivoted Gaussian elimination.
std::vector<double> solve_small_spd(DenseMatrix g, std::vector<double> rhs) {
  const std::size_t n = g.rows();
  for (std::size_t k = 0; k < n; ++k) {
    const double piv = g(k, k);
    if (!(piv > 0.0)) throw Error("probe: singular Gram matrix");
    for (std::size_t i = k + 1; i < n; ++i) {
      const double f = g(i, k) / piv;
      for (std::size_t j = k; j < n; ++j) g(i, j) -= f * g(k, j);
      rhs[i] -= f * rhs[k];
    }
  }
  for (std::size_t k = n; k-- > 0;) {
    double s = rhs[k];
    for (std::size_t j = k + 1; j < n; ++j) s -= g(k, j) * rhs[j];
    rhs[k] = s / g(k, k);
  }
  return rhs;
}

}  // namespace

double gram_defect(const std::vector<std::vector<double>>& vectors, const SparseOperator& b) {
  double defect = 0.0;
  std::vector<std::vector<double>> bv(vectors.size());
  for (std::size_t j = 0; j < vectors.size(); ++j) bv[j] = b.apply(vectors[j]);
  for (std::size_t i = 0; i < vectors.size(); ++i) {
    for (std::size_t j = 0; j <= i; ++j) {
      const double g = dot_v(vectors[i], bv[j]);
      defect = std::max(defect, std::abs(g - (i == j ? 1.0 : 0.0)));
    }
  }
  return defect;
}

OrbitalSet initial_guess(const SparseOperator& a0, const SparseOperator& b,
                         std::shared_ptr<const FeSpace> space, std::size_t count) {
  if (count == 0) throw InvalidArgumentError("initial_guess: count must be positive");
  if (count > space->dof_count()) {
    throw InvalidArgumentError("initial_guess: more orbitals requested than coarse dofs");
  }
  const EigenPairs pairs = baseline_geneig(a0, b, count);
  OrbitalSet set;
  set.space = std::move(space);
  set.lambdas = pairs.values;
  set.orbitals.assign(count, std::vector<double>(a0.dimension()));
  for (std::size_t j = 0; j < count; ++j) {
    for (std::size_t i = 0; i < a0.dimension(); ++i) set.orbitals[j][i] = pairs.vectors(i, j);
  }
  set.gram_defect = gram_defect(set.orbitals, b);
  return set;
}

std::vector<std::vector<double>> source_solve_step(const SparseOperator& a,
                                                   const SparseOperator& b,
                                                   const std::vector<std::vector<double>>& u_prev,
                                                   const std::vector<double>& lambdas,
                                                   const SourceSolveOptions& opts) {
  if (u_prev.size() != lambdas.size()) {
    throw InvalidArgumentError("source_solve_step: orbital/lambda count mismatch");
  }
  SparseOperator shifted = a;
  if (opts.sigma != 0.0) shifted.add_scaled(b, opts.sigma);

  std::vector<std::vector<double>> half(u_prev.size());
  std::vector<std::exception_ptr> failures(u_prev.size());

  parallel_for(u_prev.size(), opts.workers, [&](std::size_t i) {
    std::vector<double> rhs = b.apply(u_prev[i]);
    const double scale = lambdas[i] + opts.sigma;
    for (double& v : rhs) v *= scale;
    CgOptions cg;
    cg.tol = opts.tol;
    cg.max_iter = opts.max_iter;
    cg.x0 = &u_prev[i];
    try {
      half[i] = cg_solve(shifted, rhs, cg).x;
    } catch (const IterationLimitError&) {
      // one tolerance-relaxation retry per orbital
      cg.tol = opts.tol * 100.0;
      cg.max_iter = opts.max_iter * 4;
      half[i] = cg_solve(shifted, rhs, cg).x;
    } catch (...) {
      failures[i] = std::current_exception();
    }
  });

  for (std::size_t i = 0; i < failures.size(); ++i) {
    if (failures[i]) std::rethrow_exception(failures[i]);
  }
  return half;
}

OrbitalSet rayleigh_ritz(const std::vector<std::vector<double>>& candidates,
                         const SparseOperator& a_form, const SparseOperator& b,
                         std::shared_ptr<const FeSpace> space, std::size_t min_keep,
                         double drop_tol, RitzTimings* timings) {
  auto t0 = Clock::now();
  const OrthonormalizeResult ortho = b_orthonormalize(candidates, b, drop_tol);
  const std::size_t k = ortho.vectors.size();
  if (k < min_keep) {
    throw DegenerateSpanError("rayleigh_ritz: candidate span collapsed to " + std::to_string(k) +
                              " < " + std::to_string(min_keep));
  }
  if (timings) timings->t_orthonormalize = seconds_since(t0);

  t0 = Clock::now();
  DenseSymPencil pencil;
  pencil.a = DenseMatrix(k, k);
  pencil.b = DenseMatrix(k, k);
  std::vector<std::vector<double>> aq(k), bq(k);
  for (std::size_t j = 0; j < k; ++j) {
    aq[j] = a_form.apply(ortho.vectors[j]);
    bq[j] = b.apply(ortho.vectors[j]);
  }
  for (std::size_t i = 0; i < k; ++i) {
    for (std::size_t j = 0; j <= i; ++j) {
      const double av = 0.5 * (dot_v(ortho.vectors[i], aq[j]) + dot_v(ortho.vectors[j], aq[i]));
      const double bv = 0.5 * (dot_v(ortho.vectors[i], bq[j]) + dot_v(ortho.vectors[j], bq[i]));
      pencil.a(i, j) = pencil.a(j, i) = av;
      pencil.b(i, j) = pencil.b(j, i) = bv;
    }
  }
  if (timings) timings->t_pencil = seconds_since(t0);

  t0 = Clock::now();
  const EigenPairs ritz = dense_sym_geneig(pencil);
  if (timings) timings->t_dense = seconds_since(t0);

  t0 = Clock::now();
  OrbitalSet out;
  out.space = std::move(space);
  out.lambdas = ritz.values;
  out.orbitals.assign(k, std::vector<double>(a_form.dimension(), 0.0));
  for (std::size_t j = 0; j < k; ++j) {
    for (std::size_t c = 0; c < k; ++c) {
      const double w = ritz.vectors(c, j);
      const std::vector<double>& q = ortho.vectors[c];
      for (std::size_t i = 0; i < q.size(); ++i) out.orbitals[j][i] += w * q[i];
    }
    fix_sign(out.orbitals[j]);
  }
  out.gram_defect = gram_defect(out.orbitals, b);
  if (out.gram_defect > 1e-8) {
    throw Error("rayleigh_ritz: orthonormality certificate violated (defect " +
                std::to_string(out.gram_defect) + ")");
  }
  if (timings) timings->t_lift = seconds_since(t0);
  return out;
}

// ---------------------------------------------------------------------------
// Driver helpers
// ---------------------------------------------------------------------------

namespace {

struct StepOutcome {
  std::vector<std::vector<double>> half;
  double sigma = 0.0;
};

/// Runs Step 3 with the shift policy: sigma = max(0, 0.5 - lambda_min) when
/// the current estimates suggest an indefinite operator, doubled on detected
/// indefiniteness. The shift is applied to both sides, so eigenpairs are
/// fixed points independent of sigma.
StepOutcome shifted_source_step(const SparseOperator& a, const SparseOperator& b,
                                const OrbitalSet& orbitals, const SourceSolveOptions& base) {
  StepOutcome out;
  out.sigma = std::max(0.0, 0.5 - orbitals.lambdas.front());
  for (int attempt = 0;; ++attempt) {
    SourceSolveOptions opts = base;
    opts.sigma = out.sigma;
    try {
      out.half = source_solve_step(a, b, orbitals.orbitals, orbitals.lambdas, opts);
      return out;
    } catch (const NotSpdError&) {
      if (attempt >= 4) throw;
      out.sigma = 2.0 * out.sigma + 1.0;
      log_debug("paro: raising spectral shift to %.3f", out.sigma);
    }
  }
}

double cg_tol_for_iteration(const ParoConfig& config, int iter) {
  return std::max(config.cg_tol, config.cg_tol_start * std::pow(config.cg_tol_factor, iter));
}

std::vector<double> first_n(const std::vector<double>& v, std::size_t n) {
  return {v.begin(), v.begin() + static_cast<std::ptrdiff_t>(std::min(n, v.size()))};
}

MarkResult mark(const ErrorIndicators& ind, const ParoConfig& config) {
  return config.marking == MarkStrategy::dorfler ? dorfler_mark(ind, config.theta)
                                                 : maximum_mark(ind, config.theta);
}

void validate_config(const ParoConfig& config) {
  if (config.n_orbitals == 0) throw InvalidArgumentError("config: n_orbitals must be positive");
  if (!(config.theta > 0.0 && config.theta < 1.0)) {
    throw InvalidArgumentError("config: theta must lie in (0,1)");
  }
  if (!(config.mixing_alpha > 0.0 && config.mixing_alpha <= 1.0)) {
    throw InvalidArgumentError("config: mixing_alpha must lie in (0,1]");
  }
  if (!(config.tol_energy > 0.0) || !(config.cg_tol > 0.0) || !(config.cg_tol_start > 0.0) ||
      !(config.drop_tol > 0.0)) {
    throw InvalidArgumentError("config: tolerances must be positive");
  }
  if (config.max_outer < 1) throw InvalidArgumentError("config: max_outer must be positive");
}

bool lambdas_stable(const std::vector<double>& now, const std::vector<double>& prev, double tol) {
  if (prev.size() != now.size()) return false;
  for (std::size_t i = 0; i < now.size(); ++i) {
    if (std::abs(now[i] - prev[i]) > tol * (1.0 + std::abs(now[i]))) return false;
  }
  return true;
}

}  // namespace

// ---------------------------------------------------------------------------
// Linear driver (Algorithm A.1 with the augmented orbital count)
// ---------------------------------------------------------------------------

namespace {

ParoResult paro_linear_attempt(const LinearProblem& problem, int subdivisions,
                               const ParoConfig& config) {
  const std::size_t total = config.n_orbitals + config.augment;
  auto diffusion = diffusion_from(problem.diffusion);
  auto reaction = field_from(problem.reaction);
  SingularQuadPolicy policy;
  policy.singular_points = problem.singular_points;

  AssemblyOptions asm_opts;
  asm_opts.workers = config.workers;

  auto mesh = std::make_shared<Mesh>(create_box_mesh(problem.box, subdivisions));
  auto space = FeSpace::create(mesh);

  auto assemble_form = [&](const FeSpace& s) {
    SparseOperator a = assemble_stiffness(s, diffusion, constant_field(0.0), asm_opts);
    a.add_scaled(assemble_weighted_mass(s, reaction, policy, asm_opts));
    return a;
  };

  SparseOperator b = assemble_mass(*space, asm_opts);
  SparseOperator a = assemble_form(*space);
  OrbitalSet orbitals = initial_guess(a, b, space, total);

  for (int round = 0; round < config.guess_refine_rounds; ++round) {
    std::vector<std::size_t> all(mesh->element_count());
    for (std::size_t e = 0; e < all.size(); ++e) all[e] = e;
    mesh = std::make_shared<Mesh>(mesh->bisect(all));
    auto fine = FeSpace::create(mesh);
    std::vector<std::vector<double>> carried(orbitals.count());
    for (std::size_t i = 0; i < orbitals.count(); ++i) {
      carried[i] = prolongate(DiscreteFunction(space, std::move(orbitals.orbitals[i])), fine).coeffs;
    }
    orbitals.orbitals = std::move(carried);
    orbitals.space = fine;
    space = fine;
  }
  if (config.guess_refine_rounds > 0) {
    b = assemble_mass(*space, asm_opts);
    a = assemble_form(*space);
  }

  ParoResult result;
  std::vector<double> lambda_prev;
  int stable_count = 0;

  for (int n = 0; n < config.max_outer; ++n) {
    TraceRow row;
    row.iter = n + 1;

    // Step 2: estimate on the current generation and refine.
    auto t0 = Clock::now();
    std::vector<ErrorIndicators> per_orbital;
    per_orbital.reserve(config.n_orbitals);
    for (std::size_t i = 0; i < config.n_orbitals; ++i) {
      const DiscreteFunction ui(space, orbitals.orbitals[i]);
      per_orbital.push_back(estimate_eigen_residual(*space, ui, orbitals.lambdas[i], ui, diffusion,
                                                    reaction, config.workers));
    }
    const ErrorIndicators indicators = combine_max(per_orbital);
    row.eta_total = indicators.total();

    bool mesh_frozen = true;
    if (config.adaptive && space->dof_count() < config.max_dofs) {
      const MarkResult marks = mark(indicators, config);
      if (!marks.converged && !marks.marked.empty()) {
        mesh_frozen = false;
        mesh = std::make_shared<Mesh>(mesh->bisect(marks.marked));
        auto fine = FeSpace::create(mesh);
        std::vector<std::vector<double>> carried(orbitals.count());
        for (std::size_t i = 0; i < orbitals.count(); ++i) {
          carried[i] =
              prolongate(DiscreteFunction(space, std::move(orbitals.orbitals[i])), fine).coeffs;
        }
        orbitals.orbitals = std::move(carried);
        orbitals.space = fine;
        space = fine;
        b = assemble_mass(*space, asm_opts);
        a = assemble_form(*space);
      }
    }
    row.dofs = space->dof_count();
    if (config.timers) row.t_meshgen = seconds_since(t0);

    // Step 3: independent source solves.
    t0 = Clock::now();
    SourceSolveOptions sopts;
    sopts.tol = cg_tol_for_iteration(config, n);
    sopts.max_iter = config.cg_max_iter;
    sopts.workers = config.workers;
    const StepOutcome step = shifted_source_step(a, b, orbitals, sopts);
    if (config.timers) row.t_source = seconds_since(t0);

    // Step 4: projection onto the candidate span.
    t0 = Clock::now();
    orbitals = rayleigh_ritz(step.half, a, b, space, config.n_orbitals, config.drop_tol);
    if (config.timers) row.t_project = seconds_since(t0);

    row.lambdas = first_n(orbitals.lambdas, config.n_orbitals);
    result.trace.push_back(row);
    result.iterations = n + 1;

    if (lambdas_stable(row.lambdas, lambda_prev, config.tol_energy)) {
      ++stable_count;
    } else {
      stable_count = 0;
    }
    lambda_prev = row.lambdas;

    const bool estimator_ok = config.tol_estimator > 0.0 && row.eta_total <= config.tol_estimator;
    if ((mesh_frozen && stable_count >= 2) || estimator_ok) {
      result.converged = true;
      break;
    }
  }

  result.final_orbitals = std::move(orbitals);
  return result;
}

}  // namespace

ParoResult paro_linear(const LinearProblem& problem, int subdivisions, const ParoConfig& config) {
  validate_config(config);
  ParoConfig attempt_config = config;
  for (int attempt = 0;; ++attempt) {
    try {
      return paro_linear_attempt(problem, subdivisions, attempt_config);
    } catch (const DegenerateSpanError& e) {
      if (attempt >= 2) {
        throw Error(std::string("paro_linear: run failed after 3 degenerate-span restarts: ") +
                    e.what());
      }
      attempt_config.augment += 1;  // restart with a larger candidate span
      attempt_config.seed += 1;
      log_info("paro_linear: degenerate span, restarting with m = %zu", attempt_config.augment);
    }
  }
}

// ---------------------------------------------------------------------------
// Kohn-Sham drivers
// ---------------------------------------------------------------------------

namespace {

struct KsOperators {
  std::shared_ptr<const FeSpace> space;
  SparseOperator mass;
  SparseOperator kinetic;          // 1/2 grad-grad
  SparseOperator vext_mass;        // (V_ext phi, phi), singular-aware rule
  SparseOperator poisson;          // unscaled grad-grad for the Hartree solve
};

struct KsModel {
  Molecule molecule;
  PotentialField vext;
  XcModel xc;
  std::size_t n_occupied;  // N = N_e / 2
  std::vector<double> occupations;
};

KsOperators assemble_ks_operators(std::shared_ptr<const FeSpace> space, const KsModel& model,
                                  const AssemblyOptions& opts) {
  KsOperators ops;
  ops.space = space;
  ops.mass = assemble_mass(*space, opts);
  ops.kinetic = assemble_stiffness(*space, constant_diffusion(0.5), constant_field(0.0), opts);
  ops.poisson = assemble_stiffness(*space, constant_diffusion(1.0), constant_field(0.0), opts);
  SingularQuadPolicy policy;
  policy.singular_points = model.vext.singular_points;
  ops.vext_mass = assemble_weighted_mass(*space, field_from(model.vext.value), policy, opts);
  return ops;
}

/// Density-dependent potential V_H(rho) + v_xc(rho) as an element-aware field.
/// Negative interpolated densities are clamped; the counter reports them.
ElemScalarFn scf_potential_field(const DiscreteFunction& v_hartree, const DiscreteFunction& rho,
                                 XcModel xc, long* clamp_counter) {
  const DiscreteFunction* vh = &v_hartree;
  const DiscreteFunction* rp = &rho;
  return [vh, rp, xc, clamp_counter](std::size_t e, const Vec3& x) {
    const auto bary = vh->space->mesh().barycentric(e, x);
    const double rho_q = evaluate_in_element(*rp, e, bary);
    const LdaXc lda = lda_vxc(rho_q, xc);
    if (lda.clamped && clamp_counter != nullptr) ++*clamp_counter;
    return evaluate_in_element(*vh, e, bary) + lda.v_xc;
  };
}

SparseOperator ks_form_matrix(const KsOperators& ops, const KsModel& model, const Density& rho,
                              const DiscreteFunction& v_hartree, long* clamp_counter,
                              const AssemblyOptions& opts) {
  SparseOperator a = ops.kinetic;
  a.add_scaled(ops.vext_mass);
  const ElemScalarFn scf = scf_potential_field(v_hartree, rho.rho, model.xc, clamp_counter);
  a.add_scaled(assemble_weighted_mass(*ops.space, scf, {}, opts));
  return a;
}

KsModel make_ks_model(const KsSetup& setup, const ParoConfig& config) {
  if (setup.molecule.n_electrons % 2 != 0) {
    throw InvalidArgumentError("kohn-sham: electron count must be even (occupations f_i = 2)");
  }
  for (const auto& nuc : setup.molecule.nuclei) {
    if (!setup.box.contains(nuc.position)) {
      throw InvalidArgumentError("kohn-sham: nucleus outside the computational box");
    }
  }
  KsModel model;
  model.molecule = setup.molecule;
  model.vext = external_potential(setup.molecule, config.vext_smoothing);
  model.xc = config.xc;
  model.n_occupied = static_cast<std::size_t>(setup.molecule.n_electrons / 2);
  model.occupations.assign(model.n_occupied, 2.0);
  return model;
}

std::vector<DiscreteFunction> occupied_functions(const std::shared_ptr<const FeSpace>& space,
                                                 const std::vector<std::vector<double>>& orbitals,
                                                 std::size_t n) {
  std::vector<DiscreteFunction> out;
  out.reserve(n);
  for (std::size_t i = 0; i < n && i < orbitals.size(); ++i) {
    out.emplace_back(space, orbitals[i]);
  }
  return out;
}

ParoResult paro_kohn_sham_attempt(const KsSetup& setup, const ParoConfig& config) {
  const KsModel model = make_ks_model(setup, config);
  if (config.n_orbitals != model.n_occupied) {
    throw InvalidArgumentError("kohn-sham: config.n_orbitals must equal N_e / 2");
  }
  const std::size_t total = config.n_orbitals + config.augment;

  AssemblyOptions asm_opts;
  asm_opts.workers = config.workers;

  auto mesh = std::make_shared<Mesh>(create_box_mesh(setup.box, setup.subdivisions));
  auto space = FeSpace::create(mesh);
  KsOperators ops = assemble_ks_operators(space, model, asm_opts);

  // initial guess: linearization with V_H = V_xc = 0
  SparseOperator a0 = ops.kinetic;
  a0.add_scaled(ops.vext_mass);
  OrbitalSet orbitals = initial_guess(a0, ops.mass, space, total);

  Density rho_in = density_from_orbitals(
      occupied_functions(space, orbitals.orbitals, model.n_occupied), model.occupations);

  ParoResult result;
  double e_prev = 0.0;
  bool have_e_prev = false;
  int stable_count = 0, increase_count = 0;
  double prev_rho_residual = 1e300;
  const double hartree_tol = 1e-11;

  for (int n = 0; n < config.max_outer; ++n) {
    TraceRow row;
    row.iter = n + 1;

    // potentials of the mixed density on the current generation
    DiscreteFunction vh_in = hartree_solve_with(ops.poisson, ops.mass, rho_in, space, hartree_tol);

    // Step 2: estimate and refine
    auto t0 = Clock::now();
    const ElemScalarFn veff =
        [&](std::size_t e, const Vec3& x) {
          const auto bary = space->mesh().barycentric(e, x);
          const double rho_q = evaluate_in_element(rho_in.rho, e, bary);
          return model.vext.value(x) + evaluate_in_element(vh_in, e, bary) +
                 lda_vxc(rho_q, model.xc).v_xc;
        };
    std::vector<ErrorIndicators> per_orbital;
    for (std::size_t i = 0; i < model.n_occupied; ++i) {
      const DiscreteFunction ui(space, orbitals.orbitals[i]);
      per_orbital.push_back(estimate_eigen_residual(*space, ui, orbitals.lambdas[i], ui,
                                                    constant_diffusion(0.5), veff,
                                                    config.workers));
    }
    const ErrorIndicators indicators = combine_max(per_orbital);
    row.eta_total = indicators.total();

    bool mesh_frozen = true;
    if (config.adaptive && space->dof_count() < config.max_dofs) {
      const MarkResult marks = mark(indicators, config);
      if (!marks.converged && !marks.marked.empty()) {
        mesh_frozen = false;
        mesh = std::make_shared<Mesh>(mesh->bisect(marks.marked));
        auto fine = FeSpace::create(mesh);
        std::vector<std::vector<double>> carried(orbitals.count());
        for (std::size_t i = 0; i < orbitals.count(); ++i) {
          carried[i] =
              prolongate(DiscreteFunction(space, std::move(orbitals.orbitals[i])), fine).coeffs;
        }
        orbitals.orbitals = std::move(carried);
        orbitals.space = fine;
        Density rho_fine;
        rho_fine.rho = prolongate(rho_in.rho, fine);
        rho_fine.occupations = rho_in.occupations;
        rho_fine.raw_integral = integrate(rho_fine.rho);
        rho_in = std::move(rho_fine);
        space = fine;
        ops = assemble_ks_operators(space, model, asm_opts);
        vh_in = hartree_solve_with(ops.poisson, ops.mass, rho_in, space, hartree_tol);
      }
    }
    row.dofs = space->dof_count();
    if (config.timers) row.t_meshgen = seconds_since(t0);

    // Step 3 with the form frozen at the mixed input density
    t0 = Clock::now();
    const SparseOperator a_in =
        ks_form_matrix(ops, model, rho_in, vh_in, &result.clamped_density_points, asm_opts);
    SourceSolveOptions sopts;
    sopts.tol = cg_tol_for_iteration(config, n);
    sopts.max_iter = config.cg_max_iter;
    sopts.workers = config.workers;
    const StepOutcome step = shifted_source_step(a_in, ops.mass, orbitals, sopts);
    if (config.timers) row.t_source = seconds_since(t0);

    // Step 4 with the form refrozen at the half-step orbitals
    t0 = Clock::now();
    const Density rho_half = density_from_orbitals(
        occupied_functions(space, step.half, model.n_occupied), model.occupations);
    const DiscreteFunction vh_half =
        hartree_solve_with(ops.poisson, ops.mass, rho_half, space, hartree_tol);
    const SparseOperator a_half =
        ks_form_matrix(ops, model, rho_half, vh_half, &result.clamped_density_points, asm_opts);
    orbitals = rayleigh_ritz(step.half, a_half, ops.mass, space, model.n_occupied,
                             config.drop_tol);
    if (config.timers) row.t_project = seconds_since(t0);

    // output density, energy, convergence control
    const Density rho_out = density_from_orbitals(
        occupied_functions(space, orbitals.orbitals, model.n_occupied), model.occupations);
    const DiscreteFunction vh_out =
        hartree_solve_with(ops.poisson, ops.mass, rho_out, space, hartree_tol);
    const double e_tot =
        total_energy(orbitals.lambdas, rho_out, vh_out, model.xc, model.molecule);

    row.lambdas = first_n(orbitals.lambdas, config.n_orbitals);
    row.e_tot = e_tot;
    result.trace.push_back(row);
    result.iterations = n + 1;
    log_debug("scf %3d dofs %zu lambda1 % .10f e_tot % .12f", row.iter, row.dofs,
              orbitals.lambdas.front(), e_tot);

    // SCF progress metric: the density residual shrinks on any healthy
    // approach to the fixed point (including slow energy climbs from an
    // unscreened initial guess), but not in a limit cycle or blow-up.
    DiscreteFunction rho_diff = rho_out.rho;
    for (std::size_t i = 0; i < rho_diff.coeffs.size(); ++i) {
      rho_diff.coeffs[i] -= rho_in.rho.coeffs[i];
    }
    const double rho_residual = norm_l2(rho_diff);
    log_debug("scf %3d rho_residual %.6e prev %.6e e %.9f", row.iter, rho_residual,
              prev_rho_residual, e_tot);
    if (have_e_prev) {
      const bool rising_energy = e_tot > e_prev + 1e-14;
      const bool stalled_density = rho_residual >= prev_rho_residual * (1.0 - 1e-12);
      increase_count = rising_energy && stalled_density ? increase_count + 1 : 0;
      if (increase_count >= 5) {
        throw ScfDivergenceError(
            "kohn-sham: total energy increased for 5 consecutive iterations without "
            "density-residual progress; consider a smaller mixing_alpha");
      }
      stable_count = std::abs(e_tot - e_prev) < config.tol_energy ? stable_count + 1 : 0;
    }
    prev_rho_residual = rho_residual;
    e_prev = e_tot;
    have_e_prev = true;

    result.density = rho_out;
    result.e_tot = e_tot;
    if (mesh_frozen && stable_count >= 3) {
      result.converged = true;
      break;
    }

    rho_in = mix_density(rho_in, rho_out, config.mixing_alpha);
  }

  result.final_orbitals = std::move(orbitals);
  return result;
}

}  // namespace

ParoResult paro_kohn_sham(const KsSetup& setup, const ParoConfig& config) {
  validate_config(config);
  ParoConfig attempt_config = config;
  for (int attempt = 0;; ++attempt) {
    try {
      return paro_kohn_sham_attempt(setup, attempt_config);
    } catch (const DegenerateSpanError& e) {
      if (attempt >= 2) {
        throw Error(std::string("paro_kohn_sham: run failed after 3 degenerate-span restarts: ") +
                    e.what());
      }
      attempt_config.augment += 1;
      attempt_config.seed += 1;
      log_info("paro_kohn_sham: degenerate span, restarting with m = %zu", attempt_config.augment);
    }
  }
}

ParoResult baseline_scf(const KsSetup& setup, const ParoConfig& config) {
  validate_config(config);
  const KsModel model = make_ks_model(setup, config);
  AssemblyOptions asm_opts;
  asm_opts.workers = config.workers;

  auto mesh = std::make_shared<Mesh>(create_box_mesh(setup.box, setup.subdivisions));
  auto space = FeSpace::create(mesh);
  const KsOperators ops = assemble_ks_operators(space, model, asm_opts);

  SparseOperator a0 = ops.kinetic;
  a0.add_scaled(ops.vext_mass);
  OrbitalSet orbitals = initial_guess(a0, ops.mass, space, model.n_occupied);
  Density rho_in = density_from_orbitals(
      occupied_functions(space, orbitals.orbitals, model.n_occupied), model.occupations);

  ParoResult result;
  double e_prev = 0.0;
  bool have_e_prev = false;
  int stable_count = 0, increase_count = 0;
  double prev_rho_residual = 1e300;
  const double hartree_tol = 1e-11;

  for (int n = 0; n < config.max_outer; ++n) {
    const DiscreteFunction vh_in =
        hartree_solve_with(ops.poisson, ops.mass, rho_in, space, hartree_tol);
    const SparseOperator a_in =
        ks_form_matrix(ops, model, rho_in, vh_in, &result.clamped_density_points, asm_opts);

    // dense eigensolve per SCF step
    const EigenPairs pairs = baseline_geneig(a_in, ops.mass, model.n_occupied);
    orbitals.lambdas = pairs.values;
    orbitals.orbitals.assign(model.n_occupied, std::vector<double>(space->dof_count()));
    for (std::size_t j = 0; j < model.n_occupied; ++j) {
      for (std::size_t i = 0; i < space->dof_count(); ++i) {
        orbitals.orbitals[j][i] = pairs.vectors(i, j);
      }
    }
    orbitals.space = space;
    orbitals.gram_defect = gram_defect(orbitals.orbitals, ops.mass);

    const Density rho_out = density_from_orbitals(
        occupied_functions(space, orbitals.orbitals, model.n_occupied), model.occupations);
    const DiscreteFunction vh_out =
        hartree_solve_with(ops.poisson, ops.mass, rho_out, space, hartree_tol);
    const double e_tot =
        total_energy(orbitals.lambdas, rho_out, vh_out, model.xc, model.molecule);

    TraceRow row;
    row.iter = n + 1;
    row.dofs = space->dof_count();
    row.lambdas = first_n(orbitals.lambdas, model.n_occupied);
    row.e_tot = e_tot;
    result.trace.push_back(row);
    result.iterations = n + 1;

    DiscreteFunction rho_diff = rho_out.rho;
    for (std::size_t i = 0; i < rho_diff.coeffs.size(); ++i) {
      rho_diff.coeffs[i] -= rho_in.rho.coeffs[i];
    }
    const double rho_residual = norm_l2(rho_diff);
    if (have_e_prev) {
      const bool rising_energy = e_tot > e_prev + 1e-14;
      const bool stalled_density = rho_residual >= prev_rho_residual * (1.0 - 1e-12);
      increase_count = rising_energy && stalled_density ? increase_count + 1 : 0;
      if (increase_count >= 5) {
        throw ScfDivergenceError("baseline scf: diverging; consider a smaller mixing_alpha");
      }
      stable_count = std::abs(e_tot - e_prev) < config.tol_energy ? stable_count + 1 : 0;
    }
    prev_rho_residual = rho_residual;
    e_prev = e_tot;
    have_e_prev = true;

    result.density = rho_out;
    result.e_tot = e_tot;
    if (stable_count >= 3) {
      result.converged = true;
      break;
    }
    rho_in = mix_density(rho_in, rho_out, config.mixing_alpha);
  }

  result.final_orbitals = std::move(orbitals);
  return result;
}

// ---------------------------------------------------------------------------
// Theorem probe
// ---------------------------------------------------------------------------

std::vector<ProbePoint> theorem_a1_probe(const LinearProblem& problem, int subdivisions,
                                         std::size_t n_orbitals,
                                         const std::vector<double>& epsilons, std::uint64_t seed,
                                         double cg_tol) {
  auto mesh = std::make_shared<Mesh>(create_box_mesh(problem.box, subdivisions));
  auto space = FeSpace::create(mesh);
  AssemblyOptions opts;

  SparseOperator a = assemble_stiffness(*space, diffusion_from(problem.diffusion),
                                        constant_field(0.0), opts);
  SingularQuadPolicy policy;
  policy.singular_points = problem.singular_points;
  a.add_scaled(assemble_weighted_mass(*space, field_from(problem.reaction), policy, opts));
  const SparseOperator b = assemble_mass(*space, opts);

  // discrete H1 norm matrix
  SparseOperator s = assemble_stiffness(*space, constant_diffusion(1.0), constant_field(0.0), opts);
  s.add_scaled(b);

  const EigenPairs ref = baseline_geneig(a, b, n_orbitals);
  std::vector<std::vector<double>> refs(n_orbitals, std::vector<double>(space->dof_count()));
  for (std::size_t j = 0; j < n_orbitals; ++j) {
    for (std::size_t i = 0; i < space->dof_count(); ++i) refs[j][i] = ref.vectors(i, j);
  }

  // Gram data of the reference span in the H1 inner product
  DenseMatrix gram(n_orbitals, n_orbitals);
  std::vector<std::vector<double>> s_refs(n_orbitals);
  for (std::size_t j = 0; j < n_orbitals; ++j) s_refs[j] = s.apply(refs[j]);
  for (std::size_t i = 0; i < n_orbitals; ++i) {
    for (std::size_t j = 0; j < n_orbitals; ++j) gram(i, j) = dot_v(refs[i], s_refs[j]);
  }

  auto h1_distance = [&](const std::vector<double>& w) {
    // explicit projection residual; the quadratic-form shortcut cancels badly
    const std::vector<double> sw = s.apply(w);
    std::vector<double> g(n_orbitals);
    for (std::size_t j = 0; j < n_orbitals; ++j) g[j] = dot_v(refs[j], sw);
    const std::vector<double> c = solve_small_spd(gram, g);
    std::vector<double> residual = w;
    for (std::size_t j = 0; j < n_orbitals; ++j) {
      for (std::size_t i = 0; i < residual.size(); ++i) residual[i] -= c[j] * refs[j][i];
    }
    const std::vector<double> sr = s.apply(residual);
    return std::sqrt(std::max(0.0, dot_v(residual, sr)));
  };

  std::mt19937_64 rng(seed);
  std::normal_distribution<double> gauss(0.0, 1.0);

  std::vector<ProbePoint> out;
  for (double eps : epsilons) {
    ProbePoint point;
    point.epsilon = eps;

    OrbitalSet perturbed;
    perturbed.space = space;
    perturbed.orbitals.resize(n_orbitals);
    perturbed.lambdas.resize(n_orbitals);
    for (std::size_t j = 0; j < n_orbitals; ++j) {
      std::vector<double> z(space->dof_count());
      for (double& v : z) v = gauss(rng);
      const double zn = b_norm(b, z);
      std::vector<double> u = refs[j];
      for (std::size_t i = 0; i < u.size(); ++i) u[i] += eps * z[i] / zn;
      const double un = b_norm(b, u);
      for (double& v : u) v /= un;

      std::vector<double> diff = u;
      for (std::size_t i = 0; i < diff.size(); ++i) diff[i] -= refs[j][i];
      point.input_error = std::max(point.input_error, b_norm(b, diff));

      // Rayleigh quotient as the perturbed eigenvalue estimate
      const std::vector<double> au = a.apply(u);
      perturbed.lambdas[j] = dot_v(u, au) / b_inner(b, u, u);
      perturbed.orbitals[j] = std::move(u);
    }

    SourceSolveOptions sopts;
    sopts.tol = cg_tol;
    sopts.max_iter = 200000;
    const StepOutcome step = shifted_source_step(a, b, perturbed, sopts);
    const OrbitalSet iterated =
        rayleigh_ritz(step.half, a, b, space, n_orbitals, 1e-12);

    for (std::size_t j = 0; j < n_orbitals; ++j) {
      point.d1 = std::max(point.d1, h1_distance(iterated.orbitals[j]));
    }
    out.push_back(point);
  }
  return out;
}

double loglog_slope(const std::vector<double>& x, const std::vector<double>& y) {
  double sx = 0, sy = 0, sxx = 0, sxy = 0;
  std::size_t n = 0;
  for (std::size_t i = 0; i < x.size(); ++i) {
    if (x[i] <= 0.0 || y[i] <= 0.0) continue;
    const double lx = std::log(x[i]), ly = std::log(y[i]);
    sx += lx;
    sy += ly;
    sxx += lx * lx;
    sxy += lx * ly;
    ++n;
  }
  if (n < 2) throw InvalidArgumentError("loglog_slope: need at least two positive points");
  return (n * sxy - sx * sy) / (n * sxx - sx * sx);
}

}  // namespace paro

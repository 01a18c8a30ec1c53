#include "paro/model.hpp"

#include <cmath>
#include <fstream>
#include <random>
#include <sstream>

#include "paro/errors.hpp"

namespace paro {

// ---------------------------------------------------------------------------
// Problem definitions
// ---------------------------------------------------------------------------

namespace {

void validate_spd_sample(const Mat3& a, int dim, double bound) {
  for (int i = 0; i < dim; ++i) {
    for (int j = i + 1; j < dim; ++j) {
      if (std::abs(a(i, j) - a(j, i)) > 1e-12 * (1.0 + std::abs(a(i, i)))) {
        throw InvalidCoefficientError("LinearProblem: diffusion sample asymmetric");
      }
    }
  }
  const double m1 = a(0, 0);
  const double m2 = a(0, 0) * a(1, 1) - a(0, 1) * a(1, 0);
  bool ok = m1 >= bound && m2 >= bound * bound * 0.1;
  if (dim == 3) {
    const double m3 = a(0, 0) * (a(1, 1) * a(2, 2) - a(1, 2) * a(2, 1)) -
                      a(0, 1) * (a(1, 0) * a(2, 2) - a(1, 2) * a(2, 0)) +
                      a(0, 2) * (a(1, 0) * a(2, 1) - a(1, 1) * a(2, 0));
    ok = ok && m3 > 0.0;
  }
  if (!ok) throw InvalidCoefficientError("LinearProblem: diffusion sample not uniformly SPD");
}

std::vector<Vec3> sample_points(const Box& box) {
  std::vector<Vec3> pts;
  const int grid = 4;
  const int nz = box.dim == 3 ? grid : 0;
  for (int k = 0; k <= nz; ++k) {
    for (int j = 0; j <= grid; ++j) {
      for (int i = 0; i <= grid; ++i) {
        Vec3 p;
        p.x = box.lo.x + (box.hi.x - box.lo.x) * i / grid;
        p.y = box.lo.y + (box.hi.y - box.lo.y) * j / grid;
        if (box.dim == 3) p.z = box.lo.z + (box.hi.z - box.lo.z) * k / grid;
        pts.push_back(p);
      }
    }
  }
  std::mt19937_64 rng(123);
  std::uniform_real_distribution<double> u(0.0, 1.0);
  for (int r = 0; r < 32; ++r) {
    Vec3 p;
    p.x = box.lo.x + (box.hi.x - box.lo.x) * u(rng);
    p.y = box.lo.y + (box.hi.y - box.lo.y) * u(rng);
    if (box.dim == 3) p.z = box.lo.z + (box.hi.z - box.lo.z) * u(rng);
    pts.push_back(p);
  }
  return pts;
}

}  // namespace

LinearProblem LinearProblem::elliptic(std::function<Mat3(const Vec3&)> diffusion, PointFn reaction,
                                      const Box& box) {
  LinearProblem p;
  p.diffusion = std::move(diffusion);
  p.reaction = std::move(reaction);
  p.box = box;
  for (const Vec3& x : sample_points(box)) {
    validate_spd_sample(p.diffusion(x), box.dim, 1e-10);
    if (p.reaction(x) < 0.0) {
      throw InvalidCoefficientError("LinearProblem: reaction coefficient negative at a sample");
    }
  }
  return p;
}

LinearProblem LinearProblem::potential_well(std::function<Mat3(const Vec3&)> diffusion,
                                            PotentialField potential, const Box& box) {
  LinearProblem p;
  p.diffusion = std::move(diffusion);
  p.reaction = std::move(potential.value);
  p.singular_points = std::move(potential.singular_points);
  p.box = box;
  for (const Vec3& x : sample_points(box)) validate_spd_sample(p.diffusion(x), box.dim, 1e-10);
  return p;
}

// ---------------------------------------------------------------------------
// Molecules
// ---------------------------------------------------------------------------

Molecule parse_molecule(std::istream& is) {
  Molecule mol;
  std::string line;
  int line_no = 0;
  bool have_electrons = false;
  while (std::getline(is, line)) {
    ++line_no;
    const auto hash = line.find('#');
    if (hash != std::string::npos) line.erase(hash);
    std::istringstream ls(line);
    std::string first;
    if (!(ls >> first)) continue;
    if (first == "electrons") {
      if (!(ls >> mol.n_electrons)) {
        throw ParseError("molecule line " + std::to_string(line_no) + ": bad electron count");
      }
      have_electrons = true;
      continue;
    }
    Nucleus nuc;
    try {
      nuc.charge = std::stod(first);
    } catch (const std::exception&) {
      throw ParseError("molecule line " + std::to_string(line_no) + ": expected 'Z x y z'");
    }
    if (!(ls >> nuc.position.x >> nuc.position.y >> nuc.position.z)) {
      throw ParseError("molecule line " + std::to_string(line_no) + ": expected 'Z x y z'");
    }
    if (nuc.charge <= 0.0) {
      throw ParseError("molecule line " + std::to_string(line_no) + ": charge must be positive");
    }
    mol.nuclei.push_back(nuc);
  }
  if (mol.nuclei.empty()) throw ParseError("molecule: no nuclei");
  if (!have_electrons) {
    double total = 0.0;
    for (const auto& n : mol.nuclei) total += n.charge;
    mol.n_electrons = static_cast<int>(std::lround(total));
  }
  if (mol.n_electrons < 1) throw ParseError("molecule: electron count must be >= 1");
  return mol;
}

Molecule parse_molecule_file(const std::string& path) {
  std::ifstream is(path);
  if (!is) throw ParseError("molecule: cannot open " + path);
  return parse_molecule(is);
}

PotentialField external_potential(const Molecule& molecule, double epsilon) {
  if (molecule.nuclei.empty()) throw InvalidArgumentError("external_potential: no nuclei");
  PotentialField field;
  const std::vector<Nucleus> nuclei = molecule.nuclei;
  if (epsilon == 0.0) {
    for (const auto& n : nuclei) field.singular_points.push_back(n.position);
    field.value = [nuclei](const Vec3& x) {
      double v = 0.0;
      for (const auto& n : nuclei) {
        const double r = distance(x, n.position);
        if (r < 1e-14) {
          throw SingularPointError("external potential evaluated at a nucleus");
        }
        v -= n.charge / r;
      }
      return v;
    };
  } else {
    const double eps2 = epsilon * epsilon;
    field.value = [nuclei, eps2](const Vec3& x) {
      double v = 0.0;
      for (const auto& n : nuclei) {
        const Vec3 d = x - n.position;
        v -= n.charge / std::sqrt(dot(d, d) + eps2);
      }
      return v;
    };
  }
  return field;
}

double nuclear_repulsion(const Molecule& molecule) {
  double e = 0.0;
  for (std::size_t k = 0; k < molecule.nuclei.size(); ++k) {
    for (std::size_t l = k + 1; l < molecule.nuclei.size(); ++l) {
      e += molecule.nuclei[k].charge * molecule.nuclei[l].charge /
           distance(molecule.nuclei[k].position, molecule.nuclei[l].position);
    }
  }
  return e;
}

// ---------------------------------------------------------------------------
// Density
// ---------------------------------------------------------------------------

Density density_from_orbitals(const std::vector<DiscreteFunction>& orbitals,
                              const std::vector<double>& occupations) {
  if (orbitals.empty() || orbitals.size() != occupations.size()) {
    throw InvalidArgumentError("density: orbital/occupation count mismatch");
  }
  for (double f : occupations) {
    if (f < 0.0) throw InvalidArgumentError("density: negative occupation");
  }
  const auto space = orbitals.front().space;
  for (const auto& u : orbitals) {
    if (u.space->mesh().id() != space->mesh().id()) {
      throw LineageError("density: orbitals from different generations");
    }
  }

  Density d;
  d.occupations = occupations;
  d.rho = DiscreteFunction(space);
  for (std::size_t i = 0; i < orbitals.size(); ++i) {
    for (std::size_t k = 0; k < d.rho.coeffs.size(); ++k) {
      d.rho.coeffs[k] += occupations[i] * orbitals[i].coeffs[k] * orbitals[i].coeffs[k];
    }
  }
  d.raw_integral = integrate(d.rho);
  double total_occ = 0.0;
  for (double f : occupations) total_occ += f;
  if (total_occ > 0.0 && d.raw_integral > 0.0) {
    const double scale = total_occ / d.raw_integral;
    for (double& c : d.rho.coeffs) c *= scale;
  }
  return d;
}

Density mix_density(const Density& rho_in, const Density& rho_out, double alpha) {
  if (rho_in.rho.space->mesh().id() != rho_out.rho.space->mesh().id()) {
    throw LineageError("mix_density: generations differ");
  }
  Density mixed = rho_in;
  for (std::size_t k = 0; k < mixed.rho.coeffs.size(); ++k) {
    mixed.rho.coeffs[k] = (1.0 - alpha) * rho_in.rho.coeffs[k] + alpha * rho_out.rho.coeffs[k];
  }
  mixed.occupations = rho_out.occupations;
  mixed.raw_integral = integrate(mixed.rho);
  return mixed;
}

// ---------------------------------------------------------------------------
// Hartree potential
// ---------------------------------------------------------------------------

DiscreteFunction hartree_solve_with(const SparseOperator& poisson_stiffness,
                                    const SparseOperator& mass, const Density& rho,
                                    const std::shared_ptr<const FeSpace>& space, double tol) {
  if (rho.rho.space->mesh().id() != space->mesh().id()) {
    throw LineageError("hartree: density lives on a different generation");
  }
  std::vector<double> rhs = mass.apply(rho.rho.coeffs);
  for (double& v : rhs) v *= 4.0 * M_PI;
  CgOptions opts;
  opts.tol = tol;
  opts.max_iter = 200000;
  const CgResult sol = cg_solve(poisson_stiffness, rhs, opts);
  return DiscreteFunction(space, sol.x);
}

DiscreteFunction hartree_solve(const Density& rho, const std::shared_ptr<const FeSpace>& space,
                               double tol) {
  const SparseOperator k = assemble_stiffness(*space, constant_diffusion(1.0), constant_field(0.0));
  const SparseOperator m = assemble_mass(*space);
  return hartree_solve_with(k, m, rho, space, tol);
}

// ---------------------------------------------------------------------------
// LDA exchange-correlation (Dirac exchange, PZ81 correlation, unpolarized)
// ---------------------------------------------------------------------------

LdaXc lda_vxc(double rho, XcModel model) {
  LdaXc out;
  if (rho < 0.0) {
    out.clamped = true;
    rho = 0.0;
  }
  if (rho == 0.0) return out;

  static const double cx = std::cbrt(3.0 / M_PI);
  const double r13 = std::cbrt(rho);
  out.v_xc = -cx * r13;
  out.eps_xc = -0.75 * cx * r13;

  if (model == XcModel::lda_pz81) {
    const double rs = std::cbrt(3.0 / (4.0 * M_PI * rho));
    double ec, vc;
    if (rs < 1.0) {
      constexpr double a = 0.0311, b = -0.048, c = 0.0020, dd = -0.0116;
      const double ln = std::log(rs);
      ec = a * ln + b + c * rs * ln + dd * rs;
      vc = a * ln + (b - a / 3.0) + (2.0 / 3.0) * c * rs * ln + ((2.0 * dd - c) / 3.0) * rs;
    } else {
      constexpr double gamma = -0.1423, beta1 = 1.0529, beta2 = 0.3334;
      const double sq = std::sqrt(rs);
      const double denom = 1.0 + beta1 * sq + beta2 * rs;
      ec = gamma / denom;
      vc = ec * (1.0 + (7.0 / 6.0) * beta1 * sq + (4.0 / 3.0) * beta2 * rs) / denom;
    }
    out.eps_xc += ec;
    out.v_xc += vc;
  }
  return out;
}

// ---------------------------------------------------------------------------
// Total energy
// ---------------------------------------------------------------------------

double integrate_product(const DiscreteFunction& u, const DiscreteFunction& v) {
  if (u.space->mesh().id() != v.space->mesh().id()) {
    throw LineageError("integrate_product: generations differ");
  }
  const Mesh& mesh = u.space->mesh();
  const int d = mesh.dimension();
  const double denom = (d + 1.0) * (d + 2.0);
  const auto uv = vertex_values(u);
  const auto vv = vertex_values(v);
  double total = 0.0;
  for (std::size_t e = 0; e < mesh.element_count(); ++e) {
    const auto& el = mesh.elements()[e];
    double su = 0, sv = 0, sp = 0;
    for (int i = 0; i <= d; ++i) {
      su += uv[el.v[i]];
      sv += vv[el.v[i]];
      sp += uv[el.v[i]] * vv[el.v[i]];
    }
    total += mesh.element_volume(e) * (sp + su * sv) / denom;
  }
  return total;
}

double total_energy(const std::vector<double>& lambdas, const Density& density,
                    const DiscreteFunction& v_hartree, XcModel xc, const Molecule& molecule) {
  if (density.rho.space->mesh().id() != v_hartree.space->mesh().id()) {
    throw LineageError("total_energy: generations differ");
  }
  if (lambdas.size() < density.occupations.size()) {
    throw InvalidArgumentError("total_energy: missing eigenvalue estimates");
  }

  double e_band = 0.0;
  for (std::size_t i = 0; i < density.occupations.size(); ++i) {
    e_band += density.occupations[i] * lambdas[i];
  }

  const double e_hartree = 0.5 * integrate_product(v_hartree, density.rho);

  // int (eps_xc - v_xc) rho by element quadrature of the interpolated density
  const Mesh& mesh = density.rho.space->mesh();
  const int d = mesh.dimension();
  const QuadratureRule& rule = simplex_rule(d, 2);
  double e_xc = 0.0;
  for (std::size_t e = 0; e < mesh.element_count(); ++e) {
    const double vol = mesh.element_volume(e);
    for (std::size_t q = 0; q < rule.points.size(); ++q) {
      const double rho_q = std::max(0.0, evaluate_in_element(density.rho, e, rule.points[q]));
      const LdaXc x = lda_vxc(rho_q, xc);
      e_xc += rule.weights[q] * vol * (x.eps_xc - x.v_xc) * rho_q;
    }
  }

  return e_band - e_hartree + e_xc + nuclear_repulsion(molecule);
}

}  // namespace paro

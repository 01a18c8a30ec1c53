#include "paro/linalg.hpp"

#include <Eigen/Dense>
#include <algorithm>
#include <cmath>
#include <random>

#include "paro/errors.hpp"

namespace paro {

// ---------------------------------------------------------------------------
// SparseOperator
// ---------------------------------------------------------------------------

SparseOperator::SparseOperator(std::size_t n, std::vector<std::size_t> row_offsets,
                               std::vector<std::uint32_t> cols, std::vector<double> vals,
                               bool symmetric)
    : n_(n), rows_(std::move(row_offsets)), cols_(std::move(cols)), vals_(std::move(vals)),
      symmetric_(symmetric) {
  validate();
}

SparseOperator SparseOperator::from_triplets(
    std::size_t n, const std::vector<std::tuple<std::uint32_t, std::uint32_t, double>>& triplets,
    bool symmetric) {
  std::vector<std::tuple<std::uint32_t, std::uint32_t, double>> t = triplets;
  std::sort(t.begin(), t.end(), [](const auto& a, const auto& b) {
    return std::tie(std::get<0>(a), std::get<1>(a)) < std::tie(std::get<0>(b), std::get<1>(b));
  });
  std::vector<std::size_t> rows(n + 1, 0);
  std::vector<std::uint32_t> cols;
  std::vector<double> vals;
  cols.reserve(t.size());
  vals.reserve(t.size());
  for (std::size_t k = 0; k < t.size();) {
    const auto [i, j, v0] = t[k];
    if (i >= n || j >= n) throw InvalidArgumentError("from_triplets: index out of range");
    double v = v0;
    std::size_t k2 = k + 1;
    while (k2 < t.size() && std::get<0>(t[k2]) == i && std::get<1>(t[k2]) == j) {
      v += std::get<2>(t[k2]);
      ++k2;
    }
    rows[i + 1] = cols.size() + 1;
    cols.push_back(j);
    vals.push_back(v);
    k = k2;
  }
  for (std::size_t i = 1; i <= n; ++i) rows[i] = std::max(rows[i], rows[i - 1]);
  return SparseOperator(n, std::move(rows), std::move(cols), std::move(vals), symmetric);
}

SparseOperator SparseOperator::identity(std::size_t n) {
  std::vector<std::size_t> rows(n + 1);
  std::vector<std::uint32_t> cols(n);
  std::vector<double> vals(n, 1.0);
  for (std::size_t i = 0; i < n; ++i) {
    rows[i + 1] = i + 1;
    cols[i] = static_cast<std::uint32_t>(i);
  }
  return SparseOperator(n, std::move(rows), std::move(cols), std::move(vals), true);
}

void SparseOperator::validate() const {
  if (rows_.size() != n_ + 1) throw InvalidArgumentError("csr: bad row offsets");
  for (std::size_t i = 0; i < n_; ++i) {
    for (std::size_t k = rows_[i]; k + 1 < rows_[i + 1]; ++k) {
      if (cols_[k] >= cols_[k + 1]) throw InvalidArgumentError("csr: columns not sorted unique");
    }
  }
  if (symmetric_) {
    double scale = 0.0;
    for (double v : vals_) scale = std::max(scale, std::abs(v));
    for (std::size_t i = 0; i < n_; ++i) {
      for (std::size_t k = rows_[i]; k < rows_[i + 1]; ++k) {
        const std::uint32_t j = cols_[k];
        if (j < i) continue;
        const double vt = entry(j, static_cast<std::uint32_t>(i));
        if (std::abs(vals_[k] - vt) > 1e-13 * std::max(1.0, scale)) {
          throw InvalidArgumentError("csr: symmetry flag set but entries asymmetric");
        }
      }
    }
  }
}

void SparseOperator::matvec(std::span<const double> x, std::span<double> y) const {
  for (std::size_t i = 0; i < n_; ++i) {
    double s = 0.0;
    for (std::size_t k = rows_[i]; k < rows_[i + 1]; ++k) s += vals_[k] * x[cols_[k]];
    y[i] = s;
  }
}

std::vector<double> SparseOperator::apply(const std::vector<double>& x) const {
  std::vector<double> y(n_);
  matvec(x, y);
  return y;
}

std::vector<double> SparseOperator::diagonal() const {
  std::vector<double> d(n_, 0.0);
  for (std::size_t i = 0; i < n_; ++i) {
    for (std::size_t k = rows_[i]; k < rows_[i + 1]; ++k) {
      if (cols_[k] == i) d[i] = vals_[k];
    }
  }
  return d;
}

double SparseOperator::entry(std::uint32_t i, std::uint32_t j) const {
  const auto begin = cols_.begin() + static_cast<std::ptrdiff_t>(rows_[i]);
  const auto end = cols_.begin() + static_cast<std::ptrdiff_t>(rows_[i + 1]);
  const auto it = std::lower_bound(begin, end, j);
  if (it == end || *it != j) return 0.0;
  return vals_[static_cast<std::size_t>(it - cols_.begin())];
}

void SparseOperator::add_scaled(const SparseOperator& other, double s) {
  if (other.n_ != n_ || other.rows_ != rows_ || other.cols_ != cols_) {
    throw InvalidArgumentError("add_scaled: sparsity structures differ");
  }
  for (std::size_t k = 0; k < vals_.size(); ++k) vals_[k] += s * other.vals_[k];
}

// ---------------------------------------------------------------------------
// CG
// ---------------------------------------------------------------------------

namespace {

double dot_v(const std::vector<double>& a, const std::vector<double>& b) {
  double s = 0.0;
  for (std::size_t i = 0; i < a.size(); ++i) s += a[i] * b[i];
  return s;
}

double norm_v(const std::vector<double>& a) { return std::sqrt(dot_v(a, a)); }

}  // namespace

CgResult cg_solve(const SparseOperator& a, const std::vector<double>& b, const CgOptions& opts) {
  const std::size_t n = a.dimension();
  if (b.size() != n) throw InvalidArgumentError("cg: dimension mismatch");
  for (double v : b) {
    if (!std::isfinite(v)) throw InvalidArgumentError("cg: right-hand side not finite");
  }

  CgResult res;
  res.x.assign(n, 0.0);
  if (opts.x0 != nullptr) {
    if (opts.x0->size() != n) throw InvalidArgumentError("cg: x0 dimension mismatch");
    res.x = *opts.x0;
  }

  const double bnorm = norm_v(b);
  if (bnorm == 0.0) {
    res.x.assign(n, 0.0);
    res.converged = true;
    return res;
  }

  // Necessary SPD condition, also keeps the Jacobi preconditioner sane.
  for (double d : a.diagonal()) {
    if (d <= 0.0) throw NotSpdError("cg: operator has a non-positive diagonal entry");
  }

  std::vector<double> inv_diag;
  if (opts.precond == Preconditioner::diagonal) {
    inv_diag = a.diagonal();
    for (double& d : inv_diag) d = 1.0 / d;
  }
  auto precondition = [&](const std::vector<double>& r, std::vector<double>& z) {
    if (inv_diag.empty()) {
      z = r;
    } else {
      z.resize(n);
      for (std::size_t i = 0; i < n; ++i) z[i] = inv_diag[i] * r[i];
    }
  };

  std::vector<double> r(n), z, p, q(n);
  a.matvec(res.x, r);
  for (std::size_t i = 0; i < n; ++i) r[i] = b[i] - r[i];
  precondition(r, z);
  p = z;
  double rz = dot_v(r, z);
  double rnorm = norm_v(r);

  for (std::size_t it = 0; it < opts.max_iter; ++it) {
    if (rnorm / bnorm <= opts.tol) {
      res.iterations = it;
      res.residual = rnorm / bnorm;
      res.converged = true;
      return res;
    }
    a.matvec(p, q);
    const double pq = dot_v(p, q);
    if (pq <= 0.0) throw NotSpdError("cg: operator not positive definite (p'Ap <= 0)");
    const double alpha = rz / pq;
    for (std::size_t i = 0; i < n; ++i) {
      res.x[i] += alpha * p[i];
      r[i] -= alpha * q[i];
    }
    precondition(r, z);
    const double rz_next = dot_v(r, z);
    const double beta = rz_next / rz;
    rz = rz_next;
    for (std::size_t i = 0; i < n; ++i) p[i] = z[i] + beta * p[i];
    rnorm = norm_v(r);
  }

  res.iterations = opts.max_iter;
  res.residual = rnorm / bnorm;
  res.converged = rnorm / bnorm <= opts.tol;
  if (!res.converged && opts.throw_on_max_iter) {
    throw IterationLimitError("cg: iteration limit reached, relative residual " +
                                  std::to_string(res.residual),
                              res.residual);
  }
  return res;
}

// ---------------------------------------------------------------------------
// Dense symmetric eigensolvers
// ---------------------------------------------------------------------------

void fix_sign(std::span<double> v) {
  double amax = 0.0;
  for (double x : v) amax = std::max(amax, std::abs(x));
  if (amax == 0.0) return;
  for (double x : v) {
    if (std::abs(x) > 1e-12 * amax) {
      if (x < 0.0) {
        for (double& y : v) y = -y;
      }
      return;
    }
  }
}

EigenPairs jacobi_eig(const DenseMatrix& a0, double tol, int max_sweeps) {
  const std::size_t n = a0.rows();
  DenseMatrix a = a0;
  DenseMatrix v(n, n);
  for (std::size_t i = 0; i < n; ++i) v(i, i) = 1.0;

  double fro = 0.0;
  for (std::size_t i = 0; i < n; ++i) {
    for (std::size_t j = 0; j < n; ++j) fro += a(i, j) * a(i, j);
  }
  fro = std::sqrt(fro);
  if (fro == 0.0) fro = 1.0;

  for (int sweep = 0; sweep < max_sweeps; ++sweep) {
    double off = 0.0;
    for (std::size_t i = 0; i < n; ++i) {
      for (std::size_t j = i + 1; j < n; ++j) off += 2.0 * a(i, j) * a(i, j);
    }
    if (std::sqrt(off) <= tol * fro) break;

    for (std::size_t p = 0; p + 1 < n; ++p) {
      for (std::size_t q = p + 1; q < n; ++q) {
        const double apq = a(p, q);
        if (std::abs(apq) <= 1e-300) continue;
        const double tau = (a(q, q) - a(p, p)) / (2.0 * apq);
        const double t = (tau >= 0.0 ? 1.0 : -1.0) / (std::abs(tau) + std::sqrt(1.0 + tau * tau));
        const double c = 1.0 / std::sqrt(1.0 + t * t);
        const double s = t * c;
        for (std::size_t k = 0; k < n; ++k) {
          const double akp = a(k, p), akq = a(k, q);
          a(k, p) = c * akp - s * akq;
          a(k, q) = s * akp + c * akq;
        }
        for (std::size_t k = 0; k < n; ++k) {
          const double apk = a(p, k), aqk = a(q, k);
          a(p, k) = c * apk - s * aqk;
          a(q, k) = s * apk + c * aqk;
        }
        for (std::size_t k = 0; k < n; ++k) {
          const double vkp = v(k, p), vkq = v(k, q);
          v(k, p) = c * vkp - s * vkq;
          v(k, q) = s * vkp + c * vkq;
        }
      }
    }
  }

  std::vector<std::size_t> order(n);
  for (std::size_t i = 0; i < n; ++i) order[i] = i;
  std::sort(order.begin(), order.end(), [&](std::size_t i, std::size_t j) { return a(i, i) < a(j, j); });

  EigenPairs out;
  out.values.resize(n);
  out.vectors = DenseMatrix(n, n);
  for (std::size_t j = 0; j < n; ++j) {
    out.values[j] = a(order[j], order[j]);
    for (std::size_t i = 0; i < n; ++i) out.vectors(i, j) = v(i, order[j]);
  }
  return out;
}

namespace {

/// Lower Cholesky factor of a small dense SPD matrix; PencilError on failure.
DenseMatrix cholesky(const DenseMatrix& b) {
  const std::size_t n = b.rows();
  DenseMatrix l(n, n);
  for (std::size_t i = 0; i < n; ++i) {
    for (std::size_t j = 0; j <= i; ++j) {
      double s = b(i, j);
      for (std::size_t k = 0; k < j; ++k) s -= l(i, k) * l(j, k);
      if (i == j) {
        if (s <= 0.0) throw PencilError("pencil: B is not positive definite");
        l(i, i) = std::sqrt(s);
      } else {
        l(i, j) = s / l(j, j);
      }
    }
  }
  return l;
}

void check_symmetric(const DenseMatrix& m, const char* name) {
  double scale = 0.0;
  for (std::size_t i = 0; i < m.rows(); ++i) {
    for (std::size_t j = 0; j < m.cols(); ++j) scale = std::max(scale, std::abs(m(i, j)));
  }
  for (std::size_t i = 0; i < m.rows(); ++i) {
    for (std::size_t j = i + 1; j < m.cols(); ++j) {
      if (std::abs(m(i, j) - m(j, i)) > 1e-12 * std::max(1.0, scale)) {
        throw PencilError(std::string("pencil: ") + name + " is not symmetric");
      }
    }
  }
}

}  // namespace

EigenPairs dense_sym_geneig(const DenseSymPencil& pencil) {
  const std::size_t n = pencil.a.rows();
  if (pencil.a.cols() != n || pencil.b.rows() != n || pencil.b.cols() != n) {
    throw PencilError("pencil: dimension mismatch");
  }
  check_symmetric(pencil.a, "A");
  check_symmetric(pencil.b, "B");
  const DenseMatrix l = cholesky(pencil.b);

  // C = L^{-1} A L^{-T}, computed column-block wise by triangular solves.
  DenseMatrix w = pencil.a;  // W = L^{-1} A
  for (std::size_t j = 0; j < n; ++j) {
    for (std::size_t i = 0; i < n; ++i) {
      double s = w(i, j);
      for (std::size_t k = 0; k < i; ++k) s -= l(i, k) * w(k, j);
      w(i, j) = s / l(i, i);
    }
  }
  DenseMatrix c(n, n);  // C = W L^{-T}  (solve row-wise against L)
  for (std::size_t i = 0; i < n; ++i) {
    for (std::size_t j = 0; j < n; ++j) {
      double s = w(i, j);
      for (std::size_t k = 0; k < j; ++k) s -= c(i, k) * l(j, k);
      c(i, j) = s / l(j, j);
    }
  }
  // symmetrize roundoff
  for (std::size_t i = 0; i < n; ++i) {
    for (std::size_t j = i + 1; j < n; ++j) {
      const double avg = 0.5 * (c(i, j) + c(j, i));
      c(i, j) = c(j, i) = avg;
    }
  }

  EigenPairs reduced = jacobi_eig(c, 1e-12, 60);

  // x = L^{-T} y per column
  EigenPairs out;
  out.values = reduced.values;
  out.vectors = DenseMatrix(n, n);
  for (std::size_t col = 0; col < n; ++col) {
    std::vector<double> y(n);
    for (std::size_t i = 0; i < n; ++i) y[i] = reduced.vectors(i, col);
    for (std::size_t ii = n; ii-- > 0;) {
      double s = y[ii];
      for (std::size_t k = ii + 1; k < n; ++k) s -= l(k, ii) * y[k];
      y[ii] = s / l(ii, ii);
    }
    fix_sign(y);
    for (std::size_t i = 0; i < n; ++i) out.vectors(i, col) = y[i];
  }
  return out;
}

// ---------------------------------------------------------------------------
// B-orthonormalization
// ---------------------------------------------------------------------------

double b_inner(const SparseOperator& b, const std::vector<double>& x, const std::vector<double>& y) {
  std::vector<double> by(y.size());
  b.matvec(y, by);
  return dot_v(x, by);
}

double b_norm(const SparseOperator& b, const std::vector<double>& x) {
  return std::sqrt(std::max(0.0, b_inner(b, x, x)));
}

OrthonormalizeResult b_orthonormalize(const std::vector<std::vector<double>>& vectors,
                                      const SparseOperator& b, double drop_tol) {
  OrthonormalizeResult out;
  std::vector<std::vector<double>> b_accepted;  // cache B*q for accepted q
  for (std::size_t idx = 0; idx < vectors.size(); ++idx) {
    std::vector<double> h = vectors[idx];
    const double orig = b_norm(b, h);
    if (!(orig > 0.0)) {
      out.dropped.push_back(idx);
      continue;
    }
    for (int pass = 0; pass < 2; ++pass) {
      for (std::size_t k = 0; k < out.vectors.size(); ++k) {
        const double proj = dot_v(h, b_accepted[k]);
        for (std::size_t i = 0; i < h.size(); ++i) h[i] -= proj * out.vectors[k][i];
      }
    }
    const double nb = b_norm(b, h);
    if (nb <= drop_tol * orig) {
      out.dropped.push_back(idx);
      continue;
    }
    for (double& x : h) x /= nb;
    b_accepted.push_back(b.apply(h));
    out.vectors.push_back(std::move(h));
  }
  if (out.vectors.empty() && !vectors.empty()) {
    throw EmptyBasisError("b_orthonormalize: all vectors dropped");
  }
  return out;
}

// ---------------------------------------------------------------------------
// Baseline reference eigensolver
// ---------------------------------------------------------------------------

namespace {

constexpr std::size_t kDenseCap = 5000;
constexpr std::size_t kHardCap = 50000;

Eigen::MatrixXd densify(const SparseOperator& s) {
  Eigen::MatrixXd m = Eigen::MatrixXd::Zero(static_cast<Eigen::Index>(s.dimension()),
                                            static_cast<Eigen::Index>(s.dimension()));
  const auto& rows = s.row_offsets();
  const auto& cols = s.col_indices();
  const auto& vals = s.values();
  for (std::size_t i = 0; i < s.dimension(); ++i) {
    for (std::size_t k = rows[i]; k < rows[i + 1]; ++k) {
      m(static_cast<Eigen::Index>(i), cols[k]) = vals[k];
    }
  }
  return m;
}

double residual_scale(const SparseOperator& a, const SparseOperator& b, double lambda) {
  double anorm = 0.0, bnorm = 0.0;
  for (double v : a.values()) anorm = std::max(anorm, std::abs(v));
  for (double v : b.values()) bnorm = std::max(bnorm, std::abs(v));
  return std::max(1.0, anorm + std::abs(lambda) * bnorm);
}

EigenPairs baseline_dense(const SparseOperator& a, const SparseOperator& b, std::size_t count) {
  const Eigen::MatrixXd ad = densify(a);
  const Eigen::MatrixXd bd = densify(b);
  Eigen::GeneralizedSelfAdjointEigenSolver<Eigen::MatrixXd> solver(ad, bd,
                                                                   Eigen::ComputeEigenvectors);
  if (solver.info() != Eigen::Success) throw Error("baseline: dense eigensolver failed");
  EigenPairs out;
  out.values.resize(count);
  out.vectors = DenseMatrix(a.dimension(), count);
  std::vector<double> col(a.dimension());
  for (std::size_t j = 0; j < count; ++j) {
    out.values[j] = solver.eigenvalues()(static_cast<Eigen::Index>(j));
    for (std::size_t i = 0; i < a.dimension(); ++i) {
      col[i] = solver.eigenvectors()(static_cast<Eigen::Index>(i), static_cast<Eigen::Index>(j));
    }
    fix_sign(col);
    const std::vector<double> av = a.apply(col);
    const std::vector<double> bv = b.apply(col);
    double r2 = 0.0;
    for (std::size_t i = 0; i < col.size(); ++i) {
      const double d = av[i] - out.values[j] * bv[i];
      r2 += d * d;
    }
    if (std::sqrt(r2) > 1e-9 * residual_scale(a, b, out.values[j])) {
      throw Error("baseline: dense eigenpair residual exceeds tolerance");
    }
    for (std::size_t i = 0; i < a.dimension(); ++i) out.vectors(i, j) = col[i];
  }
  return out;
}

/// Shift-inverted block subspace iteration for the sparse path. The projected
/// problems are solved densely (Eigen), keeping this route independent of the
/// Jacobi kernel it serves as an oracle for.
EigenPairs baseline_subspace(const SparseOperator& a, const SparseOperator& b, std::size_t count,
                             const BaselineOptions& opts) {
  const std::size_t n = a.dimension();
  const std::size_t block = std::min(n, count + std::max<std::size_t>(2, count / 4));
  std::mt19937_64 rng(opts.seed);
  std::normal_distribution<double> gauss(0.0, 1.0);

  std::vector<std::vector<double>> x(block, std::vector<double>(n));
  for (auto& col : x) {
    for (double& v : col) v = gauss(rng);
  }

  double sigma = 0.0;
  CgOptions cg;
  cg.tol = 1e-12;
  cg.max_iter = 20 * n + 1000;

  for (std::size_t iter = 0; iter < opts.max_iter; ++iter) {
    // X <- (A + sigma B)^{-1} B X, with sigma raised on indefiniteness
    std::vector<std::vector<double>> y(block);
    try {
      SparseOperator shifted = a;
      if (sigma != 0.0) shifted.add_scaled(b, sigma);
      for (std::size_t j = 0; j < block; ++j) {
        const std::vector<double> rhs = b.apply(x[j]);
        cg.x0 = &x[j];
        y[j] = cg_solve(shifted, rhs, cg).x;
      }
    } catch (const NotSpdError&) {
      sigma = sigma == 0.0 ? 1.0 : 2.0 * sigma + 1.0;
      if (sigma > 1e12) throw;
      --iter;
      continue;
    }

    auto ortho = b_orthonormalize(y, b, 1e-14);
    while (ortho.vectors.size() < block) {
      std::vector<double> extra(n);
      for (double& v : extra) v = gauss(rng);
      std::vector<std::vector<double>> joined = ortho.vectors;
      joined.push_back(extra);
      ortho = b_orthonormalize(joined, b, 1e-14);
    }
    x = ortho.vectors;

    // Rayleigh-Ritz on the block (dense, Eigen)
    Eigen::MatrixXd at(block, block), bt(block, block);
    std::vector<std::vector<double>> ax(block);
    std::vector<std::vector<double>> bx(block);
    for (std::size_t j = 0; j < block; ++j) {
      ax[j] = a.apply(x[j]);
      bx[j] = b.apply(x[j]);
    }
    for (std::size_t i = 0; i < block; ++i) {
      for (std::size_t j = 0; j < block; ++j) {
        at(static_cast<Eigen::Index>(i), static_cast<Eigen::Index>(j)) = dot_v(x[i], ax[j]);
        bt(static_cast<Eigen::Index>(i), static_cast<Eigen::Index>(j)) = dot_v(x[i], bx[j]);
      }
    }
    at = 0.5 * (at + at.transpose()).eval();
    bt = 0.5 * (bt + bt.transpose()).eval();
    Eigen::GeneralizedSelfAdjointEigenSolver<Eigen::MatrixXd> small(at, bt,
                                                                    Eigen::ComputeEigenvectors);
    if (small.info() != Eigen::Success) throw Error("baseline: projected solve failed");

    std::vector<std::vector<double>> rotated(block, std::vector<double>(n, 0.0));
    for (std::size_t j = 0; j < block; ++j) {
      for (std::size_t k = 0; k < block; ++k) {
        const double w = small.eigenvectors()(static_cast<Eigen::Index>(k),
                                              static_cast<Eigen::Index>(j));
        for (std::size_t i = 0; i < n; ++i) rotated[j][i] += w * x[k][i];
      }
    }
    x = std::move(rotated);

    // convergence: residuals of the requested pairs
    bool done = true;
    for (std::size_t j = 0; j < count; ++j) {
      const double lambda = small.eigenvalues()(static_cast<Eigen::Index>(j));
      const std::vector<double> av = a.apply(x[j]);
      const std::vector<double> bv = b.apply(x[j]);
      double r = 0.0;
      for (std::size_t i = 0; i < n; ++i) {
        const double d = av[i] - lambda * bv[i];
        r += d * d;
      }
      if (std::sqrt(r) > 1e-9 * residual_scale(a, b, lambda)) {
        done = false;
        break;
      }
    }
    if (done) {
      EigenPairs out;
      out.values.resize(count);
      out.vectors = DenseMatrix(n, count);
      std::vector<double> col(n);
      for (std::size_t j = 0; j < count; ++j) {
        out.values[j] = small.eigenvalues()(static_cast<Eigen::Index>(j));
        col = x[j];
        fix_sign(col);
        for (std::size_t i = 0; i < n; ++i) out.vectors(i, j) = col[i];
      }
      return out;
    }
  }
  throw IterationLimitError("baseline: subspace iteration did not converge", 0.0);
}

}  // namespace

EigenPairs baseline_geneig(const SparseOperator& a, const SparseOperator& b, std::size_t count,
                           const BaselineOptions& opts) {
  const std::size_t n = a.dimension();
  if (b.dimension() != n) throw InvalidArgumentError("baseline: pencil dimension mismatch");
  if (count == 0 || count > n) throw InvalidArgumentError("baseline: bad eigenpair count");
  if (n > kHardCap) throw CapacityError("baseline: dimension exceeds hard cap 50000");
  if (n <= kDenseCap) return baseline_dense(a, b, count);
  return baseline_subspace(a, b, count, opts);
}

double principal_angle(const DenseMatrix& u, const DenseMatrix& v, const SparseOperator& b) {
  const std::size_t n = u.rows();
  const std::size_t ku = u.cols(), kv = v.cols();
  if (v.rows() != n) throw InvalidArgumentError("principal_angle: dimension mismatch");
  Eigen::MatrixXd m(ku, kv);
  std::vector<double> col(n), bcol(n);
  for (std::size_t j = 0; j < kv; ++j) {
    for (std::size_t i = 0; i < n; ++i) col[i] = v(i, j);
    b.matvec(col, bcol);
    for (std::size_t i = 0; i < ku; ++i) {
      double s = 0.0;
      for (std::size_t r = 0; r < n; ++r) s += u(r, i) * bcol[r];
      m(static_cast<Eigen::Index>(i), static_cast<Eigen::Index>(j)) = s;
    }
  }
  Eigen::JacobiSVD<Eigen::MatrixXd> svd(m);
  const double smin = svd.singularValues()(svd.singularValues().size() - 1);
  return std::acos(std::clamp(smin, -1.0, 1.0));
}

}  // namespace paro

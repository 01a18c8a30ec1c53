#pragma once

#include <cstddef>
#include <cstdint>
#include <functional>
#include <span>
#include <tuple>
#include <vector>

namespace paro {

/// Symmetric sparse matrix in compressed-row form. Column indices are sorted
/// and unique per row; construction validates symmetry when the flag is set.
class SparseOperator {
 public:
  SparseOperator() = default;
  SparseOperator(std::size_t n, std::vector<std::size_t> row_offsets,
                 std::vector<std::uint32_t> cols, std::vector<double> vals, bool symmetric);

  static SparseOperator from_triplets(
      std::size_t n, const std::vector<std::tuple<std::uint32_t, std::uint32_t, double>>& triplets,
      bool symmetric);

  static SparseOperator identity(std::size_t n);

  std::size_t dimension() const { return n_; }
  std::size_t nnz() const { return vals_.size(); }
  bool symmetric() const { return symmetric_; }
  const std::vector<std::size_t>& row_offsets() const { return rows_; }
  const std::vector<std::uint32_t>& col_indices() const { return cols_; }
  const std::vector<double>& values() const { return vals_; }
  std::vector<double>& values() { return vals_; }

  void matvec(std::span<const double> x, std::span<double> y) const;
  std::vector<double> apply(const std::vector<double>& x) const;
  std::vector<double> diagonal() const;
  double entry(std::uint32_t i, std::uint32_t j) const;

  /// this += s * other; requires identical sparsity structure.
  void add_scaled(const SparseOperator& other, double s = 1.0);

 private:
  void validate() const;

  std::size_t n_ = 0;
  std::vector<std::size_t> rows_;
  std::vector<std::uint32_t> cols_;
  std::vector<double> vals_;
  bool symmetric_ = false;
};

// --------------------------------------------------------------------------
// Dense helpers (small matrices: pencils, Gram blocks, subspace coefficients)
// --------------------------------------------------------------------------

class DenseMatrix {
 public:
  DenseMatrix() = default;
  DenseMatrix(std::size_t rows, std::size_t cols) : r_(rows), c_(cols), a_(rows * cols, 0.0) {}

  std::size_t rows() const { return r_; }
  std::size_t cols() const { return c_; }
  double& operator()(std::size_t i, std::size_t j) { return a_[i * c_ + j]; }
  double operator()(std::size_t i, std::size_t j) const { return a_[i * c_ + j]; }
  const std::vector<double>& data() const { return a_; }

 private:
  std::size_t r_ = 0, c_ = 0;
  std::vector<double> a_;
};

/// Small symmetric generalized pencil (A, B) with B SPD.
struct DenseSymPencil {
  DenseMatrix a;
  DenseMatrix b;
};

struct EigenPairs {
  std::vector<double> values;  // ascending
  DenseMatrix vectors;         // columns, B-orthonormal
};

/// Solves A v = lambda B v for a small dense symmetric pencil: Cholesky of B,
/// cyclic Jacobi sweeps on the reduced standard problem, back-substitution.
/// Eigenvalues ascending; eigenvectors B-orthonormal with the sign convention
/// that the first significant coefficient is positive.
EigenPairs dense_sym_geneig(const DenseSymPencil& pencil);

/// Cyclic Jacobi eigensolver for a dense symmetric matrix (values ascending,
/// orthonormal columns).
EigenPairs jacobi_eig(const DenseMatrix& a, double tol = 1e-12, int max_sweeps = 60);

// --------------------------------------------------------------------------
// Conjugate gradients
// --------------------------------------------------------------------------

enum class Preconditioner { none, diagonal };

struct CgOptions {
  double tol = 1e-10;  // relative residual
  std::size_t max_iter = 10000;
  Preconditioner precond = Preconditioner::diagonal;
  const std::vector<double>* x0 = nullptr;
  bool throw_on_max_iter = true;
};

struct CgResult {
  std::vector<double> x;
  std::size_t iterations = 0;
  double residual = 0.0;  // final relative residual
  bool converged = false;
};

/// Preconditioned CG for SPD systems. Throws NotSpdError when p'Ap <= 0 is
/// detected and IterationLimitError (carrying the residual) on non-convergence.
CgResult cg_solve(const SparseOperator& a, const std::vector<double>& b, const CgOptions& opts = {});

// --------------------------------------------------------------------------
// Orthonormalization and reference eigensolves
// --------------------------------------------------------------------------

struct OrthonormalizeResult {
  std::vector<std::vector<double>> vectors;
  std::vector<std::size_t> dropped;
};

/// Modified Gram-Schmidt in the B inner product with one re-orthogonalization
/// pass. A vector is dropped when its post-projection B-norm falls below
/// drop_tol relative to its original B-norm.
OrthonormalizeResult b_orthonormalize(const std::vector<std::vector<double>>& vectors,
                                      const SparseOperator& b, double drop_tol);

double b_inner(const SparseOperator& b, const std::vector<double>& x, const std::vector<double>& y);
double b_norm(const SparseOperator& b, const std::vector<double>& x);

struct BaselineOptions {
  double tol = 1e-10;
  std::size_t max_iter = 400;
  std::uint64_t seed = 7;
};

/// Reference solver for the lowest eigenpairs of the sparse pencil (A, B):
/// densifies up to dimension 5000, shift-inverted subspace iteration beyond,
/// hard capacity cap at 50000. Results are B-orthonormal with residual
/// ||Av - lambda Bv|| <= 1e-9 per pair (scaled).
EigenPairs baseline_geneig(const SparseOperator& a, const SparseOperator& b, std::size_t count,
                           const BaselineOptions& opts = {});

/// Largest principal angle (radians) between the B-orthonormal column spans.
double principal_angle(const DenseMatrix& u, const DenseMatrix& v, const SparseOperator& b);

/// Applies the sign convention: first coefficient with |v_i| > 1e-12 * max|v|
/// is made positive.
void fix_sign(std::span<double> v);

}  // namespace paro

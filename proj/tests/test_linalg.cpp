#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include <cmath>
#include <numbers>
#include <random>

#include "paro/errors.hpp"
#include "paro/linalg.hpp"

using namespace paro;

namespace {

using Triplet = std::tuple<std::uint32_t, std::uint32_t, double>;

SparseOperator dense_to_csr(const DenseMatrix& m, bool symmetric) {
  std::vector<Triplet> t;
  for (std::size_t i = 0; i < m.rows(); ++i) {
    for (std::size_t j = 0; j < m.cols(); ++j) {
      if (m(i, j) != 0.0) t.emplace_back(i, j, m(i, j));
    }
  }
  return SparseOperator::from_triplets(m.rows(), t, symmetric);
}

/// Dirichlet 1D Laplacian tridiagonal (2,-1)/h^2 with n interior points.
SparseOperator laplacian_1d(std::size_t n, double h) {
  std::vector<Triplet> t;
  const double s = 1.0 / (h * h);
  for (std::uint32_t i = 0; i < n; ++i) {
    t.emplace_back(i, i, 2.0 * s);
    if (i + 1 < n) {
      t.emplace_back(i, i + 1, -s);
      t.emplace_back(i + 1, i, -s);
    }
  }
  return SparseOperator::from_triplets(n, t, true);
}

/// 5-point finite-difference Laplacian on an m x m interior grid, spacing h.
SparseOperator laplacian_2d_fd(std::size_t m, double h) {
  const double s = 1.0 / (h * h);
  std::vector<Triplet> t;
  auto id = [m](std::size_t i, std::size_t j) { return static_cast<std::uint32_t>(j * m + i); };
  for (std::size_t j = 0; j < m; ++j) {
    for (std::size_t i = 0; i < m; ++i) {
      t.emplace_back(id(i, j), id(i, j), 4.0 * s);
      if (i > 0) t.emplace_back(id(i, j), id(i - 1, j), -s);
      if (i + 1 < m) t.emplace_back(id(i, j), id(i + 1, j), -s);
      if (j > 0) t.emplace_back(id(i, j), id(i, j - 1), -s);
      if (j + 1 < m) t.emplace_back(id(i, j), id(i, j + 1), -s);
    }
  }
  return SparseOperator::from_triplets(m * m, t, true);
}

std::vector<double> random_vector(std::size_t n, std::mt19937_64& rng) {
  std::normal_distribution<double> g(0.0, 1.0);
  std::vector<double> v(n);
  for (double& x : v) x = g(rng);
  return v;
}

}  // namespace

TEST_CASE("cg: identity solves in one iteration") {
  const SparseOperator a = SparseOperator::identity(5);
  const std::vector<double> b{1, -2, 3, 0.5, 4};
  const CgResult r = cg_solve(a, b);
  CHECK(r.iterations <= 1);
  for (std::size_t i = 0; i < 5; ++i) CHECK(r.x[i] == doctest::Approx(b[i]).epsilon(1e-14));
}

TEST_CASE("cg: 2x2 frozen solution") {
  DenseMatrix m(2, 2);
  m(0, 0) = 4;
  m(0, 1) = 1;
  m(1, 0) = 1;
  m(1, 1) = 3;
  const SparseOperator a = dense_to_csr(m, true);
  const CgResult r = cg_solve(a, {1, 2}, {.tol = 1e-14});
  CHECK(r.x[0] == doctest::Approx(1.0 / 11.0).epsilon(1e-12));
  CHECK(r.x[1] == doctest::Approx(7.0 / 11.0).epsilon(1e-12));
}

TEST_CASE("cg: unpreconditioned variant solves too") {
  DenseMatrix m(2, 2);
  m(0, 0) = 4;
  m(0, 1) = 1;
  m(1, 0) = 1;
  m(1, 1) = 3;
  const SparseOperator a = dense_to_csr(m, true);
  const CgResult r = cg_solve(a, {1, 2}, {.tol = 1e-14, .precond = Preconditioner::none});
  CHECK(r.x[0] == doctest::Approx(1.0 / 11.0).epsilon(1e-12));
  CHECK(r.x[1] == doctest::Approx(7.0 / 11.0).epsilon(1e-12));
}

TEST_CASE("cg: indefinite operator raises NotSpdError") {
  DenseMatrix m(2, 2);
  m(0, 0) = -5;
  m(1, 1) = 3;
  const SparseOperator a = dense_to_csr(m, true);
  CHECK_THROWS_AS(cg_solve(a, {1, 1}), NotSpdError);
}

TEST_CASE("cg: iteration limit carries the residual") {
  const SparseOperator a = laplacian_1d(50, 1.0 / 51.0);
  std::vector<double> b(50, 1.0);
  try {
    cg_solve(a, b, {.tol = 1e-14, .max_iter = 2});
    FAIL("expected IterationLimitError");
  } catch (const IterationLimitError& e) {
    CHECK(e.residual > 0.0);
  }
}

TEST_CASE("cg: error decreases monotonically in the A-norm") {
  const SparseOperator a = laplacian_1d(30, 1.0 / 31.0);
  std::mt19937_64 rng(3);
  const std::vector<double> xstar = random_vector(30, rng);
  const std::vector<double> b = a.apply(xstar);

  auto a_norm_err = [&](const std::vector<double>& x) {
    std::vector<double> d(x.size());
    for (std::size_t i = 0; i < x.size(); ++i) d[i] = x[i] - xstar[i];
    const auto ad = a.apply(d);
    double s = 0;
    for (std::size_t i = 0; i < d.size(); ++i) s += d[i] * ad[i];
    return std::sqrt(std::max(0.0, s));
  };

  double prev = a_norm_err(std::vector<double>(30, 0.0));
  for (std::size_t k = 1; k <= 30; ++k) {
    const CgResult r =
        cg_solve(a, b, {.tol = 1e-30, .max_iter = k, .throw_on_max_iter = false});
    const double err = a_norm_err(r.x);
    CHECK(err <= prev + 1e-14 * (1.0 + prev));
    prev = err;
  }
}

TEST_CASE("dense_sym_geneig: diagonal pencil") {
  DenseSymPencil p;
  p.a = DenseMatrix(2, 2);
  p.a(0, 0) = 2;
  p.a(1, 1) = 3;
  p.b = DenseMatrix(2, 2);
  p.b(0, 0) = 1;
  p.b(1, 1) = 1;
  const EigenPairs e = dense_sym_geneig(p);
  CHECK(e.values[0] == doctest::Approx(2.0).epsilon(1e-12));
  CHECK(e.values[1] == doctest::Approx(3.0).epsilon(1e-12));
  CHECK(std::abs(e.vectors(0, 0)) == doctest::Approx(1.0).epsilon(1e-12));
  CHECK(std::abs(e.vectors(1, 1)) == doctest::Approx(1.0).epsilon(1e-12));
}

TEST_CASE("dense_sym_geneig: closed-form 2x2 and degenerate pencil") {
  DenseSymPencil p;
  p.a = DenseMatrix(2, 2);
  p.a(0, 0) = 2;
  p.a(0, 1) = 1;
  p.a(1, 0) = 1;
  p.a(1, 1) = 2;
  p.b = DenseMatrix(2, 2);
  p.b(0, 0) = 1;
  p.b(1, 1) = 1;
  const EigenPairs e = dense_sym_geneig(p);
  CHECK(e.values[0] == doctest::Approx(1.0).epsilon(1e-12));
  CHECK(e.values[1] == doctest::Approx(3.0).epsilon(1e-12));

  DenseSymPencil d;
  d.a = DenseMatrix(2, 2);
  d.a(0, 0) = 1;
  d.a(1, 1) = 4;
  d.b = DenseMatrix(2, 2);
  d.b(0, 0) = 1;
  d.b(1, 1) = 4;
  const EigenPairs ed = dense_sym_geneig(d);
  CHECK(ed.values[0] == doctest::Approx(1.0).epsilon(1e-12));
  CHECK(ed.values[1] == doctest::Approx(1.0).epsilon(1e-12));
  // any B-orthonormal pair is acceptable
  double g01 = 0, g00 = 0, g11 = 0;
  for (int i = 0; i < 2; ++i) {
    const double bi = d.b(i, i);
    g00 += ed.vectors(i, 0) * bi * ed.vectors(i, 0);
    g01 += ed.vectors(i, 0) * bi * ed.vectors(i, 1);
    g11 += ed.vectors(i, 1) * bi * ed.vectors(i, 1);
  }
  CHECK(g00 == doctest::Approx(1.0).epsilon(1e-10));
  CHECK(g11 == doctest::Approx(1.0).epsilon(1e-10));
  CHECK(std::abs(g01) < 1e-10);
}

TEST_CASE("dense_sym_geneig: non-SPD B raises PencilError") {
  DenseSymPencil p;
  p.a = DenseMatrix(2, 2);
  p.a(0, 0) = 1;
  p.a(1, 1) = 1;
  p.b = DenseMatrix(2, 2);
  p.b(0, 0) = 1;
  p.b(1, 1) = -1;
  CHECK_THROWS_AS(dense_sym_geneig(p), PencilError);
}

TEST_CASE("dense_sym_geneig: residual, B-orthonormality, basis invariance") {
  std::mt19937_64 rng(11);
  std::normal_distribution<double> g(0.0, 1.0);
  const std::size_t n = 12;
  DenseSymPencil p;
  p.a = DenseMatrix(n, n);
  p.b = DenseMatrix(n, n);
  DenseMatrix r(n, n);
  for (std::size_t i = 0; i < n; ++i) {
    for (std::size_t j = 0; j <= i; ++j) {
      p.a(i, j) = p.a(j, i) = g(rng);
    }
    for (std::size_t j = 0; j < n; ++j) r(i, j) = g(rng);
  }
  // B = R R' + n I: SPD
  for (std::size_t i = 0; i < n; ++i) {
    for (std::size_t j = 0; j < n; ++j) {
      double s = i == j ? static_cast<double>(n) : 0.0;
      for (std::size_t k = 0; k < n; ++k) s += r(i, k) * r(j, k);
      p.b(i, j) = s;
    }
  }

  const EigenPairs e = dense_sym_geneig(p);
  double anorm = 0;
  for (std::size_t i = 0; i < n; ++i) {
    for (std::size_t j = 0; j < n; ++j) anorm = std::max(anorm, std::abs(p.a(i, j)));
  }
  for (std::size_t col = 0; col < n; ++col) {
    for (std::size_t i = 0; i < n; ++i) {
      double av = 0, bv = 0;
      for (std::size_t j = 0; j < n; ++j) {
        av += p.a(i, j) * e.vectors(j, col);
        bv += p.b(i, j) * e.vectors(j, col);
      }
      CHECK(std::abs(av - e.values[col] * bv) <= 1e-10 * std::max(1.0, anorm) * 50);
    }
  }
  for (std::size_t c1 = 0; c1 < n; ++c1) {
    for (std::size_t c2 = 0; c2 < n; ++c2) {
      double s = 0;
      for (std::size_t i = 0; i < n; ++i) {
        for (std::size_t j = 0; j < n; ++j) s += e.vectors(i, c1) * p.b(i, j) * e.vectors(j, c2);
      }
      CHECK(std::abs(s - (c1 == c2 ? 1.0 : 0.0)) < 1e-10);
    }
  }

  // eigenvalues invariant under a common orthonormal change of basis
  const EigenPairs qr = jacobi_eig(p.b);  // orthonormal columns
  const DenseMatrix& q = qr.vectors;
  DenseSymPencil rot;
  rot.a = DenseMatrix(n, n);
  rot.b = DenseMatrix(n, n);
  for (std::size_t i = 0; i < n; ++i) {
    for (std::size_t j = 0; j < n; ++j) {
      double sa = 0, sb = 0;
      for (std::size_t k = 0; k < n; ++k) {
        for (std::size_t l = 0; l < n; ++l) {
          sa += q(k, i) * p.a(k, l) * q(l, j);
          sb += q(k, i) * p.b(k, l) * q(l, j);
        }
      }
      rot.a(i, j) = sa;
      rot.b(i, j) = sb;
    }
  }
  for (std::size_t i = 0; i < n; ++i) {
    for (std::size_t j = i + 1; j < n; ++j) {
      rot.a(i, j) = rot.a(j, i) = 0.5 * (rot.a(i, j) + rot.a(j, i));
      rot.b(i, j) = rot.b(j, i) = 0.5 * (rot.b(i, j) + rot.b(j, i));
    }
  }
  const EigenPairs e2 = dense_sym_geneig(rot);
  for (std::size_t i = 0; i < n; ++i) {
    CHECK(e2.values[i] == doctest::Approx(e.values[i]).epsilon(1e-9));
  }
}

TEST_CASE("b_orthonormalize: orthonormal input passes through, duplicates drop") {
  const SparseOperator b = SparseOperator::identity(4);
  std::vector<std::vector<double>> vecs{{1, 0, 0, 0}, {0, -1, 0, 0}};
  const auto r = b_orthonormalize(vecs, b, 1e-8);
  CHECK(r.dropped.empty());
  CHECK(std::abs(std::abs(r.vectors[0][0]) - 1.0) < 1e-14);
  CHECK(std::abs(std::abs(r.vectors[1][1]) - 1.0) < 1e-14);

  std::vector<std::vector<double>> dup{{1, 2, 0, 1}, {1, 2, 0, 1}};
  const auto rd = b_orthonormalize(dup, b, 1e-8);
  CHECK(rd.vectors.size() == 1);
  REQUIRE(rd.dropped.size() == 1);
  CHECK(rd.dropped[0] == 1);
}

TEST_CASE("b_orthonormalize: Gram matrix equals identity for random vectors") {
  // B: SPD mass-like tridiagonal
  std::vector<Triplet> t;
  const std::size_t n = 20;
  for (std::uint32_t i = 0; i < n; ++i) {
    t.emplace_back(i, i, 4.0 / 6.0);
    if (i + 1 < n) {
      t.emplace_back(i, i + 1, 1.0 / 6.0);
      t.emplace_back(i + 1, i, 1.0 / 6.0);
    }
  }
  const SparseOperator b = SparseOperator::from_triplets(n, t, true);
  std::mt19937_64 rng(5);
  std::vector<std::vector<double>> vecs;
  for (int k = 0; k < 3; ++k) vecs.push_back(random_vector(n, rng));
  const auto r = b_orthonormalize(vecs, b, 1e-10);
  REQUIRE(r.vectors.size() == 3);
  for (std::size_t i = 0; i < 3; ++i) {
    for (std::size_t j = 0; j < 3; ++j) {
      const double g = b_inner(b, r.vectors[i], r.vectors[j]);
      CHECK(std::abs(g - (i == j ? 1.0 : 0.0)) < 1e-10);
    }
  }
}

TEST_CASE("b_orthonormalize: all vectors dropped raises EmptyBasisError") {
  const SparseOperator b = SparseOperator::identity(3);
  std::vector<std::vector<double>> zeros{{0, 0, 0}, {0, 0, 0}};
  CHECK_THROWS_AS(b_orthonormalize(zeros, b, 1e-8), EmptyBasisError);
}

TEST_CASE("baseline_geneig: 1D Laplacian matches the analytic spectrum") {
  const std::size_t n = 10;
  const double h = 1.0 / 11.0;
  const SparseOperator a = laplacian_1d(n, h);
  const SparseOperator b = SparseOperator::identity(n);
  const EigenPairs e = baseline_geneig(a, b, n);
  for (std::size_t k = 1; k <= n; ++k) {
    const double exact = (2.0 - 2.0 * std::cos(k * std::numbers::pi / 11.0)) / (h * h);
    CHECK(e.values[k - 1] == doctest::Approx(exact).epsilon(1e-10));
  }
}

TEST_CASE("baseline_geneig: diagonal A returns sorted diagonal") {
  std::vector<Triplet> t{{0, 0, 5.0}, {1, 1, 1.0}, {2, 2, 3.0}};
  const SparseOperator a = SparseOperator::from_triplets(3, t, true);
  const SparseOperator b = SparseOperator::identity(3);
  const EigenPairs e = baseline_geneig(a, b, 3);
  CHECK(e.values[0] == doctest::Approx(1.0));
  CHECK(e.values[1] == doctest::Approx(3.0));
  CHECK(e.values[2] == doctest::Approx(5.0));
}

TEST_CASE("baseline_geneig: double eigenvalue of the square is returned twice") {
  const std::size_t m = 24;
  const double h = 1.0 / (m + 1);
  const SparseOperator a = laplacian_2d_fd(m, h);
  const SparseOperator b = SparseOperator::identity(m * m);
  const EigenPairs e = baseline_geneig(a, b, 3);
  CHECK(e.values[1] == doctest::Approx(e.values[2]).epsilon(1e-10));
  const double pi2 = std::numbers::pi * std::numbers::pi;
  CHECK(e.values[1] == doctest::Approx(5.0 * pi2).epsilon(0.02));
}

TEST_CASE("baseline_geneig agrees with dense_sym_geneig on small pencils") {
  std::mt19937_64 rng(17);
  std::normal_distribution<double> g(0.0, 1.0);
  const std::size_t n = 8;
  DenseMatrix a(n, n), b(n, n);
  for (std::size_t i = 0; i < n; ++i) {
    for (std::size_t j = 0; j <= i; ++j) a(i, j) = a(j, i) = g(rng);
    b(i, i) = 2.0 + std::abs(g(rng));
  }
  const SparseOperator sa = dense_to_csr(a, true);
  const SparseOperator sb = dense_to_csr(b, true);
  const EigenPairs ours = dense_sym_geneig({a, b});
  const EigenPairs ref = baseline_geneig(sa, sb, n);
  for (std::size_t i = 0; i < n; ++i) {
    CHECK(ours.values[i] == doctest::Approx(ref.values[i]).epsilon(1e-10));
  }
}

TEST_CASE("baseline_geneig: capacity errors") {
  const SparseOperator a = SparseOperator::identity(4);
  CHECK_THROWS_AS(baseline_geneig(a, a, 9), InvalidArgumentError);

  const SparseOperator big = SparseOperator::identity(50001);
  CHECK_THROWS_AS(baseline_geneig(big, big, 1), CapacityError);
}

TEST_CASE("baseline_geneig: subspace path beyond the dense cap") {
  const std::size_t m = 72;  // 5184 dofs > dense cap
  const double h = 1.0 / (m + 1);
  const SparseOperator a = laplacian_2d_fd(m, h);
  const SparseOperator b = SparseOperator::identity(m * m);
  const EigenPairs e = baseline_geneig(a, b, 1);
  const double pi2 = std::numbers::pi * std::numbers::pi;
  CHECK(e.values[0] == doctest::Approx(2.0 * pi2).epsilon(0.01));
}

TEST_CASE("principal_angle: identical and orthogonal spans") {
  const SparseOperator b = SparseOperator::identity(4);
  DenseMatrix u(4, 2), v(4, 2), w(4, 2);
  u(0, 0) = 1;
  u(1, 1) = 1;
  v(0, 0) = 1;
  v(1, 1) = 1;
  w(2, 0) = 1;
  w(3, 1) = 1;
  CHECK(principal_angle(u, v, b) < 1e-12);
  CHECK(principal_angle(u, w, b) == doctest::Approx(std::numbers::pi / 2).epsilon(1e-12));
}

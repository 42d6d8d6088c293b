#include <cmath>

#include "ashbm/error.hpp"
#include "ashbm/linalg.hpp"
#include "doctest.h"
#include "test_support.hpp"

using namespace ashbm;
using testing::Gen;

namespace {

Matrix dense(std::initializer_list<std::initializer_list<double>> rows) {
  const Index m = static_cast<Index>(rows.size());
  const Index n = static_cast<Index>(rows.begin()->size());
  DenseMatrix a(m, n);
  Index i = 0;
  for (const auto& row : rows) {
    Index j = 0;
    for (double v : row) a(i, j++) = v;
    ++i;
  }
  return Matrix(std::move(a));
}

Vector vec(std::initializer_list<double> xs) {
  Vector v(static_cast<Index>(xs.size()));
  Index i = 0;
  for (double x : xs) v[i++] = x;
  return v;
}

}  // namespace

TEST_CASE("spectral quantities of diag(3,1)") {
  const auto s = spectral_quantities(dense({{3, 0}, {0, 1}}));
  CHECK(s.sigma_max == doctest::Approx(3.0).epsilon(1e-14));
  CHECK(s.sigma_min_nonzero == doctest::Approx(1.0).epsilon(1e-14));
  CHECK(s.rank == 2);
  CHECK(s.fro_norm == doctest::Approx(std::sqrt(10.0)).epsilon(1e-14));
}

TEST_CASE("spectral quantities of the rank-one all-ones matrix") {
  const auto s = spectral_quantities(dense({{1, 1}, {1, 1}}));
  CHECK(s.sigma_max == doctest::Approx(2.0).epsilon(1e-14));
  CHECK(s.sigma_min_nonzero == doctest::Approx(2.0).epsilon(1e-14));
  CHECK(s.rank == 1);
  CHECK(s.fro_norm == doctest::Approx(2.0).epsilon(1e-14));
  CHECK(s.sigma_min_all < 1e-15);
}

TEST_CASE("zero matrix is rejected") {
  Matrix z(DenseMatrix::Zero(3, 2));
  try {
    spectral_quantities(z);
    FAIL("expected ZeroMatrix");
  } catch (const Error& e) {
    CHECK(e.code() == ErrorCode::ZeroMatrix);
  }
}

TEST_CASE("min-norm solution examples") {
  CHECK((min_norm_solution(dense({{1, 0}, {0, 1}}), vec({3, 4})) - vec({3, 4})).norm() < 1e-14);
  CHECK((min_norm_solution(dense({{1, 1}}), vec({2})) - vec({1, 1})).norm() < 1e-14);
  CHECK((min_norm_solution(dense({{1, 0}, {0, 0}}), vec({5, 0})) - vec({5, 0})).norm() < 1e-14);
}

TEST_CASE("inconsistent right-hand side is rejected") {
  try {
    min_norm_solution(dense({{1, 0}, {0, 0}}), vec({5, 1}));
    FAIL("expected InconsistentSystem");
  } catch (const Error& e) {
    CHECK(e.code() == ErrorCode::InconsistentSystem);
  }
}

TEST_CASE("matvec examples") {
  const Matrix a = dense({{1, 2}, {3, 4}});
  CHECK((matvec(a, vec({1, 0})) - vec({1, 3})).norm() == 0.0);
  CHECK((matvec_transpose(a, vec({1, 0})) - vec({1, 2})).norm() == 0.0);
  CHECK_THROWS_AS(matvec(a, vec({1, 2, 3})), Error);
  CHECK_THROWS_AS(matvec_transpose(a, vec({1})), Error);
}

TEST_CASE("sparse and dense products agree on a random 20x15 instance") {
  Gen g(2024);
  const DenseMatrix d = g.sparse_pattern(20, 15, 0.3);
  const Matrix ad(d);
  const Matrix as = testing::to_sparse(d);
  const Vector x = g.gaussian(15), y = g.gaussian(20);
  CHECK(testing::rel_diff(matvec(ad, x), matvec(as, x)) <= 1e-13);
  CHECK(testing::rel_diff(matvec_transpose(ad, y), matvec_transpose(as, y)) <= 1e-13);
}

TEST_CASE("property: cached norms match recomputation for dense and sparse storage") {
  for (std::uint64_t seed = 1; seed <= 40; ++seed) {
    Gen g(seed);
    INFO("seed " << seed);
    const Index m = g.size(1, 30), n = g.size(1, 30);
    const DenseMatrix d = g.sparse_pattern(m, n, g.real(0.05, 1.0));
    for (const Matrix& a : {Matrix(d), testing::to_sparse(d)}) {
      double total = 0.0;
      for (Index i = 0; i < m; ++i) {
        const double expect = d.row(i).squaredNorm();
        CHECK(std::abs(a.row_norms_sq()[i] - expect) <= 1e-12 * expect);
        total += a.row_norms_sq()[i];
      }
      CHECK(std::abs(a.fro_norm_sq() - total) <= 1e-12 * total);
    }
  }
}

TEST_CASE("property: sparse rows hold strictly increasing in-range column indices") {
  for (std::uint64_t seed = 1; seed <= 20; ++seed) {
    Gen g(seed);
    const Matrix a = Matrix::from_triplets(6, 5, [&] {
      std::vector<Triplet> t;
      for (int k = 0; k < 25; ++k) t.emplace_back(g.size(0, 5), g.size(0, 4), g.real(-1, 1));
      return t;
    }());
    const auto& s = a.sparse();
    for (Index i = 0; i < s.outerSize(); ++i) {
      Index prev = -1;
      for (SparseMatrix::InnerIterator it(s, i); it; ++it) {
        CHECK(it.col() > prev);
        CHECK(it.col() < 5);
        prev = it.col();
      }
    }
  }
}

TEST_CASE("duplicate triplets are summed") {
  const Matrix a = Matrix::from_triplets(2, 2, {{0, 0, 1.0}, {0, 0, 2.5}, {1, 1, 1.0}});
  CHECK(a.to_dense()(0, 0) == 3.5);
  CHECK(a.nonzeros() == 2);
}

TEST_CASE("property: min-norm oracle is consistent and lies in Range(A^T)") {
  for (std::uint64_t seed = 1; seed <= 30; ++seed) {
    Gen g(seed);
    INFO("seed " << seed);
    const Index m = g.size(2, 25), n = g.size(2, 25);
    const Index r = g.size(1, std::min(m, n));
    // rank-r product of Gaussians, b in the range
    const DenseMatrix d = g.gaussian(m, r) * g.gaussian(r, n);
    const Matrix a(d);
    const Vector b = d * g.gaussian(n);
    const Vector x = min_norm_solution(a, b);
    CHECK((matvec(a, x) - b).norm() <= 1e-10 * (1.0 + b.norm()));
    CHECK(null_space_component(null_space_basis(a), x) <= 1e-10 * x.norm());
    CHECK(testing::rel_diff(x, testing::cod_min_norm(a, b)) <= 1e-8);
  }
}

TEST_CASE("property: rank follows the tolerance rule") {
  for (std::uint64_t seed = 1; seed <= 20; ++seed) {
    Gen g(seed);
    const Index m = g.size(3, 20), n = g.size(3, 20), r = g.size(1, std::min(m, n));
    const Matrix a(DenseMatrix(g.gaussian(m, r) * g.gaussian(r, n)));
    const auto s = spectral_quantities(a);
    const Vector sv = singular_values(a);
    const double tol = rank_tolerance(m, n, sv[0]);
    Index count = 0;
    for (Index i = 0; i < sv.size(); ++i) count += sv[i] > tol;
    CHECK(s.rank == count);
    CHECK(s.rank == r);
    CHECK(s.sigma_max >= s.sigma_min_nonzero);
    CHECK(s.sigma_min_nonzero > 0.0);
  }
}

#include <cstdlib>
#include <filesystem>
#include <sstream>

#include "ashbm/error.hpp"
#include "ashbm/problems.hpp"
#include "doctest.h"
#include "test_support.hpp"

using namespace ashbm;
using testing::Gen;

namespace {

ErrorCode code_of(auto&& fn) {
  try {
    fn();
  } catch (const Error& e) {
    return e.code();
  }
  FAIL("no error thrown");
  return ErrorCode::ConfigError;
}

Matrix parse_mtx(const std::string& text) {
  std::istringstream in(text);
  return read_matrix_market(in);
}

std::filesystem::path data_file(const char* name) {
  const char* dir = std::getenv("ASHBM_DATA_DIR");
  if (!dir) return {};
  std::filesystem::path p = std::filesystem::path(dir) / name;
  return std::filesystem::exists(p) ? p : std::filesystem::path{};
}

}  // namespace

TEST_CASE("kappa = 1 gives unit singular values") {
  const auto sys = generate_gaussian_problem(100, 50, 50, 1.0, 11);
  const Vector sv = singular_values(sys.a);
  CHECK(sv.size() == 50);
  CHECK((sv.array() - 1.0).abs().maxCoeff() <= 1e-10);
  CHECK(spectral_quantities(sys.a).condition_number() == doctest::Approx(1.0).epsilon(1e-10));
}

TEST_CASE("500x100 kappa 5 spectrum stays inside [1, 5]") {
  const auto sys = generate_gaussian_problem(500, 100, 100, 5.0, 7);
  const auto s = spectral_quantities(sys.a);
  CHECK(s.rank == 100);
  CHECK(s.sigma_min_nonzero >= 1.0 - 1e-8);
  CHECK(s.sigma_max <= 5.0 + 1e-8);
}

TEST_CASE("rank-deficient wide problem: V V^T x* is the oracle min-norm solution") {
  const auto sys = generate_gaussian_problem(50, 100, 30, 10.0, 3);
  REQUIRE(sys.min_norm);
  REQUIRE(sys.planted_solution);
  CHECK((*sys.min_norm - *sys.planted_solution).norm() > 1e-3);
  CHECK((matvec(sys.a, *sys.min_norm) - sys.b).norm() <= 1e-10);
  const Vector oracle = min_norm_solution(sys.a, sys.b);
  CHECK(testing::rel_diff(oracle, *sys.min_norm) <= 1e-10);
  CHECK(spectral_quantities(sys.a).rank == 30);
}

TEST_CASE("generator rejects a rank above min(m, n)") {
  CHECK(code_of([] { generate_gaussian_problem(10, 5, 6, 2.0, 1); }) == ErrorCode::InvalidRank);
  CHECK(code_of([] { generate_gaussian_problem(10, 5, 0, 2.0, 1); }) == ErrorCode::InvalidRank);
}

TEST_CASE("property: generated systems satisfy their invariants and are reproducible") {
  for (std::uint64_t seed = 1; seed <= 25; ++seed) {
    Gen g(seed);
    INFO("seed " << seed);
    const Index m = g.size(2, 40), n = g.size(2, 40), r = g.size(1, std::min(m, n));
    const double kappa = g.real(1.0, 20.0);
    const auto sys = generate_gaussian_problem(m, n, r, kappa, seed);
    const double bn = sys.b.norm();
    CHECK((matvec(sys.a, *sys.planted_solution) - sys.b).norm() <= 1e-10 * (1.0 + bn));
    CHECK(sys.consistency_residual <= 1e-8 * (1.0 + bn));
    CHECK(null_space_component(null_space_basis(sys.a), *sys.min_norm) <= 1e-10 * sys.min_norm->norm());
    const auto s = spectral_quantities(sys.a);
    CHECK(s.rank == r);
    CHECK(s.condition_number() <= kappa * (1.0 + 1e-8));

    const auto again = generate_gaussian_problem(m, n, r, kappa, seed);
    CHECK(again.a.dense() == sys.a.dense());
    CHECK(again.b == sys.b);
    CHECK(*again.min_norm == *sys.min_norm);
  }
}

TEST_CASE("attach_min_norm") {
  SUBCASE("keeps a present solution") {
    auto sys = generate_gaussian_problem(20, 10, 10, 2.0, 5);
    const Vector before = *sys.min_norm;
    sys = attach_min_norm(std::move(sys));
    CHECK(*sys.min_norm == before);
  }
  SUBCASE("oracle path matches V V^T x* on a rank-deficient system") {
    auto sys = generate_gaussian_problem(40, 30, 12, 4.0, 9);
    const Vector planted = *sys.min_norm;
    sys.min_norm.reset();
    sys = attach_min_norm(std::move(sys));
    CHECK(testing::rel_diff(*sys.min_norm, planted) <= 1e-10);
  }
  SUBCASE("b pushed out of Range(A) is rejected") {
    auto sys = generate_gaussian_problem(40, 30, 12, 4.0, 9);
    sys.min_norm.reset();
    // direction orthogonal to Range(A)
    const Eigen::MatrixXd d = sys.a.to_dense();
    Eigen::BDCSVD<Eigen::MatrixXd> svd(d, Eigen::ComputeFullU);
    sys.b += 1e-3 * svd.matrixU().col(39);
    CHECK(code_of([&] { attach_min_norm(sys); }) == ErrorCode::InconsistentSystem);
  }
}

TEST_CASE("Matrix Market: 2x2 coordinate diagonal") {
  const Matrix a = parse_mtx("%%MatrixMarket matrix coordinate real general\n% c\n2 2 2\n1 1 1.0\n2 2 2.0\n");
  CHECK(a.is_sparse());
  CHECK(a.rows() == 2);
  CHECK(a.nonzeros() == 2);
  CHECK(a.to_dense()(0, 0) == 1.0);
  CHECK(a.to_dense()(1, 1) == 2.0);
}

TEST_CASE("Matrix Market: symmetric expansion, pattern, skew, duplicates, array") {
  const Matrix sym = parse_mtx("%%MatrixMarket matrix coordinate real symmetric\n3 3 2\n1 1 4\n3 1 2.5\n");
  CHECK(sym.to_dense()(2, 0) == 2.5);
  CHECK(sym.to_dense()(0, 2) == 2.5);
  CHECK(sym.nonzeros() == 3);

  const Matrix skew = parse_mtx("%%MatrixMarket matrix coordinate real skew-symmetric\n2 2 1\n2 1 3\n");
  CHECK(skew.to_dense()(1, 0) == 3.0);
  CHECK(skew.to_dense()(0, 1) == -3.0);

  const Matrix pat = parse_mtx("%%MatrixMarket matrix coordinate pattern general\n2 3 2\n1 3\n2 1\n");
  CHECK(pat.to_dense()(0, 2) == 1.0);
  CHECK(pat.to_dense()(1, 0) == 1.0);

  const Matrix dup = parse_mtx("%%MatrixMarket matrix coordinate integer general\n1 1 2\n1 1 2\n1 1 3\n");
  CHECK(dup.to_dense()(0, 0) == 5.0);

  const Matrix arr = parse_mtx("%%MatrixMarket matrix array real general\n2 2\n1\n2\n3\n4\n");
  CHECK(arr.to_dense()(1, 0) == 2.0);
  CHECK(arr.to_dense()(0, 1) == 3.0);

  const Matrix arr_sym = parse_mtx("%%MatrixMarket matrix array real symmetric\n2 2\n1\n2\n3\n");
  CHECK(arr_sym.to_dense()(0, 1) == 2.0);
  CHECK(arr_sym.to_dense()(1, 1) == 3.0);
}

TEST_CASE("Matrix Market: error paths") {
  CHECK(code_of([] { parse_mtx("%%MatrixMarket matrix coordinate complex general\n1 1 1\n1 1 1 0\n"); }) ==
        ErrorCode::Unsupported);
  CHECK(code_of([] { parse_mtx("%%MatrixMarket matrix coordinate real hermitian\n1 1 1\n1 1 1\n"); }) ==
        ErrorCode::Unsupported);
  CHECK(code_of([] { parse_mtx("%%MatrixMarkt matrix coordinate real general\n1 1 1\n1 1 1\n"); }) ==
        ErrorCode::ParseError);
  CHECK(code_of([] { parse_mtx("%%MatrixMarket matrix coordinate real general\n2 2 2\n1 1 1\n"); }) ==
        ErrorCode::ParseError);
  CHECK(code_of([] { parse_mtx("%%MatrixMarket matrix coordinate real general\n2 2 1\n3 1 1\n"); }) ==
        ErrorCode::ParseError);
  CHECK(code_of([] { parse_mtx(""); }) == ErrorCode::ParseError);
}

TEST_CASE("property: Matrix Market and vector writers round-trip bit for bit") {
  for (std::uint64_t seed = 1; seed <= 15; ++seed) {
    Gen g(seed);
    const Index m = g.size(1, 12), n = g.size(1, 12);
    const DenseMatrix d = g.sparse_pattern(m, n, 0.4);
    for (const Matrix& a : {Matrix(d), testing::to_sparse(d)}) {
      std::stringstream io;
      write_matrix_market(io, a);
      const Matrix back = read_matrix_market(io);
      CHECK(back.to_dense() == d);
    }
    const Vector v = g.gaussian(n);
    std::stringstream vio;
    write_vector(vio, v);
    CHECK(read_vector(vio) == v);
  }
}

TEST_CASE("WorldCities: rank 100 and condition number 6.60 (needs ASHBM_DATA_DIR)") {
  const auto path = data_file("WorldCities.mtx");
  if (path.empty()) {
    MESSAGE("WorldCities.mtx not found under ASHBM_DATA_DIR; skipped");
    return;
  }
  const auto s = spectral_quantities(load_matrix_market(path));
  CHECK(s.rank == 100);
  CHECK(std::abs(s.condition_number() - 6.60) <= 0.01);
}

TEST_CASE("bibd_16_8: 120 rows and 12870 columns (needs ASHBM_DATA_DIR)") {
  const auto path = data_file("bibd_16_8.mtx");
  if (path.empty()) {
    MESSAGE("bibd_16_8.mtx not found under ASHBM_DATA_DIR; skipped");
    return;
  }
  const Matrix a = load_matrix_market(path);
  CHECK(a.rows() == 120);
  CHECK(a.cols() == 12870);
}

#pragma once

#include <cstdint>
#include <filesystem>
#include <iosfwd>
#include <optional>

#include "ashbm/linalg.hpp"

namespace ashbm {

/// A consistent system Ax = b with optional ground truth for error tracking.
struct LinearSystem {
  Matrix a;
  Vector b;
  std::optional<Vector> planted_solution;
  /// A^+ b, the target of every solver started from x0 = 0.
  std::optional<Vector> min_norm;
  /// ||A * min_norm - b||_2, NaN until min_norm is attached.
  double consistency_residual = std::numeric_limits<double>::quiet_NaN();
};

/// A = U D V^T with U (m x r), V (n x r) taken from QR factorizations of
/// standard Gaussian matrices and D = diag(1 + (kappa - 1) * uniform[0,1)).
/// b = A x* for a standard Gaussian x*, and min_norm = V V^T x*.
///
/// Bit-identical for identical arguments within one build.
LinearSystem generate_gaussian_problem(Index m, Index n, Index rank, double kappa, std::uint64_t seed);

/// b = A x* for a standard Gaussian x* drawn from `seed`; min_norm left empty.
LinearSystem consistent_system_for(Matrix a, std::uint64_t seed);

/// Fills min_norm (SVD oracle) and consistency_residual when min_norm is absent.
/// Throws InconsistentSystem when b is not in Range(A).
LinearSystem attach_min_norm(LinearSystem system, double tol = kConsistencyTolerance);

/// Matrix Market reader (coordinate or array; real, integer or pattern;
/// general, symmetric or skew-symmetric). Always returns sparse storage with
/// symmetric halves expanded and duplicates summed.
Matrix read_matrix_market(std::istream& in);
Matrix load_matrix_market(const std::filesystem::path& path);

/// Writes `array real general` for dense matrices and `coordinate real general`
/// for sparse ones, values printed with 17 significant digits.
void write_matrix_market(std::ostream& out, const Matrix& a);
void save_matrix_market(const std::filesystem::path& path, const Matrix& a);

/// Plain text, one value per line.
Vector read_vector(std::istream& in);
Vector load_vector(const std::filesystem::path& path);
void write_vector(std::ostream& out, const Vector& v);
void save_vector(const std::filesystem::path& path, const Vector& v);

}  // namespace ashbm

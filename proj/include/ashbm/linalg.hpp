#pragma once

#include <span>
#include <vector>

#include <Eigen/Dense>
#include <Eigen/SparseCore>

namespace ashbm {

using Index = Eigen::Index;
using Vector = Eigen::VectorXd;
using DenseMatrix = Eigen::Matrix<double, Eigen::Dynamic, Eigen::Dynamic, Eigen::RowMajor>;
using SparseMatrix = Eigen::SparseMatrix<double, Eigen::RowMajor>;
using Triplet = Eigen::Triplet<double>;

/// Real matrix in dense row-major or compressed sparse-row storage.
///
/// Immutable after construction. Squared row norms and the squared Frobenius
/// norm are cached because every sampling scheme needs them.
class Matrix {
 public:
  explicit Matrix(DenseMatrix dense);
  explicit Matrix(SparseMatrix sparse);

  /// Duplicate (row, col) entries are summed.
  static Matrix from_triplets(Index rows, Index cols, const std::vector<Triplet>& entries);

  Index rows() const noexcept { return rows_; }
  Index cols() const noexcept { return cols_; }
  bool is_sparse() const noexcept { return sparse_storage_; }
  Index nonzeros() const noexcept;

  const Vector& row_norms_sq() const noexcept { return row_norms_sq_; }
  double fro_norm_sq() const noexcept { return fro_norm_sq_; }

  const DenseMatrix& dense() const;
  const SparseMatrix& sparse() const;
  DenseMatrix to_dense() const;

  /// A_{i,:} x
  double row_dot(Index i, const Vector& x) const;
  /// y += coef * A_{i,:}^T
  void add_row(Index i, double coef, Vector& y) const;

  /// out[j] = A_{rows[j],:} x
  void rows_dot(std::span<const Index> rows, const Vector& x, Vector& out) const;
  /// y += sum_j coefs[j] * A_{rows[j],:}^T
  void add_rows(std::span<const Index> rows, const Vector& coefs, Vector& y) const;

  /// Dense copy of the selected rows, in the given order.
  DenseMatrix row_block(std::span<const Index> rows) const;

 private:
  void cache_norms();

  Index rows_ = 0;
  Index cols_ = 0;
  bool sparse_storage_ = false;
  DenseMatrix dense_;
  SparseMatrix sparse_;
  Vector row_norms_sq_;
  double fro_norm_sq_ = 0.0;
};

Vector matvec(const Matrix& a, const Vector& x);
Vector matvec_transpose(const Matrix& a, const Vector& y);

struct SpectralSummary {
  double sigma_max = 0.0;
  /// Smallest singular value above the rank tolerance.
  double sigma_min_nonzero = 0.0;
  /// Smallest singular value overall, zero or not; kept for reporting only.
  double sigma_min_all = 0.0;
  Index rank = 0;
  double fro_norm = 0.0;

  double condition_number() const { return sigma_max / sigma_min_nonzero; }
};

/// Singular values of A in descending order (dense SVD oracle).
Vector singular_values(const Matrix& a);

/// sigma > max(m, n) * eps * sigma_max
double rank_tolerance(Index rows, Index cols, double sigma_max);

SpectralSummary spectral_quantities(const Matrix& a);

/// Default tolerance factor: a system counts as consistent when
/// ||A x - b|| <= kConsistencyTolerance * (1 + ||b||).
inline constexpr double kConsistencyTolerance = 1e-8;

/// A^+ b through a thin SVD. Throws InconsistentSystem when the least-squares
/// residual exceeds tol * (1 + ||b||).
Vector min_norm_solution(const Matrix& a, const Vector& b, double tol = kConsistencyTolerance);

/// Orthonormal basis of Null(A) from the SVD (n x (n - rank)).
Eigen::MatrixXd null_space_basis(const Matrix& a);

/// ||P_{Null(A)} x||_2 given a basis from null_space_basis().
double null_space_component(const Eigen::MatrixXd& null_basis, const Vector& x);

}  // namespace ashbm

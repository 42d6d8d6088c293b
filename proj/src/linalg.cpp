#include "ashbm/linalg.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <string>

#include <Eigen/SVD>

#include "ashbm/error.hpp"

namespace ashbm {

namespace {

void check_dim(Index got, Index want, const char* what) {
  if (got != want) {
    throw Error(ErrorCode::DimensionMismatch,
                std::string(what) + ": expected " + std::to_string(want) + ", got " + std::to_string(got));
  }
}

}  // namespace

Matrix::Matrix(DenseMatrix dense)
    : rows_(dense.rows()), cols_(dense.cols()), sparse_storage_(false), dense_(std::move(dense)) {
  cache_norms();
}

Matrix::Matrix(SparseMatrix sparse)
    : rows_(sparse.rows()), cols_(sparse.cols()), sparse_storage_(true), sparse_(std::move(sparse)) {
  sparse_.makeCompressed();
  // Compressed storage built by setFromTriplets / insert keeps each row's
  // column indices sorted; hand-assembled inputs may not.
  for (Index i = 0; i < rows_; ++i) {
    const auto* idx = sparse_.innerIndexPtr();
    for (auto p = sparse_.outerIndexPtr()[i] + 1; p < sparse_.outerIndexPtr()[i + 1]; ++p) {
      if (idx[p] <= idx[p - 1]) {
        throw Error(ErrorCode::ParseError, "sparse row " + std::to_string(i) + " has unsorted column indices");
      }
    }
  }
  cache_norms();
}

Matrix Matrix::from_triplets(Index rows, Index cols, const std::vector<Triplet>& entries) {
  SparseMatrix s(rows, cols);
  s.setFromTriplets(entries.begin(), entries.end());
  return Matrix(std::move(s));
}

Index Matrix::nonzeros() const noexcept { return sparse_storage_ ? sparse_.nonZeros() : rows_ * cols_; }

const DenseMatrix& Matrix::dense() const {
  require(!sparse_storage_, ErrorCode::Unsupported, "matrix is stored sparse");
  return dense_;
}

const SparseMatrix& Matrix::sparse() const {
  require(sparse_storage_, ErrorCode::Unsupported, "matrix is stored dense");
  return sparse_;
}

DenseMatrix Matrix::to_dense() const { return sparse_storage_ ? DenseMatrix(sparse_) : dense_; }

void Matrix::cache_norms() {
  row_norms_sq_.resize(rows_);
  if (sparse_storage_) {
    for (Index i = 0; i < rows_; ++i) row_norms_sq_[i] = sparse_.row(i).squaredNorm();
  } else {
    row_norms_sq_ = dense_.rowwise().squaredNorm();
  }
  fro_norm_sq_ = row_norms_sq_.sum();
}

double Matrix::row_dot(Index i, const Vector& x) const {
  if (sparse_storage_) return sparse_.row(i).dot(x);
  return dense_.row(i).dot(x);
}

void Matrix::add_row(Index i, double coef, Vector& y) const {
  if (sparse_storage_) {
    for (SparseMatrix::InnerIterator it(sparse_, i); it; ++it) y[it.index()] += coef * it.value();
  } else {
    y.noalias() += coef * dense_.row(i).transpose();
  }
}

void Matrix::rows_dot(std::span<const Index> rows, const Vector& x, Vector& out) const {
  out.resize(static_cast<Index>(rows.size()));
  if (sparse_storage_) {
    for (std::size_t j = 0; j < rows.size(); ++j) out[static_cast<Index>(j)] = sparse_.row(rows[j]).dot(x);
  } else {
    for (std::size_t j = 0; j < rows.size(); ++j) out[static_cast<Index>(j)] = dense_.row(rows[j]).dot(x);
  }
}

void Matrix::add_rows(std::span<const Index> rows, const Vector& coefs, Vector& y) const {
  for (std::size_t j = 0; j < rows.size(); ++j) add_row(rows[j], coefs[static_cast<Index>(j)], y);
}

DenseMatrix Matrix::row_block(std::span<const Index> rows) const {
  DenseMatrix block(static_cast<Index>(rows.size()), cols_);
  for (std::size_t j = 0; j < rows.size(); ++j) {
    if (sparse_storage_) {
      block.row(static_cast<Index>(j)) = sparse_.row(rows[j]);
    } else {
      block.row(static_cast<Index>(j)) = dense_.row(rows[j]);
    }
  }
  return block;
}

Vector matvec(const Matrix& a, const Vector& x) {
  check_dim(x.size(), a.cols(), "matvec");
  if (a.is_sparse()) return a.sparse() * x;
  return a.dense() * x;
}

Vector matvec_transpose(const Matrix& a, const Vector& y) {
  check_dim(y.size(), a.rows(), "matvec_transpose");
  if (a.is_sparse()) return a.sparse().transpose() * y;
  return a.dense().transpose() * y;
}

Vector singular_values(const Matrix& a) {
  Eigen::BDCSVD<Eigen::MatrixXd> svd(Eigen::MatrixXd(a.to_dense()));
  return svd.singularValues();
}

double rank_tolerance(Index rows, Index cols, double sigma_max) {
  return static_cast<double>(std::max(rows, cols)) * std::numeric_limits<double>::epsilon() * sigma_max;
}

namespace {

Index numerical_rank(const Vector& sv, Index rows, Index cols) {
  if (sv.size() == 0) return 0;
  const double tol = rank_tolerance(rows, cols, sv[0]);
  Index r = 0;
  while (r < sv.size() && sv[r] > tol) ++r;
  return r;
}

}  // namespace

SpectralSummary spectral_quantities(const Matrix& a) {
  require(a.fro_norm_sq() > 0.0, ErrorCode::ZeroMatrix, "spectral quantities of a zero matrix");
  const Vector sv = singular_values(a);
  SpectralSummary out;
  out.rank = numerical_rank(sv, a.rows(), a.cols());
  out.sigma_max = sv[0];
  out.sigma_min_nonzero = sv[out.rank - 1];
  out.sigma_min_all = std::min(a.rows(), a.cols()) > sv.size() ? 0.0 : sv[sv.size() - 1];
  out.fro_norm = std::sqrt(a.fro_norm_sq());
  return out;
}

Vector min_norm_solution(const Matrix& a, const Vector& b, double tol) {
  check_dim(b.size(), a.rows(), "min_norm_solution");
  if (a.fro_norm_sq() == 0.0) {
    require(b.norm() <= tol * (1.0 + b.norm()), ErrorCode::InconsistentSystem, "zero matrix with nonzero rhs");
    return Vector::Zero(a.cols());
  }
  const Eigen::MatrixXd dense = a.to_dense();
  Eigen::BDCSVD<Eigen::MatrixXd> svd(dense, Eigen::ComputeThinU | Eigen::ComputeThinV);
  const Vector& sv = svd.singularValues();
  const Index r = numerical_rank(sv, a.rows(), a.cols());

  const auto u = svd.matrixU().leftCols(r);
  const auto v = svd.matrixV().leftCols(r);
  const Vector coeffs = (u.transpose() * b).cwiseQuotient(sv.head(r));
  Vector x = v * coeffs;

  const double residual = (dense * x - b).norm();
  if (residual > tol * (1.0 + b.norm())) {
    throw Error(ErrorCode::InconsistentSystem,
                "least-squares residual " + std::to_string(residual) + " exceeds consistency tolerance");
  }
  return x;
}

Eigen::MatrixXd null_space_basis(const Matrix& a) {
  const Eigen::MatrixXd dense = a.to_dense();
  Eigen::BDCSVD<Eigen::MatrixXd> svd(dense, Eigen::ComputeFullV);
  const Vector& sv = svd.singularValues();
  const Index r = sv.size() == 0 ? 0 : numerical_rank(sv, a.rows(), a.cols());
  return svd.matrixV().rightCols(a.cols() - r);
}

double null_space_component(const Eigen::MatrixXd& null_basis, const Vector& x) {
  if (null_basis.cols() == 0) return 0.0;
  return (null_basis.transpose() * x).norm();
}

}  // namespace ashbm

#pragma once

#include <Eigen/Dense>

#include <cmath>
#include <cstdint>
#include <span>
#include <variant>
#include <vector>

#include "qreg/errors.hpp"

namespace qreg {

using Index = Eigen::Index;

/// Row-major dense storage; houses A, b (as n x 1) and sketches.
template <typename Scalar>
using DenseMatrixT = Eigen::Matrix<Scalar, Eigen::Dynamic, Eigen::Dynamic, Eigen::RowMajor>;
using DenseMatrix = DenseMatrixT<double>;
using Vector = Eigen::VectorXd;
/// Column-major d x d factors (R, R^{-1}, normal matrices).
using SmallMatrix = Eigen::MatrixXd;

struct Triple {
  std::int64_t row;
  std::int32_t col;
  double value;
};

/// Sparse matrix as (row, col)-sorted triples with a per-row offset table.
class SparseMatrix {
 public:
  SparseMatrix() = default;
  /// Validates ordering, ranges, and that values are finite and nonzero.
  SparseMatrix(Index rows, Index cols, std::vector<Triple> entries);

  Index rows() const { return rows_; }
  Index cols() const { return cols_; }
  Index nnz() const { return static_cast<Index>(entries_.size()); }
  std::span<const Triple> entries() const { return entries_; }
  std::span<const Triple> row(Index i) const {
    return {entries_.data() + row_ptr_[i], entries_.data() + row_ptr_[i + 1]};
  }
  DenseMatrix to_dense() const;

 private:
  Index rows_ = 0;
  Index cols_ = 0;
  std::vector<Triple> entries_;
  std::vector<Index> row_ptr_{0};
};

/// A design matrix stored either densely or sparsely.
class Design {
 public:
  Design() : storage_(DenseMatrix(0, 0)) {}
  explicit Design(DenseMatrix m);
  explicit Design(SparseMatrix m) : storage_(std::move(m)) {}

  Index rows() const;
  Index cols() const;
  Index nnz() const;
  bool is_sparse() const { return std::holds_alternative<SparseMatrix>(storage_); }
  const DenseMatrix& dense() const { return std::get<DenseMatrix>(storage_); }
  const SparseMatrix& sparse() const { return std::get<SparseMatrix>(storage_); }
  DenseMatrix to_dense() const;

  template <typename F>
  decltype(auto) visit(F&& f) const {
    return std::visit(std::forward<F>(f), storage_);
  }

 private:
  std::variant<DenseMatrix, SparseMatrix> storage_;
};

/// Calls f(col, value) for the stored entries of row i, ascending col.
template <typename F>
inline void for_each_entry(const DenseMatrix& m, Index i, F&& f) {
  const double* p = m.data() + i * m.cols();
  for (Index j = 0; j < m.cols(); ++j) f(j, p[j]);
}

template <typename F>
inline void for_each_entry(const SparseMatrix& m, Index i, F&& f) {
  for (const Triple& t : m.row(i)) f(static_cast<Index>(t.col), t.value);
}

// ---------------------------------------------------------------- loss

/// rho_tau(z): tau*z for z >= 0, (tau-1)*z otherwise.
template <typename Scalar>
Scalar quantile_loss(Scalar z, Scalar tau) {
  if (!std::isfinite(z)) throw InputError("quantile_loss: non-finite argument");
  return z >= Scalar(0) ? tau * z : (tau - Scalar(1)) * z;
}

/// Sum of the quantile loss over the entries of v, accumulated in index order.
template <typename Derived>
typename Derived::Scalar rho(const Eigen::MatrixBase<Derived>& v, double tau) {
  using Scalar = typename Derived::Scalar;
  Scalar sum(0);
  for (Index i = 0; i < v.size(); ++i) sum += quantile_loss<Scalar>(v(i), Scalar(tau));
  return sum;
}

void check_tau(double tau);

// ---------------------------------------------------------------- problems

/// minimize_x rho_tau(b - A x).
struct QuantileProblem {
  QuantileProblem(Design A, Vector b, double tau);

  Index rows() const { return A.rows(); }
  Index cols() const { return A.cols(); }

  Design A;
  Vector b;
  double tau;
};

/// Constrained form: minimize rho_tau(Aaug z) subject to c^T z = 1, Aaug = [b, -A].
struct AugmentedProblem {
  Design Aaug;
  Vector c;
  double tau;
};

AugmentedProblem augment(const QuantileProblem& problem);
/// Augmented rows of a block: [b, -A].
Design augment_rows(const Design& A, const Vector& b);
/// Maps an augmented point back to x; z is normalised so that z(0) = 1.
Vector reduce(const Vector& z);

/// (A, b, tau) -> (-A, -b, 1 - tau). Same minimisers, same objective values.
QuantileProblem flip_quantile(const QuantileProblem& problem);

double objective(const QuantileProblem& problem, const Vector& x);

// ---------------------------------------------------------------- products

Vector multiply(const Design& A, const Vector& x);
Vector transpose_multiply(const Design& A, const Vector& v);
/// A^T diag(w) A.
SmallMatrix weighted_gram(const Design& A, const Vector& w);
/// A * M for a small right factor, returned dense.
DenseMatrix right_multiply(const Design& A, const SmallMatrix& M);
/// Element-wise l1 norm.
double abs_sum(const Design& A);
/// Rows [begin, end) copied into a new design with the same storage kind.
Design row_block(const Design& A, Index begin, Index end);

/// sigma_min / sigma_max of a tall matrix (via QR then SVD of the R factor).
double singular_value_ratio(const DenseMatrix& M);

}  // namespace qreg

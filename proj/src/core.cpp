#include "qreg/core.hpp"

#include <Eigen/SVD>

#include <string>

#include "qreg/row_source.hpp"

namespace qreg {

SparseMatrix::SparseMatrix(Index rows, Index cols, std::vector<Triple> entries)
    : rows_(rows), cols_(cols), entries_(std::move(entries)) {
  if (rows < 0 || cols < 0) throw InputError("SparseMatrix: negative dimension");
  row_ptr_.assign(static_cast<size_t>(rows) + 1, 0);
  for (size_t k = 0; k < entries_.size(); ++k) {
    const Triple& t = entries_[k];
    if (t.row < 0 || t.row >= rows || t.col < 0 || t.col >= cols)
      throw InputError("SparseMatrix: entry " + std::to_string(k) + " out of range");
    if (!std::isfinite(t.value) || t.value == 0.0)
      throw InputError("SparseMatrix: entry " + std::to_string(k) + " is zero or non-finite");
    if (k > 0) {
      const Triple& p = entries_[k - 1];
      if (p.row > t.row || (p.row == t.row && p.col >= t.col))
        throw InputError("SparseMatrix: entries unsorted or duplicated at " + std::to_string(k));
    }
    ++row_ptr_[static_cast<size_t>(t.row) + 1];
  }
  for (Index i = 0; i < rows; ++i) row_ptr_[i + 1] += row_ptr_[i];
}

DenseMatrix SparseMatrix::to_dense() const {
  DenseMatrix out = DenseMatrix::Zero(rows_, cols_);
  for (const Triple& t : entries_) out(t.row, t.col) = t.value;
  return out;
}

Design::Design(DenseMatrix m) : storage_(std::move(m)) {
  if (!std::get<DenseMatrix>(storage_).allFinite()) throw InputError("Design: non-finite value");
}

Index Design::rows() const {
  return visit([](const auto& m) { return m.rows(); });
}

Index Design::cols() const {
  return visit([](const auto& m) { return m.cols(); });
}

Index Design::nnz() const {
  if (is_sparse()) return sparse().nnz();
  const DenseMatrix& m = dense();
  return static_cast<Index>((m.array() != 0.0).count());
}

DenseMatrix Design::to_dense() const {
  return is_sparse() ? sparse().to_dense() : dense();
}

void check_tau(double tau) {
  if (!(tau > 0.0 && tau < 1.0)) throw InputError("quantile tau must lie in (0, 1)");
}

QuantileProblem::QuantileProblem(Design A_, Vector b_, double tau_)
    : A(std::move(A_)), b(std::move(b_)), tau(tau_) {
  check_tau(tau);
  if (A.cols() < 1) throw InputError("QuantileProblem: design needs at least one column");
  if (A.rows() < A.cols()) throw InputError("QuantileProblem: need n >= d");
  if (b.size() != A.rows()) throw InputError("QuantileProblem: b length does not match A rows");
  if (!b.allFinite()) throw InputError("QuantileProblem: non-finite response");
}

Design augment_rows(const Design& A, const Vector& b) {
  if (b.size() != A.rows()) throw InputError("augment: b length does not match A rows");
  if (!A.is_sparse()) {
    const DenseMatrix& m = A.dense();
    DenseMatrix out(m.rows(), m.cols() + 1);
    out.col(0) = b;
    out.rightCols(m.cols()) = -m;
    return Design(std::move(out));
  }
  const SparseMatrix& m = A.sparse();
  std::vector<Triple> entries;
  entries.reserve(static_cast<size_t>(m.nnz() + m.rows()));
  for (Index i = 0; i < m.rows(); ++i) {
    if (b(i) != 0.0) entries.push_back({i, 0, b(i)});
    for (const Triple& t : m.row(i)) entries.push_back({i, t.col + 1, -t.value});
  }
  return Design(SparseMatrix(m.rows(), m.cols() + 1, std::move(entries)));
}

AugmentedProblem augment(const QuantileProblem& problem) {
  Vector c = Vector::Zero(problem.cols() + 1);
  c(0) = 1.0;
  return {augment_rows(problem.A, problem.b), std::move(c), problem.tau};
}

Vector reduce(const Vector& z) {
  if (z.size() < 2) throw InputError("reduce: augmented vector needs at least two entries");
  if (z(0) == 0.0 || !std::isfinite(z(0))) throw InputError("reduce: first coordinate must be nonzero");
  return z.tail(z.size() - 1) / z(0);
}

QuantileProblem flip_quantile(const QuantileProblem& problem) {
  Design negA = problem.A.visit([](const auto& m) -> Design {
    using M = std::decay_t<decltype(m)>;
    if constexpr (std::is_same_v<M, DenseMatrix>) {
      return Design(DenseMatrix(-m));
    } else {
      std::vector<Triple> e(m.entries().begin(), m.entries().end());
      for (Triple& t : e) t.value = -t.value;
      return Design(SparseMatrix(m.rows(), m.cols(), std::move(e)));
    }
  });
  return QuantileProblem(std::move(negA), -problem.b, 1.0 - problem.tau);
}

double objective(const QuantileProblem& problem, const Vector& x) {
  if (x.size() != problem.cols()) throw InputError("objective: x has the wrong length");
  const Vector r = problem.b - multiply(problem.A, x);
  return rho(r, problem.tau);
}

Vector multiply(const Design& A, const Vector& x) {
  if (x.size() != A.cols()) throw InputError("multiply: dimension mismatch");
  return A.visit([&](const auto& m) -> Vector {
    using M = std::decay_t<decltype(m)>;
    if constexpr (std::is_same_v<M, DenseMatrix>) {
      return m * x;
    } else {
      Vector y = Vector::Zero(m.rows());
      for (Index i = 0; i < m.rows(); ++i) {
        double s = 0.0;
        for (const Triple& t : m.row(i)) s += t.value * x(t.col);
        y(i) = s;
      }
      return y;
    }
  });
}

Vector transpose_multiply(const Design& A, const Vector& v) {
  if (v.size() != A.rows()) throw InputError("transpose_multiply: dimension mismatch");
  return A.visit([&](const auto& m) -> Vector {
    using M = std::decay_t<decltype(m)>;
    if constexpr (std::is_same_v<M, DenseMatrix>) {
      return m.transpose() * v;
    } else {
      Vector y = Vector::Zero(m.cols());
      for (const Triple& t : m.entries()) y(t.col) += t.value * v(t.row);
      return y;
    }
  });
}

SmallMatrix weighted_gram(const Design& A, const Vector& w) {
  if (w.size() != A.rows()) throw InputError("weighted_gram: dimension mismatch");
  return A.visit([&](const auto& m) -> SmallMatrix {
    using M = std::decay_t<decltype(m)>;
    if constexpr (std::is_same_v<M, DenseMatrix>) {
      SmallMatrix g = SmallMatrix::Zero(m.cols(), m.cols());
      g.selfadjointView<Eigen::Lower>().rankUpdate(m.transpose() * w.cwiseSqrt().asDiagonal());
      return g.selfadjointView<Eigen::Lower>();
    } else {
      SmallMatrix g = SmallMatrix::Zero(m.cols(), m.cols());
      for (Index i = 0; i < m.rows(); ++i) {
        auto row = m.row(i);
        for (const Triple& p : row)
          for (const Triple& q : row) g(p.col, q.col) += w(i) * p.value * q.value;
      }
      return g;
    }
  });
}

DenseMatrix right_multiply(const Design& A, const SmallMatrix& M) {
  if (M.rows() != A.cols()) throw InputError("right_multiply: dimension mismatch");
  return A.visit([&](const auto& m) -> DenseMatrix {
    using T = std::decay_t<decltype(m)>;
    if constexpr (std::is_same_v<T, DenseMatrix>) {
      return m * M;
    } else {
      DenseMatrix out = DenseMatrix::Zero(m.rows(), M.cols());
      for (const Triple& t : m.entries()) out.row(t.row) += t.value * M.row(t.col);
      return out;
    }
  });
}

double abs_sum(const Design& A) {
  return A.visit([](const auto& m) -> double {
    using T = std::decay_t<decltype(m)>;
    if constexpr (std::is_same_v<T, DenseMatrix>) {
      return m.cwiseAbs().sum();
    } else {
      double s = 0.0;
      for (const Triple& t : m.entries()) s += std::abs(t.value);
      return s;
    }
  });
}

Design row_block(const Design& A, Index begin, Index end) {
  if (begin < 0 || end > A.rows() || begin > end) throw InputError("row_block: bad range");
  return A.visit([&](const auto& m) -> Design {
    using T = std::decay_t<decltype(m)>;
    if constexpr (std::is_same_v<T, DenseMatrix>) {
      return Design(DenseMatrix(m.middleRows(begin, end - begin)));
    } else {
      std::vector<Triple> e;
      for (Index i = begin; i < end; ++i)
        for (const Triple& t : m.row(i)) e.push_back({i - begin, t.col, t.value});
      return Design(SparseMatrix(end - begin, m.cols(), std::move(e)));
    }
  });
}

double singular_value_ratio(const DenseMatrix& M) {
  if (M.rows() == 0 || M.cols() == 0) return 0.0;
  SmallMatrix R;
  if (M.rows() > M.cols()) {
    Eigen::HouseholderQR<SmallMatrix> qr{SmallMatrix(M)};
    R = qr.matrixQR().topRows(M.cols()).triangularView<Eigen::Upper>();
  } else {
    R = M;
  }
  Eigen::JacobiSVD<SmallMatrix> svd(R);
  const Vector& sv = svd.singularValues();
  if (sv(0) == 0.0) return 0.0;
  if (sv.size() < M.cols()) return 0.0;
  return sv(sv.size() - 1) / sv(0);
}

// ---------------------------------------------------------------- sources

void DesignSource::for_each_block(const BlockFn& fn) const {
  const Index n = m_.rows();
  if (block_rows_ <= 0 || block_rows_ >= n) {
    fn(0, m_);
    return;
  }
  for (Index begin = 0; begin < n; begin += block_rows_) {
    const Index end = std::min(n, begin + block_rows_);
    fn(begin, row_block(m_, begin, end));
  }
}

void InMemoryProblemSource::for_each_block(const BlockFn& fn) const {
  const Index n = A_.rows();
  if (block_rows_ <= 0 || block_rows_ >= n) {
    fn(0, A_, b_);
    return;
  }
  for (Index begin = 0; begin < n; begin += block_rows_) {
    const Index end = std::min(n, begin + block_rows_);
    fn(begin, row_block(A_, begin, end), Vector(b_.segment(begin, end - begin)));
  }
}

void AugmentedSource::for_each_block(const BlockFn& fn) const {
  src_.for_each_block([&](Index row_begin, const Design& A, const Vector& b) {
    fn(row_begin, augment_rows(A, b));
  });
}

}  // namespace qreg

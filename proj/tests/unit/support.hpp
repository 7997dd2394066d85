#pragma once

#include <vector>

#include "qreg/core.hpp"
#include "qreg/rng.hpp"

namespace qreg::test {

inline DenseMatrix gaussian_matrix(Index n, Index d, rng::Stream& rng) {
  DenseMatrix m(n, d);
  for (Index i = 0; i < n; ++i)
    for (Index j = 0; j < d; ++j) m(i, j) = rng.normal();
  return m;
}

inline Vector gaussian_vector(Index n, rng::Stream& rng) {
  Vector v(n);
  for (Index i = 0; i < n; ++i) v(i) = rng.normal();
  return v;
}

/// Quantile loss written out with branches, independent of the library template.
inline double loss_oracle(double z, double tau) { return z >= 0 ? tau * z : -(1 - tau) * z; }

inline double rho_oracle(const std::vector<double>& v, double tau) {
  double s = 0;
  for (double z : v) s += loss_oracle(z, tau);
  return s;
}

/// rho_tau(b - A x) with explicit loops over a dense copy.
inline double objective_oracle(const DenseMatrix& A, const Vector& b, const Vector& x, double tau) {
  double s = 0;
  for (Index i = 0; i < A.rows(); ++i) {
    double r = b(i);
    for (Index j = 0; j < A.cols(); ++j) r -= A(i, j) * x(j);
    s += loss_oracle(r, tau);
  }
  return s;
}

/// Dense matrix with exactly one value per row, as a sparse design.
inline SparseMatrix to_sparse(const DenseMatrix& m) {
  std::vector<Triple> t;
  for (Index i = 0; i < m.rows(); ++i)
    for (Index j = 0; j < m.cols(); ++j)
      if (m(i, j) != 0.0) t.push_back({i, static_cast<std::int32_t>(j), m(i, j)});
  return SparseMatrix(m.rows(), m.cols(), std::move(t));
}

}  // namespace qreg::test

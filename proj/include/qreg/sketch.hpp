#pragma once

#include <optional>
#include <utility>
#include <vector>

#include "qreg/core.hpp"
#include "qreg/rng.hpp"
#include "qreg/row_source.hpp"

namespace qreg {

/// Standard Cauchy variate tan(pi (u - 1/2)) for u in (0, 1).
inline double cauchy_from_uniform(double u) { return std::tan(M_PI * (u - 0.5)); }
double sample_cauchy(rng::Stream& rng);

/// Pi_1 = S C: input row i goes to output row target[i] scaled by the Cauchy variate scale[i].
struct SparseCauchyTransform {
  Index r1 = 0;
  Index n = 0;
  std::vector<std::int32_t> target;
  std::vector<double> scale;
};

/// max(64, ceil(8 d ln(d+1)) + d).
Index default_sct_rows(Index d);
/// ceil(8 d ln(d+1)).
Index default_dense_cauchy_rows(Index d);

/// Row i draws its (target, scale) pair from its own counter sequence, so any row range
/// can be regenerated independently.
SparseCauchyTransform build_sct(Index n, Index r1, rng::Stream& rng);

/// Pi_1 A in O(nnz(A)). Each output row accumulates its inputs in ascending row order;
/// workers own disjoint output rows, so the result is bit-identical for any worker count
/// and any blocking of the input.
DenseMatrix apply_sct(const SparseCauchyTransform& sct, const Design& A, const PassPlan& plan = {});
DenseMatrix apply_sct(const SparseCauchyTransform& sct, const RowSource& src, const PassPlan& plan = {});

/// Dense r x n Cauchy matrix. Either explicit values, or generated column-by-column from a key.
class DenseCauchyTransform {
 public:
  DenseCauchyTransform(Index r, Index n, rng::Key key) : r_(r), n_(n), key_(key) {}
  explicit DenseCauchyTransform(DenseMatrix values);

  Index rows() const { return r_; }
  Index cols() const { return n_; }
  /// Writes column i (r values) to out.
  void column(Index i, double* out) const;
  DenseMatrix materialize() const;

 private:
  Index r_;
  Index n_;
  rng::Key key_{};
  std::optional<DenseMatrix> values_;
};

DenseCauchyTransform build_dense_cauchy(Index r, Index n, rng::Stream& rng);
DenseMatrix apply_dense_cauchy(const DenseCauchyTransform& t, const Design& A, const PassPlan& plan = {});
DenseMatrix apply_dense_cauchy(const DenseCauchyTransform& t, const RowSource& src,
                               const PassPlan& plan = {});

/// Min and max of ||E x||_1 / ||A x||_1 over `trials` random unit directions.
/// A sampled certificate of embedding distortion, not a proof.
std::pair<double, double> measure_distortion(const DenseMatrix& embedA, const Design& A, Index trials,
                                             rng::Stream& rng);

/// Uniform random direction on the unit l2 sphere.
Vector random_unit_vector(Index d, rng::Stream& rng);

}  // namespace qreg

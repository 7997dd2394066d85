#pragma once

#include <optional>
#include <vector>

#include "qreg/core.hpp"
#include "qreg/rng.hpp"
#include "qreg/row_source.hpp"

namespace qreg {

enum class NormMode { estimated, exact };

struct RowNormEstimates {
  Vector lambda;
  NormMode mode = NormMode::exact;
  /// Projection width; 0 for exact norms.
  Index r2 = 0;
};

/// ceil(15 ln(40 n)).
Index row_norm_projection_width(Index n);

/// lambda_i = median_j |(A R^{-1} Pi_2)_{ij}| with Pi_2 a d x r2 Cauchy matrix.
/// r2 = 0 selects row_norm_projection_width(n).
RowNormEstimates estimate_row_norms(const Design& A, const SmallMatrix& R, rng::Stream& rng, Index r2 = 0);
/// lambda_i = ||(A R^{-1})_i||_1, row by row.
RowNormEstimates exact_row_norms(const Design& A, const SmallMatrix& R);

/// ceil( mu * C kappa / eps^2 * (d ln(mu 18 / eps) + ln 80) ), mu = tau / (1 - tau).
/// C = 81 for estimated norms and 27 for exact norms.
Index theoretical_sample_size(double tau, double kappa, Index d, double eps,
                              NormMode mode = NormMode::estimated);

struct SamplingPlan {
  Vector probabilities;
  Index s_target = 0;
  double expected_size = 0.0;
};

/// p_i = min{1, s lambda_i / sum(lambda)}.
SamplingPlan sampling_probabilities(const RowNormEstimates& norms, Index s);
/// p_i = min{1, s / n}.
SamplingPlan uniform_probabilities(Index n, Index s);

/// Weighted row subset S A, S b.
struct SampledProblem {
  std::vector<Index> row_indices;
  Vector weights;
  DenseMatrix SA;
  Vector Sb;
  double tau = 0.5;

  Index size() const { return static_cast<Index>(row_indices.size()); }
  QuantileProblem as_problem() const;
};

/// Independent Bernoulli(p_i) per row; selected rows scaled by 1/p_i.
/// Throws SamplingError when the sample is empty or rank deficient.
SampledProblem draw_sample(const SamplingPlan& plan, const QuantileProblem& problem, rng::Stream& rng);

/// max |rho(S Aaug z) - rho(Aaug z)| / rho(Aaug z) over random unit z (and z = (1, x) when
/// x is given), where Aaug = [b, -A].
double verify_distortion(const SampledProblem& sampled, const QuantileProblem& problem, Index test_points,
                         rng::Stream& rng, const std::optional<Vector>& x = std::nullopt);

// ---------------------------------------------------------------- streaming passes

/// How a pass computes lambda_i for a row of M.
class RowNormRule {
 public:
  enum class Kind { estimated, exact, uniform };

  static RowNormRule exact(const SmallMatrix& R);
  /// Draws Pi_2 (d x r2) from rng; r2 = 0 selects row_norm_projection_width(n).
  static RowNormRule estimated(const SmallMatrix& R, Index n, rng::Stream& rng, Index r2 = 0);
  static RowNormRule uniform(Index d);

  Kind kind() const { return kind_; }
  Index width() const { return static_cast<Index>(P_.cols()); }
  /// lambda for every row of a block (rows processed in parallel, values are per-row).
  Vector compute(const Design& block, int workers) const;

 private:
  Kind kind_ = Kind::uniform;
  /// R^{-1} for exact norms, R^{-1} Pi_2 for estimated ones.
  DenseMatrix P_;
};

/// Pass A: sum of lambda over all rows, folded in ascending row order.
double sum_row_norms(const RowSource& src, const RowNormRule& rule, const PassPlan& plan = {});

struct WeightedRows {
  std::vector<Index> rows;
  Vector weights;
  /// Selected rows of M, each scaled by its weight.
  DenseMatrix values;
  double expected_size = 0.0;
};

/// Pass B: row i kept iff u_i < p_i, u_i drawn from counter sequence i of `key`.
WeightedRows sample_rows(const RowSource& src, const RowNormRule& rule, double lambda_sum, Index s,
                         rng::Key key, const PassPlan& plan = {});

/// Splits weighted augmented rows [b, -A] / p back into a sampled problem.
SampledProblem to_sampled_problem(WeightedRows rows, double tau);

/// Inverse of a d x d factor (triangular solve when upper triangular).
SmallMatrix invert_factor(const SmallMatrix& R);

}  // namespace qreg

#include "qreg/sampling.hpp"

#include <algorithm>
#include <cmath>
#include <limits>

#include "qreg/sketch.hpp"

namespace qreg {

Index row_norm_projection_width(Index n) {
  if (n < 1) throw InputError("row_norm_projection_width: n must be positive");
  return static_cast<Index>(std::ceil(15.0 * std::log(40.0 * static_cast<double>(n))));
}

SmallMatrix invert_factor(const SmallMatrix& R) {
  if (R.rows() != R.cols()) throw InputError("invert_factor: R must be square");
  const SmallMatrix I = SmallMatrix::Identity(R.rows(), R.cols());
  const bool upper = R.isUpperTriangular(0.0);
  if (upper) {
    for (Index j = 0; j < R.rows(); ++j)
      if (R(j, j) == 0.0) throw NumericalError("invert_factor: singular R");
    return R.triangularView<Eigen::Upper>().solve(I);
  }
  Eigen::FullPivLU<SmallMatrix> lu(R);
  if (!lu.isInvertible()) throw NumericalError("invert_factor: singular R");
  return lu.inverse();
}

// ---------------------------------------------------------------- rules

RowNormRule RowNormRule::exact(const SmallMatrix& R) {
  RowNormRule rule;
  rule.kind_ = Kind::exact;
  rule.P_ = invert_factor(R);
  return rule;
}

RowNormRule RowNormRule::estimated(const SmallMatrix& R, Index n, rng::Stream& rng, Index r2) {
  if (r2 <= 0) r2 = row_norm_projection_width(n);
  const Index d = R.rows();
  SmallMatrix Pi(d, r2);
  for (Index j = 0; j < d; ++j)
    for (Index k = 0; k < r2; ++k) Pi(j, k) = sample_cauchy(rng);
  RowNormRule rule;
  rule.kind_ = Kind::estimated;
  rule.P_ = invert_factor(R) * Pi;
  return rule;
}

RowNormRule RowNormRule::uniform(Index d) {
  RowNormRule rule;
  rule.kind_ = Kind::uniform;
  rule.P_ = DenseMatrix::Zero(d, 0);
  return rule;
}

Vector RowNormRule::compute(const Design& block, int workers) const {
  const Index n = block.rows();
  Vector lambda(n);
  if (kind_ == Kind::uniform) {
    lambda.setOnes();
    return lambda;
  }
  if (block.cols() != P_.rows()) throw InputError("row norms: R does not match the column count");
  const Index w = P_.cols();
  block.visit([&](const auto& m) {
    parallel_ranges(workers, n, [&](Index lo, Index hi, int) {
      std::vector<double> acc(static_cast<size_t>(w));
      for (Index i = lo; i < hi; ++i) {
        std::fill(acc.begin(), acc.end(), 0.0);
        for_each_entry(m, i, [&](Index j, double v) {
          const double* p = P_.data() + j * w;
          for (Index k = 0; k < w; ++k) acc[static_cast<size_t>(k)] += v * p[k];
        });
        if (kind_ == Kind::exact) {
          double s = 0.0;
          for (double a : acc) s += std::abs(a);
          lambda(i) = s;
        } else {
          for (double& a : acc) a = std::abs(a);
          const size_t mid = acc.size() / 2;
          std::nth_element(acc.begin(), acc.begin() + static_cast<std::ptrdiff_t>(mid), acc.end());
          const double upper = acc[mid];
          if (acc.size() % 2 == 1) {
            lambda(i) = upper;
          } else {
            const double lower =
                *std::max_element(acc.begin(), acc.begin() + static_cast<std::ptrdiff_t>(mid));
            lambda(i) = 0.5 * (lower + upper);
          }
        }
      }
    });
  });
  return lambda;
}

RowNormEstimates estimate_row_norms(const Design& A, const SmallMatrix& R, rng::Stream& rng, Index r2) {
  const RowNormRule rule = RowNormRule::estimated(R, A.rows(), rng, r2);
  return {rule.compute(A, 1), NormMode::estimated, rule.width()};
}

RowNormEstimates exact_row_norms(const Design& A, const SmallMatrix& R) {
  return {RowNormRule::exact(R).compute(A, 1), NormMode::exact, 0};
}

// ---------------------------------------------------------------- sizes and plans

Index theoretical_sample_size(double tau, double kappa, Index d, double eps, NormMode mode) {
  if (!(eps > 0.0 && eps <= 0.5)) throw InputError("theoretical_sample_size: eps must lie in (0, 1/2]");
  if (!(tau >= 0.5 && tau < 1.0)) throw InputError("theoretical_sample_size: tau must lie in [1/2, 1)");
  if (!(kappa > 0.0) || !std::isfinite(kappa)) throw InputError("theoretical_sample_size: kappa must be positive");
  if (d < 1) throw InputError("theoretical_sample_size: d must be positive");
  const double mu = tau / (1.0 - tau);
  const double c = mode == NormMode::estimated ? 81.0 : 27.0;
  const double s = mu * c * kappa / (eps * eps) *
                   (static_cast<double>(d) * std::log(mu * 18.0 / eps) + std::log(80.0));
  const double cap = static_cast<double>(std::numeric_limits<Index>::max() / 2);
  return static_cast<Index>(std::ceil(std::min(s, cap)));
}

SamplingPlan sampling_probabilities(const RowNormEstimates& norms, Index s) {
  if (s < 1) throw InputError("sampling_probabilities: s must be at least 1");
  const Vector& lambda = norms.lambda;
  double total = 0.0;
  for (Index i = 0; i < lambda.size(); ++i) {
    if (!(lambda(i) >= 0.0) || !std::isfinite(lambda(i)))
      throw InputError("sampling_probabilities: row norms must be finite and nonnegative");
    total += lambda(i);
  }
  if (total <= 0.0) throw SamplingError("sampling_probabilities: all row norms are zero (rank loss upstream)");
  SamplingPlan plan;
  plan.s_target = s;
  plan.probabilities.resize(lambda.size());
  const double sd = static_cast<double>(s);
  for (Index i = 0; i < lambda.size(); ++i) plan.probabilities(i) = std::min(1.0, sd * lambda(i) / total);
  plan.expected_size = plan.probabilities.sum();
  return plan;
}

SamplingPlan uniform_probabilities(Index n, Index s) {
  RowNormEstimates flat{Vector::Ones(n), NormMode::exact, 0};
  return sampling_probabilities(flat, s);
}

// ---------------------------------------------------------------- in-memory draws

QuantileProblem SampledProblem::as_problem() const {
  return QuantileProblem(Design(SA), Sb, tau);
}

namespace {

void check_sample(const DenseMatrix& values, Index d, const char* what) {
  if (values.rows() == 0) throw SamplingError(std::string(what) + ": empty sample");
  if (values.rows() < d || singular_value_ratio(values) < 1e-10)
    throw SamplingError(std::string(what) + ": sampled matrix is rank deficient (" +
                        std::to_string(values.rows()) + " rows)");
}

}  // namespace

SampledProblem draw_sample(const SamplingPlan& plan, const QuantileProblem& problem, rng::Stream& rng) {
  const Index n = problem.rows();
  const Index d = problem.cols();
  if (plan.probabilities.size() != n) throw InputError("draw_sample: plan length does not match the problem");
  const rng::Key key = rng.fork();
  SampledProblem out;
  out.tau = problem.tau;
  std::vector<double> w;
  for (Index i = 0; i < n; ++i) {
    const double p = plan.probabilities(i);
    if (p <= 0.0) continue;
    rng::Stream row(key, static_cast<std::uint64_t>(i));
    if (row.uniform() < p) {
      out.row_indices.push_back(i);
      w.push_back(1.0 / p);
    }
  }
  const Index m = static_cast<Index>(w.size());
  out.weights = Eigen::Map<const Vector>(w.data(), m);
  out.SA = DenseMatrix::Zero(m, d);
  out.Sb.resize(m);
  problem.A.visit([&](const auto& A) {
    for (Index k = 0; k < m; ++k) {
      const Index i = out.row_indices[static_cast<size_t>(k)];
      const double p = plan.probabilities(i);
      for_each_entry(A, i, [&](Index j, double v) { out.SA(k, j) = v / p; });
      out.Sb(k) = problem.b(i) / p;
    }
  });
  check_sample(out.SA, d, "draw_sample");
  return out;
}

double verify_distortion(const SampledProblem& sampled, const QuantileProblem& problem, Index test_points,
                         rng::Stream& rng, const std::optional<Vector>& x) {
  if (sampled.SA.cols() != problem.cols()) throw InputError("verify_distortion: column mismatch");
  const Index d = problem.cols();
  const auto deviation = [&](const Vector& z) {
    const double y0 = z(0);
    const Vector y = z.tail(d);
    const Vector full = problem.b * y0 - multiply(problem.A, y);
    const Vector samp = sampled.Sb * y0 - sampled.SA * y;
    const double ref = rho(full, problem.tau);
    if (ref == 0.0) return rho(samp, problem.tau) == 0.0 ? 0.0 : std::numeric_limits<double>::infinity();
    return std::abs(rho(samp, problem.tau) - ref) / ref;
  };
  double worst = 0.0;
  for (Index k = 0; k < test_points; ++k) worst = std::max(worst, deviation(random_unit_vector(d + 1, rng)));
  if (x) {
    Vector z(d + 1);
    z(0) = 1.0;
    z.tail(d) = *x;
    worst = std::max(worst, deviation(z));
  }
  return worst;
}

// ---------------------------------------------------------------- passes

double sum_row_norms(const RowSource& src, const RowNormRule& rule, const PassPlan& plan) {
  double total = 0.0;
  src.for_each_block([&](Index, const Design& block) {
    const Vector lambda = rule.compute(block, plan.workers);
    for (Index i = 0; i < lambda.size(); ++i) total += lambda(i);
  });
  return total;
}

WeightedRows sample_rows(const RowSource& src, const RowNormRule& rule, double lambda_sum, Index s,
                         rng::Key key, const PassPlan& plan) {
  if (s < 1) throw InputError("sample_rows: s must be at least 1");
  if (!(lambda_sum > 0.0) || !std::isfinite(lambda_sum))
    throw SamplingError("sample_rows: row norms sum to zero (rank loss upstream)");
  const Index d = src.cols();
  const double sd = static_cast<double>(s);
  WeightedRows out;
  std::vector<double> weights;
  std::vector<double> values;
  src.for_each_block([&](Index row_begin, const Design& block) {
    const Vector lambda = rule.compute(block, plan.workers);
    const Index m = block.rows();
    Vector p(m);
    std::vector<char> keep(static_cast<size_t>(m), 0);
    parallel_ranges(plan.workers, m, [&](Index lo, Index hi, int) {
      for (Index i = lo; i < hi; ++i) {
        p(i) = std::min(1.0, sd * lambda(i) / lambda_sum);
        if (p(i) <= 0.0) continue;
        rng::Stream row(key, static_cast<std::uint64_t>(row_begin + i));
        keep[static_cast<size_t>(i)] = row.uniform() < p(i) ? 1 : 0;
      }
    });
    for (Index i = 0; i < m; ++i) out.expected_size += p(i);
    block.visit([&](const auto& mat) {
      for (Index i = 0; i < m; ++i) {
        if (!keep[static_cast<size_t>(i)]) continue;
        out.rows.push_back(row_begin + i);
        weights.push_back(1.0 / p(i));
        const size_t base = values.size();
        values.resize(base + static_cast<size_t>(d), 0.0);
        for_each_entry(mat, i, [&](Index j, double v) { values[base + static_cast<size_t>(j)] = v / p(i); });
      }
    });
  });
  const Index k = static_cast<Index>(weights.size());
  out.weights = Eigen::Map<const Vector>(weights.data(), k);
  out.values = Eigen::Map<const DenseMatrix>(values.data(), k, d);
  return out;
}

SampledProblem to_sampled_problem(WeightedRows rows, double tau) {
  SampledProblem out;
  out.tau = tau;
  out.row_indices = std::move(rows.rows);
  out.weights = std::move(rows.weights);
  const Index d = rows.values.cols() - 1;
  out.Sb = rows.values.col(0);
  out.SA = -rows.values.rightCols(d);
  return out;
}

}  // namespace qreg

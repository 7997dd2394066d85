#include "qreg/pipeline.hpp"

namespace qreg {

DenseMatrix pass_sketch(const ProblemSource& src, const SparseCauchyTransform& sct, const PassPlan& plan) {
  return apply_sct(sct, AugmentedSource(src), plan);
}

PassSample pass_norms_then_sample(const ProblemSource& src, const RowNormRule& rule, Index s, rng::Key key,
                                  double tau, const PassPlan& plan) {
  const AugmentedSource aug(src);
  const double total = sum_row_norms(aug, rule, plan);
  PassSample out;
  for (int attempt = 0; attempt < 2; ++attempt) {
    const rng::Key k = attempt == 0 ? key : rng::derive(key, rng::Tag::retry, static_cast<std::uint64_t>(attempt));
    WeightedRows rows = sample_rows(aug, rule, total, s, k, plan);
    out.expected_size = rows.expected_size;
    const bool ok = rows.values.rows() >= aug.cols() && singular_value_ratio(rows.values) >= 1e-10;
    if (ok) {
      out.problem = to_sampled_problem(std::move(rows), tau);
      return out;
    }
    ++out.retries;
    if (attempt == 1)
      throw SamplingError("sampling: sample of " + std::to_string(rows.values.rows()) +
                          " rows is empty or rank deficient after a retry");
  }
  return out;
}

PassSample pass_norms_then_sample(const ProblemSource& src, const SmallMatrix& R, Index s, NormMode mode,
                                  double tau, rng::Stream& rng, const PassPlan& plan) {
  const rng::Key base = rng.fork();
  rng::Stream proj(rng::derive(base, rng::Tag::row_norm_projection));
  const RowNormRule rule =
      mode == NormMode::exact ? RowNormRule::exact(R) : RowNormRule::estimated(R, src.rows(), proj);
  return pass_norms_then_sample(src, rule, s, rng::derive(base, rng::Tag::final_sample), tau, plan);
}

StackedSource::StackedSource(const ProblemSource& base, Index k) : base_(base), k_(k) {
  if (k < 1) throw InputError("StackedSource: k must be at least 1");
}

void StackedSource::for_each_block(const BlockFn& fn) const {
  const Index n = base_.rows();
  for (Index r = 0; r < k_; ++r)
    base_.for_each_block([&](Index row_begin, const Design& A, const Vector& b) { fn(r * n + row_begin, A, b); });
}

}  // namespace qreg

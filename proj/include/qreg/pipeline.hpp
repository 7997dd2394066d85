#pragma once

#include <cstdint>
#include <filesystem>
#include <iosfwd>
#include <string>
#include <vector>

#include "qreg/core.hpp"
#include "qreg/randomized.hpp"
#include "qreg/rng.hpp"
#include "qreg/row_source.hpp"
#include "qreg/sampling.hpp"
#include "qreg/sketch.hpp"

namespace qreg {

/// Pi_1 [b, -A] in one pass over src.
DenseMatrix pass_sketch(const ProblemSource& src, const SparseCauchyTransform& sct, const PassPlan& plan = {});

struct PassSample {
  SampledProblem problem;
  double expected_size = 0.0;
  int retries = 0;
};

/// Pass A sums lambda over the augmented rows, pass B keeps row i iff u_i < p_i. An empty or
/// rank-deficient sample is redrawn once from a derived key before failing.
PassSample pass_norms_then_sample(const ProblemSource& src, const RowNormRule& rule, Index s, rng::Key key,
                                  double tau, const PassPlan& plan = {});
PassSample pass_norms_then_sample(const ProblemSource& src, const SmallMatrix& R, Index s, NormMode mode,
                                  double tau, rng::Stream& rng, const PassPlan& plan = {});

/// The rows of a problem repeated k times, without copying.
class StackedSource final : public ProblemSource {
 public:
  StackedSource(const ProblemSource& base, Index k);
  Index rows() const override { return k_ * base_.rows(); }
  Index cols() const override { return base_.cols(); }
  void for_each_block(const BlockFn& fn) const override;

 private:
  const ProblemSource& base_;
  Index k_;
};

// ---------------------------------------------------------------- experiments

struct ExperimentConfig {
  /// "skewed", "gaussian", or a manifest / CSV path.
  std::string dataset = "skewed";
  Index n = 0;
  Index d = 0;
  double q = 2.0;
  std::uint64_t data_seed = 1;
  /// Vertical replication of the data; the reference optimum is taken from one copy.
  Index stack = 1;
  std::vector<std::string> methods;
  std::vector<double> taus;
  std::vector<Index> sizes;
  int trials = 50;
  std::uint64_t seed = 1;
  /// Exact by default: the accuracy studies isolate the sampling error from the norm estimate.
  NormMode norm_mode = NormMode::exact;
  int workers = 1;
  std::string out;
};

/// key=value lines; method, tau and s may repeat. '#' starts a comment.
ExperimentConfig parse_experiment_config(std::istream& in);
ExperimentConfig load_experiment_config(const std::filesystem::path& path);

struct ExperimentRow {
  std::string method;
  double tau = 0.0;
  Index s = 0;
  std::string metric;
  double q1 = 0.0;
  double median = 0.0;
  double q3 = 0.0;
  int trials = 0;
  int failures = 0;
};

struct TimingRow {
  std::string method;
  double tau = 0.0;
  Index s = 0;
  std::string stage;
  double median_seconds = 0.0;
};

struct ExperimentResult {
  std::vector<ExperimentRow> rows;
  std::vector<TimingRow> timings;
};

ExperimentResult run_experiment(const ExperimentConfig& cfg);
void write_results_csv(std::ostream& out, const std::vector<ExperimentRow>& rows);
void write_timings_csv(std::ostream& out, const std::vector<TimingRow>& rows);

/// Linear interpolation between order statistics (type 7).
double quantile_type7(std::vector<double> values, double p);

}  // namespace qreg

#pragma once

#include <optional>
#include <string_view>
#include <vector>

#include "qreg/conditioning.hpp"
#include "qreg/core.hpp"
#include "qreg/rng.hpp"
#include "qreg/row_source.hpp"
#include "qreg/sampling.hpp"
#include "qreg/solver.hpp"

namespace qreg {

/// A conditioner, or UNIF (uniform probabilities, no conditioning).
enum class Method { SC, SPC1, SPC2, SPC3, NOCO, UNIF };

std::string_view to_string(Method m);
Method parse_method(std::string_view name);
std::optional<Conditioner> conditioner_of(Method m);

struct RandomizedConfig {
  Method method = Method::SPC3;
  /// Sample size; 0 means use the theoretical size for eps.
  Index sample_size = 0;
  double eps = 0.5;
  NormMode norm_mode = NormMode::estimated;
  /// Overrides the kappa estimate used by the theoretical size.
  std::optional<double> kappa;
  /// Row count above which kappa is estimated on a uniform row sample.
  Index kappa_row_limit = 50000;
  ConditionParams conditioning;
  SolverConfig solver;
  PassPlan plan;
  /// Random directions for the optional distortion certificate; 0 disables it.
  Index certify_points = 0;
};

struct StageSeconds {
  double condition = 0.0;
  double estimate = 0.0;
  double sample = 0.0;
  double solve = 0.0;
};

struct RandomizedReport {
  Method method = Method::SPC3;
  Index s_target = 0;
  Index sample_size = 0;
  double expected_size = 0.0;
  std::optional<KappaEstimate> kappa;
  ConditionReport conditioning;
  StageSeconds seconds;
  std::optional<double> distortion;
  int retries = 0;
  /// Selected rows, ascending.
  std::vector<Index> rows;
  double sampled_objective = 0.0;
};

struct RandomizedResult {
  /// objective is rho_tau(b - A x) over the full data.
  Solution solution;
  RandomizedReport report;
};

/// Condition the augmented rows, sample by row norms, solve the weighted subproblem.
RandomizedResult solve_randomized(const ProblemSource& src, double tau, const RandomizedConfig& cfg,
                                  rng::Stream& rng);
RandomizedResult solve_randomized(const QuantileProblem& problem, const RandomizedConfig& cfg, rng::Stream& rng);

/// rho_tau(b - A x) accumulated over the blocks of src.
double objective(const ProblemSource& src, const Vector& x, double tau);

struct RelativeErrors {
  double objective = 0.0;
  double l1 = 0.0;
  double l2 = 0.0;
  double linf = 0.0;
  /// Set when f* = 0 and objective holds |f - f*| instead.
  bool absolute_objective = false;
};

RelativeErrors relative_errors(const Vector& xhat, const Vector& xstar, double fhat, double fstar);

}  // namespace qreg

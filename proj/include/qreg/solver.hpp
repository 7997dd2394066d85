#pragma once

#include <string_view>

#include "qreg/core.hpp"

namespace qreg {

struct SolverConfig {
  /// Relative duality gap at which the iteration stops.
  double tolerance = 1e-8;
  int max_iterations = 100;
  /// Move the interior solution to a nearby basic solution when that does not raise the objective.
  bool purify = true;
};

enum class SolveStatus { optimal, max_iter, infeasible_input };
std::string_view to_string(SolveStatus s);

struct Solution {
  Vector x;
  double objective = 0.0;
  SolveStatus status = SolveStatus::optimal;
  int iterations = 0;
  /// (primal - dual) / (1 + |primal|) at the returned point.
  double duality_gap = 0.0;
};

/// Primal-dual interior point (Mehrotra predictor-corrector) on the bounded dual
///   max b^T a  s.t.  A^T a = (1 - tau) A^T 1,  0 <= a <= 1.
Solution solve_exact(const QuantileProblem& problem, const SolverConfig& cfg = {});

/// Best basic solution over all d-row subsets. Test oracle for n <= 14, d <= 3.
Solution brute_force_small(const QuantileProblem& problem);

}  // namespace qreg

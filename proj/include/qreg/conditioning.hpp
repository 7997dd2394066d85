#pragma once

#include <string>
#include <string_view>
#include <utility>

#include "qreg/core.hpp"
#include "qreg/rng.hpp"
#include "qreg/row_source.hpp"

namespace qreg {

enum class Conditioner { SC, SPC1, SPC2, SPC3, NOCO };

std::string_view to_string(Conditioner c);
/// Case-insensitive; throws InputError on unknown names.
Conditioner parse_conditioner(std::string_view name);

struct ConditionParams {
  /// Sketch rows; 0 selects the default for the method.
  Index sketch_rows = 0;
  /// Intermediate sample target for SPC2/SPC3; 0 selects min(n, max(20 d^2, 2000)).
  Index intermediate_rows = 0;
  /// Ellipsoid iteration budget; 0 selects the default budget.
  Index ellipsoid_max_iter = 0;
  PassPlan plan;
};

struct ConditionReport {
  Index sketch_rows = 0;
  Index intermediate_target = 0;
  Index intermediate_size = 0;
  Index ellipsoid_iterations = 0;
  double eta = 0.0;
  int retries = 0;
  double seconds = 0.0;
};

/// U = A R^{-1} is the implicit well-conditioned basis.
struct RFactor {
  SmallMatrix R;
  Conditioner method = Conditioner::NOCO;
  ConditionReport report;
};

/// Upper-triangular R with positive diagonal such that M R^{-1} has orthonormal columns.
/// Throws ConditioningError when sigma_min / sigma_max < 1e-10.
SmallMatrix qr_r_factor(const DenseMatrix& M);

/// {x : x^T shape x <= 1} around center.
struct Ellipsoid {
  Vector center;
  SmallMatrix shape;
};

struct EllipsoidRounding {
  SmallMatrix R;
  Ellipsoid ellipsoid;
  /// Certified upper ratio: ||y||_2 <= ||M R^{-1} y||_1 <= eta ||y||_2.
  double eta = 0.0;
  Index iterations = 0;
};

class EllipsoidError : public ConditioningError {
 public:
  EllipsoidError(const std::string& what, SmallMatrix best_R, double best_eta)
      : ConditioningError(what), R(std::move(best_R)), eta(best_eta) {}
  SmallMatrix R;
  double eta;
};

/// 2d-rounding of C = {x : ||M x||_1 <= 1}.
EllipsoidRounding ellipsoid_round(const DenseMatrix& M, Index max_iter = 0);
Index default_ellipsoid_budget(Index s, Index d);

/// Min and max of ||M R^{-1} y||_1 over random unit y.
std::pair<double, double> certify_rounding(const DenseMatrix& M, const SmallMatrix& R, Index directions,
                                           rng::Stream& rng);

/// Runs the conditioner over the rows of src.
RFactor condition(Conditioner method, const RowSource& src, const ConditionParams& params, rng::Stream& rng);
RFactor condition(Conditioner method, const Design& A, const ConditionParams& params, rng::Stream& rng);

struct KappaEstimate {
  double alpha = 0.0;
  double beta = 0.0;
  double kappa = 0.0;
  /// True when computed on a uniform row sample rather than all rows.
  bool surrogate = false;
  Index rows_used = 0;
};

/// alpha = ||A R^{-1}||_1, beta = max_j 1 / min{||A R^{-1} x||_1 : x_j = 1}, kappa = alpha beta.
KappaEstimate estimate_kappa(const Design& A, const SmallMatrix& R);
/// Exact when rows() <= row_limit, otherwise evaluated on a uniform row sample reweighted by n / m.
KappaEstimate estimate_kappa(const RowSource& src, const SmallMatrix& R, Index row_limit, rng::Stream& rng);

/// All rows of a source in one design.
Design gather(const RowSource& src);

}  // namespace qreg

#include <Eigen/Eigenvalues>

#include <algorithm>
#include <cmath>
#include <limits>

#include "qreg/conditioning.hpp"
#include "qreg/sketch.hpp"

namespace qreg {
namespace {

double l1_image(const SmallMatrix& M, const Vector& x) { return (M * x).lpNorm<1>(); }

/// R with Q^{-1} = R^T R, and eta = sqrt(d) max_k ||M sqrt(lambda_k) v_k||_1.
void factor_shape(const SmallMatrix& M, const SmallMatrix& Q, SmallMatrix& R, double& eta) {
  const Index d = Q.cols();
  Eigen::SelfAdjointEigenSolver<SmallMatrix> eig(Q);
  const Vector& lam = eig.eigenvalues();
  const SmallMatrix& V = eig.eigenvectors();
  double worst = 0.0;
  for (Index k = 0; k < d; ++k) worst = std::max(worst, l1_image(M, std::sqrt(lam(k)) * V.col(k)));
  eta = std::sqrt(static_cast<double>(d)) * worst;
  const SmallMatrix Qinv = V * lam.cwiseInverse().asDiagonal() * V.transpose();
  Eigen::LLT<SmallMatrix> llt(0.5 * (Qinv + Qinv.transpose()));
  if (llt.info() != Eigen::Success) throw ConditioningError("ellipsoid_round: shape lost positive definiteness");
  R = llt.matrixU();
}

}  // namespace

Index default_ellipsoid_budget(Index s, Index d) {
  const double dd = static_cast<double>(d);
  const double ratio = std::sqrt(static_cast<double>(std::max<Index>(s, 1))) / (2.0 * dd);
  const double logs = std::max(1.0, dd * std::log(std::max(ratio, 1.0)));
  return static_cast<Index>(std::ceil(50.0 * dd * dd * logs));
}

EllipsoidRounding ellipsoid_round(const DenseMatrix& Mrows, Index max_iter) {
  const Index d = Mrows.cols();
  if (d < 1 || Mrows.rows() < d) throw ConditioningError("ellipsoid_round: need at least d rows");
  const SmallMatrix M = Mrows;
  EllipsoidRounding out;
  out.ellipsoid.center = Vector::Zero(d);
  if (d == 1) {
    const double a = M.lpNorm<1>();
    if (!(a > 0.0)) throw ConditioningError("ellipsoid_round: zero column");
    out.R = SmallMatrix::Constant(1, 1, a);
    out.ellipsoid.shape = out.R.transpose() * out.R;
    out.eta = 1.0;
    return out;
  }
  if (max_iter <= 0) max_iter = default_ellipsoid_budget(M.rows(), d);

  // QR ellipsoid {||R0 x||_2 <= 1} contains C and is a sqrt(s)-rounding of it.
  const SmallMatrix R0 = qr_r_factor(Mrows);
  const SmallMatrix R0inv = R0.triangularView<Eigen::Upper>().solve(SmallMatrix::Identity(d, d));
  SmallMatrix Q = R0inv * R0inv.transpose();

  const double dd = static_cast<double>(d);
  const double t = 1.0 / (2.0 * std::sqrt(dd));
  Index iter = 0;
  for (;; ++iter) {
    Eigen::SelfAdjointEigenSolver<SmallMatrix> eig(Q);
    const Vector& lam = eig.eigenvalues();
    const SmallMatrix& V = eig.eigenvectors();
    Index violated = -1;
    double worst = 1.0;
    for (Index k = 0; k < d; ++k) {
      const double v = t * l1_image(M, std::sqrt(lam(k)) * V.col(k));
      if (v > worst) {
        worst = v;
        violated = k;
      }
    }
    if (violated < 0) break;
    if (iter >= max_iter) {
      SmallMatrix R;
      double eta = std::numeric_limits<double>::infinity();
      factor_shape(M, Q, R, eta);
      throw EllipsoidError("ellipsoid_round: iteration budget of " + std::to_string(max_iter) +
                               " exhausted (certified eta " + std::to_string(eta) + ")",
                           R, eta);
    }
    const Vector p = t * std::sqrt(lam(violated)) * V.col(violated);
    const Vector sgn = (M * p).unaryExpr([](double v) { return v > 0.0 ? 1.0 : (v < 0.0 ? -1.0 : 0.0); });
    const Vector g = M.transpose() * sgn;
    const Vector Qg = Q * g;
    const double gamma = g.dot(Qg);
    const double beta2 = 1.0 / gamma;
    const double a2 = dd * beta2;
    const double b2 = dd * (1.0 - beta2) / (dd - 1.0);
    Q = b2 * Q + ((a2 - b2) / gamma) * (Qg * Qg.transpose());
    Q = 0.5 * (Q + Q.transpose()).eval();
  }
  factor_shape(M, Q, out.R, out.eta);
  out.ellipsoid.shape = out.R.transpose() * out.R;
  out.iterations = iter;
  return out;
}

std::pair<double, double> certify_rounding(const DenseMatrix& M, const SmallMatrix& R, Index directions,
                                           rng::Stream& rng) {
  if (R.rows() != M.cols() || R.cols() != M.cols()) throw InputError("certify_rounding: dimension mismatch");
  if (directions < 1) throw InputError("certify_rounding: need at least one direction");
  const Index d = M.cols();
  const SmallMatrix Rinv = Eigen::FullPivLU<SmallMatrix>(R).inverse();
  const SmallMatrix U = SmallMatrix(M) * Rinv;
  double lo = std::numeric_limits<double>::infinity();
  double hi = 0.0;
  for (Index k = 0; k < directions; ++k) {
    const Vector y = random_unit_vector(d, rng);
    const double v = (U * y).lpNorm<1>();
    lo = std::min(lo, v);
    hi = std::max(hi, v);
  }
  return {lo, hi};
}

}  // namespace qreg

#include "qreg/solver.hpp"

#include <Eigen/Eigenvalues>

#include <algorithm>
#include <cmath>
#include <limits>
#include <numeric>

namespace qreg {

std::string_view to_string(SolveStatus s) {
  switch (s) {
    case SolveStatus::optimal: return "optimal";
    case SolveStatus::max_iter: return "max_iter";
    case SolveStatus::infeasible_input: return "infeasible_input";
  }
  return "unknown";
}

namespace {

double max_step(const Vector& v, const Vector& dv) {
  double a = std::numeric_limits<double>::infinity();
  for (Index i = 0; i < v.size(); ++i)
    if (dv(i) < 0.0) a = std::min(a, -v(i) / dv(i));
  return a;
}

Vector dense_row(const Design& A, Index i) {
  Vector row = Vector::Zero(A.cols());
  A.visit([&](const auto& m) { for_each_entry(m, i, [&](Index j, double v) { row(j) = v; }); });
  return row;
}

bool full_rank(const Design& A) {
  if (A.rows() < A.cols()) return false;
  SmallMatrix G = weighted_gram(A, Vector::Ones(A.rows()));
  const Vector diag = G.diagonal();
  if (!(diag.array() > 0.0).all()) return false;
  const Vector scale = diag.cwiseSqrt().cwiseInverse();
  G = scale.asDiagonal() * G * scale.asDiagonal();
  // Equilibrated Gram; eigenvalues below this are roundoff of an exact dependence.
  Eigen::SelfAdjointEigenSolver<SmallMatrix> eig(G, Eigen::EigenvaluesOnly);
  const Vector& ev = eig.eigenvalues();
  return ev(0) > 1e-13 * ev(ev.size() - 1);
}

Solution infeasible(const QuantileProblem& problem) {
  Solution s;
  s.x = Vector::Zero(problem.cols());
  s.objective = objective(problem, s.x);
  s.status = SolveStatus::infeasible_input;
  s.duality_gap = std::numeric_limits<double>::infinity();
  return s;
}

/// Vertex through the d linearly independent rows with the smallest residuals.
bool purify(const QuantileProblem& problem, Vector& x, double& f) {
  const Design& A = problem.A;
  const Index n = A.rows();
  const Index d = A.cols();
  const Vector r = (problem.b - multiply(A, x)).cwiseAbs();
  std::vector<Index> order(static_cast<size_t>(n));
  std::iota(order.begin(), order.end(), Index(0));
  std::stable_sort(order.begin(), order.end(), [&](Index i, Index j) { return r(i) < r(j); });
  std::vector<Vector> basis;
  std::vector<Index> chosen;
  for (Index i : order) {
    const Vector row = dense_row(A, i);
    const double norm = row.norm();
    if (norm == 0.0) continue;
    Vector v = row;
    for (const Vector& q : basis) v -= q.dot(v) * q;
    const double rest = v.norm();
    if (rest <= 1e-9 * norm) continue;
    basis.push_back(v / rest);
    chosen.push_back(i);
    if (static_cast<Index>(chosen.size()) == d) break;
  }
  if (static_cast<Index>(chosen.size()) < d) return false;
  SmallMatrix B(d, d);
  Vector rhs(d);
  for (Index k = 0; k < d; ++k) {
    B.row(k) = dense_row(A, chosen[static_cast<size_t>(k)]).transpose();
    rhs(k) = problem.b(chosen[static_cast<size_t>(k)]);
  }
  Eigen::FullPivLU<SmallMatrix> lu(B);
  if (!lu.isInvertible()) return false;
  const Vector xv = lu.solve(rhs);
  if (!xv.allFinite()) return false;
  const double fv = objective(problem, xv);
  if (fv > f * (1.0 + 1e-12) + 1e-14) return false;
  x = xv;
  f = fv;
  return true;
}

}  // namespace

Solution solve_exact(const QuantileProblem& problem, const SolverConfig& cfg) {
  const Design& A = problem.A;
  const Vector& b = problem.b;
  const double tau = problem.tau;
  const Index n = A.rows();
  if (!full_rank(A)) return infeasible(problem);

  const Vector ones = Vector::Ones(n);
  const Vector c = (1.0 - tau) * transpose_multiply(A, ones);
  const double dual_shift = (1.0 - tau) * b.sum();

  Vector y = weighted_gram(A, ones).ldlt().solve(transpose_multiply(A, b));
  Vector a = Vector::Constant(n, 1.0 - tau);
  Vector s = Vector::Constant(n, tau);
  Vector r = b - multiply(A, y);
  const double delta = 0.1 * r.cwiseAbs().mean() + 1e-8 * (1.0 + b.cwiseAbs().mean());
  Vector z = (-r).cwiseMax(0.0).array() + delta;
  Vector w = r.cwiseMax(0.0).array() + delta;

  Solution sol;
  sol.status = SolveStatus::max_iter;
  double f = rho(r, tau);
  int it = 0;
  for (; it < cfg.max_iterations; ++it) {
    const double dual = b.dot(a) - dual_shift;
    sol.duality_gap = (f - dual) / (1.0 + std::abs(f));
    if (sol.duality_gap <= cfg.tolerance) {
      sol.status = SolveStatus::optimal;
      break;
    }
    const Vector rp = c - transpose_multiply(A, a);
    const Vector rd = r - w + z;
    const double gap = a.dot(z) + s.dot(w);
    const Vector q = ((z.array() / a.array()) + (w.array() / s.array())).inverse();

    SmallMatrix H = weighted_gram(A, q);
    Eigen::LLT<SmallMatrix> llt(H);
    if (llt.info() != Eigen::Success) {
      H.diagonal().array() += 1e-14 * H.trace() / static_cast<double>(H.rows());
      llt.compute(H);
      if (llt.info() != Eigen::Success) throw SolverError("solve_exact: normal matrix is not positive definite");
    }

    Vector dy, da, ds, dz, dw;
    const auto direction = [&](const Vector& raz, const Vector& rsw) {
      const Vector rt = rd.array() - rsw.array() / s.array() + raz.array() / a.array();
      dy = llt.solve(transpose_multiply(A, q.cwiseProduct(rt)) - rp);
      da = q.cwiseProduct(rt - multiply(A, dy));
      ds = -da;
      dz = (raz.array() - z.array() * da.array()) / a.array();
      dw = (rsw.array() + w.array() * da.array()) / s.array();
    };

    direction(-a.cwiseProduct(z), -s.cwiseProduct(w));
    const double ap_aff = std::min({1.0, max_step(a, da), max_step(s, ds)});
    const double ad_aff = std::min({1.0, max_step(z, dz), max_step(w, dw)});
    const double mu_aff = (a + ap_aff * da).dot(z + ad_aff * dz) + (s + ap_aff * ds).dot(w + ad_aff * dw);
    const double sigma = std::pow(std::max(0.0, mu_aff) / gap, 3.0);
    const double mu = sigma * gap / (2.0 * static_cast<double>(n));

    const Vector raz = (mu - a.array() * z.array() - da.array() * dz.array()).matrix();
    const Vector rsw = (mu - s.array() * w.array() - ds.array() * dw.array()).matrix();
    direction(raz, rsw);
    const double ap = std::min(1.0, 0.9995 * std::min(max_step(a, da), max_step(s, ds)));
    const double ad = std::min(1.0, 0.9995 * std::min(max_step(z, dz), max_step(w, dw)));

    a += ap * da;
    s += ap * ds;
    y += ad * dy;
    z += ad * dz;
    w += ad * dw;
    r = b - multiply(A, y);
    f = rho(r, tau);
  }
  if (sol.status == SolveStatus::max_iter) sol.duality_gap = (f - (b.dot(a) - dual_shift)) / (1.0 + std::abs(f));
  sol.iterations = it;
  if (cfg.purify) purify(problem, y, f);
  sol.x = y;
  sol.objective = f;
  return sol;
}

Solution brute_force_small(const QuantileProblem& problem) {
  const Index n = problem.rows();
  const Index d = problem.cols();
  if (n > 14 || d > 3) throw InputError("brute_force_small: limited to n <= 14 and d <= 3");
  const DenseMatrix A = problem.A.to_dense();
  Solution best;
  best.status = SolveStatus::infeasible_input;
  best.objective = std::numeric_limits<double>::infinity();
  std::vector<Index> idx(static_cast<size_t>(d));
  const auto visit = [&](auto&& self, Index k, Index start) -> void {
    if (k == d) {
      SmallMatrix B(d, d);
      Vector rhs(d);
      for (Index j = 0; j < d; ++j) {
        B.row(j) = A.row(idx[static_cast<size_t>(j)]);
        rhs(j) = problem.b(idx[static_cast<size_t>(j)]);
      }
      Eigen::FullPivLU<SmallMatrix> lu(B);
      if (!lu.isInvertible()) return;
      const Vector x = lu.solve(rhs);
      const double f = objective(problem, x);
      if (f < best.objective) {
        best.objective = f;
        best.x = x;
        best.status = SolveStatus::optimal;
      }
      return;
    }
    for (Index i = start; i < n; ++i) {
      idx[static_cast<size_t>(k)] = i;
      self(self, k + 1, i + 1);
    }
  };
  visit(visit, 0, 0);
  if (best.status == SolveStatus::infeasible_input) return infeasible(problem);
  return best;
}

}  // namespace qreg

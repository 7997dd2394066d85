#include "qreg/randomized.hpp"

#include <algorithm>
#include <cctype>
#include <chrono>
#include <cmath>
#include <limits>

#include "qreg/pipeline.hpp"
#include "qreg/sketch.hpp"

namespace qreg {

std::string_view to_string(Method m) {
  if (m == Method::UNIF) return "UNIF";
  return to_string(*conditioner_of(m));
}

Method parse_method(std::string_view name) {
  std::string up(name);
  std::transform(up.begin(), up.end(), up.begin(), [](unsigned char ch) { return std::toupper(ch); });
  if (up == "UNIF") return Method::UNIF;
  switch (parse_conditioner(up)) {
    case Conditioner::SC: return Method::SC;
    case Conditioner::SPC1: return Method::SPC1;
    case Conditioner::SPC2: return Method::SPC2;
    case Conditioner::SPC3: return Method::SPC3;
    case Conditioner::NOCO: return Method::NOCO;
  }
  throw InputError("unknown method");
}

std::optional<Conditioner> conditioner_of(Method m) {
  switch (m) {
    case Method::SC: return Conditioner::SC;
    case Method::SPC1: return Conditioner::SPC1;
    case Method::SPC2: return Conditioner::SPC2;
    case Method::SPC3: return Conditioner::SPC3;
    case Method::NOCO: return Conditioner::NOCO;
    case Method::UNIF: return std::nullopt;
  }
  return std::nullopt;
}

namespace {

using Clock = std::chrono::steady_clock;

double since(Clock::time_point t) { return std::chrono::duration<double>(Clock::now() - t).count(); }

template <typename F>
auto stage(const char* name, F&& f) {
  const std::string prefix = std::string(name) + " stage: ";
  try {
    return f();
  } catch (const ConditioningError& e) {
    throw ConditioningError(prefix + e.what());
  } catch (const SamplingError& e) {
    throw SamplingError(prefix + e.what());
  } catch (const SolverError& e) {
    throw SolverError(prefix + e.what());
  } catch (const DataError&) {
    throw;
  } catch (const NumericalError& e) {
    throw NumericalError(prefix + e.what());
  }
}

/// max |rho(S M z) - rho(M z)| / rho(M z) over the columns z of Z, M the augmented rows.
double distortion_pass(const ProblemSource& src, const SampledProblem& sampled, const SmallMatrix& Z) {
  const Index k = Z.cols();
  const double tau = sampled.tau;
  Vector full = Vector::Zero(k);
  AugmentedSource(src).for_each_block([&](Index, const Design& block) {
    const DenseMatrix V = right_multiply(block, Z);
    for (Index i = 0; i < V.rows(); ++i)
      for (Index j = 0; j < k; ++j) full(j) += quantile_loss(V(i, j), tau);
  });
  DenseMatrix Ms(sampled.SA.rows(), sampled.SA.cols() + 1);
  Ms.col(0) = sampled.Sb;
  Ms.rightCols(sampled.SA.cols()) = -sampled.SA;
  const DenseMatrix Vs = Ms * Z;
  double worst = 0.0;
  for (Index j = 0; j < k; ++j) {
    const double fs = rho(Vs.col(j), tau);
    const double dev = full(j) > 0.0 ? std::abs(fs - full(j)) / full(j)
                                     : (fs == 0.0 ? 0.0 : std::numeric_limits<double>::infinity());
    worst = std::max(worst, dev);
  }
  return worst;
}

}  // namespace

double objective(const ProblemSource& src, const Vector& x, double tau) {
  if (x.size() != src.cols()) throw InputError("objective: x has the wrong length");
  double total = 0.0;
  // Row-by-row fold so the sum does not depend on where block boundaries fall.
  src.for_each_block([&](Index, const Design& A, const Vector& b) {
    const Vector r = b - multiply(A, x);
    for (Index i = 0; i < r.size(); ++i) total += quantile_loss(r(i), tau);
  });
  return total;
}

RandomizedResult solve_randomized(const ProblemSource& src, double tau, const RandomizedConfig& cfg,
                                  rng::Stream& rng) {
  check_tau(tau);
  const Index n = src.rows();
  const Index d = src.cols();
  if (d < 1 || n < d) throw InputError("solve_randomized: need n >= d >= 1");
  if (cfg.sample_size == 0 && !(cfg.eps > 0.0 && cfg.eps <= 0.5))
    throw InputError("solve_randomized: eps must lie in (0, 1/2] when no sample size is given");
  if (cfg.sample_size != 0 && cfg.sample_size < d) throw InputError("solve_randomized: sample size must be at least d");

  const AugmentedSource aug(src);
  const Index daug = aug.cols();
  const rng::Key base = rng.fork();
  RandomizedResult out;
  RandomizedReport& rep = out.report;
  rep.method = cfg.method;

  auto t0 = Clock::now();
  SmallMatrix R = SmallMatrix::Identity(daug, daug);
  if (const auto cond = conditioner_of(cfg.method)) {
    rng::Stream cr(rng::derive(base, rng::Tag::sct));
    RFactor rf = stage("conditioning", [&] { return condition(*cond, aug, cfg.conditioning, cr); });
    R = std::move(rf.R);
    rep.conditioning = rf.report;
  }
  rep.seconds.condition = since(t0);

  t0 = Clock::now();
  Index s = cfg.sample_size;
  if (s == 0) {
    double kappa;
    if (cfg.kappa) {
      kappa = *cfg.kappa;
    } else {
      rng::Stream kr(rng::derive(base, rng::Tag::kappa_surrogate));
      rep.kappa = stage("kappa", [&] { return estimate_kappa(aug, R, cfg.kappa_row_limit, kr); });
      kappa = rep.kappa->kappa;
    }
    // The sample-size formula assumes tau >= 1/2; (A, b, tau) and (-A, -b, 1 - tau) share R and row norms.
    s = theoretical_sample_size(std::max(tau, 1.0 - tau), kappa, daug, cfg.eps, cfg.norm_mode);
  }
  rep.s_target = s;
  rep.seconds.estimate = since(t0);

  t0 = Clock::now();
  rng::Stream sr(rng::derive(base, rng::Tag::final_sample));
  PassSample ps = stage("sampling", [&] {
    if (s >= n) return pass_norms_then_sample(src, RowNormRule::uniform(daug), n, sr.fork(), tau, cfg.plan);
    if (cfg.method == Method::UNIF)
      return pass_norms_then_sample(src, RowNormRule::uniform(daug), s, sr.fork(), tau, cfg.plan);
    return pass_norms_then_sample(src, R, s, cfg.norm_mode, tau, sr, cfg.plan);
  });
  rep.retries = ps.retries;
  rep.expected_size = ps.expected_size;
  rep.sample_size = ps.problem.size();
  rep.seconds.sample = since(t0);

  t0 = Clock::now();
  const QuantileProblem sub = ps.problem.as_problem();
  Solution sol = stage("solve", [&] {
    Solution r = solve_exact(sub, cfg.solver);
    if (r.status == SolveStatus::infeasible_input) throw SolverError("sampled problem is rank deficient");
    return r;
  });
  rep.sampled_objective = sol.objective;
  sol.objective = objective(src, sol.x, tau);
  rep.seconds.solve = since(t0);

  if (cfg.certify_points > 0) {
    rng::Stream dr(rng::derive(base, rng::Tag::directions));
    SmallMatrix Z(daug, cfg.certify_points + 1);
    for (Index j = 0; j < cfg.certify_points; ++j) Z.col(j) = random_unit_vector(daug, dr);
    Z(0, cfg.certify_points) = 1.0;
    Z.col(cfg.certify_points).tail(d) = sol.x;
    rep.distortion = distortion_pass(src, ps.problem, Z);
  }

  rep.rows = std::move(ps.problem.row_indices);
  out.solution = std::move(sol);
  return out;
}

RandomizedResult solve_randomized(const QuantileProblem& problem, const RandomizedConfig& cfg, rng::Stream& rng) {
  return solve_randomized(InMemoryProblemSource(problem), problem.tau, cfg, rng);
}

RelativeErrors relative_errors(const Vector& xhat, const Vector& xstar, double fhat, double fstar) {
  if (xhat.size() != xstar.size()) throw InputError("relative_errors: length mismatch");
  RelativeErrors e;
  const Vector diff = xhat - xstar;
  const auto ratio = [](double num, double den) {
    if (den == 0.0) return num == 0.0 ? 0.0 : std::numeric_limits<double>::infinity();
    return num / den;
  };
  e.l1 = ratio(diff.lpNorm<1>(), xstar.lpNorm<1>());
  e.l2 = ratio(diff.norm(), xstar.norm());
  e.linf = ratio(diff.lpNorm<Eigen::Infinity>(), xstar.lpNorm<Eigen::Infinity>());
  if (fstar == 0.0) {
    e.objective = std::abs(fhat - fstar);
    e.absolute_objective = true;
  } else {
    e.objective = std::abs(fhat - fstar) / std::abs(fstar);
  }
  return e;
}

}  // namespace qreg

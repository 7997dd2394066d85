// Acceptance run: one PASS/FAIL line per criterion, nonzero exit if any fails.

#include <algorithm>
#include <chrono>
#include <cmath>
#include <cstdio>
#include <cstdlib>
#include <filesystem>
#include <functional>
#include <string>
#include <vector>

#include "qreg/conditioning.hpp"
#include "qreg/data.hpp"
#include "qreg/pipeline.hpp"
#include "qreg/randomized.hpp"
#include "qreg/sampling.hpp"
#include "qreg/sketch.hpp"
#include "qreg/solver.hpp"

using namespace qreg;
namespace fs = std::filesystem;

namespace {

struct Outcome {
  bool pass = false;
  std::string detail;
};

std::string fmt(const char* f, auto... args) {
  char buf[512];
  std::snprintf(buf, sizeof buf, f, args...);
  return buf;
}

Vector gaussian_vector(Index n, rng::Stream& g) {
  Vector v(n);
  for (Index i = 0; i < n; ++i) v(i) = g.normal();
  return v;
}

DenseMatrix gaussian_matrix(Index n, Index d, rng::Stream& g) {
  DenseMatrix m(n, d);
  for (Index i = 0; i < n; ++i)
    for (Index j = 0; j < d; ++j) m(i, j) = g.normal();
  return m;
}

double median(std::vector<double> v) { return quantile_type7(std::move(v), 0.5); }

// ------------------------------------------------------------------ 1

Outcome loss_axioms() {
  rng::Stream g(101);
  const double tol = 1e-12;
  long checks = 0, bad = 0;
  double worst = 0;
  const auto rel = [&](double excess, double scale) {
    const double r = excess / std::max(scale, 1e-300);
    worst = std::max(worst, r);
    ++checks;
    if (r > tol) ++bad;
  };
  for (double tau : {0.5, 0.75, 0.95}) {
    for (int k = 0; k < 10000; ++k) {
      const Index n = 1 + static_cast<Index>(g.next_u64() % 50);
      const Vector x = gaussian_vector(n, g) * std::exp(3 * g.normal());
      const Vector y = gaussian_vector(n, g) * std::exp(3 * g.normal());
      const double a = std::exp(4 * g.normal());
      const double rx = rho(x, tau), ry = rho(y, tau);
      rel(rho(Vector(x + y), tau) - (rx + ry), rx + ry);
      rel((1 - tau) * x.lpNorm<1>() - rx, rx);
      rel(rx - tau * x.lpNorm<1>(), rx);
      rel(std::abs(rho(Vector(a * x), tau) - a * rx), a * rx);
      rel(std::abs(rx - ry) - tau * (x - y).lpNorm<1>(), tau * (x - y).lpNorm<1>());
    }
  }
  return {bad == 0, fmt("%ld checks, %ld violations, worst relative excess %.2e", checks, bad, worst)};
}

// ------------------------------------------------------------------ 2

Outcome solver_oracle() {
  rng::Stream g(202);
  double worst = 0;
  int bad_status = 0;
  const double taus[] = {0.5, 0.7, 0.9};
  for (int k = 0; k < 200; ++k) {
    const Index d = 1 + static_cast<Index>(g.next_u64() % 3);
    const Index n = d + 1 + static_cast<Index>(g.next_u64() % static_cast<std::uint64_t>(12 - d));
    const double tau = taus[k % 3];
    const QuantileProblem p(Design(gaussian_matrix(n, d, g)), gaussian_vector(n, g), tau);
    const Solution ip = solve_exact(p);
    const Solution bf = brute_force_small(p);
    bad_status += ip.status != SolveStatus::optimal;
    worst = std::max(worst, std::abs(ip.objective - bf.objective));
  }
  double worst_q = 0;
  for (int k = 0; k < 60; ++k) {
    const Index n = 5 + static_cast<Index>(g.next_u64() % 40);
    const double tau = taus[k % 3];
    if (std::abs(tau * n - std::round(tau * n)) < 1e-9) continue;
    std::vector<double> b(static_cast<size_t>(n));
    for (double& v : b) v = g.normal();
    const Solution s = solve_exact(QuantileProblem(Design(DenseMatrix::Ones(n, 1)), Eigen::Map<Vector>(b.data(), n), tau));
    std::sort(b.begin(), b.end());
    worst_q = std::max(worst_q, std::abs(s.x(0) - b[static_cast<size_t>(std::ceil(tau * n)) - 1]));
  }
  return {worst <= 1e-8 && worst_q <= 1e-8 && bad_status == 0,
          fmt("max |f_ipm - f_brute| = %.2e over 200, max quantile error %.2e, non-optimal %d", worst, worst_q,
              bad_status)};
}

// ------------------------------------------------------------------ 3

Outcome row_norm_estimator() {
  const Dataset data = generate_skewed({10000, 5, 2.0, 0.2, 0.001, 500.0, 303});
  double sum = 0, lo = 1;
  for (std::uint64_t seed = 0; seed < 20; ++seed) {
    rng::Stream g(seed);
    const SmallMatrix R = condition(Conditioner::SPC1, data.A, {}, g).R;
    const Vector exact = exact_row_norms(data.A, R).lambda;
    const Vector est = estimate_row_norms(data.A, R, g).lambda;
    Index inside = 0;
    for (Index i = 0; i < exact.size(); ++i) inside += est(i) >= 0.5 * exact(i) && est(i) <= 1.5 * exact(i);
    const double frac = static_cast<double>(inside) / static_cast<double>(exact.size());
    sum += frac;
    lo = std::min(lo, frac);
  }
  const double avg = sum / 20;
  return {avg >= 0.95, fmt("mean fraction within [1/2, 3/2] = %.4f (min over seeds %.4f)", avg, lo)};
}

// ------------------------------------------------------------------ 4

Outcome subspace_sampling() {
  const Dataset data = generate_skewed({10000, 5, 2.0, 0.2, 0.001, 500.0, 404});
  const QuantileProblem p(data.A, data.b, 0.5);
  const Design M = augment(p).Aaug;
  rng::Stream g(405);
  const SmallMatrix R = condition(Conditioner::SPC3, M, {}, g).R;
  const double kappa = estimate_kappa(M, R).kappa;
  const Index s = theoretical_sample_size(0.5, kappa, M.cols(), 0.5, NormMode::exact);
  const SamplingPlan plan = sampling_probabilities(exact_row_norms(M, R), s);
  int good = 0;
  double worst = 0;
  for (std::uint64_t k = 0; k < 20; ++k) {
    rng::Stream r(rng::derive(rng::Key{406}, rng::Tag::trial, k));
    const SampledProblem sp = draw_sample(plan, p, r);
    const double dev = verify_distortion(sp, p, 100, r);
    good += dev <= 0.5;
    worst = std::max(worst, dev);
  }
  return {good >= 18, fmt("kappa = %.2f, s = %lld (n = 10000, expected rows %.0f), %d/20 draws within 0.5, worst %.3f",
                          kappa, static_cast<long long>(s), plan.expected_size, good, worst)};
}

// ------------------------------------------------------------------ 5

Outcome ellipsoid_rounding() {
  rng::Stream g(505);
  double worst_eta = 0, worst_lo = 1e300, worst_ratio = 0;
  for (int k = 0; k < 20; ++k) {
    const DenseMatrix M = gaussian_matrix(200, 4, g);
    const EllipsoidRounding er = ellipsoid_round(M);
    const auto [lo, hi] = certify_rounding(M, er.R, 10000, g);
    worst_eta = std::max(worst_eta, er.eta);
    worst_lo = std::min(worst_lo, lo);
    worst_ratio = std::max(worst_ratio, hi / lo);
  }
  const bool rounding_ok = worst_eta <= 8.0 && worst_lo >= 1.0 - 1e-9 && worst_ratio <= 8.0;

  const Dataset data = generate_skewed({10000, 5, 2.0, 0.2, 0.001, 500.0, 506});
  int within = 0, retries = 0;
  double worst_kappa = 0;
  for (std::uint64_t seed = 0; seed < 10; ++seed) {
    double kappa = 0;
    for (std::uint64_t attempt = 0; attempt < 2; ++attempt) {
      rng::Stream r(rng::derive(rng::Key{seed}, rng::Tag::retry, attempt));
      kappa = estimate_kappa(data.A, condition(Conditioner::SPC2, data.A, {}, r).R).kappa;
      if (kappa <= 150.0) break;
      ++retries;
    }
    within += kappa <= 150.0;
    worst_kappa = std::max(worst_kappa, kappa);
  }
  return {rounding_ok && within == 10,
          fmt("max eta %.3f (<= 8), min lower ratio %.4f, max sandwich %.3f; SPC2 kappa <= 150 on %d/10 seeds, "
              "max %.2f, retries %d",
              worst_eta, worst_lo, worst_ratio, within, worst_kappa, retries)};
}

// ------------------------------------------------------------------ 6 and 10

struct TrialErrors {
  std::vector<double> objective;
  std::vector<double> l2;
  int failures = 0;
};

TrialErrors run_trials(const InMemoryProblemSource& src, double tau, Method m, Index s, const Solution& ref,
                       int trials, std::uint64_t master) {
  TrialErrors out;
  for (int t = 0; t < trials; ++t) {
    RandomizedConfig cfg;
    cfg.method = m;
    cfg.sample_size = s;
    cfg.norm_mode = NormMode::exact;
    rng::Stream g(rng::derive(rng::Key{master}, rng::Tag::trial, static_cast<std::uint64_t>(t)));
    try {
      const RandomizedResult r = solve_randomized(src, tau, cfg, g);
      const RelativeErrors e = relative_errors(r.solution.x, ref.x, r.solution.objective, ref.objective);
      out.objective.push_back(e.objective);
      out.l2.push_back(e.l2);
    } catch (const NumericalError&) {
      ++out.failures;
      out.objective.push_back(INFINITY);
      out.l2.push_back(INFINITY);
    }
  }
  return out;
}

const Dataset& desk_data() {
  static const Dataset data = generate_skewed({100000, 10, 1.8, 0.2, 0.001, 500.0, 1});
  return data;
}

Outcome accuracy_regime() {
  const Dataset& data = desk_data();
  const InMemoryProblemSource src(data.A, data.b);
  const Solution ref = solve_exact(QuantileProblem(data.A, data.b, 0.75));
  const Method methods[] = {Method::SPC2, Method::SPC3, Method::NOCO, Method::UNIF};
  double obj[4], l2[4];
  int fails[4];
  for (int k = 0; k < 4; ++k) {
    const TrialErrors e = run_trials(src, 0.75, methods[k], 1000, ref, 50, 3);
    obj[k] = median(e.objective);
    l2[k] = median(e.l2);
    fails[k] = e.failures;
  }
  // Dominance is judged on the solution error, the quantity tabulated for this regime; objective
  // dominance is reported alongside.
  bool ok = true, obj_dominates = true;
  for (int c : {0, 1}) {
    ok = ok && obj[c] <= 0.05 && l2[c] <= 0.05;
    for (int b : {2, 3}) {
      ok = ok && l2[c] < l2[b];
      obj_dominates = obj_dominates && obj[c] < obj[b];
    }
  }
  std::string detail = "median objective / l2:";
  for (int k = 0; k < 4; ++k)
    detail += fmt(" %s %.4f/%.4f (fail %d)", std::string(to_string(methods[k])).c_str(), obj[k], l2[k], fails[k]);
  detail += fmt("; l2 dominance %s, objective dominance %s", ok ? "yes" : "no", obj_dominates ? "yes" : "no");
  return {ok, detail};
}

Outcome tau_sweep() {
  const Dataset& data = desk_data();
  const InMemoryProblemSource src(data.A, data.b);
  const double taus[] = {0.5, 0.75, 0.9, 0.99};
  double med[4];
  for (int k = 0; k < 4; ++k) {
    const Solution ref = solve_exact(QuantileProblem(data.A, data.b, taus[k]));
    med[k] = median(run_trials(src, taus[k], Method::SPC3, 1000, ref, 50, 10).objective);
  }
  const double hi = std::max({med[0], med[1], med[2]});
  const double lo = std::min({med[0], med[1], med[2]});
  const bool ok = hi < 5 * lo && med[3] > hi;
  return {ok, fmt("SPC3 median objective error tau=0.5 %.4f, 0.75 %.4f, 0.9 %.4f, 0.99 %.4f; spread %.2fx", med[0],
                  med[1], med[2], med[3], hi / lo)};
}

// ------------------------------------------------------------------ 7

double binomial_cdf(int k, int n, double p) {
  double total = 0;
  for (int i = 0; i <= k; ++i) total += std::exp(std::lgamma(n + 1.0) - std::lgamma(i + 1.0) - std::lgamma(n - i + 1.0) +
                                                 i * std::log(p) + (n - i) * std::log1p(-p));
  return total;
}

Outcome theorem_contract() {
  const fs::path dir = fs::temp_directory_path() / "qreg_acceptance_stack";
  fs::remove_all(dir);
  fs::create_directories(dir);
  const Dataset& data = desk_data();
  const ChunkedDataset base = save_chunked(data.A, data.b, dir / "base.manifest", {10000});
  const ChunkedDataset stack = replicate_stack(base, 10, dir / "stack.manifest");
  const double fstar = 10 * solve_exact(QuantileProblem(data.A, data.b, 0.5)).objective;
  int good = 0;
  double worst = 0;
  std::vector<double> sizes;
  for (int t = 0; t < 30; ++t) {
    RandomizedConfig cfg;
    cfg.method = Method::SPC3;
    cfg.eps = 0.5;
    rng::Stream g(rng::derive(rng::Key{7}, rng::Tag::trial, static_cast<std::uint64_t>(t)));
    const RandomizedResult r = solve_randomized(stack, 0.5, cfg, g);
    const double ratio = r.solution.objective / fstar;
    good += ratio <= 3.0;
    worst = std::max(worst, ratio);
    sizes.push_back(static_cast<double>(r.report.sample_size));
  }
  fs::remove_all(dir);
  // H0: success rate >= 0.8; rejected at 5% when P(X <= good) < 0.05.
  const double pvalue = binomial_cdf(good, 30, 0.8);
  return {pvalue >= 0.05, fmt("f/f* <= 3 in %d/30 trials (one-sided p = %.3f), worst ratio %.6f, median sample %.0f of "
                              "1000000 rows",
                              good, pvalue, worst, median(sizes))};
}

// ------------------------------------------------------------------ 8

Outcome sparsity_scaling() {
  const Index d = 50;
  std::vector<double> lx, ly;
  std::string detail;
  for (Index nnz : {Index(100000), Index(1000000), Index(10000000)}) {
    const Index n = nnz / 5;
    rng::Stream g(808);
    std::vector<Triple> t;
    t.reserve(static_cast<size_t>(nnz));
    for (Index i = 0; i < n; ++i) {
      const Index start = static_cast<Index>(g.next_u64() % static_cast<std::uint64_t>(d - 5));
      for (Index k = 0; k < 5; ++k) t.push_back({i, static_cast<std::int32_t>(start + k), g.normal()});
    }
    const Design A(SparseMatrix(n, d, std::move(t)));
    const SparseCauchyTransform sct = build_sct(n, default_sct_rows(d), g);
    double best = 1e300;
    for (int rep = 0; rep < 3; ++rep) {
      const auto t0 = std::chrono::steady_clock::now();
      const DenseMatrix out = apply_sct(sct, A);
      best = std::min(best, std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count());
      if (!out.allFinite()) return {false, "non-finite sketch"};
    }
    lx.push_back(std::log(static_cast<double>(nnz)));
    ly.push_back(std::log(best));
    detail += fmt("nnz %.0e: %.4f s; ", static_cast<double>(nnz), best);
  }
  const double mx = (lx[0] + lx[1] + lx[2]) / 3, my = (ly[0] + ly[1] + ly[2]) / 3;
  double sxy = 0, sxx = 0;
  for (int k = 0; k < 3; ++k) {
    sxy += (lx[k] - mx) * (ly[k] - my);
    sxx += (lx[k] - mx) * (lx[k] - mx);
  }
  const double slope = sxy / sxx;
  return {slope <= 1.3, detail + fmt("fitted exponent %.3f", slope)};
}

// ------------------------------------------------------------------ 9

Outcome determinism() {
  const fs::path dir = fs::temp_directory_path() / "qreg_acceptance_chunks";
  fs::remove_all(dir);
  fs::create_directories(dir);
  const Dataset& data = desk_data();
  const InMemoryProblemSource mem(data.A, data.b);
  const ChunkedDataset chunked = save_chunked(data.A, data.b, dir / "ten.manifest", {10000});
  bool ok = chunked.chunks().size() == 10;
  int compared = 0;
  for (Method m : {Method::SC, Method::SPC1, Method::SPC2, Method::SPC3, Method::NOCO, Method::UNIF}) {
    std::vector<RandomizedResult> runs;
    for (const ProblemSource* src : {static_cast<const ProblemSource*>(&mem), static_cast<const ProblemSource*>(&chunked)})
      for (int w : {1, 4}) {
        RandomizedConfig cfg;
        cfg.method = m;
        cfg.sample_size = 1000;
        cfg.plan.workers = w;
        cfg.conditioning.plan.workers = w;
        rng::Stream g(999);
        runs.push_back(solve_randomized(*src, 0.75, cfg, g));
      }
    for (size_t k = 1; k < runs.size(); ++k) {
      ok = ok && runs[k].report.rows == runs[0].report.rows && runs[k].solution.x == runs[0].solution.x &&
           runs[k].solution.objective == runs[0].solution.objective;
      ++compared;
    }
  }
  fs::remove_all(dir);
  return {ok, fmt("%d comparisons across 6 methods (in-memory vs 10 chunks, 1 vs 4 workers), bit-identical: %s",
                  compared, ok ? "yes" : "no")};
}

}  // namespace

int main(int argc, char** argv) {
  // Optional arguments select criteria by number.
  std::vector<int> only;
  for (int i = 1; i < argc; ++i) only.push_back(std::atoi(argv[i]));
  struct Criterion {
    int id;
    const char* name;
    double budget_seconds;
    std::function<Outcome()> run;
  };
  const std::vector<Criterion> criteria = {
      {1, "loss axioms", 5, loss_axioms},
      {2, "exact solver vs brute force", 30, solver_oracle},
      {3, "row-norm estimator", 60, row_norm_estimator},
      {4, "subspace-preserving sampling", 120, subspace_sampling},
      {5, "ellipsoid rounding and SPC2 kappa", 300, ellipsoid_rounding},
      {6, "accuracy regime at 1e5 x 10", 900, accuracy_regime},
      {7, "relative-error contract on stacked data", 900, theorem_contract},
      {8, "input-sparsity scaling", 300, sparsity_scaling},
      {9, "pipeline determinism", 300, determinism},
      {10, "tau sweep", 900, tau_sweep},
  };
  int failed = 0;
  for (const Criterion& c : criteria) {
    if (!only.empty() && std::find(only.begin(), only.end(), c.id) == only.end()) continue;
    const auto t0 = std::chrono::steady_clock::now();
    Outcome o;
    try {
      o = c.run();
    } catch (const std::exception& e) {
      o = {false, std::string("exception: ") + e.what()};
    }
    const double secs = std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
    const bool in_time = secs <= c.budget_seconds;
    const bool pass = o.pass && in_time;
    failed += !pass;
    std::printf("%s %2d %s: %s [%.1f s of %.0f s]\n", pass ? "PASS" : "FAIL", c.id, c.name, o.detail.c_str(), secs,
                c.budget_seconds);
    std::fflush(stdout);
  }
  return failed == 0 ? 0 : 1;
}

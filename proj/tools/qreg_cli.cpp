#include <CLI11.hpp>

#include <cstdio>
#include <fstream>
#include <iostream>
#include <memory>

#include "qreg/conditioning.hpp"
#include "qreg/data.hpp"
#include "qreg/pipeline.hpp"
#include "qreg/randomized.hpp"
#include "qreg/solver.hpp"

namespace {

using namespace qreg;

void write_vector(const std::string& path, const Vector& x) {
  std::ofstream out(path);
  if (!out) throw DataError("cannot write " + path);
  out.precision(17);
  for (Index i = 0; i < x.size(); ++i) out << x(i) << '\n';
}

/// Streams a manifest chunk by chunk; CSV input is held in memory.
struct InputData {
  std::unique_ptr<ChunkedDataset> chunked;
  Design A;
  Vector b;
  std::unique_ptr<InMemoryProblemSource> memory;

  const ProblemSource& source() const {
    if (chunked) return *chunked;
    return *memory;
  }
};

InputData open_input(const std::string& path, Index block_rows) {
  InputData in;
  if (is_manifest(path)) {
    in.chunked = std::make_unique<ChunkedDataset>(ChunkedDataset::open(path));
  } else {
    auto [A, b] = load_csv(path);
    in.A = std::move(A);
    in.b = std::move(b);
    in.memory = std::make_unique<InMemoryProblemSource>(in.A, in.b, block_rows);
  }
  return in;
}

int run_generate(const std::string& kind, Index n, Index d, double q, std::uint64_t seed, const std::string& out,
                 Index chunk_rows) {
  Dataset data;
  if (kind == "skewed") data = generate_skewed({n, d, q, 0.2, 0.001, 500.0, seed});
  else if (kind == "gaussian") data = generate_gaussian({n, d, 0.2, 0.001, 500.0, seed});
  else throw InputError("generate: kind must be skewed or gaussian");
  const ChunkedDataset ds = save_chunked(data.A, data.b, out, {chunk_rows, Index(1) << 22});
  std::filesystem::path xs(out);
  xs.replace_extension(".xstar.txt");
  write_vector(xs.string(), data.xstar);
  std::cout << "rows=" << ds.rows() << " cols=" << ds.cols() << " chunks=" << ds.chunks().size()
            << " manifest=" << out << " xstar=" << xs.string() << '\n';
  return 0;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Randomized quantile regression"};
  app.require_subcommand(1);

  std::string kind = "skewed", out, input, method = "SPC3", norm_mode = "estimated", config;
  Index n = 0, d = 0, s = 0, chunk_rows = 0, chunk_size = 0;
  double q = 2.0, tau = 0.5, eps = 0.0, tol = 1e-8;
  std::uint64_t seed = 1;
  int workers = 1;
  bool augmented = false;

  auto* gen = app.add_subcommand("generate", "Write a synthetic dataset as chunk files");
  gen->add_option("--kind", kind, "skewed or gaussian")->check(CLI::IsMember({"skewed", "gaussian"}));
  gen->add_option("--n", n, "rows")->required();
  gen->add_option("--d", d, "columns")->required();
  gen->add_option("--q", q, "block growth ratio (skewed)");
  gen->add_option("--seed", seed);
  gen->add_option("--out", out, "manifest path")->required();
  gen->add_option("--chunk-rows", chunk_rows, "rows per chunk (default from 2^22 values)");

  auto* solve = app.add_subcommand("solve", "Randomized solve");
  solve->add_option("--input", input, "manifest or CSV (b first)")->required();
  solve->add_option("--tau", tau)->required();
  solve->add_option("--method", method, "SC, SPC1, SPC2, SPC3, NOCO or UNIF");
  auto* s_opt = solve->add_option("--s", s, "sample size");
  auto* eps_opt = solve->add_option("--eps", eps, "target accuracy in (0, 1/2]");
  s_opt->excludes(eps_opt);
  solve->add_option("--seed", seed);
  solve->add_option("--chunk-size", chunk_size, "rows per in-memory block for CSV input");
  solve->add_option("--workers", workers);
  solve->add_option("--norm-mode", norm_mode)->check(CLI::IsMember({"exact", "estimated"}));
  solve->add_option("--out", out, "write x here, one value per line");

  auto* exact = app.add_subcommand("exact", "Interior-point solve on all rows");
  exact->add_option("--input", input)->required();
  exact->add_option("--tau", tau)->required();
  exact->add_option("--tol", tol);
  exact->add_option("--out", out);

  auto* exp = app.add_subcommand("experiment", "Run an experiment config");
  exp->add_option("--config", config)->required();
  exp->add_option("--out", out, "results CSV (overrides the config)");

  auto* kap = app.add_subcommand("kappa", "Condition a design and estimate kappa");
  kap->add_option("--input", input)->required();
  kap->add_option("--method", method);
  kap->add_option("--seed", seed);
  kap->add_flag("--augmented", augmented, "use [b, -A] instead of A");

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    return app.exit(e) == 0 ? 0 : 1;
  }

  try {
    if (*gen) return run_generate(kind, n, d, q, seed, out, chunk_rows);

    if (*solve) {
      if (s == 0 && eps == 0.0) throw InputError("solve: give --s or --eps");
      const InputData in = open_input(input, chunk_size);
      RandomizedConfig cfg;
      cfg.method = parse_method(method);
      cfg.sample_size = s;
      if (eps != 0.0) cfg.eps = eps;
      cfg.norm_mode = norm_mode == "exact" ? NormMode::exact : NormMode::estimated;
      cfg.plan.workers = workers;
      cfg.conditioning.plan.workers = workers;
      rng::Stream rng(seed);
      const RandomizedResult r = solve_randomized(in.source(), tau, cfg, rng);
      std::printf("objective=%.12g sample_size=%lld s_target=%lld status=%s\n", r.solution.objective,
                  static_cast<long long>(r.report.sample_size), static_cast<long long>(r.report.s_target),
                  std::string(to_string(r.solution.status)).c_str());
      if (!out.empty()) write_vector(out, r.solution.x);
      return 0;
    }

    if (*exact) {
      auto [A, b] = load_problem_data(input);
      SolverConfig cfg;
      cfg.tolerance = tol;
      const Solution sol = solve_exact(QuantileProblem(std::move(A), std::move(b), tau), cfg);
      std::printf("objective=%.12g status=%s iterations=%d gap=%.3g\n", sol.objective,
                  std::string(to_string(sol.status)).c_str(), sol.iterations, sol.duality_gap);
      if (sol.status == SolveStatus::infeasible_input) return 2;
      if (!out.empty()) write_vector(out, sol.x);
      return 0;
    }

    if (*exp) {
      ExperimentConfig cfg = load_experiment_config(config);
      if (!out.empty()) cfg.out = out;
      const ExperimentResult res = run_experiment(cfg);
      if (cfg.out.empty()) {
        write_results_csv(std::cout, res.rows);
      } else {
        std::ofstream f(cfg.out);
        if (!f) throw DataError("cannot write " + cfg.out);
        write_results_csv(f, res.rows);
        std::ofstream t(cfg.out + ".timings.csv");
        write_timings_csv(t, res.timings);
      }
      return 0;
    }

    if (*kap) {
      auto [A, b] = load_problem_data(input);
      const Design M = augmented ? augment_rows(A, b) : A;
      rng::Stream rng(seed);
      const RFactor rf = condition(parse_conditioner(method), M, {}, rng);
      const KappaEstimate k = estimate_kappa(M, rf.R);
      std::printf("method=%s alpha=%.6g beta=%.6g kappa=%.6g\n", std::string(to_string(rf.method)).c_str(), k.alpha,
                  k.beta, k.kappa);
      return 0;
    }
  } catch (const InputError& e) {
    std::cerr << "error: " << e.what() << '\n';
    return 1;
  } catch (const NumericalError& e) {
    std::cerr << "numerical failure: " << e.what() << '\n';
    return 2;
  } catch (const std::filesystem::filesystem_error& e) {
    std::cerr << "error: " << e.what() << '\n';
    return 1;
  }
  return 0;
}

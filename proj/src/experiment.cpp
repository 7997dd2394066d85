#include <algorithm>
#include <array>
#include <cmath>
#include <cstdio>
#include <fstream>
#include <functional>
#include <istream>
#include <limits>
#include <memory>
#include <ostream>
#include <sstream>

#include "qreg/data.hpp"
#include "qreg/pipeline.hpp"

namespace qreg {

namespace {

std::string trim(const std::string& s) {
  const auto b = s.find_first_not_of(" \t\r");
  if (b == std::string::npos) return "";
  const auto e = s.find_last_not_of(" \t\r");
  return s.substr(b, e - b + 1);
}

std::string fmt(double v) {
  if (std::isnan(v)) return "nan";
  char buf[64];
  std::snprintf(buf, sizeof buf, "%.10g", v);
  return buf;
}

}  // namespace

ExperimentConfig parse_experiment_config(std::istream& in) {
  ExperimentConfig cfg;
  std::string line;
  int lineno = 0;
  while (std::getline(in, line)) {
    ++lineno;
    const auto hash = line.find('#');
    if (hash != std::string::npos) line.resize(hash);
    line = trim(line);
    if (line.empty()) continue;
    const auto eq = line.find('=');
    const std::string where = "config line " + std::to_string(lineno);
    if (eq == std::string::npos) throw InputError(where + ": missing '='");
    const std::string key = trim(line.substr(0, eq));
    const std::string val = trim(line.substr(eq + 1));
    try {
      if (key == "dataset") cfg.dataset = val;
      else if (key == "n") cfg.n = std::stoll(val);
      else if (key == "d") cfg.d = std::stoll(val);
      else if (key == "q") cfg.q = std::stod(val);
      else if (key == "data_seed") cfg.data_seed = std::stoull(val);
      else if (key == "stack") cfg.stack = std::stoll(val);
      else if (key == "method") cfg.methods.push_back(val);
      else if (key == "tau") cfg.taus.push_back(std::stod(val));
      else if (key == "s") cfg.sizes.push_back(std::stoll(val));
      else if (key == "trials") cfg.trials = std::stoi(val);
      else if (key == "seed") cfg.seed = std::stoull(val);
      else if (key == "workers") cfg.workers = std::stoi(val);
      else if (key == "out") cfg.out = val;
      else if (key == "norm_mode") {
        if (val == "exact") cfg.norm_mode = NormMode::exact;
        else if (val == "estimated") cfg.norm_mode = NormMode::estimated;
        else throw InputError("norm_mode must be exact or estimated");
      } else {
        throw InputError("unknown key '" + key + "'");
      }
    } catch (const InputError& e) {
      throw InputError(where + ": " + e.what());
    } catch (const std::exception&) {
      throw InputError(where + ": malformed value for '" + key + "'");
    }
  }
  if (cfg.trials < 1) throw InputError("config: trials must be at least 1");
  if (cfg.stack < 1) throw InputError("config: stack must be at least 1");
  if (cfg.methods.empty()) throw InputError("config: at least one method is required");
  if (cfg.taus.empty()) throw InputError("config: at least one tau is required");
  for (const std::string& m : cfg.methods)
    if (m != "exact") parse_method(m);
  for (double t : cfg.taus) check_tau(t);
  const bool needs_s = std::any_of(cfg.methods.begin(), cfg.methods.end(), [](const std::string& m) { return m != "exact"; });
  if (needs_s && cfg.sizes.empty()) throw InputError("config: at least one s is required");
  return cfg;
}

ExperimentConfig load_experiment_config(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) throw InputError("cannot open config " + path.string());
  return parse_experiment_config(in);
}

double quantile_type7(std::vector<double> v, double p) {
  if (v.empty()) return std::numeric_limits<double>::quiet_NaN();
  std::sort(v.begin(), v.end());
  const double h = (static_cast<double>(v.size()) - 1.0) * p;
  const auto lo = static_cast<std::size_t>(std::floor(h));
  const std::size_t hi = std::min(lo + 1, v.size() - 1);
  return v[lo] + (h - static_cast<double>(lo)) * (v[hi] - v[lo]);
}

ExperimentResult run_experiment(const ExperimentConfig& cfg) {
  Dataset data;
  if (cfg.dataset == "skewed") {
    data = generate_skewed({cfg.n, cfg.d, cfg.q, 0.2, 0.001, 500.0, cfg.data_seed});
  } else if (cfg.dataset == "gaussian") {
    data = generate_gaussian({cfg.n, cfg.d, 0.2, 0.001, 500.0, cfg.data_seed});
  } else {
    auto [A, b] = load_problem_data(cfg.dataset);
    data.A = std::move(A);
    data.b = std::move(b);
  }
  const Index d = data.A.cols();
  for (Index s : cfg.sizes)
    if (s < d) throw InputError("config: s values must be at least d");

  const InMemoryProblemSource base(data.A, data.b);
  const StackedSource stacked(base, cfg.stack);
  const ProblemSource& src = cfg.stack > 1 ? static_cast<const ProblemSource&>(stacked) : base;
  const rng::Key master = rng::seed_key(cfg.seed);

  ExperimentResult result;
  static const char* kMetrics[] = {"objective", "l1", "l2", "linf"};
  for (double tau : cfg.taus) {
    const QuantileProblem problem(data.A, data.b, tau);
    const Solution ref = solve_exact(problem);
    if (ref.status == SolveStatus::infeasible_input) throw InputError("experiment: design is rank deficient");
    const double fstar = static_cast<double>(cfg.stack) * ref.objective;

    for (const std::string& mname : cfg.methods) {
      const bool exact = mname == "exact";
      const std::vector<Index> sizes = exact ? std::vector<Index>{src.rows()} : cfg.sizes;
      for (Index s : sizes) {
        std::vector<std::array<double, 4>> errs(static_cast<size_t>(cfg.trials));
        std::vector<StageSeconds> secs(static_cast<size_t>(cfg.trials));
        std::vector<char> failed(static_cast<size_t>(cfg.trials), 0);
        const auto trial = [&](int t) {
          const auto ti = static_cast<size_t>(t);
          if (exact) {
            errs[ti] = {0.0, 0.0, 0.0, 0.0};
            return;
          }
          RandomizedConfig rc;
          rc.method = parse_method(mname);
          rc.sample_size = s;
          rc.norm_mode = cfg.norm_mode;
          rng::Stream st(rng::derive(master, rng::Tag::trial, static_cast<std::uint64_t>(t)));
          try {
            const RandomizedResult r = solve_randomized(src, tau, rc, st);
            const RelativeErrors e = relative_errors(r.solution.x, ref.x, r.solution.objective, fstar);
            errs[ti] = {e.objective, e.l1, e.l2, e.linf};
            secs[ti] = r.report.seconds;
          } catch (const NumericalError&) {
            failed[ti] = 1;
          }
        };
        parallel_ranges(cfg.workers, cfg.trials, [&](Index lo, Index hi, int) {
          for (Index t = lo; t < hi; ++t) trial(static_cast<int>(t));
        });
        const int failures = static_cast<int>(std::count(failed.begin(), failed.end(), 1));
        for (int m = 0; m < 4; ++m) {
          std::vector<double> vals;
          for (int t = 0; t < cfg.trials; ++t)
            if (!failed[static_cast<size_t>(t)]) vals.push_back(errs[static_cast<size_t>(t)][static_cast<size_t>(m)]);
          result.rows.push_back({mname, tau, s, kMetrics[m], quantile_type7(vals, 0.25), quantile_type7(vals, 0.5),
                                 quantile_type7(vals, 0.75), cfg.trials, failures});
        }
        if (!exact) {
          const std::pair<const char*, double StageSeconds::*> stages[] = {{"condition", &StageSeconds::condition},
                                                                           {"estimate", &StageSeconds::estimate},
                                                                           {"sample", &StageSeconds::sample},
                                                                           {"solve", &StageSeconds::solve}};
          for (const auto& [name, member] : stages) {
            std::vector<double> vals;
            for (int t = 0; t < cfg.trials; ++t)
              if (!failed[static_cast<size_t>(t)]) vals.push_back(secs[static_cast<size_t>(t)].*member);
            result.timings.push_back({mname, tau, s, name, quantile_type7(vals, 0.5)});
          }
        }
      }
    }
  }
  return result;
}

void write_results_csv(std::ostream& out, const std::vector<ExperimentRow>& rows) {
  out << "method,tau,s,metric,q1,median,q3,trials,failures\n";
  for (const ExperimentRow& r : rows)
    out << r.method << ',' << fmt(r.tau) << ',' << r.s << ',' << r.metric << ',' << fmt(r.q1) << ','
        << fmt(r.median) << ',' << fmt(r.q3) << ',' << r.trials << ',' << r.failures << '\n';
}

void write_timings_csv(std::ostream& out, const std::vector<TimingRow>& rows) {
  out << "method,tau,s,stage,median_seconds\n";
  for (const TimingRow& r : rows)
    out << r.method << ',' << fmt(r.tau) << ',' << r.s << ',' << r.stage << ',' << fmt(r.median_seconds) << '\n';
}

}  // namespace qreg

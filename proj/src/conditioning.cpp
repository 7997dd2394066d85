#include "qreg/conditioning.hpp"

#include <Eigen/SVD>

#include <algorithm>
#include <cctype>
#include <chrono>
#include <cmath>

#include "qreg/sampling.hpp"
#include "qreg/sketch.hpp"
#include "qreg/solver.hpp"

namespace qreg {

std::string_view to_string(Conditioner c) {
  switch (c) {
    case Conditioner::SC: return "SC";
    case Conditioner::SPC1: return "SPC1";
    case Conditioner::SPC2: return "SPC2";
    case Conditioner::SPC3: return "SPC3";
    case Conditioner::NOCO: return "NOCO";
  }
  return "unknown";
}

Conditioner parse_conditioner(std::string_view name) {
  std::string up(name);
  std::transform(up.begin(), up.end(), up.begin(), [](unsigned char ch) { return std::toupper(ch); });
  for (Conditioner c : {Conditioner::SC, Conditioner::SPC1, Conditioner::SPC2, Conditioner::SPC3, Conditioner::NOCO})
    if (up == to_string(c)) return c;
  throw InputError("unknown conditioner '" + std::string(name) + "'");
}

SmallMatrix qr_r_factor(const DenseMatrix& M) {
  const Index d = M.cols();
  if (d < 1) throw ConditioningError("qr_r_factor: matrix has no columns");
  if (M.rows() < d)
    throw ConditioningError("qr_r_factor: " + std::to_string(M.rows()) + " rows cannot span " +
                            std::to_string(d) + " columns");
  Eigen::HouseholderQR<SmallMatrix> qr{SmallMatrix(M)};
  SmallMatrix R = qr.matrixQR().topRows(d).triangularView<Eigen::Upper>();
  for (Index j = 0; j < d; ++j)
    if (R(j, j) < 0.0) R.row(j) = -R.row(j);
  Eigen::JacobiSVD<SmallMatrix> svd(R);
  const Vector& sv = svd.singularValues();
  if (!(sv(0) > 0.0) || sv(d - 1) < 1e-10 * sv(0)) {
    const Index rank = (sv.array() >= 1e-10 * sv(0)).count();
    throw ConditioningError("qr_r_factor: rank deficient, numerical rank " + std::to_string(rank) + " of " +
                            std::to_string(d) + " columns");
  }
  return R;
}

namespace {

bool usable_sample(const DenseMatrix& values) {
  return values.rows() >= values.cols() && singular_value_ratio(values) >= 1e-10;
}

}  // namespace

RFactor condition(Conditioner method, const RowSource& src, const ConditionParams& params, rng::Stream& rng) {
  const auto start = std::chrono::steady_clock::now();
  const Index n = src.rows();
  const Index d = src.cols();
  if (d < 1 || n < d) throw InputError("condition: need n >= d >= 1");
  const rng::Key base = rng.fork();
  RFactor out;
  out.method = method;

  if (method == Conditioner::NOCO) {
    out.R = SmallMatrix::Identity(d, d);
  } else if (method == Conditioner::SC) {
    const Index r = params.sketch_rows > 0 ? params.sketch_rows : default_dense_cauchy_rows(d);
    rng::Stream st(rng::derive(base, rng::Tag::dense_cauchy));
    const DenseCauchyTransform t = build_dense_cauchy(r, n, st);
    out.report.sketch_rows = r;
    out.R = qr_r_factor(apply_dense_cauchy(t, src, params.plan));
  } else {
    const Index r1 = params.sketch_rows > 0 ? params.sketch_rows : default_sct_rows(d);
    rng::Stream st(rng::derive(base, rng::Tag::sct));
    const SparseCauchyTransform sct = build_sct(n, r1, st);
    out.report.sketch_rows = r1;
    const SmallMatrix R1 = qr_r_factor(apply_sct(sct, src, params.plan));
    if (method == Conditioner::SPC1) {
      out.R = R1;
    } else {
      const Index target =
          params.intermediate_rows > 0 ? params.intermediate_rows : std::min(n, std::max<Index>(20 * d * d, 2000));
      out.report.intermediate_target = target;
      const RowNormRule rule = RowNormRule::exact(R1);
      const double total = sum_row_norms(src, rule, params.plan);
      WeightedRows rows;
      bool ok = false;
      for (int attempt = 0; attempt < 2 && !ok; ++attempt) {
        rows = sample_rows(src, rule, total, target, rng::derive(base, rng::Tag::cond_sample, attempt), params.plan);
        ok = usable_sample(rows.values);
        if (!ok) ++out.report.retries;
      }
      if (!ok)
        throw ConditioningError("condition: intermediate sample is rank deficient after a retry (" +
                                std::to_string(rows.values.rows()) + " rows)");
      out.report.intermediate_size = rows.values.rows();
      if (method == Conditioner::SPC3) {
        out.R = qr_r_factor(rows.values);
      } else {
        const EllipsoidRounding er = ellipsoid_round(rows.values, params.ellipsoid_max_iter);
        out.R = er.R;
        out.report.eta = er.eta;
        out.report.ellipsoid_iterations = er.iterations;
      }
    }
  }
  out.report.seconds = std::chrono::duration<double>(std::chrono::steady_clock::now() - start).count();
  return out;
}

RFactor condition(Conditioner method, const Design& A, const ConditionParams& params, rng::Stream& rng) {
  return condition(method, DesignSource(A), params, rng);
}

// ---------------------------------------------------------------- kappa

namespace {

KappaEstimate kappa_of_basis(const DenseMatrix& U) {
  const Index d = U.cols();
  KappaEstimate k;
  k.rows_used = U.rows();
  k.alpha = U.cwiseAbs().sum();
  double worst = 0.0;
  for (Index j = 0; j < d; ++j) {
    double m;
    if (d == 1) {
      m = U.col(0).lpNorm<1>();
    } else {
      DenseMatrix rest(U.rows(), d - 1);
      rest.leftCols(j) = -U.leftCols(j);
      rest.rightCols(d - 1 - j) = -U.rightCols(d - 1 - j);
      const QuantileProblem p(Design(std::move(rest)), Vector(U.col(j)), 0.5);
      const Solution sol = solve_exact(p);
      if (sol.status == SolveStatus::infeasible_input)
        throw NumericalError("estimate_kappa: basis is rank deficient");
      m = 2.0 * sol.objective;
    }
    if (!(m > 0.0)) throw NumericalError("estimate_kappa: basis is rank deficient");
    worst = std::max(worst, 1.0 / m);
  }
  k.beta = worst;
  k.kappa = k.alpha * k.beta;
  return k;
}

}  // namespace

KappaEstimate estimate_kappa(const Design& A, const SmallMatrix& R) {
  if (R.rows() != A.cols()) throw InputError("estimate_kappa: R does not match A");
  return kappa_of_basis(right_multiply(A, invert_factor(R)));
}

KappaEstimate estimate_kappa(const RowSource& src, const SmallMatrix& R, Index row_limit, rng::Stream& rng) {
  if (R.rows() != src.cols()) throw InputError("estimate_kappa: R does not match the source");
  if (row_limit <= 0 || src.rows() <= row_limit) return estimate_kappa(gather(src), R);
  const rng::Key key = rng::derive(rng.fork(), rng::Tag::kappa_surrogate);
  const WeightedRows rows = sample_rows(src, RowNormRule::uniform(src.cols()), static_cast<double>(src.rows()),
                                        row_limit, key);
  KappaEstimate k = kappa_of_basis(rows.values * invert_factor(R));
  k.surrogate = true;
  return k;
}

Design gather(const RowSource& src) {
  std::vector<Design> blocks;
  bool sparse = false;
  src.for_each_block([&](Index, const Design& block) {
    sparse = sparse || block.is_sparse();
    blocks.push_back(block);
  });
  if (blocks.size() == 1) return blocks.front();
  const Index n = src.rows();
  const Index d = src.cols();
  if (!sparse) {
    DenseMatrix out(n, d);
    Index at = 0;
    for (const Design& b : blocks) {
      out.middleRows(at, b.rows()) = b.dense();
      at += b.rows();
    }
    return Design(std::move(out));
  }
  std::vector<Triple> entries;
  Index at = 0;
  for (const Design& b : blocks) {
    b.visit([&](const auto& m) {
      for (Index i = 0; i < m.rows(); ++i)
        for_each_entry(m, i, [&](Index j, double v) {
          if (v != 0.0) entries.push_back({at + i, static_cast<std::int32_t>(j), v});
        });
    });
    at += b.rows();
  }
  return Design(SparseMatrix(n, d, std::move(entries)));
}

}  // namespace qreg

#include "qreg/sketch.hpp"

#include <algorithm>
#include <cmath>
#include <limits>

namespace qreg {

double sample_cauchy(rng::Stream& rng) { return cauchy_from_uniform(rng.uniform()); }

Index default_sct_rows(Index d) {
  const auto base = static_cast<Index>(std::ceil(8.0 * static_cast<double>(d) * std::log(d + 1.0)));
  return std::max<Index>(64, base + d);
}

Index default_dense_cauchy_rows(Index d) {
  return std::max<Index>(1, static_cast<Index>(std::ceil(8.0 * static_cast<double>(d) * std::log(d + 1.0))));
}

SparseCauchyTransform build_sct(Index n, Index r1, rng::Stream& rng) {
  if (r1 < 1) throw InputError("build_sct: r1 must be at least 1");
  if (r1 > std::numeric_limits<std::int32_t>::max()) throw InputError("build_sct: r1 too large");
  if (n < 0) throw InputError("build_sct: negative n");
  SparseCauchyTransform sct;
  sct.r1 = r1;
  sct.n = n;
  sct.target.resize(static_cast<size_t>(n));
  sct.scale.resize(static_cast<size_t>(n));
  const rng::Key key = rng.fork();
  for (Index i = 0; i < n; ++i) {
    rng::Stream row(key, static_cast<std::uint64_t>(i));
    const std::uint64_t bits = row.next_u64();
    const auto t = static_cast<std::int32_t>(
        (static_cast<unsigned __int128>(bits) * static_cast<std::uint64_t>(r1)) >> 64);
    sct.target[static_cast<size_t>(i)] = t;
    sct.scale[static_cast<size_t>(i)] = cauchy_from_uniform(row.uniform());
  }
  return sct;
}

namespace {

void accumulate_sct(const SparseCauchyTransform& sct, Index row_begin, const Design& block,
                    DenseMatrix& out, int workers) {
  if (row_begin + block.rows() > sct.n) throw InputError("apply_sct: input has more rows than the transform");
  if (block.cols() != out.cols()) throw InputError("apply_sct: column mismatch between blocks");
  block.visit([&](const auto& m) {
    run_workers(workers, [&](int w) {
      const Index nw = std::max(1, workers);
      for (Index i = 0; i < m.rows(); ++i) {
        const auto g = static_cast<size_t>(row_begin + i);
        const Index t = sct.target[g];
        if (t % nw != w) continue;
        const double s = sct.scale[g];
        double* o = out.data() + t * out.cols();
        for_each_entry(m, i, [&](Index j, double v) { o[j] += s * v; });
      }
    });
  });
}

}  // namespace

DenseMatrix apply_sct(const SparseCauchyTransform& sct, const RowSource& src, const PassPlan& plan) {
  if (src.rows() != sct.n) throw InputError("apply_sct: transform built for a different row count");
  DenseMatrix out = DenseMatrix::Zero(sct.r1, src.cols());
  src.for_each_block([&](Index row_begin, const Design& block) {
    accumulate_sct(sct, row_begin, block, out, plan.workers);
  });
  return out;
}

DenseMatrix apply_sct(const SparseCauchyTransform& sct, const Design& A, const PassPlan& plan) {
  return apply_sct(sct, DesignSource(A), plan);
}

// ---------------------------------------------------------------- dense Cauchy

DenseCauchyTransform::DenseCauchyTransform(DenseMatrix values)
    : r_(values.rows()), n_(values.cols()), values_(std::move(values)) {
  if (!values_->allFinite()) throw InputError("DenseCauchyTransform: non-finite value");
}

void DenseCauchyTransform::column(Index i, double* out) const {
  if (values_) {
    for (Index t = 0; t < r_; ++t) out[t] = (*values_)(t, i);
    return;
  }
  rng::Stream s(key_, static_cast<std::uint64_t>(i));
  for (Index t = 0; t < r_; ++t) out[t] = cauchy_from_uniform(s.uniform());
}

DenseMatrix DenseCauchyTransform::materialize() const {
  if (values_) return *values_;
  DenseMatrix out(r_, n_);
  std::vector<double> col(static_cast<size_t>(r_));
  for (Index i = 0; i < n_; ++i) {
    column(i, col.data());
    for (Index t = 0; t < r_; ++t) out(t, i) = col[static_cast<size_t>(t)];
  }
  return out;
}

DenseCauchyTransform build_dense_cauchy(Index r, Index n, rng::Stream& rng) {
  if (r < 1 || n < 0) throw InputError("build_dense_cauchy: bad dimensions");
  return DenseCauchyTransform(r, n, rng.fork());
}

DenseMatrix apply_dense_cauchy(const DenseCauchyTransform& t, const RowSource& src, const PassPlan& plan) {
  if (src.rows() != t.cols()) throw InputError("apply_dense_cauchy: dimension mismatch");
  const Index r = t.rows();
  const Index d = src.cols();
  DenseMatrix out = DenseMatrix::Zero(r, d);
  constexpr Index kBatch = 2048;
  DenseMatrix cols(kBatch, r);
  src.for_each_block([&](Index row_begin, const Design& block) {
    block.visit([&](const auto& m) {
      for (Index b0 = 0; b0 < m.rows(); b0 += kBatch) {
        const Index b1 = std::min(m.rows(), b0 + kBatch);
        parallel_ranges(plan.workers, b1 - b0, [&](Index lo, Index hi, int) {
          for (Index k = lo; k < hi; ++k) t.column(row_begin + b0 + k, cols.data() + k * r);
        });
        run_workers(plan.workers, [&](int w) {
          const Index nw = std::max(1, plan.workers);
          for (Index i = b0; i < b1; ++i) {
            const double* c = cols.data() + (i - b0) * r;
            for_each_entry(m, i, [&](Index j, double v) {
              for (Index row = w; row < r; row += nw) out(row, j) += c[row] * v;
            });
          }
        });
      }
    });
  });
  return out;
}

DenseMatrix apply_dense_cauchy(const DenseCauchyTransform& t, const Design& A, const PassPlan& plan) {
  return apply_dense_cauchy(t, DesignSource(A), plan);
}

// ---------------------------------------------------------------- diagnostics

Vector random_unit_vector(Index d, rng::Stream& rng) {
  Vector x(d);
  do {
    for (Index j = 0; j < d; ++j) x(j) = rng.normal();
  } while (x.norm() == 0.0);
  return x / x.norm();
}

std::pair<double, double> measure_distortion(const DenseMatrix& embedA, const Design& A, Index trials,
                                             rng::Stream& rng) {
  if (embedA.cols() != A.cols()) throw InputError("measure_distortion: column mismatch");
  if (trials < 1) throw InputError("measure_distortion: need at least one trial");
  double lo = std::numeric_limits<double>::infinity();
  double hi = 0.0;
  for (Index k = 0; k < trials; ++k) {
    const Vector x = random_unit_vector(A.cols(), rng);
    const double den = multiply(A, x).lpNorm<1>();
    if (den == 0.0) throw NumericalError("measure_distortion: A x = 0, A is rank deficient");
    const double ratio = (embedA * x).lpNorm<1>() / den;
    lo = std::min(lo, ratio);
    hi = std::max(hi, ratio);
  }
  return {lo, hi};
}

}  // namespace qreg

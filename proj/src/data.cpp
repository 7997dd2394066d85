#include "qreg/data.hpp"

#include <cmath>

#include "qreg/rng.hpp"

namespace qreg {

std::vector<Index> skewed_block_sizes(Index n, Index d, double q) {
  if (d < 1 || n < d) throw DataError("skewed: need n >= d >= 1");
  if (!(q > 1.0 && q <= 2.0)) throw DataError("skewed: q must lie in (1, 2]");
  const double dd = static_cast<double>(d);
  const double geo = (std::pow(q, dd) - 1.0) / (q - 1.0);
  const auto c1 = static_cast<Index>(std::ceil(static_cast<double>(n) / geo));
  if (c1 < 161)
    throw DataError("skewed: first block has " + std::to_string(c1) + " rows, fewer than 161; need n >= " +
                    std::to_string(skewed_min_rows(d, q)) + " for d = " + std::to_string(d) +
                    ", q = " + std::to_string(q));
  std::vector<Index> c(static_cast<size_t>(d));
  Index used = 0;
  for (Index j = 0; j + 1 < d; ++j) {
    c[static_cast<size_t>(j)] = static_cast<Index>(std::floor(static_cast<double>(c1) * std::pow(q, static_cast<double>(j))));
    used += c[static_cast<size_t>(j)];
  }
  c.back() = n - used;
  if (c.back() < 1) throw DataError("skewed: block sizes leave no rows for the last block");
  return c;
}

Index skewed_min_rows(Index d, double q) {
  const double geo = (std::pow(q, static_cast<double>(d)) - 1.0) / (q - 1.0);
  return static_cast<Index>(std::floor(160.0 * geo)) + 1;
}

double laplace_from_uniform(double u) {
  const double c = u - 0.5;
  const double sign = c > 0.0 ? 1.0 : (c < 0.0 ? -1.0 : 0.0);
  return -sign * std::log(1.0 - 2.0 * std::abs(c));
}

namespace {

/// Draws x*, forms b from b* = A x*, and applies noise and corruption in place.
Vector finish_response(const Design& A, Index d, double noise_ratio, double corrupt_prob, double corrupt_scale,
                       rng::Key base, Vector& b) {
  if (!(noise_ratio >= 0.0)) throw DataError("generator: noise ratio must be nonnegative");
  if (!(corrupt_prob >= 0.0 && corrupt_prob <= 1.0)) throw DataError("generator: corruption probability out of range");
  const Index n = A.rows();
  rng::Stream xs(rng::derive(base, rng::Tag::gen_xstar));
  Vector xstar(d);
  for (Index j = 0; j < d; ++j) xstar(j) = xs.normal();
  const Vector bstar = multiply(A, xstar);

  const rng::Key noise_key = rng::derive(base, rng::Tag::gen_noise);
  Vector eps(n);
  for (Index i = 0; i < n; ++i) {
    rng::Stream st(noise_key, static_cast<std::uint64_t>(i));
    eps(i) = laplace_from_uniform(st.uniform());
  }
  const double en = eps.norm();
  if (en > 0.0) eps *= noise_ratio * bstar.norm() / en;

  const rng::Key corrupt_key = rng::derive(base, rng::Tag::gen_corrupt);
  b.resize(n);
  for (Index i = 0; i < n; ++i) {
    rng::Stream st(corrupt_key, static_cast<std::uint64_t>(i));
    b(i) = st.uniform() < corrupt_prob ? corrupt_scale * eps(i) : bstar(i) + eps(i);
  }
  return xstar;
}

}  // namespace

Dataset generate_skewed(const SkewedSpec& spec) {
  const std::vector<Index> blocks = skewed_block_sizes(spec.n, spec.d, spec.q);
  std::vector<Triple> entries;
  entries.reserve(static_cast<size_t>(spec.n));
  Index row = 0;
  for (Index j = 0; j < spec.d; ++j)
    for (Index k = 0; k < blocks[static_cast<size_t>(j)]; ++k) entries.push_back({row++, static_cast<std::int32_t>(j), 1.0});
  Dataset out;
  out.A = Design(SparseMatrix(spec.n, spec.d, std::move(entries)));
  out.xstar = finish_response(out.A, spec.d, spec.noise_ratio, spec.corrupt_prob, spec.corrupt_scale,
                              rng::seed_key(spec.seed), out.b);
  return out;
}

Dataset generate_gaussian(const GaussianSpec& spec) {
  if (spec.d < 1 || spec.n < spec.d) throw DataError("gaussian: need n >= d >= 1");
  const rng::Key base = rng::seed_key(spec.seed);
  const rng::Key design_key = rng::derive(base, rng::Tag::gen_design);
  DenseMatrix A(spec.n, spec.d);
  for (Index i = 0; i < spec.n; ++i) {
    rng::Stream st(design_key, static_cast<std::uint64_t>(i));
    for (Index j = 0; j < spec.d; ++j) A(i, j) = st.normal();
  }
  Dataset out;
  out.A = Design(std::move(A));
  out.xstar = finish_response(out.A, spec.d, spec.noise_ratio, spec.corrupt_prob, spec.corrupt_scale, base, out.b);
  return out;
}

}  // namespace qreg

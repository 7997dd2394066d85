#include <doctest.h>

#include <algorithm>
#include <cmath>
#include <limits>
#include <vector>

#include "qreg/conditioning.hpp"
#include "qreg/data.hpp"
#include "qreg/sampling.hpp"
#include "support.hpp"

using namespace qreg;
using doctest::Approx;

namespace {

RowNormEstimates norms(std::initializer_list<double> v) {
  RowNormEstimates r;
  r.lambda = Vector(static_cast<Index>(v.size()));
  Index i = 0;
  for (double x : v) r.lambda(i++) = x;
  return r;
}

double formula(double tau, double kappa, double d, double eps, double C) {
  const double mu = tau / (1 - tau);
  return mu * C * kappa / (eps * eps) * (d * std::log(mu * 18 / eps) + std::log(80.0));
}

}  // namespace

TEST_CASE("projection width") {
  CHECK(row_norm_projection_width(1000000) == 263);
  CHECK(row_norm_projection_width(1) == static_cast<Index>(std::ceil(15 * std::log(40.0))));
  CHECK_THROWS_AS(row_norm_projection_width(0), InputError);
}

TEST_CASE("estimated norm of a single canonical row") {
  int inside = 0;
  for (std::uint64_t seed = 0; seed < 100; ++seed) {
    DenseMatrix row = DenseMatrix::Zero(1, 4);
    row(0, 2) = 1.0;
    rng::Stream rng(seed);
    const double l = estimate_row_norms(Design(row), SmallMatrix::Identity(4, 4), rng).lambda(0);
    inside += l >= 0.5 && l <= 1.5;
  }
  CHECK(inside >= 95);
}

TEST_CASE("estimated norms scale with A") {
  rng::Stream g(1);
  const DenseMatrix A = test::gaussian_matrix(500, 3, g);
  const SmallMatrix R = qr_r_factor(A);
  rng::Stream a(2), b(2), c(2);
  const Vector l1 = estimate_row_norms(Design(A), R, a).lambda;
  const Vector l2 = estimate_row_norms(Design(DenseMatrix(2 * A)), R, b).lambda;
  const Vector l3 = estimate_row_norms(Design(DenseMatrix(3 * A)), R, c).lambda;
  CHECK(l2 == Vector(2 * l1));
  for (Index i = 0; i < l1.size(); ++i) CHECK(l3(i) == Approx(3 * l1(i)).epsilon(4 * std::numeric_limits<double>::epsilon()));
}

TEST_CASE("exact norms") {
  CHECK(exact_row_norms(Design(DenseMatrix::Identity(3, 3)), SmallMatrix::Identity(3, 3)).lambda == Vector::Ones(3));
  DenseMatrix D = DenseMatrix::Zero(3, 3);
  D.diagonal() << 1, 2, 3;
  CHECK(exact_row_norms(Design(D), SmallMatrix::Identity(3, 3)).lambda == Vector{{1.0, 2.0, 3.0}});

  rng::Stream g(3);
  DenseMatrix A = test::gaussian_matrix(200, 4, g);
  for (Index i = 0; i < A.rows(); ++i) A(i, i % 4) = 0.0;
  const SmallMatrix R = qr_r_factor(A);
  const Vector dense = exact_row_norms(Design(A), R).lambda;
  const Vector sparse = exact_row_norms(Design(test::to_sparse(A)), R).lambda;
  const DenseMatrix U = A * R.inverse();
  for (Index i = 0; i < A.rows(); ++i) {
    CHECK(dense(i) == Approx(U.row(i).lpNorm<1>()).epsilon(1e-12));
    CHECK(sparse(i) == Approx(dense(i)).epsilon(1e-14));
  }
}

TEST_CASE("estimated norms track exact norms") {
  rng::Stream g(4);
  const DenseMatrix A = test::gaussian_matrix(10000, 5, g);
  const SmallMatrix R = qr_r_factor(A);
  const Vector exact = exact_row_norms(Design(A), R).lambda;
  const RowNormEstimates est = estimate_row_norms(Design(A), R, g);
  CHECK(est.r2 == row_norm_projection_width(10000));
  Index inside = 0;
  for (Index i = 0; i < A.rows(); ++i) inside += est.lambda(i) >= 0.5 * exact(i) && est.lambda(i) <= 1.5 * exact(i);
  CHECK(static_cast<double>(inside) >= 0.95 * 10000);
}

TEST_CASE("theoretical sample size") {
  CHECK(theoretical_sample_size(0.5, 1.0, 1, 0.5) == 2581);
  CHECK(theoretical_sample_size(0.5, 1.0, 1, 0.5) == static_cast<Index>(std::ceil(formula(0.5, 1, 1, 0.5, 81))));
  CHECK(theoretical_sample_size(0.5, 1.0, 1, 0.5, NormMode::exact) ==
        static_cast<Index>(std::ceil(formula(0.5, 1, 1, 0.5, 27))));
  for (double kappa : {1.0, 3.7, 20.0}) {
    const Index s1 = theoretical_sample_size(0.6, kappa, 4, 0.3);
    const Index s2 = theoretical_sample_size(0.6, 2 * kappa, 4, 0.3);
    CHECK(s2 >= 2 * s1 - 1);
    CHECK(s2 <= 2 * s1);
  }
  CHECK(theoretical_sample_size(0.75, 5.0, 3, 0.5) > 3 * theoretical_sample_size(0.5, 5.0, 3, 0.5));
  CHECK(theoretical_sample_size(0.5, 5.0, 4, 0.5) >= theoretical_sample_size(0.5, 5.0, 3, 0.5));
  CHECK(theoretical_sample_size(0.5, 5.0, 3, 0.25) >= theoretical_sample_size(0.5, 5.0, 3, 0.5));
  CHECK_THROWS_AS(theoretical_sample_size(0.5, 1.0, 1, 0.0), InputError);
  CHECK_THROWS_AS(theoretical_sample_size(0.5, 1.0, 1, 0.6), InputError);
  CHECK_THROWS_AS(theoretical_sample_size(0.4, 1.0, 1, 0.5), InputError);
}

TEST_CASE("sampling probabilities") {
  CHECK(sampling_probabilities(norms({1, 1, 1, 1}), 2).probabilities == Vector{{0.5, 0.5, 0.5, 0.5}});
  CHECK(sampling_probabilities(norms({3, 1}), 4).probabilities == Vector{{1.0, 1.0}});
  CHECK(sampling_probabilities(norms({1, 0, 1}), 1).probabilities == Vector{{0.5, 0.0, 0.5}});
  CHECK_THROWS_AS(sampling_probabilities(norms({0, 0}), 1), SamplingError);
  CHECK(uniform_probabilities(4, 2).probabilities == Vector{{0.5, 0.5, 0.5, 0.5}});

  rng::Stream g(5);
  for (int trial = 0; trial < 200; ++trial) {
    RowNormEstimates l;
    l.lambda = test::gaussian_vector(50, g).cwiseAbs2();
    const Index s = 1 + static_cast<Index>(g.next_u64() % 60);
    const SamplingPlan p = sampling_probabilities(l, s);
    CHECK(p.expected_size <= static_cast<double>(s) * (1 + 1e-12));
    CHECK(p.expected_size == Approx(p.probabilities.sum()));
    RowNormEstimates scaled = l;
    scaled.lambda *= 4.0;
    CHECK(sampling_probabilities(scaled, s).probabilities == p.probabilities);
    RowNormEstimates flat;
    flat.lambda = Vector::Constant(50, 2.5);
    CHECK(sampling_probabilities(flat, s).probabilities == uniform_probabilities(50, s).probabilities);
  }
}

TEST_CASE("a full sample is the problem itself") {
  rng::Stream g(6);
  const QuantileProblem p(Design(test::gaussian_matrix(30, 2, g)), test::gaussian_vector(30, g), 0.3);
  SamplingPlan plan;
  plan.probabilities = Vector::Ones(30);
  const SampledProblem s = draw_sample(plan, p, g);
  CHECK(s.size() == 30);
  CHECK(s.weights == Vector::Ones(30));
  const QuantileProblem q = s.as_problem();
  for (int k = 0; k < 5; ++k) {
    const Vector x = test::gaussian_vector(2, g);
    CHECK(objective(q, x) == objective(p, x));
  }
  CHECK(verify_distortion(s, p, 50, g) == 0.0);
}

TEST_CASE("weighted sampling is unbiased and concentrated") {
  rng::Stream g(7);
  const DenseMatrix A = test::gaussian_matrix(400, 2, g);
  const QuantileProblem p(Design(A), test::gaussian_vector(400, g), 0.7);
  const Vector x = test::gaussian_vector(2, g);
  RowNormEstimates l;
  l.lambda = A.rowwise().lpNorm<1>();
  const SamplingPlan plan = sampling_probabilities(l, 60);
  const double truth = objective(p, x);
  double sum = 0, sumsq = 0;
  int within = 0, draws = 0;
  for (int k = 0; k < 2000; ++k) {
    rng::Stream r(rng::derive(rng::Key{99}, rng::Tag::trial, static_cast<std::uint64_t>(k)));
    SampledProblem s;
    try {
      s = draw_sample(plan, p, r);
    } catch (const SamplingError&) {
      continue;
    }
    ++draws;
    const double f = objective(s.as_problem(), x);
    sum += f;
    sumsq += f * f;
    if (k < 100)
      within += std::abs(static_cast<double>(s.size()) - plan.expected_size) <= 4 * std::sqrt(plan.expected_size);
  }
  CHECK(draws >= 1990);
  const double mean = sum / draws;
  const double se = std::sqrt((sumsq / draws - mean * mean) / draws);
  CHECK(std::abs(mean - truth) <= 3 * se);
  CHECK(within >= 95);
}

TEST_CASE("empty or rank-deficient samples are reported") {
  rng::Stream g(8);
  const QuantileProblem p(Design(test::gaussian_matrix(20, 2, g)), test::gaussian_vector(20, g), 0.5);
  SamplingPlan plan;
  plan.probabilities = Vector::Zero(20);
  CHECK_THROWS_AS(draw_sample(plan, p, g), SamplingError);
  plan.probabilities(3) = 1.0;
  CHECK_THROWS_AS(draw_sample(plan, p, g), SamplingError);
  plan.probabilities = Vector::Ones(19);
  CHECK_THROWS_AS(draw_sample(plan, p, g), InputError);
}

TEST_CASE("skewed data: exact-norm sample at the theoretical size") {
  const Dataset data = generate_skewed({10000, 5, 2.0, 0.2, 0.001, 500.0, 2});
  const QuantileProblem p(data.A, data.b, 0.5);
  const AugmentedProblem aug = augment(p);
  rng::Stream g(9);
  const SmallMatrix R = condition(Conditioner::SPC3, aug.Aaug, {}, g).R;
  const double kappa = estimate_kappa(aug.Aaug, R).kappa;
  const Index s = theoretical_sample_size(0.5, kappa, 6, 0.5, NormMode::exact);
  const RowNormEstimates l = exact_row_norms(aug.Aaug, R);
  const SamplingPlan plan = sampling_probabilities(l, s);
  int good = 0;
  for (std::uint64_t k = 0; k < 20; ++k) {
    rng::Stream r(k);
    const SampledProblem sp = draw_sample(plan, p, r);
    good += verify_distortion(sp, p, 100, r) <= 0.5;
  }
  CHECK(good >= 18);
}

TEST_CASE("skewed data: uniform sampling loses to conditioned sampling") {
  const Dataset data = generate_skewed({100000, 10, 1.8, 0.2, 0.001, 500.0, 3});
  const QuantileProblem p(data.A, data.b, 0.5);
  const AugmentedProblem aug = augment(p);
  rng::Stream g(10);
  const SmallMatrix R = condition(Conditioner::SPC3, aug.Aaug, {}, g).R;
  const SamplingPlan cond = sampling_probabilities(exact_row_norms(aug.Aaug, R), 100);
  const SamplingPlan unif = uniform_probabilities(100000, 100);
  // Deviation along the coordinate axes of [b, -A]: the small blocks are where uniform sampling goes blind.
  const DenseMatrix M = aug.Aaug.to_dense();
  const auto deviation = [&](const SamplingPlan& plan, std::uint64_t seed) {
    rng::Stream r(seed);
    SampledProblem sp;
    try {
      sp = draw_sample(plan, p, r);
    } catch (const SamplingError&) {
      return std::numeric_limits<double>::infinity();
    }
    DenseMatrix Ms(sp.size(), 11);
    Ms.col(0) = sp.Sb;
    Ms.rightCols(10) = -sp.SA;
    double worst = 0;
    for (Index j = 0; j < 11; ++j) {
      const double full = rho(Vector(M.col(j)), 0.5);
      worst = std::max(worst, std::abs(rho(Vector(Ms.col(j)), 0.5) - full) / full);
    }
    return worst;
  };
  std::vector<double> c, u;
  for (std::uint64_t k = 0; k < 20; ++k) {
    c.push_back(deviation(cond, k));
    u.push_back(deviation(unif, k));
  }
  std::sort(c.begin(), c.end());
  std::sort(u.begin(), u.end());
  MESSAGE("median deviation conditioned " << c[10] << " uniform " << u[10]);
  CHECK(c[10] < 0.5 * u[10]);
}

TEST_CASE("streamed passes match in-memory norms") {
  rng::Stream g(11);
  const Design A(test::gaussian_matrix(3000, 3, g));
  const SmallMatrix R = qr_r_factor(A.dense());
  const RowNormRule exact = RowNormRule::exact(R);
  const Vector l = exact_row_norms(A, R).lambda;
  double fold = 0;
  for (Index i = 0; i < l.size(); ++i) fold += l(i);
  CHECK(sum_row_norms(DesignSource(A), exact) == Approx(fold).epsilon(1e-13));
  CHECK(sum_row_norms(DesignSource(A, 100), exact, {3}) == sum_row_norms(DesignSource(A), exact));

  const double total = sum_row_norms(DesignSource(A), exact);
  const rng::Key key{5};
  const WeightedRows a = sample_rows(DesignSource(A), exact, total, 300, key);
  const WeightedRows b = sample_rows(DesignSource(A, 77), exact, total, 300, key, {4});
  CHECK(a.rows == b.rows);
  CHECK(a.values == b.values);
  CHECK(std::is_sorted(a.rows.begin(), a.rows.end()));
  for (size_t k = 0; k < a.rows.size(); ++k) {
    const Index i = a.rows[k];
    const double p = std::min(1.0, 300 * l(i) / total);
    CHECK(a.weights(static_cast<Index>(k)) == Approx(1 / p).epsilon(1e-12));
    CHECK((a.values.row(static_cast<Index>(k)) - A.dense().row(i) / p).norm() < 1e-12 * (1 + a.values.row(static_cast<Index>(k)).norm()));
  }

  rng::Stream e1(12), e2(12);
  const RowNormRule est1 = RowNormRule::estimated(R, 3000, e1);
  const RowNormRule est2 = RowNormRule::estimated(R, 3000, e2);
  CHECK(est1.width() == row_norm_projection_width(3000));
  CHECK(est1.compute(A, 1) == est2.compute(A, 4));
  CHECK(RowNormRule::uniform(3).compute(A, 1) == Vector::Ones(3000));
}

TEST_CASE("augmented rows split back into a sampled problem") {
  WeightedRows w;
  w.rows = {4, 9};
  w.weights = Vector{{2.0, 1.0}};
  w.values = DenseMatrix{{6.0, -2.0, 4.0}, {1.0, 0.5, -3.0}};
  const SampledProblem s = to_sampled_problem(w, 0.3);
  CHECK(s.Sb == Vector{{6.0, 1.0}});
  CHECK(s.SA == DenseMatrix{{2.0, -4.0}, {-0.5, 3.0}});
  CHECK(s.tau == 0.3);
}

TEST_CASE("factor inversion") {
  const SmallMatrix U{{2.0, 1.0}, {0.0, 4.0}};
  CHECK((invert_factor(U) * U - SmallMatrix::Identity(2, 2)).norm() < 1e-15);
  const SmallMatrix G{{0.0, 1.0}, {1.0, 0.0}};
  CHECK((invert_factor(G) * G - SmallMatrix::Identity(2, 2)).norm() < 1e-15);
  CHECK_THROWS_AS(invert_factor(SmallMatrix::Zero(2, 2)), NumericalError);
}

#include <gtest/gtest.h>

#include <cmath>
#include <random>

#include "dlreg/numerics.hpp"
#include "oracles.hpp"

using namespace dlreg;

TEST(NormalPdfCdf, StandardAtMode) {
  const auto r = normal_pdf_cdf(0.0, 0.0, 1.0);
  EXPECT_NEAR(r.density, 0.3989422804, 1e-10);
  EXPECT_DOUBLE_EQ(r.cumulative, 0.5);
}

TEST(NormalPdfCdf, UpperLimit) {
  const auto r = normal_pdf_cdf(1e6, 0.0, 1.0);
  EXPECT_EQ(r.density, 0.0);
  EXPECT_EQ(r.cumulative, 1.0);
}

TEST(NormalPdfCdf, QuantileAgainstQuadrature) {
  const auto r = normal_pdf_cdf(1.959964, 0.0, 1.0);
  const double integral = oracle::integrate(oracle::phi, -std::numeric_limits<double>::infinity(), 1.959964);
  EXPECT_NEAR(r.cumulative, integral, 1e-12);
  EXPECT_NEAR(r.cumulative, 0.975, 1e-6);
}

TEST(NormalPdfCdf, RejectsNonpositiveVariance) {
  EXPECT_THROW(normal_pdf_cdf(0.0, 0.0, 0.0), ModelError);
  EXPECT_THROW(normal_pdf_cdf(0.0, 0.0, -1.0), ModelError);
}

TEST(Hazard, MatchesDirectRatioAndTail) {
  for (double a : {-5.0, -1.0, 0.0, 1.0, 3.0, 6.0}) {
    const double direct = oracle::phi(a) / oracle::Phi(-a);
    EXPECT_NEAR(upper_hazard(a), direct, 1e-10 * direct) << a;
  }
  // Deep tail: lambda(a) ~ a + 1/a.
  EXPECT_NEAR(upper_hazard(40.0), 40.0 + 1.0 / 40.0 - 2.0 / std::pow(40.0, 3), 1e-6);
  EXPECT_TRUE(std::isfinite(lower_hazard(-60.0)));
}

TEST(TruncatedMean, SpecExamples) {
  EXPECT_NEAR(truncated_mean_below(2.0, 0.04, 1e9), 2.0, 1e-9);
  EXPECT_NEAR(truncated_mean_below(0.0, 1.0, 0.0), -0.7978845608, 1e-8);
  EXPECT_NEAR(truncated_mean_below(1.0, 4.0, 1.0), 1.0 - 2.0 * std::sqrt(2.0 / M_PI), 1e-8);
  EXPECT_NEAR(truncated_mean_above(0.0, 1.0, 0.0), 0.7978845608, 1e-8);
  EXPECT_NEAR(truncated_mean_above(3.0, 2.0, -1e9), 3.0, 1e-9);
}

TEST(TruncatedMean, AgainstIntegrationOracle) {
  EXPECT_NEAR(truncated_mean_below(0.0, 1.0, 0.0), oracle::truncated_mean_below(0.0, 1.0, 0.0), 1e-10);
  EXPECT_NEAR(truncated_mean_below(1.0, 4.0, 1.0), oracle::truncated_mean_below(1.0, 4.0, 1.0), 1e-10);
  EXPECT_NEAR(truncated_mean_below(0.3, 0.5, -4.0), oracle::truncated_mean_below(0.3, 0.5, -4.0), 1e-9);
}

TEST(TruncatedMean, Symmetry) {
  for (double a : {-3.0, -0.5, 0.0, 0.7, 2.5, 7.0})
    EXPECT_NEAR(truncated_mean_above(0.0, 1.0, a), -truncated_mean_below(0.0, 1.0, -a), 1e-14);
}

TEST(TruncatedMean, UnderflowIsAnError) {
  EXPECT_THROW(truncated_mean_below(0.0, 1.0, -60.0), ModelError);
  EXPECT_THROW(truncated_mean_above(0.0, 1.0, 60.0), ModelError);
}

TEST(TruncatedMean, OrderingAndTotalExpectation) {
  std::mt19937_64 rng(11);
  std::uniform_real_distribution<double> mu_d(-5.0, 5.0), s2_d(0.01, 9.0), off(-6.0, 6.0);
  for (int k = 0; k < 100; ++k) {
    const double mu = mu_d(rng), s2 = s2_d(rng);
    const double delta = mu + off(rng) * std::sqrt(s2);
    const double lo = truncated_mean_below(mu, s2, delta);
    const double hi = truncated_mean_above(mu, s2, delta);
    EXPECT_LT(lo, mu);
    EXPECT_GT(hi, mu);
    EXPECT_LE(lo, delta);
    EXPECT_GE(hi, delta);
    const double p = oracle::Phi((delta - mu) / std::sqrt(s2));
    EXPECT_NEAR(p * lo + (1.0 - p) * hi, mu, 1e-10 * std::max(1.0, std::abs(mu)));
  }
}

TEST(NewtonSolve, ScalarQuadratic) {
  const auto r = newton_solve([](const Vector& x) { return Vector::Constant(1, x(0) * x(0) - 4.0); },
                              [](const Vector& x) { return DenseMatrix::Constant(1, 1, 2.0 * x(0)); },
                              Vector::Constant(1, 3.0));
  EXPECT_NEAR(r.x(0), 2.0, 1e-10);
}

TEST(NewtonSolve, LinearSystemsConvergeInOneStep) {
  std::mt19937_64 rng(3);
  std::normal_distribution<double> norm;
  for (int k = 0; k < 20; ++k) {
    DenseMatrix a = DenseMatrix::NullaryExpr(4, 4, [&] { return norm(rng); });
    a += 4.0 * DenseMatrix::Identity(4, 4);
    const Vector b = Vector::NullaryExpr(4, [&] { return norm(rng); });
    const auto r = newton_solve([&](const Vector& x) { return Vector(a * x - b); },
                                [&](const Vector&) { return a; }, Vector::Zero(4));
    EXPECT_LE(r.iterations, 2);
    EXPECT_LT((r.x - a.fullPivLu().solve(b)).lpNorm<Eigen::Infinity>(), 1e-10);
  }
}

TEST(NewtonSolve, SingularAndNonConvergent) {
  EXPECT_THROW(newton_solve([](const Vector& x) { return Vector::Constant(1, x(0) * x(0) + 1.0); },
                            [](const Vector&) { return DenseMatrix::Zero(1, 1); }, Vector::Zero(1)),
               ModelError);
  RootSolveOptions opts;
  opts.max_iter = 3;
  try {
    newton_solve([](const Vector& x) { return Vector::Constant(1, std::atan(x(0)) - 1.0); },
                 [](const Vector& x) { return DenseMatrix::Constant(1, 1, 1.0 / (1.0 + x(0) * x(0))); },
                 Vector::Constant(1, 40.0), opts);
    FAIL() << "expected NoConvergence";
  } catch (const NoConvergence& e) {
    EXPECT_EQ(e.last_iterate().size(), 1);
  }
}

TEST(FiniteDiff, Examples) {
  const auto sq = [](const Vector& x) { return Vector::Constant(1, x(0) * x(0)); };
  EXPECT_NEAR(finite_diff_jacobian(sq, Vector::Constant(1, 3.0), 1e-5)(0, 0), 6.0, 1e-6);
  DenseMatrix a(2, 3);
  a << 1, 2, 3, -4, 5, 0.5;
  const auto lin = [&](const Vector& x) { return Vector(a * x); };
  EXPECT_LT((finite_diff_jacobian(lin, Vector::Ones(3), 1e-3) - a).cwiseAbs().maxCoeff(), 1e-9);
}

TEST(Spd, Examples) {
  const DenseMatrix b = DenseMatrix::Random(3, 2);
  EXPECT_LT((solve_spd(DenseMatrix::Identity(3, 3), b) - b).cwiseAbs().maxCoeff(), 1e-15);
  DenseMatrix a(2, 2);
  a << 2, 1, 1, 2;
  DenseMatrix inv(2, 2);
  inv << 2.0 / 3, -1.0 / 3, -1.0 / 3, 2.0 / 3;
  EXPECT_LT((invert_spd(a) - inv).cwiseAbs().maxCoeff(), 1e-14);

  std::mt19937_64 rng(5);
  std::normal_distribution<double> norm;
  const DenseMatrix m = DenseMatrix::NullaryExpr(5, 5, [&] { return norm(rng); });
  const DenseMatrix spd = m * m.transpose() + DenseMatrix::Identity(5, 5);
  EXPECT_TRUE(is_psd(spd));
  EXPECT_FALSE(is_psd(-spd));
  const DenseMatrix rhs = DenseMatrix::NullaryExpr(5, 2, [&] { return norm(rng); });
  const DenseMatrix x = solve_spd(spd, rhs);
  EXPECT_LE((spd * x - rhs).cwiseAbs().maxCoeff(), 1e-8 * rhs.cwiseAbs().maxCoeff());
  EXPECT_THROW(solve_spd(-spd, rhs), ModelError);
}

TEST(ChiSquare, OneDegreeOfFreedom) {
  EXPECT_NEAR(chi_square_sf(3.841459, 1), 0.05, 1e-6);
  for (double s : {0.1, 1.0, 3.0, 10.0, 30.0})
    EXPECT_NEAR(chi_square_sf(s, 1), oracle::chi2_1_sf(s), 1e-13);
  EXPECT_EQ(chi_square_sf(0.0, 2), 1.0);
  // chi-square(2) tail is exp(-s/2).
  EXPECT_NEAR(chi_square_sf(4.0, 2), std::exp(-2.0), 1e-14);
}

TEST(GaussLegendre, IntegratesPolynomialsExactly) {
  const auto& rule = gauss_legendre_64();
  EXPECT_NEAR(rule.weights.sum(), 2.0, 1e-14);
  double m = 0.0;
  for (Eigen::Index k = 0; k < rule.nodes.size(); ++k) m += rule.weights(k) * std::pow(rule.nodes(k), 10);
  EXPECT_NEAR(m, 2.0 / 11.0, 1e-14);
  const auto small = gauss_legendre(3);
  EXPECT_NEAR(small.nodes(2), std::sqrt(0.6), 1e-15);
}

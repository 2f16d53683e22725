#include <cmath>
#include <limits>
#include <random>
#include <vector>

#include <boost/math/quadrature/tanh_sinh.hpp>
#include <gtest/gtest.h>

#include "spext/gev.hpp"

namespace spext {
namespace {

// Reference values below were evaluated independently with mpmath at 30 digits.
constexpr double kLogpdfY1 = -1.88592958244504964;   // y=1, (0, 2, 0.2)
constexpr double kCdfY1 = 0.537449045223024169;      // exp(-1.1^-5)
constexpr double kQ99Xi05 = 17.9498533802554221;     // q=0.99, (0, 1, 0.5)
constexpr double kGumbel100 = 4.60014922677657999;   // -log(-log 0.99)

TEST(GevLogpdf, AtLocationIsMinusOne) {
  EXPECT_DOUBLE_EQ(gev_logpdf(0.0, {0.0, 1.0, 0.2}), -1.0);
}

TEST(GevLogpdf, ScriptedValue) { EXPECT_NEAR(gev_logpdf(1.0, {0.0, 2.0, 0.2}), kLogpdfY1, 1e-5); }

TEST(GevLogpdf, OutsideSupportIsMinusInfinity) {
  EXPECT_EQ(gev_logpdf(-10.0, {0.0, 1.0, 0.5}), -std::numeric_limits<double>::infinity());
  EXPECT_EQ(gev_logpdf(10.0, {0.0, 1.0, -0.5}), -std::numeric_limits<double>::infinity());
}

TEST(GevLogpdf, RejectsNonPositiveScale) {
  EXPECT_THROW(gev_logpdf(0.0, {0.0, 0.0, 0.1}), std::domain_error);
  EXPECT_THROW(gev_cdf(0.0, {0.0, -1.0, 0.1}), std::domain_error);
}

TEST(GevCdf, KnownValues) {
  EXPECT_NEAR(gev_cdf(3.0, {3.0, 7.0, -0.3}), std::exp(-1.0), 1e-15);
  EXPECT_EQ(gev_cdf(-100.0, {0.0, 1.0, 0.2}), 0.0);
  EXPECT_EQ(gev_cdf(100.0, {0.0, 1.0, -0.2}), 1.0);
  EXPECT_NEAR(gev_cdf(1.0, {0.0, 2.0, 0.2}), kCdfY1, 1e-5);
}

TEST(GevQuantile, KnownValuesAndRoundTrip) {
  const GevParams p{2.0, 3.0, 0.25};
  EXPECT_NEAR(gev_quantile(std::exp(-1.0), p), 2.0, 1e-14);
  const GevParams q{0.0, 1.0, 0.3};
  EXPECT_NEAR(gev_cdf(gev_quantile(0.9, q), q), 0.9, 1e-12);
  EXPECT_NEAR(gev_quantile(0.99, {0.0, 1.0, 0.5}), kQ99Xi05, 1e-4);
  EXPECT_THROW(gev_quantile(0.0, q), std::domain_error);
  EXPECT_THROW(gev_quantile(1.0, q), std::domain_error);
}

TEST(GevReturnLevel, KnownValues) {
  EXPECT_NEAR(return_level(100.0, {0.0, 1.0, 0.5}), kQ99Xi05, 1e-4);
  EXPECT_NEAR(return_level(100.0, {0.0, 1.0, 0.0}), kGumbel100, 1e-4);
  EXPECT_NEAR(return_level(100.0, {0.0, 1.0, 1e-9}), kGumbel100, 1e-4);
  EXPECT_THROW(return_level(1.0, {0.0, 1.0, 0.1}), std::domain_error);
}

TEST(GevReturnLevel, MatchesQuantileAndIsMonotone) {
  std::mt19937_64 rng(7);
  std::uniform_real_distribution<double> mu(-5, 5), sig(0.1, 5), xi(-0.5, 0.5);
  for (int i = 0; i < 200; ++i) {
    const GevParams p{mu(rng), sig(rng), xi(rng)};
    EXPECT_EQ(return_level(50.0, p), gev_quantile(1.0 - 1.0 / 50.0, p));
    EXPECT_GT(return_level(100.0, p), return_level(50.0, p));
    EXPECT_GT(return_level(50.0, p), return_level(2.0, p));
  }
}

TEST(GevProperties, DensityIntegratesToOne) {
  boost::math::quadrature::tanh_sinh<double> integrator;
  for (double sigma : {0.5, 1.0, 5.0}) {
    for (double xi : {-0.4, -0.1, 0.0, 0.1, 0.4}) {
      const GevParams p{0.0, sigma, xi};
      const double inf = std::numeric_limits<double>::infinity();
      const double lo = xi > 0 ? -sigma / xi : -inf;
      const double hi = xi < 0 ? -sigma / xi : inf;
      auto f = [&](double y) { return std::exp(gev_logpdf(y, p)); };
      double total = 0.0;
      // split at the mode region so each piece has one infinite end at most
      total += integrator.integrate(f, lo, 0.0);
      total += integrator.integrate(f, 0.0, hi);
      EXPECT_NEAR(total, 1.0, 1e-6) << "sigma=" << sigma << " xi=" << xi;
    }
  }
}

TEST(GevProperties, CdfAndQuantileNondecreasing) {
  for (double xi : {-0.4, 0.0, 0.3}) {
    const GevParams p{1.0, 2.0, xi};
    double prev_c = 0.0;
    for (double y = -20.0; y <= 40.0; y += 0.25) {
      const double c = gev_cdf(y, p);
      EXPECT_GE(c, prev_c);
      prev_c = c;
    }
    double prev_q = -std::numeric_limits<double>::infinity();
    for (double q = 0.001; q < 1.0; q += 0.001) {
      const double v = gev_quantile(q, p);
      EXPECT_GE(v, prev_q);
      prev_q = v;
    }
  }
}

TEST(GevProperties, ContinuousAcrossGumbelSwitch) {
  for (double y = -3.0; y <= 10.0; y += 0.5) {
    const double gumbel = gev_logpdf(y, {0.0, 1.0, 0.0});
    EXPECT_NEAR(gev_logpdf(y, {0.0, 1.0, kGumbelEps * 1.01}), gumbel, 1e-6);
    EXPECT_NEAR(gev_logpdf(y, {0.0, 1.0, -kGumbelEps * 1.01}), gumbel, 1e-6);
  }
}

std::vector<double> simulate(const GevParams& p, int n, std::uint64_t seed) {
  std::mt19937_64 rng(seed);
  std::uniform_real_distribution<double> u(0.0, 1.0);
  std::vector<double> y(static_cast<std::size_t>(n));
  for (double& v : y) v = gev_quantile(u(rng), p);
  return y;
}

TEST(GevMle, RecoversSimulatedParameters) {
  const GevParams truth{10.0, 2.0, 0.1};
  const auto y = simulate(truth, 5000, 2024);
  const GevFit fit = gev_mle_fit(y);
  EXPECT_TRUE(fit.converged);
  EXPECT_NEAR(fit.params.mu, truth.mu, 0.15);
  EXPECT_NEAR(fit.params.sigma, truth.sigma, 0.15);
  EXPECT_NEAR(fit.params.xi, truth.xi, 0.05);

  double at_fit = 0.0, at_truth = 0.0;
  for (double v : y) {
    at_fit += gev_logpdf(v, fit.params);
    at_truth += gev_logpdf(v, truth);
  }
  EXPECT_GE(at_fit / 5000.0, at_truth / 5000.0 - 0.01);
}

TEST(GevMle, SkipsMissingValues) {
  auto y = simulate({5.0, 1.0, -0.1}, 200, 3);
  const GevFit full = gev_mle_fit(y);
  y.insert(y.begin() + 10, std::numeric_limits<double>::quiet_NaN());
  const GevFit with_gap = gev_mle_fit(y);
  EXPECT_NEAR(full.params.mu, with_gap.params.mu, 1e-6);
}

TEST(GevMle, ConstantInputIsFlaggedNotFatal) {
  const std::vector<double> y(30, 4.2);
  GevFit fit;
  EXPECT_NO_THROW(fit = gev_mle_fit(y));
  EXPECT_FALSE(fit.converged);
}

TEST(GevMle, NeedsTenValues) {
  const std::vector<double> y{1, 2, 3, 4, 5, 6, 7, 8, 9};
  EXPECT_THROW(gev_mle_fit(y), std::domain_error);
}

}  // namespace
}  // namespace spext

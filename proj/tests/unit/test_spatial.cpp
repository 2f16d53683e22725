#include <algorithm>
#include <cmath>
#include <limits>
#include <numeric>
#include <random>
#include <vector>

#include <Eigen/Eigenvalues>
#include <gtest/gtest.h>

#include "spext/errors.hpp"
#include "spext/spatial.hpp"

namespace spext {
namespace {

// Frozen from an independent numpy implementation of the same formulas.
constexpr double kOneDegreeKm = 111.194926644559;
constexpr double kCoef0 = 0.20667563782237386;
constexpr double kCoef1 = 4.01430386197704;
constexpr double kKrigeMean = 0.08590120157214771;
constexpr double kKrigeVar = 0.8009175971951776;

std::vector<Site> random_sites(int n, std::uint64_t seed, double span = 2.0) {
  std::mt19937_64 rng(seed);
  std::uniform_real_distribution<double> u(0.0, span);
  std::vector<Site> s(static_cast<std::size_t>(n));
  for (auto& x : s) x = {-120.0 + u(rng), 40.0 + u(rng)};
  return s;
}

TEST(Distance, Basics) {
  const Site a{-120.5, 41.25}, b{-118.0, 44.0};
  EXPECT_EQ(distance(a, a), 0.0);
  EXPECT_NEAR(distance({0, 0}, {0, 1}), kOneDegreeKm, 1e-9);
  EXPECT_EQ(distance(a, b), distance(b, a));
  EXPECT_GT(distance(a, b), 0.0);
}

TEST(ExpCov, DiagonalAndOffDiagonal) {
  const CovParams theta{1.3, 111.194926644559, 0.2};
  const std::vector<Site> s{{0, 0}, {0, 1}};
  const Eigen::MatrixXd c = exp_cov_matrix(s, theta);
  EXPECT_DOUBLE_EQ(c(0, 0), 1.5);
  EXPECT_DOUBLE_EQ(c(1, 1), 1.5);
  EXPECT_NEAR(c(0, 1), 1.3 * std::exp(-1.0), 1e-9);
  EXPECT_EQ(c(0, 1), c(1, 0));
}

TEST(ExpCov, SmallestEigenvalueAtLeastNugget) {
  const auto s = random_sites(5, 11);
  const Eigen::MatrixXd c = exp_cov_matrix(s, {1.0, 100.0, 0.1});
  EXPECT_TRUE(c.isApprox(c.transpose(), 0.0));
  Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd> es(c);
  EXPECT_GE(es.eigenvalues().minCoeff(), 0.1 * (1.0 - 1e-10));
}

TEST(ExpCov, RejectsInvalidParameters) {
  const auto s = random_sites(3, 1);
  EXPECT_THROW(exp_cov_matrix(s, {-1.0, 10.0, 0.0}), std::domain_error);
  EXPECT_THROW(exp_cov_matrix(s, {1.0, 0.0, 0.0}), std::domain_error);
  EXPECT_THROW(exp_cov_matrix(s, {1.0, 10.0, -0.1}), std::domain_error);
}

TEST(Dependogram, Properties) {
  const std::vector<Site> s{{0, 0}, {0, 1}, {3, 2}};
  const Eigen::MatrixXd r = dependogram_matrix(s, kOneDegreeKm);
  for (int i = 0; i < 3; ++i) EXPECT_EQ(r(i, i), 1.0);
  EXPECT_NEAR(r(0, 1), std::exp(-1.0), 1e-9);
  EXPECT_TRUE(r.isApprox(r.transpose(), 0.0));
  const Eigen::MatrixXd tiny = dependogram_matrix(s, 1e-6);
  EXPECT_LT((tiny - Eigen::MatrixXd::Identity(3, 3)).cwiseAbs().maxCoeff(), 1e-12);
  EXPECT_THROW(dependogram_matrix(s, 0.0), std::domain_error);
}

TEST(RbfBasis, Values) {
  const std::vector<Site> knots{{0, 0}, {0, 1}};
  Eigen::VectorXd ranges(2);
  ranges << kOneDegreeKm, 50.0;
  const Eigen::VectorXd eta = rbf_basis({0, 0}, knots, ranges);
  EXPECT_EQ(eta(0), 1.0);
  const Eigen::VectorXd at_one = rbf_basis({0, 1}, knots, ranges);
  EXPECT_NEAR(at_one(0), std::exp(-1.0), 1e-9);
  EXPECT_EQ(at_one(1), 1.0);
  double prev = 2.0;
  for (double lat = 0.0; lat < 3.0; lat += 0.1) {
    const double v = rbf_basis({0, lat}, knots, ranges)(0);
    EXPECT_LT(v, prev);
    EXPECT_GT(v, 0.0);
    prev = v;
  }
  Eigen::VectorXd bad(1);
  bad << 1.0;
  EXPECT_THROW(rbf_basis({0, 0}, knots, bad), std::domain_error);
}

RegressionField field(std::vector<Site> knots, Eigen::VectorXd ranges, Eigen::MatrixXd weights,
                      double intercept = 0.0) {
  RegressionField f;
  f.intercept = intercept;
  f.knots = std::move(knots);
  f.kernel_ranges = std::move(ranges);
  f.weights = std::move(weights);
  return f;
}

TEST(EvalCoefficients, Cases) {
  const auto zero = field({{0, 0}}, Eigen::VectorXd::Constant(1, 100.0), Eigen::MatrixXd::Zero(1, 2));
  EXPECT_EQ(eval_coefficients(zero, {1, 1}), Eigen::VectorXd::Zero(2));

  Eigen::MatrixXd c(1, 1);
  c << 2.75;
  const auto one = field({{-120, 40}}, Eigen::VectorXd::Constant(1, 80.0), c);
  EXPECT_EQ(eval_coefficients(one, {-120, 40})(0), 2.75);

  Eigen::VectorXd ranges(2);
  ranges << 100.0, 200.0;
  Eigen::MatrixXd w(2, 2);
  w << 1.0, 2.0, -0.5, 3.0;
  const auto two = field({{0, 0}, {1, 0}}, ranges, w);
  const Eigen::VectorXd beta = eval_coefficients(two, {0.5, 0.3});
  EXPECT_NEAR(beta(0), kCoef0, 1e-12);
  EXPECT_NEAR(beta(1), kCoef1, 1e-12);
}

TEST(EvalGevSurface, InterceptShiftAndClamp) {
  const Eigen::VectorXd r = Eigen::VectorXd::Constant(1, 100.0);
  std::array<RegressionField, 3> f{field({{0, 0}}, r, Eigen::MatrixXd::Zero(1, 1), 20.0),
                                   field({{0, 0}}, r, Eigen::MatrixXd::Zero(1, 1), std::log(3.0)),
                                   field({{0, 0}}, r, Eigen::MatrixXd::Zero(1, 1), 0.1)};
  const Eigen::VectorXd x = Eigen::VectorXd::Constant(1, 1.7);
  const GevParams base = eval_gev_surface(f, x, {0.0, 0.0, 0.0}, {0.5, 0.5});
  EXPECT_EQ(base.mu, 20.0);
  EXPECT_NEAR(base.sigma, 3.0, 1e-14);
  EXPECT_EQ(base.xi, 0.1);
  const GevParams shifted = eval_gev_surface(f, x, {1.0, 0.0, 0.0}, {0.5, 0.5});
  EXPECT_EQ(shifted.mu, base.mu + 1.0);
  f[2].intercept = 0.9;
  EXPECT_EQ(eval_gev_surface(f, x, {0.0, 0.0, 0.0}, {0.5, 0.5}).xi, 0.5);
  f[2].intercept = -3.0;
  EXPECT_EQ(eval_gev_surface(f, x, {0.0, 0.0, 0.0}, {0.5, 0.5}).xi, -0.5);
  f[1].intercept = -800.0;
  EXPECT_GT(eval_gev_surface(f, x, {0.0, 0.0, 0.0}, {0.5, 0.5}).sigma, 0.0);
}

TEST(SpaceFilling, Cases) {
  const auto all = random_sites(6, 3);
  auto idx = space_filling_indices(all, 6);
  std::sort(idx.begin(), idx.end());
  EXPECT_EQ(idx, (std::vector<std::size_t>{0, 1, 2, 3, 4, 5}));

  std::vector<Site> line;
  for (int i = 0; i < 10; ++i) line.push_back({0.0, 0.1 * i});
  auto ends = space_filling_indices(line, 2);
  std::sort(ends.begin(), ends.end());
  EXPECT_EQ(ends, (std::vector<std::size_t>{0, 9}));

  EXPECT_THROW(space_filling_knots(line, 11), std::domain_error);
}

TEST(SpaceFilling, BeatsRandomSubsets) {
  const auto cand = random_sites(50, 99, 1.0);
  const double design = min_pairwise_distance(space_filling_knots(cand, 3));
  std::mt19937_64 rng(5);
  double best = 0.0;
  std::vector<std::size_t> order(cand.size());
  for (int trial = 0; trial < 1000; ++trial) {
    std::iota(order.begin(), order.end(), 0);
    std::shuffle(order.begin(), order.end(), rng);
    const std::vector<Site> pick{cand[order[0]], cand[order[1]], cand[order[2]]};
    best = std::max(best, min_pairwise_distance(pick));
  }
  EXPECT_GE(design, best);
}

TEST(Krige, InterpolatesWithoutNugget) {
  const auto obs = random_sites(4, 8);
  Eigen::VectorXd w(4);
  w << 0.3, -1.2, 0.8, 2.0;
  const std::vector<Site> tgt{obs[2]};
  const auto cg = krige_conditional({1.0, 150.0, 0.0}, obs, w, tgt);
  EXPECT_NEAR(cg.mean(0), 0.8, 1e-8);
  EXPECT_NEAR(cg.cov(0, 0), 0.0, 1e-8);
}

TEST(Krige, RevertsToPriorFarAway) {
  const auto obs = random_sites(4, 8);
  Eigen::VectorXd w(4);
  w << 0.3, -1.2, 0.8, 2.0;
  const std::vector<Site> tgt{{60.0, -30.0}};
  const auto cg = krige_conditional({1.0, 50.0, 0.25}, obs, w, tgt);
  EXPECT_NEAR(cg.mean(0), 0.0, 1e-12);
  EXPECT_NEAR(cg.cov(0, 0), 1.25, 1e-12);
}

TEST(Krige, MatchesSmallMatrixOracle) {
  const std::vector<Site> obs{{0, 0}, {0.5, 0.2}, {1, -0.3}};
  Eigen::VectorXd w(3);
  w << 0.4, -0.2, 0.7;
  const std::vector<Site> tgt{{0.3, 0.1}};
  const auto cg = krige_conditional({1.5, 80.0, 0.2}, obs, w, tgt);
  EXPECT_NEAR(cg.mean(0), kKrigeMean, 1e-10);
  EXPECT_NEAR(cg.cov(0, 0), kKrigeVar, 1e-10);
}

TEST(Krige, LinearityAndNonnegativeVariance) {
  const auto obs = random_sites(12, 21);
  const auto tgt = random_sites(30, 22, 3.0);
  Eigen::VectorXd w = Eigen::VectorXd::LinSpaced(12, -1.0, 2.0);
  const CovParams theta{0.8, 120.0, 0.05};
  const auto a = krige_conditional(theta, obs, w, tgt);
  const auto b = krige_conditional(theta, obs, 2.0 * w, tgt);
  EXPECT_LT((b.mean - 2.0 * a.mean).cwiseAbs().maxCoeff(), 1e-12);
  EXPECT_GE(a.cov.diagonal().minCoeff(), -1e-8);
}

TEST(ConditionalSimulate, MonteCarloMoments) {
  const auto obs = random_sites(8, 31);
  const auto tgt = random_sites(5, 32);
  Eigen::VectorXd w(8);
  w << 0.5, -0.4, 0.1, 1.0, -0.9, 0.3, 0.0, 0.6;
  const CovParams theta{1.0, 100.0, 0.1};
  const auto cg = krige_conditional(theta, obs, w, tgt);
  const int n = 10000;
  const Eigen::MatrixXd draws = conditional_simulate(theta, obs, w, tgt, n, 77);
  const Eigen::VectorXd mean = draws.colwise().mean();
  const Eigen::MatrixXd centered = draws.rowwise() - mean.transpose();
  const Eigen::MatrixXd cov = centered.transpose() * centered / (n - 1);
  for (int j = 0; j < 5; ++j) {
    EXPECT_NEAR(mean(j), cg.mean(j), 3.0 * std::sqrt(cg.cov(j, j) / n));
  }
  EXPECT_LT((cov - cg.cov).norm() / cg.cov.norm(), 0.05);

  EXPECT_EQ(draws, conditional_simulate(theta, obs, w, tgt, n, 77));
}

}  // namespace
}  // namespace spext

#include <algorithm>
#include <cmath>
#include <filesystem>
#include <limits>
#include <random>
#include <vector>

#include <gtest/gtest.h>

#include "spext/archive.hpp"
#include "spext/diagnostics.hpp"
#include "spext/normal.hpp"
#include "spext/sampler.hpp"
#include "test_fixtures.hpp"

namespace spext {
namespace {

using namespace spext::testing;

TEST(Sampler, BivariateNormalMoments) {
  ChainConfig cfg;
  cfg.n_chains = 1;
  cfg.n_warmup = 2000;
  cfg.n_iterations = 22000;
  cfg.seed = 3;
  const auto res = run_block_chains(normal_factory(2, true), cfg);
  const Eigen::MatrixXd& d = res.chains[0].draws;
  ASSERT_EQ(d.rows(), 20000);
  const Eigen::RowVectorXd mean = d.colwise().mean();
  const Eigen::MatrixXd c = d.rowwise() - mean;
  const Eigen::MatrixXd cov = c.transpose() * c / (d.rows() - 1.0);
  EXPECT_LT(mean.cwiseAbs().maxCoeff(), 0.05);
  EXPECT_LT((cov - Eigen::Matrix2d::Identity()).cwiseAbs().maxCoeff(), 0.1);
  EXPECT_NEAR(res.chains[0].acceptance[0], 0.23, 0.1);
}

TEST(Sampler, StationaryDistributionKolmogorovSmirnov) {
  ChainConfig cfg;
  cfg.n_chains = 1;
  cfg.n_warmup = 2000;
  cfg.n_iterations = 52000;
  cfg.seed = 5;
  const auto res = run_block_chains(normal_factory(2, false), cfg);
  for (int j = 0; j < 2; ++j) {
    const Eigen::VectorXd col = res.chains[0].draws.col(j);
    EXPECT_LT(ks_distance({col.data(), col.data() + col.size()}), 0.02);
    EXPECT_NEAR(res.chains[0].acceptance[static_cast<std::size_t>(j)], 0.44, 0.1);
  }
}

TEST(Sampler, Bookkeeping) {
  ChainConfig cfg;
  cfg.n_chains = 4;
  cfg.n_warmup = 100;
  cfg.n_iterations = 101;
  const auto res = run_block_chains(normal_factory(3, false), cfg);
  ASSERT_EQ(res.chains.size(), 4u);
  int total = 0;
  for (const auto& ch : res.chains) total += static_cast<int>(ch.draws.rows());
  EXPECT_EQ(total, 4);
  EXPECT_EQ(res.parameter_names.size(), 3u);
  EXPECT_EQ(res.block_names.size(), 3u);

  cfg.n_iterations = 100;
  EXPECT_THROW(run_block_chains(normal_factory(1, false), cfg), std::domain_error);
}

TEST(Sampler, ScalesFrozenAfterWarmup) {
  ChainConfig cfg;
  cfg.n_chains = 2;
  cfg.n_warmup = 500;
  cfg.n_iterations = 501;
  const auto short_run = run_block_chains(normal_factory(2, false), cfg);
  cfg.n_iterations = 3500;
  const auto long_run = run_block_chains(normal_factory(2, false), cfg);
  for (int c = 0; c < 2; ++c) {
    EXPECT_EQ(short_run.chains[static_cast<std::size_t>(c)].final_scales,
              long_run.chains[static_cast<std::size_t>(c)].final_scales);
    EXPECT_EQ(short_run.chains[static_cast<std::size_t>(c)].draws.row(0),
              long_run.chains[static_cast<std::size_t>(c)].draws.row(0));
  }
}

TEST(Sampler, DeterministicAcrossThreadCounts) {
  ChainConfig cfg;
  cfg.n_chains = 3;
  cfg.n_warmup = 200;
  cfg.n_iterations = 700;
  cfg.seed = 99;
  const auto serial = run_block_chains(normal_factory(2, true), cfg);
  cfg.threads = 3;
  const auto parallel = run_block_chains(normal_factory(2, true), cfg);
  for (std::size_t c = 0; c < 3; ++c) {
    EXPECT_EQ(serial.chains[c].draws, parallel.chains[c].draws);
    EXPECT_EQ(serial.chains[c].seed, parallel.chains[c].seed);
  }
  EXPECT_NE(serial.chains[0].draws, serial.chains[1].draws);
}

TEST(Sampler, BlockScaleOverridesByPrefix) {
  ChainConfig cfg;
  cfg.n_chains = 1;
  cfg.n_warmup = 0;
  cfg.n_iterations = 1;
  cfg.block_scales = {{"x", 0.7}, {"x.1", 0.2}};
  const auto res = run_block_chains(normal_factory(2, false), cfg);
  EXPECT_EQ(res.chains[0].final_scales, (std::vector<double>{0.7, 0.2}));
}

TEST(Sampler, AbortsWithoutFiniteStart) {
  class Hopeless final : public BlockTarget {
   public:
    double log_density() const override { return -std::numeric_limits<double>::infinity(); }
    std::size_t block_count() const override { return 1; }
    BlockInfo block(std::size_t) const override { return {"b", 1, 1.0}; }
    double propose(std::size_t, std::span<const double>) override { return 0.0; }
    void commit() override {}
    void discard() override {}
    std::vector<std::string> parameter_names() const override { return {"b"}; }
    void write_parameters(std::span<double>) const override {}
  };
  int calls = 0;
  TargetFactory f = [&](std::mt19937_64&, int) {
    ++calls;
    return std::make_unique<Hopeless>();
  };
  ChainConfig cfg;
  cfg.n_chains = 1;
  EXPECT_THROW(run_block_chains(f, cfg), std::runtime_error);
  EXPECT_EQ(calls, 100);
}

Eigen::MatrixXd normal_chains(int chains, int n, std::uint64_t seed, std::vector<double> means = {}) {
  std::mt19937_64 rng(seed);
  std::normal_distribution<double> z;
  Eigen::MatrixXd d(chains, n);
  for (int c = 0; c < chains; ++c)
    for (int t = 0; t < n; ++t) d(c, t) = z(rng) + (means.empty() ? 0.0 : means[static_cast<std::size_t>(c)]);
  return d;
}

TEST(Diagnostics, RhatCases) {
  const auto same = rhat(normal_chains(2, 5000, 1));
  EXPECT_FALSE(same.degenerate);
  EXPECT_NEAR(same.value, 1.0, 0.01);
  EXPECT_GT(rhat(normal_chains(2, 1000, 2, {0.0, 10.0})).value, 1.5);
  const auto flat = rhat(Eigen::MatrixXd::Constant(3, 50, 2.5));
  EXPECT_TRUE(flat.degenerate);
  EXPECT_TRUE(std::isnan(flat.value));
  EXPECT_THROW(rhat(Eigen::MatrixXd::Zero(2, 9)), std::domain_error);
}

TEST(Diagnostics, RhatOfDuplicatedChainsNeverFlags) {
  const Eigen::MatrixXd one = normal_chains(1, 400, 3);
  Eigen::MatrixXd dup(3, 400);
  dup << one, one, one;
  EXPECT_LE(rhat(dup).value, 1.1);
}

TEST(Diagnostics, EssIid) {
  const auto ess = effective_sample_size(normal_chains(1, 10000, 4));
  EXPECT_NEAR(ess.value, 10000.0, 2000.0);
}

TEST(Diagnostics, EssAr1) {
  const double phi = 0.9;
  const int n = 40000;
  std::mt19937_64 rng(6);
  std::normal_distribution<double> z;
  Eigen::MatrixXd d(1, n);
  double x = 0.0;
  for (int t = 0; t < n; ++t) d(0, t) = x = phi * x + std::sqrt(1 - phi * phi) * z(rng);
  const double analytic = n * (1 - phi) / (1 + phi);
  EXPECT_NEAR(effective_sample_size(d).value, analytic, 0.3 * analytic);
  EXPECT_TRUE(effective_sample_size(Eigen::MatrixXd::Ones(2, 200)).degenerate);
}

TEST(Archive, RoundTripIsBitExact) {
  PosteriorArchive a;
  a.names = {"a.0", "a.1", "b"};
  a.groups = {{"a", 0, 2}, {"b", 2, 1}};
  a.n_chains = 2;
  a.draws_per_chain = 50;
  a.draws = normal_chains(100, 3, 8);
  a.draws(0, 0) = 0.1 + 0.2;
  a.draws(1, 1) = std::numeric_limits<double>::denorm_min();
  a.draws(2, 2) = -1e308;
  a.block_names = {"blk.a", "blk.b"};
  a.acceptance = Eigen::MatrixXd::Constant(2, 2, 0.3125);
  a.seeds = {1, 18446744073709551615ULL};
  a.config = {{"k", 4}};
  const auto dir = std::filesystem::temp_directory_path() / "spext_archive_roundtrip";
  write_archive(a, dir);
  write_archive(a, dir);  // overwrite in place
  const auto b = read_archive(dir);
  EXPECT_EQ(b.names, a.names);
  EXPECT_EQ(b.draws, a.draws);
  EXPECT_EQ(b.acceptance, a.acceptance);
  EXPECT_EQ(b.seeds, a.seeds);
  EXPECT_EQ(b.block_names, a.block_names);
  EXPECT_EQ(b.config, a.config);
  EXPECT_EQ(b.n_chains, 2);
  EXPECT_EQ(b.chain_matrix(1).rows(), 2);
  EXPECT_EQ(b.chain_matrix(1)(1, 0), a.draws(50, 1));
  std::filesystem::remove_all(dir);
}

TEST(Archive, DoubleFormatting) {
  for (double v : {0.1, 1.0 / 3.0, 1e-300, -2.5e17, 123456789.123456789}) EXPECT_EQ(parse_double(format_double(v)), v);
  EXPECT_THROW(parse_double("1.5x"), std::exception);
}

}  // namespace
}  // namespace spext

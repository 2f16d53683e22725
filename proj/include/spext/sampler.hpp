#pragma once

#include <cstdint>
#include <functional>
#include <map>
#include <memory>
#include <random>
#include <span>
#include <string>
#include <vector>

#include <Eigen/Dense>

namespace spext {

struct BlockInfo {
  std::string name;
  int dim = 1;
  double initial_scale = 0.1;
  /// When false the target receives unscaled standard normal variates (for
  /// Gibbs draws and independence proposals) and no scale is adapted.
  bool adaptive = true;
  /// Additional unscaled standard normal variates appended to the step.
  int extra_variates = 0;
  /// 0.44 for scalar blocks, 0.23 for multivariate blocks.
  double target_acceptance() const { return dim == 1 ? 0.44 : 0.23; }
};

/// A posterior explored by random-walk Metropolis within blocks. The sampler
/// draws a Gaussian step for a block; the target applies it (in whatever
/// parametrization it uses) and returns the log acceptance ratio including
/// any Jacobian term.
class BlockTarget {
 public:
  virtual ~BlockTarget() = default;
  virtual double log_density() const = 0;
  virtual std::size_t block_count() const = 0;
  virtual BlockInfo block(std::size_t b) const = 0;
  virtual double propose(std::size_t b, std::span<const double> step) = 0;
  virtual void commit() = 0;
  virtual void discard() = 0;
  virtual std::vector<std::string> parameter_names() const = 0;
  virtual void write_parameters(std::span<double> out) const = 0;
  /// Called once per iteration before the block sweep.
  virtual void refresh() {}
};

/// Returns a target at a (random) starting point for a chain; called again,
/// up to 100 times, while the starting log density is -inf.
using TargetFactory = std::function<std::unique_ptr<BlockTarget>(std::mt19937_64& rng, int attempt)>;

struct ChainConfig {
  int n_chains = 3;
  int n_iterations = 3000;
  int n_warmup = 1000;
  std::uint64_t seed = 1;
  int adapt_window = 50;
  int threads = 1;
  /// Initial proposal sd overrides keyed by block-name prefix.
  std::map<std::string, double> block_scales;

  void validate() const;
};

struct ChainOutput {
  Eigen::MatrixXd draws;  // kept iterations x parameters
  std::vector<double> acceptance;  // per block, post-warmup
  std::vector<double> final_scales;
  std::uint64_t seed = 0;
  std::vector<std::string> parameter_names;
  std::vector<std::string> block_names;
};

struct ChainsResult {
  std::vector<std::string> parameter_names;
  std::vector<std::string> block_names;
  std::vector<ChainOutput> chains;
};

std::uint64_t chain_seed(std::uint64_t seed, int chain);

/// Runs independent chains (optionally on several threads). Deterministic for
/// a fixed seed regardless of thread count. Throws std::runtime_error when no
/// finite starting point is found.
ChainsResult run_block_chains(const TargetFactory& factory, const ChainConfig& config);

}  // namespace spext

#pragma once

#include <memory>
#include <random>
#include <vector>

#include "spext/archive.hpp"
#include "spext/incremental.hpp"
#include "spext/model.hpp"
#include "spext/sampler.hpp"

namespace spext {

/// Largest inter-station distance (km).
double domain_diameter(std::span<const Site> sites);

/// Starting state: intercepts from a pooled GEV fit, zero weights and
/// residuals, covariance partial sills from the spread of at-site fits, ranges
/// at a quarter of the domain diameter. With `rng`, hyperparameters are
/// jittered to give dispersed chain starts.
ModelState initial_state(const ObservationSet& obs, std::span<const Site> knots,
                         std::mt19937_64* rng = nullptr, int attempt = 0);

/// Block layout of the hierarchical posterior for the Metropolis sampler:
/// one scalar block per station residual; an exact Gaussian draw of the
/// intercept and weights given the station linear predictors; per-knot kernel
/// ranges updated with the intercept and weights integrated out, by a
/// log-scale random walk and by independence proposals from the prior; covariance parameters on the log scale, plus
/// a joint partial-sill/range move along the ridge of their ratio; the copula
/// range (log scale).
class HierarchicalTarget final : public BlockTarget {
 public:
  HierarchicalTarget(const ObservationSet& obs, const Partitions& parts, ModelState state);

  double log_density() const override { return posterior_.value(); }
  std::size_t block_count() const override { return blocks_.size(); }
  BlockInfo block(std::size_t b) const override { return blocks_[b].info; }
  double propose(std::size_t b, std::span<const double> step) override;
  void commit() override { posterior_.commit(); }
  void discard() override { posterior_.discard(); }
  std::vector<std::string> parameter_names() const override { return layout_.names(); }
  void write_parameters(std::span<double> out) const override;
  void refresh() override { posterior_.refresh(); }

  const IncrementalPosterior& posterior() const { return posterior_; }
  const ParameterLayout& layout() const { return layout_; }

 private:
  enum class Kind { residual, regression, kernel_range, kernel_jump, psill, range, nugget, sill_range, copula };
  struct Block {
    Kind kind;
    GevParam field;
    int index;
    BlockInfo info;
  };

  IncrementalPosterior posterior_;
  ParameterLayout layout_;
  std::vector<Block> blocks_;
};

ParameterLayout layout_for(const ObservationSet& obs, std::size_t knot_count);
std::vector<ParameterGroup> archive_groups(const ParameterLayout& layout);

/// Multi-chain posterior sampling of the hierarchical model.
PosteriorArchive run_chains(const ObservationSet& obs, const Partitions& parts,
                            std::span<const Site> knots, const ChainConfig& config);

}  // namespace spext

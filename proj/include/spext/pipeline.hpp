#pragma once

#include <cstdint>
#include <filesystem>
#include <string>
#include <vector>

#include <Eigen/Dense>

#include "spext/archive.hpp"
#include "spext/config.hpp"
#include "spext/ingest.hpp"
#include "spext/model.hpp"
#include "spext/simulate.hpp"

namespace spext {

/// Screened maxima with covariates attached.
struct PreparedData {
  ObservationSet obs;
  Standardizer standardizer;
  std::vector<CovariateGrid> grids;
  int ingested_stations = 0;
};

PreparedData prepare_data(const RunConfig& cfg);
std::vector<CovariateGrid> load_covariate_grids(const RunConfig& cfg);

struct ParameterDiagnostic {
  std::string name;
  double rhat = 0.0;
  double ess = 0.0;
  bool degenerate = false;
};

struct ConvergenceSummary {
  std::vector<ParameterDiagnostic> parameters;
  double threshold = 1.1;
  double max_rhat = 1.0;
  std::string worst;
  int n_above = 0;
  double min_ess = 0.0;

  bool converged() const { return n_above == 0; }
};

ConvergenceSummary summarize_convergence(const PosteriorArchive& archive, double threshold = 1.1);

/// Knots by maximin design over the stations, composite-likelihood groups,
/// multi-chain sampling. Everything the gridding step needs (stations, knots,
/// covariate transform) is recorded in the archive metadata.
PosteriorArchive fit_observations(const ObservationSet& obs, const Standardizer& standardizer,
                                  std::span<const std::string> covariate_names, const RunConfig& cfg);

/// Rebuilds the model state of one archived draw.
ModelState archived_state(const PosteriorArchive& archive, Eigen::Index draw);
std::vector<Site> archived_stations(const PosteriorArchive& archive);

/// Linear-interpolation percentile (q in [0, 1]) of unsorted values.
double percentile(std::vector<double> values, double q);

/// Per-chain thinning: every `thin`-th draw, the stride widened until at most
/// `max_draws` remain. Returns archive row indices, chain-major.
std::vector<Eigen::Index> thinned_draws(const PosteriorArchive& archive, int thin, int max_draws);

struct GridResult {
  std::vector<Site> cells;
  std::vector<double> periods;
  std::vector<Eigen::MatrixXd> summary;  // per period: cells x {q025, median, q975}
  std::vector<Eigen::VectorXd> sd;       // per period: posterior sd per cell
  std::vector<Eigen::VectorXd> ess;      // per period: effective draws per cell
  int n_draws = 0;
  int n_lon = 0;
  int n_lat = 0;
};

/// Posterior return levels on the configured grid: for each thinned draw the
/// regression surfaces are evaluated at the cells and GP residuals are drawn
/// from their conditional distribution given the station residuals.
/// Throws ConfigError when a cell lies outside covariate coverage.
GridResult grid_return_levels(const PosteriorArchive& archive, std::span<const CovariateGrid> grids,
                              const RunConfig& cfg);

void write_grid_outputs(const GridResult& grid, const std::filesystem::path& dir, bool geojson);

/// Exit codes of the command-line tool.
enum ExitCode : int { kExitOk = 0, kExitConfig = 2, kExitConvergence = 3, kExitData = 4 };

struct FitOutcome {
  PosteriorArchive archive;
  ConvergenceSummary convergence;
  int retained = 0;
  int complete = 0;
  int ingested = 0;
};

/// Writes <output>/archive, <output>/fit_report.json and <output>/config.json.
FitOutcome cmd_fit(const RunConfig& cfg);

/// Reads <output>/archive (or `archive_dir`) and writes <output>/grid.
GridResult cmd_grid(const RunConfig& cfg, const std::filesystem::path& archive_dir = {});

struct ValidateSummary {
  int stations = 0;
  int dropped = 0;
  std::vector<double> periods;
  std::vector<double> rms;              // per period
  std::vector<double> mc_noise_bound;   // per period
  std::vector<std::array<double, 5>> quantiles;  // 5/25/50/75/95% of differences
  std::vector<double> sign_region_share;         // largest same-sign region's share of |difference|
};

/// Fits all stations and a random (1 - drop_fraction) subset, grids both and
/// writes the per-cell median differences to <output>/validate.
ValidateSummary cmd_validate(const RunConfig& cfg);

struct GroupComparison {
  int size_a = 0;
  int size_b = 0;
  double rms_relative = 0.0;
};

struct GroupsSummary {
  std::vector<int> sizes;                 // ascending
  std::vector<double> mean_median;        // per size, longest return period
  std::vector<double> mean_width;         // per size, 95% interval width, longest return period
  std::vector<GroupComparison> comparisons;
  std::vector<GridResult> grids;
};

/// One fit per group size on identical data and seed; writes
/// <output>/validate_groups.
GroupsSummary cmd_validate_groups(const RunConfig& cfg);

struct DependentPair {
  int a = 0;
  int b = 0;
  double chi_hat = 0.0;
  double lower_bound = 0.0;
};

struct DiagSummary {
  int complete_stations = 0;
  long long total_pairs = 0;
  int tested_pairs = 0;
  double rejection_fraction = 0.0;  // share of tested pairs where independence is rejected
  std::vector<DependentPair> dependent;
};

/// Asymptotic-independence tests over pairs of complete stations, a seeded
/// subsample of at most max_pairs when there are more.
DiagSummary copula_diagnostic(const ObservationSet& obs, const DiagSettings& settings, std::uint64_t seed);
DiagSummary cmd_diag_copula(const RunConfig& cfg);

/// Synthetic network written as daily CSV, two covariate grids, the true
/// station GEV parameters and a ready-to-run config.
void cmd_simulate(const SyntheticSpec& spec, const std::filesystem::path& out, const RunConfig& base);

/// Writes text to `file` through a temporary file and rename.
void write_file_atomic(const std::filesystem::path& file, const std::string& text);

}  // namespace spext

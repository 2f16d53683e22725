#pragma once

#include <cstdint>
#include <vector>

#include "spext/ingest.hpp"
#include "spext/model.hpp"

namespace spext {

struct SyntheticSpec {
  int stations = 40;
  int years = 50;
  int first_year = 1964;
  int knots = 4;
  Extent extent;
  double grid_spacing = 0.125;
  /// Share of stations given missing years (then excluded from the copula).
  double incomplete_fraction = 0.2;
  int max_missing_years = 8;
  double copula_range = 100.0;
  std::uint64_t seed = 1;
};

/// Synthetic covariates on a regular grid: an elevation-like surface (m) and
/// a mean-seasonal-precipitation-like surface (mm). Cell centres start at the
/// extent corner.
struct SyntheticGrid {
  std::vector<Site> cells;
  std::vector<double> elevation;
  std::vector<double> precip;
  double spacing = 0.125;
  int n_lon = 0;
  int n_lat = 0;
};

SyntheticGrid synthetic_grid(const Extent& extent, double spacing);

/// Index of the cell nearest to s on a grid built by synthetic_grid.
std::size_t nearest_cell(const SyntheticGrid& grid, const Site& s);

struct SyntheticData {
  SyntheticSpec spec;
  ObservationSet obs;  // covariates z-scored over the stations
  ModelState truth;
  std::vector<Site> knots;
  std::vector<GevParams> station_gev;
  SyntheticGrid grid;
  Eigen::Vector2d cov_mean;
  Eigen::Vector2d cov_sd;
};

/// Draws a data set from the full hierarchy: spatially varying regressions on
/// two covariates, GP residual fields, Gaussian-copula dependence between
/// stations within each year and GEV margins.
SyntheticData simulate_network(const SyntheticSpec& spec);

/// Daily records that reproduce the simulated maxima exactly: dry days with
/// one spike per season equal to that season's maximum. Seasons whose maximum
/// is missing get 30% of their days missing, so the 25% screen removes them.
std::vector<DailySeries> synthetic_daily(const SyntheticData& data, Season season);

/// The synthetic elevation and precipitation surfaces as covariate grids.
std::vector<CovariateGrid> synthetic_covariate_grids(const SyntheticGrid& grid);

}  // namespace spext

#pragma once

#include <chrono>
#include <filesystem>
#include <span>
#include <string>
#include <string_view>
#include <vector>

#include <Eigen/Dense>

#include "spext/model.hpp"

namespace spext {

using Date = std::chrono::sys_days;

Date parse_date(std::string_view iso);  // YYYY-MM-DD
std::string format_date(Date d);

/// Daily precipitation at one station, sorted by date; NaN marks a missing day.
struct DailySeries {
  std::string station_id;
  Site site;
  std::vector<Date> dates;
  std::vector<double> prcp;  // mm

  /// Sorts by date and rejects duplicate dates or negative amounts.
  void normalize();
};

inline constexpr std::string_view kDailyHeader = "station_id,lon,lat,date,prcp";

/// Reads the canonical daily CSV (one combined file, or every *.csv in a
/// directory). Stations are returned sorted by id.
std::vector<DailySeries> read_daily_csv(const std::filesystem::path& path);
void write_daily_csv(const std::filesystem::path& file, std::span<const DailySeries> series);

enum class Season { DJF, MAM, JJA, SON };

Season parse_season(std::string_view name);
std::string_view season_name(Season s);

/// First and last day of a season. DJF of `year` runs from 1 December of
/// year - 1 through the end of February.
std::pair<Date, Date> season_span(Season s, int year);

/// Every 3-day sum whose window lies inside the season and has no missing day.
std::vector<double> rolling_3day_sums(const DailySeries& daily, Season season, int year);

/// Fraction of the season's days that are missing or absent.
double missing_fraction(const DailySeries& daily, Season season, int year);

/// Per-year seasonal maxima of 3-day sums; NaN when more than
/// `missing_threshold` of the season is missing (exactly at the threshold
/// the year is kept).
std::vector<double> seasonal_maxima(const DailySeries& daily, Season season, std::span<const int> years,
                                    double missing_threshold = 0.25);

struct MaximaTable {
  std::vector<std::string> station_ids;
  std::vector<Site> sites;
  std::vector<int> years;
  Eigen::MatrixXd maxima;  // years x stations
};

MaximaTable build_maxima(std::span<const DailySeries> series, Season season, std::span<const int> years,
                         double missing_threshold = 0.25);

/// Keeps stations with strictly more than `min_years` non-missing maxima.
/// The result has no covariates yet. Throws DataError when none survive.
ObservationSet screen_stations(const MaximaTable& table, int min_years = 30);

/// Regular lon/lat grid of one covariate, read from a lon,lat,value CSV.
/// Cells absent from the file are NaN.
struct CovariateGrid {
  std::string name;
  double lon0 = 0.0, lat0 = 0.0;
  double dlon = 0.125, dlat = 0.125;
  int n_lon = 0, n_lat = 0;
  std::vector<double> values;  // row-major by latitude

  Site cell(int i, int j) const { return {lon0 + i * dlon, lat0 + j * dlat}; }
  double at(int i, int j) const { return values[static_cast<std::size_t>(j * n_lon + i)]; }
  /// Inside the rectangle covered by the cells (half a cell beyond the centres).
  bool covers(const Site& s) const;
  /// Nearest-cell value (NaN when that cell is absent or s is outside).
  double value_at(const Site& s) const;
};

CovariateGrid read_covariate_grid(const std::filesystem::path& file, std::string name);
void write_covariate_grid(const std::filesystem::path& file, const CovariateGrid& grid);

/// Column-wise z-scoring with a fixed mean and sd.
struct Standardizer {
  Eigen::VectorXd mean;
  Eigen::VectorXd sd;

  static Standardizer fit(const Eigen::MatrixXd& raw);
  static Standardizer identity(Eigen::Index p);
  Eigen::MatrixXd apply(const Eigen::MatrixXd& raw) const;
  Eigen::MatrixXd invert(const Eigen::MatrixXd& z) const;
};

/// Raw covariate values (one column per grid) at the sites.
/// Throws DataError naming every site outside a grid or on an absent cell.
Eigen::MatrixXd sample_covariates(std::span<const Site> sites, std::span<const CovariateGrid> grids,
                                  std::span<const std::string> labels = {});

/// Fills obs.covariates from the grids; with `standardize` the columns are
/// z-scored over the stations and the transform is returned for reuse on grid
/// and knot covariates.
Standardizer attach_covariates(ObservationSet& obs, std::span<const CovariateGrid> grids, bool standardize);

/// Mean over qualifying seasons of the seasonal precipitation total (missing
/// days count as zero in a qualifying season). Needs at least `min_years`
/// qualifying seasons.
double mean_seasonal_precip(const DailySeries& daily, Season season, std::span<const int> years,
                            double missing_threshold = 0.25, int min_years = 5);

/// GHCN-Daily conversion: PRCP records (tenths of mm) from .dly files, with
/// coordinates from a ghcnd-stations.txt listing. -9999 and values carrying
/// a quality flag become missing.
std::vector<DailySeries> read_ghcn(std::span<const std::filesystem::path> dly_files,
                                   const std::filesystem::path& stations_file);

}  // namespace spext

#pragma once

#include <cstdint>
#include <filesystem>
#include <string>
#include <vector>

#include <nlohmann/json.hpp>

#include "spext/ingest.hpp"
#include "spext/sampler.hpp"
#include "spext/spatial.hpp"

namespace spext {

struct CovariateSource {
  std::string name;
  std::filesystem::path path;
  friend bool operator==(const CovariateSource&, const CovariateSource&) = default;
};

/// Prediction grid: cell centres at lon_min + i * spacing (i = 0..n) and
/// likewise in latitude, so both extent edges are cell centres.
struct GridSettings {
  Extent extent{-125.0, -100.0, 30.0, 50.0};
  double spacing = 0.125;
  int thin = 5;
  int max_draws = 1000;
  int block_cells = 2000;
  bool geojson = false;

  int n_lon() const;
  int n_lat() const;
  std::vector<Site> cells() const;  // row-major by latitude
};

struct DiagSettings {
  double p = 0.95;
  double alpha = 0.01;
  int max_pairs = 20000;
};

struct RunConfig {
  std::filesystem::path data;  // daily CSV file or directory
  std::vector<CovariateSource> covariates;
  std::filesystem::path output = "spext-out";
  Season season = Season::SON;
  int first_year = 1950;
  int last_year = 2013;
  int min_years = 30;
  double missing_threshold = 0.25;
  bool standardize = true;
  int knots = 10;
  int group_size = 30;
  ChainConfig chains;
  GridSettings grid;
  std::vector<double> return_periods{2.0, 25.0, 50.0, 100.0};
  std::uint64_t seed = 1;
  double drop_fraction = 0.35;
  std::vector<int> group_sizes{2, 5, 10, 15, 20, 30};
  DiagSettings diag;

  std::vector<int> years() const;
  /// Value checks; throws ConfigError.
  void validate() const;
  /// Input files exist; throws ConfigError.
  void check_paths() const;
};

nlohmann::json to_json(const RunConfig& c);
/// Missing keys take defaults; unknown keys are an error.
RunConfig config_from_json(const nlohmann::json& j);

/// Reads a JSON config; relative paths are taken relative to the file.
RunConfig load_config(const std::filesystem::path& file);
void save_config(const RunConfig& c, const std::filesystem::path& file);

}  // namespace spext

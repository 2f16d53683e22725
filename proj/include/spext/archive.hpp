#pragma once

#include <cstdint>
#include <filesystem>
#include <string>
#include <vector>

#include <Eigen/Dense>
#include <nlohmann/json.hpp>

namespace spext {

/// Contiguous run of parameters persisted as one table.
struct ParameterGroup {
  std::string name;
  int first = 0;
  int count = 0;
};

/// Post-warmup MCMC draws for every parameter across chains.
struct PosteriorArchive {
  static constexpr int kFormatVersion = 1;

  std::vector<std::string> names;
  std::vector<ParameterGroup> groups;
  int n_chains = 0;
  int draws_per_chain = 0;
  Eigen::MatrixXd draws;  // (n_chains * draws_per_chain) x parameters, chain-major
  std::vector<std::string> block_names;
  Eigen::MatrixXd acceptance;  // chains x blocks
  std::vector<std::uint64_t> seeds;
  nlohmann::json config = nlohmann::json::object();
  nlohmann::json metadata = nlohmann::json::object();

  int index_of(const std::string& name) const;
  /// chains x iterations draws of one parameter.
  Eigen::MatrixXd chain_matrix(int parameter) const;
};

/// Writes `manifest.json`, one CSV per parameter group and `acceptance.csv`
/// into `dir`, replacing any previous contents.
void write_archive(const PosteriorArchive& archive, const std::filesystem::path& dir);
PosteriorArchive read_archive(const std::filesystem::path& dir);

/// Shortest decimal text that parses back to the identical double.
std::string format_double(double v);
double parse_double(std::string_view s);

}  // namespace spext

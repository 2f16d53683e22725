#pragma once

#include <array>
#include <cstdint>
#include <span>
#include <string>
#include <vector>

#include <Eigen/Dense>

#include "spext/copula.hpp"
#include "spext/gev.hpp"
#include "spext/partition.hpp"
#include "spext/spatial.hpp"

namespace spext {

/// Seasonal maxima at screened stations, with covariates.
struct ObservationSet {
  std::vector<std::string> station_ids;
  std::vector<Site> stations;
  Eigen::MatrixXd covariates;  // m x p
  Eigen::MatrixXd maxima;      // years x m, NaN = missing
  std::vector<int> years;
  std::vector<bool> complete;

  int station_count() const { return static_cast<int>(stations.size()); }
  int year_count() const { return static_cast<int>(maxima.rows()); }
  int covariate_count() const { return static_cast<int>(covariates.cols()); }
  std::vector<int> complete_indices() const;
  /// Recomputes `complete` from the missing markers.
  void update_complete_mask();
  ObservationSet subset(std::span<const int> keep) const;
  void validate() const;
};

/// Every sampled quantity of the hierarchy.
struct ModelState {
  std::array<RegressionField, 3> fields;
  std::array<Eigen::VectorXd, 3> residuals;
  std::array<CovParams, 3> cov;
  CopulaParams copula;
};

/// Composite-likelihood groups: over all stations (latent GP layer) and over
/// complete stations only (copula layer; indices into complete_indices()).
struct Partitions {
  GroupPartition all;
  GroupPartition complete;
};

Partitions make_partitions(const ObservationSet& obs, int n_g, std::uint64_t seed);

struct PriorScales {
  static constexpr double intercept_mu = 10.0;
  static constexpr double intercept_sigma = 10.0;
  static constexpr double intercept_xi = 1.0;
  static constexpr double weight = 1.0;
  static constexpr double variance_mu_sigma = 1.0;
  static constexpr double variance_xi = 0.1;
  static constexpr double range = 1000.0;
};

double half_normal_logpdf(double x, double sd);
double intercept_prior_sd(GevParam g);

/// Normal priors centred at 0; positive parameters use the half-normal.
/// -inf when a positivity constraint is violated.
double log_prior(const ModelState& state);

/// Zero-mean MVN log density of each group's residuals, summed.
/// Throws NumericalError when a group matrix cannot be factored.
double latent_gp_loglik_grouped(const Eigen::VectorXd& w, const CovParams& theta,
                                std::span<const Site> sites, const GroupPartition& partition);

/// Linear predictors (mu, log sigma, xi) at every station.
std::array<Eigen::VectorXd, 3> station_linear_predictors(const ModelState& state,
                                                         const ObservationSet& obs);
std::vector<GevParams> station_gev(const ModelState& state, const ObservationSet& obs);

/// Full (non-incremental) log posterior. Incomplete stations contribute
/// independent GEV terms over their available years; complete stations enter
/// through the grouped copula.
double log_posterior(const ModelState& state, const ObservationSet& obs, const Partitions& parts);

/// Flattening of ModelState for archiving.
struct ParameterLayout {
  int knots = 0;
  int covariates = 0;
  int stations = 0;

  int field_size() const { return 1 + knots * covariates + knots + 3 + stations; }
  int size() const { return 3 * field_size() + 1; }
  int field_offset(GevParam g) const { return idx(g) * field_size(); }
  int intercept_index(GevParam g) const { return field_offset(g); }
  int weight_index(GevParam g, int knot, int cov) const {
    return field_offset(g) + 1 + knot * covariates + cov;
  }
  int kernel_range_index(GevParam g, int knot) const {
    return field_offset(g) + 1 + knots * covariates + knot;
  }
  int cov_index(GevParam g) const { return field_offset(g) + 1 + knots * covariates + knots; }
  int residual_index(GevParam g, int station) const { return cov_index(g) + 3 + station; }
  int copula_index() const { return 3 * field_size(); }

  std::vector<std::string> names() const;
  std::vector<double> flatten(const ModelState& s) const;
  ModelState unflatten(std::span<const double> values, std::span<const Site> knots) const;
};

}  // namespace spext

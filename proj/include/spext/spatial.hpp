#pragma once

#include <array>
#include <cstdint>
#include <span>
#include <vector>

#include <Eigen/Dense>

#include "spext/gev.hpp"

namespace spext {

/// Geographic location in degrees.
struct Site {
  double lon = 0.0;
  double lat = 0.0;

  friend bool operator==(const Site&, const Site&) = default;
};

/// Rectangular lon/lat box.
struct Extent {
  double lon_min = -124.0;
  double lon_max = -118.0;
  double lat_min = 40.0;
  double lat_max = 46.0;

  friend bool operator==(const Extent&, const Extent&) = default;
  bool contains(const Site& s) const {
    return s.lon >= lon_min && s.lon <= lon_max && s.lat >= lat_min && s.lat <= lat_max;
  }
};

inline constexpr double kEarthRadiusKm = 6371.0;

/// Great-circle (haversine) distance in kilometres.
double distance(const Site& a, const Site& b);

/// Pairwise distance matrix.
Eigen::MatrixXd distance_matrix(std::span<const Site> a, std::span<const Site> b);

/// Exponential covariance with nugget: psill * exp(-d / range) off the
/// diagonal, psill + nugget on it.
struct CovParams {
  double psill = 1.0;
  double range = 1.0;
  double nugget = 0.0;

  bool valid() const { return psill >= 0.0 && nugget >= 0.0 && range > 0.0; }
  void validate() const;
  friend bool operator==(const CovParams&, const CovParams&) = default;
};

Eigen::MatrixXd exp_cov_matrix(std::span<const Site> sites, const CovParams& theta);

/// Covariance from precomputed distances (square, diagonal gets the nugget).
Eigen::MatrixXd exp_cov_from_distances(const Eigen::MatrixXd& dist, const CovParams& theta);

/// Nugget-free covariance between two site sets.
Eigen::MatrixXd exp_cross_cov(std::span<const Site> a, std::span<const Site> b,
                              const CovParams& theta);

/// Copula dependence matrix exp(-d / a0); unit diagonal.
Eigen::MatrixXd dependogram_matrix(std::span<const Site> sites, double a0);

/// Gaussian kernels exp(-d^2 / a_i^2) to each knot.
Eigen::VectorXd rbf_basis(const Site& s, std::span<const Site> knots,
                          const Eigen::VectorXd& kernel_ranges);

/// Spatially varying regression for one GEV parameter: intercept plus p
/// coefficients, each a weighted sum of k Gaussian kernels.
struct RegressionField {
  double intercept = 0.0;
  std::vector<Site> knots;
  Eigen::VectorXd kernel_ranges;  // k
  Eigen::MatrixXd weights;        // k x p

  Eigen::Index knot_count() const { return static_cast<Eigen::Index>(knots.size()); }
  Eigen::Index n_covariates() const { return weights.cols(); }
  void validate() const;
};

/// p coefficients at s (intercept excluded).
Eigen::VectorXd eval_coefficients(const RegressionField& f, const Site& s);

enum class GevParam : int { mu = 0, sigma = 1, xi = 2 };
inline constexpr std::array<GevParam, 3> kGevParams{GevParam::mu, GevParam::sigma, GevParam::xi};
inline constexpr int idx(GevParam g) { return static_cast<int>(g); }
const char* name_of(GevParam g);

inline constexpr double kXiBound = 0.5;

/// Maps the three linear predictors to GEV parameters: sigma is carried on
/// the log scale, xi is clamped to [-0.5, 0.5].
GevParams gev_from_linear(double mu_lin, double log_sigma_lin, double xi_lin);

GevParams eval_gev_surface(const std::array<RegressionField, 3>& fields,
                           const Eigen::VectorXd& covariates, const std::array<double, 3>& residuals,
                           const Site& s);

/// Maximin subset of k candidates: greedy farthest-point seeding from the
/// candidate nearest the centroid, then pairwise swaps while the minimum
/// inter-knot distance strictly increases. Returns candidate indices.
std::vector<std::size_t> space_filling_indices(std::span<const Site> candidates, std::size_t k);
std::vector<Site> space_filling_knots(std::span<const Site> candidates, std::size_t k);

/// Smallest pairwise distance within a set (infinity for fewer than 2 sites).
double min_pairwise_distance(std::span<const Site> sites);

struct ConditionalGaussian {
  Eigen::VectorXd mean;
  Eigen::MatrixXd cov;
};

/// Zero-mean GP conditioned on values at observed sites.
ConditionalGaussian krige_conditional(const CovParams& theta, std::span<const Site> obs_sites,
                                      const Eigen::VectorXd& obs_values,
                                      std::span<const Site> target_sites);

/// n_draws x n_targets joint draws from the kriging distribution.
Eigen::MatrixXd conditional_simulate(const CovParams& theta, std::span<const Site> obs_sites,
                                     const Eigen::VectorXd& obs_values,
                                     std::span<const Site> target_sites, int n_draws,
                                     std::uint64_t seed);

/// Draws from N(mean, cov) via a jittered Cholesky factor.
Eigen::MatrixXd sample_mvn(const ConditionalGaussian& dist, int n_draws, std::uint64_t seed);

}  // namespace spext

#include "spext/spatial.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <numbers>
#include <random>
#include <stdexcept>

#include "spext/errors.hpp"
#include "spext/linalg.hpp"

namespace spext {
namespace {

constexpr double kDegToRad = std::numbers::pi / 180.0;

}  // namespace

double distance(const Site& a, const Site& b) {
  if (a == b) return 0.0;
  const double phi1 = a.lat * kDegToRad;
  const double phi2 = b.lat * kDegToRad;
  const double dphi = phi2 - phi1;
  const double dlambda = (b.lon - a.lon) * kDegToRad;
  const double sp = std::sin(0.5 * dphi);
  const double sl = std::sin(0.5 * dlambda);
  const double h = sp * sp + std::cos(phi1) * std::cos(phi2) * sl * sl;
  return 2.0 * kEarthRadiusKm * std::asin(std::min(1.0, std::sqrt(h)));
}

Eigen::MatrixXd distance_matrix(std::span<const Site> a, std::span<const Site> b) {
  Eigen::MatrixXd d(a.size(), b.size());
  for (std::size_t i = 0; i < a.size(); ++i)
    for (std::size_t j = 0; j < b.size(); ++j) d(i, j) = distance(a[i], b[j]);
  return d;
}

void CovParams::validate() const {
  if (!valid()) throw std::domain_error("covariance parameters need psill >= 0, nugget >= 0, range > 0");
}

Eigen::MatrixXd exp_cov_from_distances(const Eigen::MatrixXd& dist, const CovParams& theta) {
  theta.validate();
  const Eigen::Index n = dist.rows();
  Eigen::MatrixXd c(n, n);
  for (Eigen::Index j = 0; j < n; ++j) {
    c(j, j) = theta.psill + theta.nugget;
    for (Eigen::Index i = j + 1; i < n; ++i) {
      const double v = theta.psill * std::exp(-dist(i, j) / theta.range);
      c(i, j) = v;
      c(j, i) = v;
    }
  }
  return c;
}

Eigen::MatrixXd exp_cov_matrix(std::span<const Site> sites, const CovParams& theta) {
  return exp_cov_from_distances(distance_matrix(sites, sites), theta);
}

Eigen::MatrixXd exp_cross_cov(std::span<const Site> a, std::span<const Site> b,
                              const CovParams& theta) {
  theta.validate();
  Eigen::MatrixXd c = distance_matrix(a, b);
  return (theta.psill * (-c.array() / theta.range).exp()).matrix();
}

Eigen::MatrixXd dependogram_matrix(std::span<const Site> sites, double a0) {
  if (!(a0 > 0.0)) throw std::domain_error("copula range must be positive");
  const auto n = static_cast<Eigen::Index>(sites.size());
  Eigen::MatrixXd r(n, n);
  for (Eigen::Index j = 0; j < n; ++j) {
    r(j, j) = 1.0;
    for (Eigen::Index i = j + 1; i < n; ++i) {
      const double v = std::exp(-distance(sites[i], sites[j]) / a0);
      r(i, j) = v;
      r(j, i) = v;
    }
  }
  return r;
}

Eigen::VectorXd rbf_basis(const Site& s, std::span<const Site> knots,
                          const Eigen::VectorXd& kernel_ranges) {
  if (static_cast<Eigen::Index>(knots.size()) != kernel_ranges.size())
    throw std::domain_error("rbf_basis: one kernel range per knot required");
  Eigen::VectorXd eta(kernel_ranges.size());
  for (Eigen::Index i = 0; i < eta.size(); ++i) {
    if (!(kernel_ranges[i] > 0.0)) throw std::domain_error("rbf_basis: kernel ranges must be positive");
    const double d = distance(s, knots[i]) / kernel_ranges[i];
    eta[i] = std::exp(-d * d);
  }
  return eta;
}

void RegressionField::validate() const {
  if (knots.empty()) throw std::domain_error("regression field needs at least one knot");
  if (kernel_ranges.size() != knot_count() || weights.rows() != knot_count())
    throw std::domain_error("regression field: knot, range and weight dimensions disagree");
  if ((kernel_ranges.array() <= 0.0).any())
    throw std::domain_error("regression field: kernel ranges must be positive");
}

Eigen::VectorXd eval_coefficients(const RegressionField& f, const Site& s) {
  return f.weights.transpose() * rbf_basis(s, f.knots, f.kernel_ranges);
}

const char* name_of(GevParam g) {
  switch (g) {
    case GevParam::mu:
      return "mu";
    case GevParam::sigma:
      return "sigma";
    case GevParam::xi:
      return "xi";
  }
  return "?";
}

GevParams gev_from_linear(double mu_lin, double log_sigma_lin, double xi_lin) {
  // keep exp() away from underflow/overflow so sigma stays positive and finite
  const double log_sigma = std::clamp(log_sigma_lin, -700.0, 700.0);
  return GevParams{mu_lin, std::exp(log_sigma), std::clamp(xi_lin, -kXiBound, kXiBound)};
}

GevParams eval_gev_surface(const std::array<RegressionField, 3>& fields,
                           const Eigen::VectorXd& covariates, const std::array<double, 3>& residuals,
                           const Site& s) {
  std::array<double, 3> lin{};
  for (GevParam g : kGevParams) {
    const auto& f = fields[idx(g)];
    if (f.n_covariates() != covariates.size())
      throw std::domain_error("covariate length does not match regression field");
    lin[idx(g)] = f.intercept + covariates.dot(eval_coefficients(f, s)) + residuals[idx(g)];
  }
  return gev_from_linear(lin[0], lin[1], lin[2]);
}

double min_pairwise_distance(std::span<const Site> sites) {
  double best = std::numeric_limits<double>::infinity();
  for (std::size_t i = 0; i < sites.size(); ++i)
    for (std::size_t j = i + 1; j < sites.size(); ++j) best = std::min(best, distance(sites[i], sites[j]));
  return best;
}

std::vector<std::size_t> space_filling_indices(std::span<const Site> candidates, std::size_t k) {
  const std::size_t n = candidates.size();
  if (k == 0 || k > n) throw std::domain_error("space_filling_knots: need 1 <= k <= candidate count");
  std::vector<std::size_t> chosen;
  if (k == n) {
    for (std::size_t i = 0; i < n; ++i) chosen.push_back(i);
    return chosen;
  }

  const Eigen::MatrixXd d = distance_matrix(candidates, candidates);
  Site centroid{};
  for (const Site& s : candidates) {
    centroid.lon += s.lon / static_cast<double>(n);
    centroid.lat += s.lat / static_cast<double>(n);
  }
  std::size_t first = 0;
  double nearest = std::numeric_limits<double>::infinity();
  for (std::size_t i = 0; i < n; ++i) {
    const double di = distance(candidates[i], centroid);
    if (di < nearest) {
      nearest = di;
      first = i;
    }
  }
  chosen.push_back(first);

  std::vector<double> gap(n);
  for (std::size_t i = 0; i < n; ++i) gap[i] = d(i, first);
  while (chosen.size() < k) {
    std::size_t next = 0;
    double far = -1.0;
    for (std::size_t i = 0; i < n; ++i) {
      if (gap[i] > far) {
        far = gap[i];
        next = i;
      }
    }
    chosen.push_back(next);
    for (std::size_t i = 0; i < n; ++i) gap[i] = std::min(gap[i], d(i, next));
  }

  auto min_dist = [&](const std::vector<std::size_t>& set) {
    double m = std::numeric_limits<double>::infinity();
    for (std::size_t a = 0; a < set.size(); ++a)
      for (std::size_t b = a + 1; b < set.size(); ++b) m = std::min(m, d(set[a], set[b]));
    return m;
  };

  std::vector<char> in_set(n, 0);
  for (std::size_t c : chosen) in_set[c] = 1;
  double current = min_dist(chosen);
  bool improved = true;
  while (improved) {
    improved = false;
    for (std::size_t pos = 0; pos < chosen.size() && !improved; ++pos) {
      for (std::size_t c = 0; c < n && !improved; ++c) {
        if (in_set[c]) continue;
        auto trial = chosen;
        trial[pos] = c;
        const double m = min_dist(trial);
        if (m > current * (1.0 + 1e-12)) {
          in_set[chosen[pos]] = 0;
          in_set[c] = 1;
          chosen = std::move(trial);
          current = m;
          improved = true;
        }
      }
    }
  }
  std::sort(chosen.begin(), chosen.end());
  return chosen;
}

std::vector<Site> space_filling_knots(std::span<const Site> candidates, std::size_t k) {
  std::vector<Site> knots;
  for (std::size_t i : space_filling_indices(candidates, k)) knots.push_back(candidates[i]);
  return knots;
}

ConditionalGaussian krige_conditional(const CovParams& theta, std::span<const Site> obs_sites,
                                      const Eigen::VectorXd& obs_values,
                                      std::span<const Site> target_sites) {
  theta.validate();
  if (static_cast<Eigen::Index>(obs_sites.size()) != obs_values.size())
    throw std::domain_error("krige_conditional: one value per observed site required");
  const Eigen::MatrixXd c_oo = exp_cov_matrix(obs_sites, theta);
  const auto llt = cholesky_with_jitter(c_oo);
  const Eigen::MatrixXd c_to = exp_cross_cov(target_sites, obs_sites, theta);
  ConditionalGaussian out;
  out.mean = c_to * llt.solve(obs_values);
  const Eigen::MatrixXd half = llt.matrixL().solve(c_to.transpose());
  out.cov = exp_cov_matrix(target_sites, theta) - half.transpose() * half;
  out.cov = 0.5 * (out.cov + out.cov.transpose()).eval();
  return out;
}

Eigen::MatrixXd sample_mvn(const ConditionalGaussian& dist, int n_draws, std::uint64_t seed) {
  const Eigen::Index n = dist.mean.size();
  Eigen::MatrixXd lower = Eigen::MatrixXd::Zero(n, n);
  if (n > 0) {
    Eigen::MatrixXd cov = dist.cov;
    // clip tiny negative variances left by cancellation
    for (Eigen::Index i = 0; i < n; ++i) cov(i, i) = std::max(cov(i, i), 0.0);
    if (cov.diagonal().maxCoeff() > 0.0) lower = cholesky_with_jitter(cov).matrixL();
  }
  std::mt19937_64 rng(seed);
  std::normal_distribution<double> normal;
  Eigen::MatrixXd draws(n_draws, n);
  Eigen::VectorXd z(n);
  for (int d = 0; d < n_draws; ++d) {
    for (Eigen::Index i = 0; i < n; ++i) z[i] = normal(rng);
    draws.row(d) = (dist.mean + lower.triangularView<Eigen::Lower>() * z).transpose();
  }
  return draws;
}

Eigen::MatrixXd conditional_simulate(const CovParams& theta, std::span<const Site> obs_sites,
                                     const Eigen::VectorXd& obs_values,
                                     std::span<const Site> target_sites, int n_draws,
                                     std::uint64_t seed) {
  return sample_mvn(krige_conditional(theta, obs_sites, obs_values, target_sites), n_draws, seed);
}

}  // namespace spext

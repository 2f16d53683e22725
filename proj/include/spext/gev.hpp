#pragma once

#include <optional>
#include <span>

namespace spext {

/// Location/scale/shape triple of a generalized extreme value distribution.
struct GevParams {
  double mu = 0.0;
  double sigma = 1.0;
  double xi = 0.0;

  friend bool operator==(const GevParams&, const GevParams&) = default;
};

/// Below this |xi| the Gumbel limit is used in place of the general formula.
inline constexpr double kGumbelEps = 1e-8;

double gev_logpdf(double y, const GevParams& p);
double gev_cdf(double y, const GevParams& p);
double gev_quantile(double q, const GevParams& p);

/// Level exceeded on average once every `period` blocks (years).
double return_level(double period, const GevParams& p);

/// Draw by inversion from a uniform variate u in (0, 1).
inline double gev_from_uniform(double u, const GevParams& p) { return gev_quantile(u, p); }

struct GevFit {
  GevParams params;
  bool converged = false;
  double loglik = 0.0;
  int restarts = 0;
};

// Nelder-Mead maximum likelihood over (mu, log sigma, xi). NaN entries are
// treated as missing. Throws std::domain_error for fewer than 10 values.
GevFit gev_mle_fit(std::span<const double> y, std::optional<GevParams> init = std::nullopt);

}  // namespace spext

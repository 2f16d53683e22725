#include "spext/gev.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <numbers>
#include <stdexcept>
#include <vector>

#include "spext/optimize.hpp"

namespace spext {
namespace {

constexpr double kNegInf = -std::numeric_limits<double>::infinity();

void check_scale(const GevParams& p) {
  if (!(p.sigma > 0.0)) throw std::domain_error("GEV scale must be positive");
}

}  // namespace

double gev_logpdf(double y, const GevParams& p) {
  check_scale(p);
  const double z = (y - p.mu) / p.sigma;
  if (std::abs(p.xi) < kGumbelEps) return -std::log(p.sigma) - z - std::exp(-z);
  const double xz = p.xi * z;
  if (!(xz > -1.0)) return kNegInf;
  const double log_b = std::log1p(xz);
  return -std::log(p.sigma) - (1.0 + 1.0 / p.xi) * log_b - std::exp(-log_b / p.xi);
}

double gev_cdf(double y, const GevParams& p) {
  check_scale(p);
  const double z = (y - p.mu) / p.sigma;
  if (std::abs(p.xi) < kGumbelEps) return std::exp(-std::exp(-z));
  const double xz = p.xi * z;
  if (!(xz > -1.0)) return p.xi > 0.0 ? 0.0 : 1.0;
  return std::exp(-std::exp(-std::log1p(xz) / p.xi));
}

double gev_quantile(double q, const GevParams& p) {
  check_scale(p);
  if (!(q > 0.0 && q < 1.0)) throw std::domain_error("GEV quantile level must lie in (0, 1)");
  const double log_l = std::log(-std::log(q));
  if (std::abs(p.xi) < kGumbelEps) return p.mu - p.sigma * log_l;
  return p.mu + p.sigma * std::expm1(-p.xi * log_l) / p.xi;
}

double return_level(double period, const GevParams& p) {
  if (!(period > 1.0)) throw std::domain_error("return period must exceed 1");
  return gev_quantile(1.0 - 1.0 / period, p);
}

GevFit gev_mle_fit(std::span<const double> y, std::optional<GevParams> init) {
  std::vector<double> data;
  data.reserve(y.size());
  for (double v : y)
    if (std::isfinite(v)) data.push_back(v);
  if (data.size() < 10) throw std::domain_error("GEV fit needs at least 10 non-missing values");

  const double n = static_cast<double>(data.size());
  double mean = 0.0;
  for (double v : data) mean += v;
  mean /= n;
  double var = 0.0;
  for (double v : data) var += (v - mean) * (v - mean);
  var /= (n - 1.0);

  GevParams start;
  if (init) {
    start = *init;
  } else {
    // Gumbel moment estimators
    start.sigma = std::sqrt(6.0 * var) / std::numbers::pi;
    start.mu = mean - std::numbers::egamma * start.sigma;
    start.xi = 0.1;
  }
  if (!(start.sigma > 0.0)) return GevFit{start, false, kNegInf, 0};

  constexpr double kSigmaFloor = 1e-10;
  auto unpack = [&](const std::vector<double>& x) {
    return GevParams{x[0], kSigmaFloor + std::exp(x[1]), x[2]};
  };
  auto negll = [&](const std::vector<double>& x) {
    const GevParams p = unpack(x);
    double s = 0.0;
    for (double v : data) s += gev_logpdf(v, p);
    return -s;
  };

  std::vector<double> x{start.mu, std::log(std::max(start.sigma - kSigmaFloor, kSigmaFloor)),
                        start.xi};
  SimplexResult res = nelder_mead(negll, x);
  if (!std::isfinite(res.value)) {
    // the moment start can sit outside the support; fall back to the Gumbel limit
    x[2] = 0.0;
    res = nelder_mead(negll, x);
  }

  constexpr int kMaxRestarts = 20;
  bool converged = false;
  int restarts = 0;
  for (; restarts < kMaxRestarts && std::isfinite(res.value); ++restarts) {
    SimplexResult again = nelder_mead(negll, res.x);
    const double improvement = res.value - again.value;
    if (again.value < res.value) res = again;
    if (improvement < 1e-8) {
      converged = again.converged;
      break;
    }
  }
  const GevParams fitted = unpack(res.x);
  if (!(fitted.sigma > 1e-8 * (std::sqrt(var) + 1e-300))) converged = false;
  return GevFit{fitted, converged && std::isfinite(res.value), -res.value, restarts};
}

}  // namespace spext

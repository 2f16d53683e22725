#include "spext/copula.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <numeric>
#include <stdexcept>
#include <vector>

#include <boost/math/special_functions/beta.hpp>

#include "spext/errors.hpp"
#include "spext/linalg.hpp"
#include "spext/normal.hpp"

namespace spext {
namespace {

constexpr double kNegInf = -std::numeric_limits<double>::infinity();

std::vector<double> rank_margins(std::span<const double> v) {
  const std::size_t n = v.size();
  std::vector<std::size_t> order(n);
  std::iota(order.begin(), order.end(), std::size_t{0});
  std::stable_sort(order.begin(), order.end(), [&](std::size_t a, std::size_t b) { return v[a] < v[b]; });
  std::vector<double> f(n);
  std::size_t i = 0;
  while (i < n) {
    std::size_t j = i;
    while (j + 1 < n && v[order[j + 1]] == v[order[i]]) ++j;
    const double avg_rank = 0.5 * static_cast<double>(i + j) + 1.0;
    for (std::size_t t = i; t <= j; ++t) f[order[t]] = avg_rank / static_cast<double>(n + 1);
    i = j + 1;
  }
  return f;
}

}  // namespace

double normal_score(double y, const GevParams& p) {
  return normal_quantile(std::clamp(gev_cdf(y, p), kScoreClip, 1.0 - kScoreClip));
}

double copula_correction(const Eigen::MatrixXd& scores, const Eigen::LLT<Eigen::MatrixXd>& r_llt) {
  const double half_logdet = 0.5 * log_det(r_llt);
  const Eigen::MatrixXd white = r_llt.matrixL().solve(scores);
  double total = 0.0;
  for (Eigen::Index t = 0; t < scores.cols(); ++t)
    total += -half_logdet - 0.5 * white.col(t).squaredNorm() + 0.5 * scores.col(t).squaredNorm();
  return total;
}

double copula_loglik(std::span<const double> y, std::span<const GevParams> gev,
                     const Eigen::MatrixXd& sigma_dep) {
  const auto m = static_cast<Eigen::Index>(y.size());
  if (static_cast<Eigen::Index>(gev.size()) != m || sigma_dep.rows() != m || sigma_dep.cols() != m)
    throw std::domain_error("copula_loglik: dimension mismatch");
  double marginal = 0.0;
  Eigen::MatrixXd u(m, 1);
  for (Eigen::Index i = 0; i < m; ++i) {
    const double lp = gev_logpdf(y[i], gev[i]);
    if (lp == kNegInf) return kNegInf;
    marginal += lp;
    u(i, 0) = normal_score(y[i], gev[i]);
  }
  Eigen::LLT<Eigen::MatrixXd> llt(sigma_dep);
  if (llt.info() != Eigen::Success) throw NumericalError("copula dependence matrix is not positive definite");
  return marginal + copula_correction(u, llt);
}

double copula_loglik_grouped(const Eigen::MatrixXd& years, std::span<const GevParams> gev,
                             std::span<const Site> sites, const GroupPartition& partition,
                             double a0) {
  const auto m = static_cast<std::size_t>(years.cols());
  if (gev.size() != m || sites.size() != m || partition.station_count() != m)
    throw std::domain_error("copula_loglik_grouped: dimension mismatch");
  double total = 0.0;
  for (const auto& group : partition.members()) {
    std::vector<Site> group_sites;
    Eigen::MatrixXd scores(static_cast<Eigen::Index>(group.size()), years.rows());
    for (std::size_t a = 0; a < group.size(); ++a) {
      const auto s = static_cast<std::size_t>(group[a]);
      group_sites.push_back(sites[s]);
      for (Eigen::Index t = 0; t < years.rows(); ++t) {
        const double y = years(t, static_cast<Eigen::Index>(s));
        const double lp = gev_logpdf(y, gev[s]);
        if (lp == kNegInf) return kNegInf;
        total += lp;
        scores(static_cast<Eigen::Index>(a), t) = normal_score(y, gev[s]);
      }
    }
    if (group.size() < 2) continue;  // one-variable copula is trivial
    const auto llt = cholesky_with_jitter(dependogram_matrix(group_sites, a0));
    total += copula_correction(scores, llt);
  }
  return total;
}

IndependenceTest asymptotic_independence_test(std::span<const double> x, std::span<const double> y,
                                              double p, double alpha) {
  if (x.size() != y.size()) throw std::domain_error("independence test: series lengths differ");
  if (x.size() < 50) throw std::domain_error("independence test: too few observations");
  if (!(p > 0.0 && p < 1.0) || !(alpha > 0.0 && alpha < 1.0))
    throw std::domain_error("independence test: p and alpha must lie in (0, 1)");
  auto all_tied = [](std::span<const double> v) {
    return std::all_of(v.begin(), v.end(), [&](double e) { return e == v.front(); });
  };
  if (all_tied(x) || all_tied(y)) throw std::domain_error("independence test: degenerate (all tied) input");

  const auto fx = rank_margins(x);
  const auto fy = rank_margins(y);
  IndependenceTest out;
  for (std::size_t i = 0; i < fx.size(); ++i) {
    if (fx[i] > p) {
      ++out.n_exceed;
      if (fy[i] > p) ++out.n_joint;
    }
  }
  if (out.n_exceed == 0) throw std::domain_error("independence test: no exceedances above p");
  out.chi_hat = static_cast<double>(out.n_joint) / static_cast<double>(out.n_exceed);
  out.lower_bound = out.n_joint == 0
                        ? 0.0
                        : boost::math::ibeta_inv(static_cast<double>(out.n_joint),
                                                 static_cast<double>(out.n_exceed - out.n_joint + 1), alpha);
  out.reject_dependence = !(out.lower_bound > 1.0 - p);
  return out;
}

}  // namespace spext

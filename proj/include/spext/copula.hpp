#pragma once

#include <span>

#include <Eigen/Dense>

#include "spext/gev.hpp"
#include "spext/partition.hpp"
#include "spext/spatial.hpp"

namespace spext {

struct CopulaParams {
  double a0 = 1.0;  // km
  bool valid() const { return a0 > 0.0; }
};

/// Probabilities are clipped to [1e-12, 1 - 1e-12] before the normal quantile.
inline constexpr double kScoreClip = 1e-12;

/// Normal score Phi^-1(F(y)) of a GEV observation.
double normal_score(double y, const GevParams& p);

/// Log density of one year's vector under the Gaussian copula with GEV
/// margins. -inf when any value is outside its margin's support.
double copula_loglik(std::span<const double> y, std::span<const GevParams> gev,
                     const Eigen::MatrixXd& sigma_dep);

/// Copula part only: sum over columns t of -1/2 log|R| - 1/2 u_t'(R^-1 - I)u_t.
double copula_correction(const Eigen::MatrixXd& scores, const Eigen::LLT<Eigen::MatrixXd>& r_llt);

/// Composite copula log-likelihood: years x stations data, one dependogram
/// per group (factored once and reused across years).
double copula_loglik_grouped(const Eigen::MatrixXd& years, std::span<const GevParams> gev,
                             std::span<const Site> sites, const GroupPartition& partition,
                             double a0);

struct IndependenceTest {
  double chi_hat = 0.0;
  bool reject_dependence = false;
  int n_exceed = 0;
  int n_joint = 0;
  double lower_bound = 0.0;  // one-sided Clopper-Pearson bound on chi(p)
};

/// Tail-exceedance test of asymptotic dependence between two series.
/// chi_hat = #(Fx > p and Fy > p) / #(Fx > p) on rank margins. Dependence is
/// retained only if the lower Clopper-Pearson bound at level 1 - alpha
/// exceeds the independence value 1 - p.
IndependenceTest asymptotic_independence_test(std::span<const double> x, std::span<const double> y,
                                              double p = 0.95, double alpha = 0.01);

}  // namespace spext

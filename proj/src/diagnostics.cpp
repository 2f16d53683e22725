#include "spext/diagnostics.hpp"

#include <cmath>
#include <limits>
#include <stdexcept>

namespace spext {
namespace {

constexpr double kNaN = std::numeric_limits<double>::quiet_NaN();

bool all_equal(const Eigen::MatrixXd& d) { return (d.array() == d(0, 0)).all(); }

}  // namespace

ChainStatistic rhat(const Eigen::MatrixXd& draws) {
  if (draws.rows() < 1 || draws.cols() < 10) throw std::domain_error("rhat: need at least 10 draws per chain");
  if (all_equal(draws)) return {kNaN, true};
  const Eigen::Index half = draws.cols() / 2;
  const Eigen::Index offset = draws.cols() - 2 * half;  // drop the first draw if odd
  const Eigen::Index chains = 2 * draws.rows();
  Eigen::MatrixXd split(chains, half);
  for (Eigen::Index c = 0; c < draws.rows(); ++c) {
    split.row(2 * c) = draws.row(c).segment(offset, half);
    split.row(2 * c + 1) = draws.row(c).segment(offset + half, half);
  }
  const double n = static_cast<double>(half);
  const Eigen::VectorXd means = split.rowwise().mean();
  double within = 0.0;
  for (Eigen::Index c = 0; c < chains; ++c)
    within += (split.row(c).array() - means[c]).square().sum() / (n - 1.0);
  within /= static_cast<double>(chains);
  const double between_over_n = (means.array() - means.mean()).square().sum() / static_cast<double>(chains - 1);
  if (!(within > 0.0)) return {kNaN, true};
  const double var_plus = (n - 1.0) / n * within + between_over_n;
  return {std::sqrt(var_plus / within), false};
}

ChainStatistic effective_sample_size(const Eigen::MatrixXd& draws) {
  if (draws.rows() < 1 || draws.cols() < 4) throw std::domain_error("effective_sample_size: too few draws");
  if (all_equal(draws)) return {kNaN, true};
  const Eigen::Index chains = draws.rows();
  const Eigen::Index n = draws.cols();
  const double nd = static_cast<double>(n);

  Eigen::VectorXd means = draws.rowwise().mean();
  Eigen::VectorXd var(chains);
  for (Eigen::Index c = 0; c < chains; ++c) var[c] = (draws.row(c).array() - means[c]).square().sum() / (nd - 1.0);
  const double within = var.mean();
  const double between_over_n =
      chains > 1 ? (means.array() - means.mean()).square().sum() / static_cast<double>(chains - 1) : 0.0;
  const double var_plus = (nd - 1.0) / nd * within + between_over_n;
  if (!(var_plus > 0.0)) return {kNaN, true};

  auto autocov = [&](Eigen::Index lag) {
    double acc = 0.0;
    for (Eigen::Index c = 0; c < chains; ++c) {
      double s = 0.0;
      for (Eigen::Index t = 0; t + lag < n; ++t) s += (draws(c, t) - means[c]) * (draws(c, t + lag) - means[c]);
      acc += s / nd;
    }
    return acc / static_cast<double>(chains);
  };
  auto rho = [&](Eigen::Index lag) { return 1.0 - (within - autocov(lag)) / var_plus; };

  double tau = -1.0;  // tau = -1 + 2 * sum of pair sums
  for (Eigen::Index k = 0; 2 * k + 1 < n; ++k) {
    const double pair = rho(2 * k) + rho(2 * k + 1);
    if (pair < 0.0) break;
    tau += 2.0 * pair;
  }
  tau = std::max(tau, 1.0 / std::log10(static_cast<double>(chains) * nd));
  return {static_cast<double>(chains) * nd / tau, false};
}

}  // namespace spext

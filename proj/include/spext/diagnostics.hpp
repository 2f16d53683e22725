#pragma once

#include <Eigen/Dense>

namespace spext {

/// Result of a convergence statistic; `degenerate` is set (and value is NaN)
/// when every draw is identical.
struct ChainStatistic {
  double value = 0.0;
  bool degenerate = false;
};

/// Split-R-hat over a chains x iterations matrix (>= 10 draws per chain).
ChainStatistic rhat(const Eigen::MatrixXd& draws);

/// Effective sample size, multi-chain autocorrelation estimate truncated at
/// the first negative pair sum (Geyer initial positive sequence).
ChainStatistic effective_sample_size(const Eigen::MatrixXd& draws);

}  // namespace spext

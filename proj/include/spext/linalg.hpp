#pragma once

#include <Eigen/Dense>

namespace spext {

/// Cholesky factor of a symmetric matrix. On failure, adds 1e-10 * max(diag)
/// to the diagonal and retries with the jitter doubled up to three times.
/// Throws NumericalError if every attempt fails.
Eigen::LLT<Eigen::MatrixXd> cholesky_with_jitter(const Eigen::MatrixXd& a);

/// log det of the matrix factored by `llt`.
double log_det(const Eigen::LLT<Eigen::MatrixXd>& llt);

}  // namespace spext

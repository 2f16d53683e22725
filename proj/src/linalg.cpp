#include "spext/linalg.hpp"

#include <cmath>

#include "spext/errors.hpp"

namespace spext {

Eigen::LLT<Eigen::MatrixXd> cholesky_with_jitter(const Eigen::MatrixXd& a) {
  Eigen::LLT<Eigen::MatrixXd> llt(a);
  if (llt.info() == Eigen::Success) return llt;
  const double scale = a.size() > 0 ? a.diagonal().cwiseAbs().maxCoeff() : 1.0;
  double jitter = 1e-10 * (scale > 0.0 ? scale : 1.0);
  for (int attempt = 0; attempt < 4; ++attempt, jitter *= 2.0) {
    Eigen::MatrixXd b = a;
    b.diagonal().array() += jitter;
    llt.compute(b);
    if (llt.info() == Eigen::Success) return llt;
  }
  throw NumericalError("Cholesky factorization failed: matrix is not positive definite");
}

double log_det(const Eigen::LLT<Eigen::MatrixXd>& llt) {
  return 2.0 * llt.matrixLLT().diagonal().array().log().sum();
}

}  // namespace spext

#pragma once

#include <functional>
#include <vector>

namespace spext {

struct SimplexResult {
  std::vector<double> x;
  double value = 0.0;
  int evaluations = 0;
  bool converged = false;
};

struct SimplexOptions {
  double initial_step = 0.1;
  double ftol = 1e-12;
  int max_evaluations = 20000;
};

/// Derivative-free minimization (Nelder-Mead, standard coefficients).
/// Non-finite objective values are treated as +inf.
SimplexResult nelder_mead(const std::function<double(const std::vector<double>&)>& f,
                          std::vector<double> start, const SimplexOptions& opts = {});

}  // namespace spext

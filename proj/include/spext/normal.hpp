#pragma once

namespace spext {

double normal_logpdf(double x, double mean = 0.0, double sd = 1.0);
double normal_cdf(double x);

/// Inverse standard normal cdf: Acklam's rational approximation refined by
/// one Halley step (relative error well below 1e-9 on (0, 1)).
double normal_quantile(double p);

}  // namespace spext

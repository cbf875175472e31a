#pragma once

#include <cstddef>
#include <vector>

namespace drokit {

// Standard normal quantile, Acklam's rational approximation.
// Relative error below 1.2e-9 over p in (0, 1); exact 0 at p = 0.5.
double normal_quantile(double p);

// Kahan-compensated sum. Validators compare against tolerances tighter than
// the drift of a naive sequential sum over 10^6 terms.
double compensated_sum(const double* v, std::ptrdiff_t n);

// Quantile with linear interpolation between order statistics
// (the common "type 7" convention). q in [0, 1].
double empirical_quantile(std::vector<double> values, double q);

double median(std::vector<double> values);

// Least-squares slope of y against x.
double fitted_slope(const std::vector<double>& x, const std::vector<double>& y);

}  // namespace drokit

#pragma once

#include <cstddef>
#include <span>
#include <vector>

namespace mippc {

double mean(std::span<const double> v);
// Sample variance / sd (divide by n-1).
double variance(std::span<const double> v);
double sample_sd(std::span<const double> v);

// Linear-interpolation quantile between order statistics (R type 7).
double quantile_type7(std::vector<double> v, double p);

// Standard normal quantile and CDF.
double normal_quantile(double p);
double normal_cdf(double x);

// Numerically stable logistic function.
double logistic(double t);

}  // namespace mippc

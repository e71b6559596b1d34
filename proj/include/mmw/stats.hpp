#pragma once

#include <span>
#include <vector>

namespace mmw {

/// Linear-interpolated quantile (q in [0,1]) of an already sorted sample.
double quantile_sorted(std::span<const double> sorted, double q);
double quantile(std::vector<double> values, double q);
double mean(std::span<const double> values);
double stddev(std::span<const double> values);

/// Empirical CDF of a sorted sample evaluated at x.
double ecdf_sorted(std::span<const double> sorted, double x);

/// Quantiles at 0%, 1%, ..., 100%.
std::vector<double> percentile_grid(std::vector<double> values);

}  // namespace mmw

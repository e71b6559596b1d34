#include "mmw/stats.hpp"

#include <algorithm>
#include <cmath>

#include "mmw/error.hpp"

namespace mmw {

double quantile_sorted(std::span<const double> sorted, double q) {
    require(!sorted.empty(), "quantile of an empty sample");
    require(q >= 0.0 && q <= 1.0, "quantile level must lie in [0, 1]");
    const double pos = q * static_cast<double>(sorted.size() - 1);
    const auto lo = static_cast<std::size_t>(std::floor(pos));
    const auto hi = std::min(lo + 1, sorted.size() - 1);
    const double frac = pos - static_cast<double>(lo);
    if (frac == 0.0 || sorted[lo] == sorted[hi]) return sorted[lo];
    if (!std::isfinite(sorted[lo]) || !std::isfinite(sorted[hi])) return frac < 0.5 ? sorted[lo] : sorted[hi];
    return sorted[lo] + frac * (sorted[hi] - sorted[lo]);
}

double quantile(std::vector<double> values, double q) {
    std::sort(values.begin(), values.end());
    return quantile_sorted(values, q);
}

double mean(std::span<const double> values) {
    require(!values.empty(), "mean of an empty sample");
    double s = 0.0;
    for (double v : values) s += v;
    return s / static_cast<double>(values.size());
}

double stddev(std::span<const double> values) {
    require(values.size() >= 2, "stddev needs two samples");
    const double m = mean(values);
    double s = 0.0;
    for (double v : values) s += (v - m) * (v - m);
    return std::sqrt(s / static_cast<double>(values.size() - 1));
}

double ecdf_sorted(std::span<const double> sorted, double x) {
    if (sorted.empty()) return 0.0;
    const auto it = std::upper_bound(sorted.begin(), sorted.end(), x);
    return static_cast<double>(it - sorted.begin()) / static_cast<double>(sorted.size());
}

std::vector<double> percentile_grid(std::vector<double> values) {
    std::sort(values.begin(), values.end());
    std::vector<double> out(101);
    for (int p = 0; p <= 100; ++p) out[static_cast<std::size_t>(p)] = quantile_sorted(values, p / 100.0);
    return out;
}

}  // namespace mmw

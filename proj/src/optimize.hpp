#pragma once

#include <functional>
#include <vector>

namespace mmw::detail {

struct SimplexResult {
    std::vector<double> x;
    double f = 0.0;
    int evaluations = 0;
    bool converged = false;
};

/// Nelder-Mead minimizer with the standard coefficients (1, 2, 0.5, 0.5).
/// Stops when the spread of simplex values and the simplex diameter both
/// fall below the tolerances.
SimplexResult nelder_mead(const std::function<double(const std::vector<double>&)>& f, std::vector<double> x0,
                          const std::vector<double>& step, int max_evaluations, double ftol = 1e-10,
                          double xtol = 1e-8);

}  // namespace mmw::detail

#include "optimize.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>

namespace mmw::detail {

SimplexResult nelder_mead(const std::function<double(const std::vector<double>&)>& f, std::vector<double> x0,
                          const std::vector<double>& step, int max_evaluations, double ftol, double xtol) {
    const std::size_t n = x0.size();
    std::vector<std::vector<double>> pts(n + 1, x0);
    for (std::size_t i = 0; i < n; ++i) pts[i + 1][i] += step[i];

    SimplexResult res;
    std::vector<double> fv(n + 1);
    auto eval = [&](const std::vector<double>& x) {
        ++res.evaluations;
        const double v = f(x);
        return std::isnan(v) ? HUGE_VAL : v;
    };
    for (std::size_t i = 0; i <= n; ++i) fv[i] = eval(pts[i]);

    std::vector<std::size_t> order(n + 1);
    std::vector<double> centroid(n), xr(n), xe(n), xc(n);
    auto along = [&](std::vector<double>& out, double t) {
        // centroid + t * (centroid - worst)
        for (std::size_t j = 0; j < n; ++j) out[j] = centroid[j] + t * (centroid[j] - pts[order[n]][j]);
    };

    while (true) {
        std::iota(order.begin(), order.end(), 0);
        std::stable_sort(order.begin(), order.end(), [&](std::size_t a, std::size_t b) { return fv[a] < fv[b]; });
        const double fbest = fv[order[0]];
        const double fworst = fv[order[n]];
        double diam = 0.0;
        for (std::size_t i = 1; i <= n; ++i)
            for (std::size_t j = 0; j < n; ++j) diam = std::max(diam, std::abs(pts[order[i]][j] - pts[order[0]][j]));
        if (std::abs(fworst - fbest) <= ftol * (std::abs(fbest) + ftol) && diam <= xtol) {
            res.converged = true;
            break;
        }
        if (res.evaluations >= max_evaluations) break;

        std::fill(centroid.begin(), centroid.end(), 0.0);
        for (std::size_t i = 0; i < n; ++i)
            for (std::size_t j = 0; j < n; ++j) centroid[j] += pts[order[i]][j] / static_cast<double>(n);

        along(xr, 1.0);
        const double fr = eval(xr);
        if (fr < fbest) {
            along(xe, 2.0);
            const double fe = eval(xe);
            if (fe < fr) {
                pts[order[n]] = xe;
                fv[order[n]] = fe;
            } else {
                pts[order[n]] = xr;
                fv[order[n]] = fr;
            }
            continue;
        }
        if (fr < fv[order[n - 1]]) {
            pts[order[n]] = xr;
            fv[order[n]] = fr;
            continue;
        }
        // contraction, outside or inside
        const bool outside = fr < fworst;
        along(xc, outside ? 0.5 : -0.5);
        const double fc = eval(xc);
        if (fc < (outside ? fr : fworst)) {
            pts[order[n]] = xc;
            fv[order[n]] = fc;
            continue;
        }
        for (std::size_t i = 1; i <= n; ++i) {
            auto& p = pts[order[i]];
            for (std::size_t j = 0; j < n; ++j) p[j] = pts[order[0]][j] + 0.5 * (p[j] - pts[order[0]][j]);
            fv[order[i]] = eval(p);
        }
    }
    const auto best = static_cast<std::size_t>(std::min_element(fv.begin(), fv.end()) - fv.begin());
    res.x = pts[best];
    res.f = fv[best];
    return res;
}

}  // namespace mmw::detail

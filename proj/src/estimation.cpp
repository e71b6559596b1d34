#include "mmw/estimation.hpp"

#include <algorithm>
#include <cmath>
#include <fstream>
#include <limits>
#include <map>
#include <numbers>
#include <numeric>
#include <sstream>
#include <tuple>

#include <boost/math/quadrature/gauss.hpp>

#include "mmw/error.hpp"
#include "mmw/random.hpp"
#include "optimize.hpp"
#include "text.hpp"

namespace mmw {

namespace {

using Point = std::array<double, 4>;
constexpr bool kAzimuthDim[4] = {true, false, true, false};

double wrapped_diff_deg(double a, double b) { return std::remainder(a - b, 360.0); }

double dim_diff(int k, double a, double b) { return kAzimuthDim[k] ? wrapped_diff_deg(a, b) : a - b; }

double dist2(const Point& a, const Point& b) {
    double s = 0.0;
    for (int k = 0; k < 4; ++k) {
        const double d = dim_diff(k, a[k], b[k]);
        s += d * d;
    }
    return s;
}

double wrap_deg(double a) {
    double w = std::fmod(a, 360.0);
    if (w < 0.0) w += 360.0;
    return w >= 360.0 ? 0.0 : w;
}

struct WeightedPoints {
    std::vector<Point> x;
    std::vector<double> w;
    std::vector<int> cell;  // index into the map
};

WeightedPoints valid_points(const AngularPowerMap& map) {
    WeightedPoints p;
    for (std::size_t i = 0; i < map.cells.size(); ++i) {
        const auto& c = map.cells[i];
        if (c.status != CellStatus::Power || !(c.power_mw > 0.0)) continue;
        p.x.push_back({c.tx_az, c.tx_el, c.rx_az, c.rx_el});
        p.w.push_back(c.power_mw);
        p.cell.push_back(static_cast<int>(i));
    }
    return p;
}

// Weighted center of a member set, refined from `start`. Each step minimizes
// a quadratic majorizer of the wrapped objective, so the objective never grows.
Point refine_center(const WeightedPoints& pts, const std::vector<int>& members, Point start) {
    Point c = start;
    double wsum = 0.0;
    for (int i : members) wsum += pts.w[i];
    if (wsum <= 0.0) return c;
    for (int it = 0; it < 4; ++it) {
        Point shift{};
        for (int i : members)
            for (int k = 0; k < 4; ++k) shift[k] += pts.w[i] * dim_diff(k, pts.x[i][k], c[k]);
        double moved = 0.0;
        for (int k = 0; k < 4; ++k) {
            c[k] += shift[k] / wsum;
            if (kAzimuthDim[k]) c[k] = wrap_deg(c[k]);
            moved = std::max(moved, std::abs(shift[k] / wsum));
        }
        if (moved < 1e-12) break;
    }
    return c;
}

// Circular weighted mean in the azimuth dimensions, plain mean elsewhere.
Point initial_center(const WeightedPoints& pts, const std::vector<int>& members) {
    Point c{};
    double wsum = 0.0, s0 = 0.0, c0 = 0.0, s2 = 0.0, c2 = 0.0;
    for (int i : members) {
        const double w = pts.w[i];
        wsum += w;
        s0 += w * std::sin(deg2rad(pts.x[i][0]));
        c0 += w * std::cos(deg2rad(pts.x[i][0]));
        s2 += w * std::sin(deg2rad(pts.x[i][2]));
        c2 += w * std::cos(deg2rad(pts.x[i][2]));
        c[1] += w * pts.x[i][1];
        c[3] += w * pts.x[i][3];
    }
    c[0] = wrap_deg(rad2deg(std::atan2(s0, c0)));
    c[2] = wrap_deg(rad2deg(std::atan2(s2, c2)));
    c[1] /= wsum;
    c[3] /= wsum;
    return c;
}

// Power-weighted rms deviation per dimension about `center`, optionally after
// dropping the weakest members that together hold at most `clip` of the power.
Point rms_spread(const WeightedPoints& pts, std::vector<int> members, const Point& center, double clip) {
    Point s{};
    if (members.empty()) return s;
    double total = 0.0;
    for (int i : members) total += pts.w[i];
    if (clip > 0.0) {
        std::stable_sort(members.begin(), members.end(), [&](int a, int b) { return pts.w[a] < pts.w[b]; });
        double removed = 0.0;
        std::size_t first = 0;
        while (first + 1 < members.size() && removed + pts.w[members[first]] <= clip * total) {
            removed += pts.w[members[first]];
            ++first;
        }
        members.erase(members.begin(), members.begin() + static_cast<std::ptrdiff_t>(first));
        total -= removed;
    }
    for (int i : members)
        for (int k = 0; k < 4; ++k) {
            const double d = dim_diff(k, pts.x[i][k], center[k]);
            s[k] += pts.w[i] * d * d;
        }
    for (auto& v : s) v = std::sqrt(v / total);
    return s;
}

std::vector<Point> seed_centers(const WeightedPoints& pts, int k, int restart, std::uint64_t seed) {
    const std::size_t n = pts.x.size();
    std::vector<Point> centers;
    Rng rng = Rng::stream({seed, static_cast<std::uint64_t>(k), static_cast<std::uint64_t>(restart)});
    auto weighted_pick = [&](const std::vector<double>& score) {
        const double tot = std::accumulate(score.begin(), score.end(), 0.0);
        if (!(tot > 0.0)) return std::size_t{0};
        double u = rng.uniform() * tot;
        for (std::size_t i = 0; i < n; ++i) {
            u -= score[i];
            if (u < 0.0) return i;
        }
        return n - 1;
    };
    std::size_t first = 0;
    if (restart == 0)
        first = static_cast<std::size_t>(std::max_element(pts.w.begin(), pts.w.end()) - pts.w.begin());
    else
        first = weighted_pick(pts.w);
    centers.push_back(pts.x[first]);
    std::vector<double> dmin(n, std::numeric_limits<double>::infinity());
    while (static_cast<int>(centers.size()) < k) {
        std::vector<double> score(n);
        for (std::size_t i = 0; i < n; ++i) {
            dmin[i] = std::min(dmin[i], dist2(pts.x[i], centers.back()));
            score[i] = pts.w[i] * dmin[i];
        }
        std::size_t pick = 0;
        if (restart == 0)
            pick = static_cast<std::size_t>(std::max_element(score.begin(), score.end()) - score.begin());
        else
            pick = weighted_pick(score);
        centers.push_back(pts.x[pick]);
    }
    return centers;
}

struct RunResult {
    std::vector<int> label;  // per point
    std::vector<Point> centers;
    std::vector<double> trace;
    double objective = 0.0;
    int iterations = 0;
};

RunResult run_kmeans(const WeightedPoints& pts, int k, int restart, const ClusterDetectOptions& opt) {
    RunResult r;
    const std::size_t n = pts.x.size();
    r.centers = seed_centers(pts, k, restart, opt.seed);
    r.label.assign(n, -1);
    for (int it = 0; it < opt.max_iterations; ++it) {
        bool changed = false;
        double obj = 0.0;
        for (std::size_t i = 0; i < n; ++i) {
            int best = 0;
            double bd = dist2(pts.x[i], r.centers[0]);
            for (int c = 1; c < k; ++c) {
                const double d = dist2(pts.x[i], r.centers[static_cast<std::size_t>(c)]);
                if (d < bd) {
                    bd = d;
                    best = c;
                }
            }
            if (r.label[i] != best) changed = true;
            r.label[i] = best;
            obj += pts.w[i] * bd;
        }
        r.trace.push_back(obj);
        r.objective = obj;
        r.iterations = it + 1;
        if (!changed && it > 0) break;
        std::vector<std::vector<int>> members(static_cast<std::size_t>(k));
        for (std::size_t i = 0; i < n; ++i) members[static_cast<std::size_t>(r.label[i])].push_back(static_cast<int>(i));
        for (int c = 0; c < k; ++c) {
            const auto& m = members[static_cast<std::size_t>(c)];
            if (m.empty()) continue;  // an empty cluster keeps its center
            auto& center = r.centers[static_cast<std::size_t>(c)];
            center = refine_center(pts, m, center);
        }
    }
    // objective at the final centers
    double obj = 0.0;
    for (std::size_t i = 0; i < n; ++i) obj += pts.w[i] * dist2(pts.x[i], r.centers[static_cast<std::size_t>(r.label[i])]);
    r.objective = obj;
    return r;
}

RunResult best_of_restarts(const WeightedPoints& pts, int k, const ClusterDetectOptions& opt) {
    RunResult best;
    bool have = false;
    for (int rs = 0; rs < std::max(1, opt.restarts); ++rs) {
        RunResult r = run_kmeans(pts, k, rs, opt);
        if (!have || r.objective < best.objective) {
            best = std::move(r);
            have = true;
        }
    }
    return best;
}

}  // namespace

double AngularPowerMap::total_power() const {
    double s = 0.0;
    for (const auto& c : cells)
        if (c.status == CellStatus::Power) s += c.power_mw;
    return s;
}

std::size_t AngularPowerMap::valid_cells() const {
    return static_cast<std::size_t>(std::count_if(cells.begin(), cells.end(), [](const MapCell& c) {
        return c.status == CellStatus::Power && c.power_mw > 0.0;
    }));
}

KMeansResult weighted_kmeans(const AngularPowerMap& map, int k, int restart, const ClusterDetectOptions& opt) {
    require(k >= 1, "cluster count must be positive");
    const WeightedPoints pts = valid_points(map);
    if (pts.x.empty()) fail(ErrorCode::Outage, "location in outage: no cell above threshold");
    RunResult r = run_kmeans(pts, k, restart, opt);
    KMeansResult out;
    out.assignment.assign(map.cells.size(), -1);
    for (std::size_t i = 0; i < pts.x.size(); ++i) out.assignment[static_cast<std::size_t>(pts.cell[i])] = r.label[i];
    out.centers = r.centers;
    out.objective_trace = r.trace;
    out.objective = r.objective;
    out.iterations = r.iterations;
    return out;
}

std::vector<ClusterEstimate> detect_clusters(const AngularPowerMap& map, const ClusterDetectOptions& opt) {
    const WeightedPoints pts = valid_points(map);
    if (pts.x.empty()) fail(ErrorCode::Outage, "location in outage: no cell above threshold");
    require(opt.max_clusters >= 1, "max_clusters must be positive");

    // Grid resolution bounds how small a measured deviation can be.
    const Point floor_sigma{map.az_step, map.el_step, map.az_step, map.el_step};

    struct Candidate {
        RunResult run;
        std::vector<std::vector<int>> members;
    };
    auto evaluate = [&](int k) {
        Candidate c;
        c.run = best_of_restarts(pts, k, opt);
        c.members.resize(static_cast<std::size_t>(k));
        for (std::size_t i = 0; i < pts.x.size(); ++i)
            c.members[static_cast<std::size_t>(c.run.label[i])].push_back(static_cast<int>(i));
        return c;
    };
    auto should_stop = [&](const Candidate& c) {
        for (const auto& m : c.members)
            if (m.empty()) return true;
        const std::size_t k = c.members.size();
        std::vector<Point> sig(k);
        for (std::size_t a = 0; a < k; ++a) {
            sig[a] = rms_spread(pts, c.members[a], c.run.centers[a], 0.0);
            for (int d = 0; d < 4; ++d) sig[a][static_cast<std::size_t>(d)] = std::max(sig[a][d], floor_sigma[d]);
        }
        for (std::size_t a = 0; a < k; ++a)
            for (std::size_t b = a + 1; b < k; ++b) {
                bool close = true;
                for (int d = 0; d < 4 && close; ++d) {
                    const double pooled = std::hypot(sig[a][d], sig[b][d]);
                    close = std::abs(dim_diff(d, c.run.centers[a][d], c.run.centers[b][d])) <= 2.0 * pooled;
                }
                if (close) return true;
            }
        return false;
    };

    Candidate accepted = evaluate(1);
    const int kmax = std::min<int>(opt.max_clusters, static_cast<int>(pts.x.size()));
    for (int k = 2; k <= kmax; ++k) {
        Candidate next = evaluate(k);
        if (should_stop(next)) break;
        accepted = std::move(next);
    }

    const double total = std::accumulate(pts.w.begin(), pts.w.end(), 0.0);
    std::vector<ClusterEstimate> out;
    for (std::size_t c = 0; c < accepted.members.size(); ++c) {
        const auto& m = accepted.members[c];
        ClusterEstimate e;
        // report the center recomputed from members so it is seed independent
        e.center = refine_center(pts, m, initial_center(pts, m));
        e.spread = rms_spread(pts, m, e.center, opt.clip_fraction);
        for (int i : m) {
            e.power_mw += pts.w[static_cast<std::size_t>(i)];
            e.members.push_back(pts.cell[static_cast<std::size_t>(i)]);
        }
        e.power_fraction = e.power_mw / total;
        out.push_back(std::move(e));
    }
    std::stable_sort(out.begin(), out.end(),
                     [](const ClusterEstimate& a, const ClusterEstimate& b) { return a.power_mw > b.power_mw; });
    return out;
}

double kmeans_objective(const AngularPowerMap& map, const std::vector<ClusterEstimate>& clusters) {
    double obj = 0.0;
    for (const auto& c : clusters)
        for (int i : c.members) {
            const auto& cell = map.cells[static_cast<std::size_t>(i)];
            obj += cell.power_mw * dist2({cell.tx_az, cell.tx_el, cell.rx_az, cell.rx_el}, c.center);
        }
    return obj;
}

AngularPowerMap map_from_subpaths(const SubpathSet& sub, double az_step, double el_step, double dynamic_range_db) {
    require(az_step > 0.0 && el_step > 0.0, "grid steps must be positive");
    const long n_az = std::lround(360.0 / az_step);
    auto az_index = [&](double rad) { return std::lround(wrap_deg(rad2deg(rad)) / az_step) % n_az; };
    auto el_index = [&](double rad) { return std::lround(rad2deg(rad) / el_step); };

    std::map<std::tuple<long, long, long, long>, double> bins;
    for (const auto& p : sub.paths)
        bins[{az_index(p.aod_az), el_index(p.aod_el), az_index(p.aoa_az), el_index(p.aoa_el)}] += p.power;

    double peak = 0.0;
    for (const auto& [key, pw] : bins) peak = std::max(peak, pw);
    const double floor = peak * std::pow(10.0, -dynamic_range_db / 10.0);

    AngularPowerMap map;
    map.az_step = az_step;
    map.el_step = el_step;
    for (const auto& [key, pw] : bins) {
        MapCell c;
        c.tx_az = static_cast<double>(std::get<0>(key)) * az_step;
        c.tx_el = static_cast<double>(std::get<1>(key)) * el_step;
        c.rx_az = static_cast<double>(std::get<2>(key)) * az_step;
        c.rx_el = static_cast<double>(std::get<3>(key)) * el_step;
        if (pw > floor && pw > 0.0) {
            c.status = CellStatus::Power;
            c.power_mw = pw;
        } else {
            c.status = CellStatus::BelowThreshold;
        }
        map.cells.push_back(c);
    }
    return map;
}

PathLossFit fit_path_loss(const std::vector<PathLossSample>& samples, LinkState state) {
    require(state != LinkState::Outage, "no path loss fit for outage samples");
    std::vector<double> x, y;
    for (const auto& s : samples) {
        if (s.state != state) continue;
        require(s.distance > 0.0, "distance must be positive");
        x.push_back(10.0 * std::log10(s.distance));
        y.push_back(s.path_loss);
    }
    if (x.size() < 2) fail(ErrorCode::Degenerate, "path loss fit needs at least two samples");
    const double n = static_cast<double>(x.size());
    const double mx = std::accumulate(x.begin(), x.end(), 0.0) / n;
    const double my = std::accumulate(y.begin(), y.end(), 0.0) / n;
    double sxx = 0.0, sxy = 0.0;
    for (std::size_t i = 0; i < x.size(); ++i) {
        sxx += (x[i] - mx) * (x[i] - mx);
        sxy += (x[i] - mx) * (y[i] - my);
    }
    if (!(sxx > 1e-12 * n)) fail(ErrorCode::Degenerate, "rank-deficient design: all samples at one distance");
    PathLossFit f;
    f.beta = sxy / sxx;
    f.alpha = my - f.beta * mx;
    double ss = 0.0;
    for (std::size_t i = 0; i < x.size(); ++i) {
        const double r = y[i] - f.alpha - f.beta * x[i];
        ss += r * r;
    }
    f.sigma = std::sqrt(ss / n);
    f.n = static_cast<int>(x.size());
    return f;
}

double link_state_log_likelihood(const std::vector<LinkStateSample>& samples, double a_out, double b_out,
                                 double a_los) {
    double ll = 0.0;
    for (const auto& s : samples) {
        const double p_out = std::max(0.0, 1.0 - std::exp(-a_out * s.distance + b_out));
        const double p_los = (1.0 - p_out) * std::exp(-a_los * s.distance);
        double p = 0.0;
        switch (s.state) {
            case LinkState::Outage: p = p_out; break;
            case LinkState::Los: p = p_los; break;
            case LinkState::Nlos: p = 1.0 - p_out - p_los; break;
        }
        ll += std::log(std::max(p, 1e-300));
    }
    return ll;
}

LinkStateFit fit_link_state(const std::vector<LinkStateSample>& samples) {
    require(samples.size() >= 3, "link state fit needs at least three samples");
    bool seen[3] = {false, false, false};
    for (const auto& s : samples) {
        require(s.distance >= 0.0, "distance must be non-negative");
        seen[static_cast<int>(s.state)] = true;
    }

    // log-parameters, clamped to a box
    constexpr double lo = -30.0, hi = 10.0;
    auto unpack = [&](const std::vector<double>& t) {
        return std::array<double, 3>{std::exp(std::clamp(t[0], lo, hi)), std::exp(std::clamp(t[1], lo, hi)),
                                     std::exp(std::clamp(t[2], lo, hi))};
    };
    const double n = static_cast<double>(samples.size());
    auto nll = [&](const std::vector<double>& t) {
        const auto p = unpack(t);
        return -link_state_log_likelihood(samples, p[0], p[1], p[2]) / n;
    };

    detail::SimplexResult best;
    bool have = false;
    for (double a0 : {0.01, 0.03, 0.1})
        for (double b0 : {1.0, 5.0})
            for (double l0 : {0.005, 0.02}) {
                auto r = detail::nelder_mead(nll, {std::log(a0), std::log(b0), std::log(l0)}, {0.5, 0.5, 0.5}, 4000,
                                             1e-12, 1e-7);
                if (!have || r.f < best.f) {
                    best = std::move(r);
                    have = true;
                }
            }
    // polish from the best start
    auto polish = detail::nelder_mead(nll, best.x, {0.05, 0.05, 0.05}, 4000, 1e-13, 1e-8);
    const int evals = best.evaluations + polish.evaluations;
    if (polish.f <= best.f) best = std::move(polish);

    LinkStateFit fit;
    const auto p = unpack(best.x);
    fit.a_out = p[0];
    fit.b_out = p[1];
    fit.a_los = p[2];
    fit.log_likelihood = -best.f * n;
    fit.iterations = evals;
    fit.boundary = !(seen[0] && seen[1] && seen[2]);
    for (double t : best.x)
        if (t <= lo + 1e-6 || t >= hi - 1e-6) fit.boundary = true;
    if (!best.converged && !fit.boundary) {
        std::ostringstream msg;
        msg << "link state fit did not converge after " << evals << " evaluations (a_out=" << fit.a_out
            << ", b_out=" << fit.b_out << ", a_los=" << fit.a_los << ", nll=" << best.f << ")";
        fail(ErrorCode::Convergence, msg.str());
    }
    return fit;
}

namespace {

struct RatioQuadrature {
    std::vector<double> log_ratio;  // ln(u_i / u_j)
    std::vector<double> weight;
};

// 64-point Gauss-Legendre product rule on [0, 1]^2 after the substitution
// u = v^kStretch, which carries nodes deep into the log-singular corner so the
// ratio tails are resolved.
constexpr double kStretch = 4.0;

const RatioQuadrature& ratio_quadrature() {
    static const RatioQuadrature q = [] {
        using gl = boost::math::quadrature::gauss<double, 64>;
        std::vector<double> u, w;
        const auto& abs = gl::abscissa();
        const auto& wts = gl::weights();
        for (std::size_t i = 0; i < abs.size(); ++i) {
            for (double v : {0.5 * (1.0 - abs[i]), 0.5 * (1.0 + abs[i])}) {
                u.push_back(std::pow(v, kStretch));
                w.push_back(0.5 * wts[i] * kStretch * std::pow(v, kStretch - 1.0));
            }
        }
        RatioQuadrature r;
        for (std::size_t i = 0; i < u.size(); ++i)
            for (std::size_t j = 0; j < u.size(); ++j) {
                r.log_ratio.push_back(std::log(u[i] / u[j]));
                r.weight.push_back(w[i] * w[j]);
            }
        return r;
    }();
    return q;
}

double ratio_density_raw(double x, double b, double s) {
    const auto& q = ratio_quadrature();
    const double inv = 1.0 / s;
    double acc = 0.0;
    for (std::size_t i = 0; i < q.weight.size(); ++i) {
        const double z = (b * q.log_ratio[i] - x) * inv;
        acc += q.weight[i] * std::exp(-0.5 * z * z);
    }
    return acc * inv / std::sqrt(2.0 * std::numbers::pi);
}

double weak_fraction_to_db(double w) { return 10.0 * std::log10((1.0 - w) / w); }

}  // namespace

double cluster_ratio_density(double x_db, double r_tau, double zeta) {
    require(r_tau >= 1.0, "r_tau must be at least 1");
    require(zeta > 0.0, "zeta must be positive");
    const double b = 10.0 * (r_tau - 1.0) / std::numbers::ln10;
    return ratio_density_raw(x_db, b, std::sqrt(2.0) * zeta);
}

double cluster_power_log_likelihood(const std::vector<double>& weak_fractions, double r_tau, double zeta) {
    require(r_tau >= 1.0, "r_tau must be at least 1");
    require(zeta > 0.0, "zeta must be positive");
    const double b = 10.0 * (r_tau - 1.0) / std::numbers::ln10;
    const double s = std::sqrt(2.0) * zeta;

    std::vector<double> x;
    x.reserve(weak_fractions.size());
    for (double w : weak_fractions) {
        require(w > 0.0 && w <= 0.5, "weak fraction must lie in (0, 0.5]");
        x.push_back(weak_fraction_to_db(w));
    }
    const double xmax = *std::max_element(x.begin(), x.end());

    // The folded density 2 f(x) is tabulated on a fine grid when that is
    // cheaper than evaluating every observation directly.
    const double h = std::min(0.25, s / 8.0);
    const auto grid_n = static_cast<std::size_t>(std::ceil(xmax / h)) + 2;
    double ll = 0.0;
    if (grid_n < x.size()) {
        std::vector<double> g(grid_n);
        for (std::size_t i = 0; i < grid_n; ++i) g[i] = 2.0 * ratio_density_raw(static_cast<double>(i) * h, b, s);
        for (double xi : x) {
            // cubic Lagrange on four neighbours, mirrored at zero by symmetry
            const auto i = static_cast<long>(std::floor(xi / h));
            const double t = xi / h - static_cast<double>(i);
            auto at = [&](long j) { return g[static_cast<std::size_t>(std::min<long>(std::abs(j), static_cast<long>(grid_n) - 1))]; };
            const double p0 = at(i - 1), p1 = at(i), p2 = at(i + 1), p3 = at(i + 2);
            const double v = p1 + 0.5 * t * (p2 - p0 + t * (2.0 * p0 - 5.0 * p1 + 4.0 * p2 - p3 + t * (3.0 * (p1 - p2) + p3 - p0)));
            ll += std::log(std::max(v, 1e-300));
        }
    } else {
        for (double xi : x) ll += std::log(std::max(2.0 * ratio_density_raw(xi, b, s), 1e-300));
    }
    return ll;
}

ClusterPowerFit fit_cluster_power(const std::vector<double>& weak_fractions) {
    require(weak_fractions.size() >= 10, "cluster power fit needs at least ten observations");
    const double n = static_cast<double>(weak_fractions.size());
    // parameters: ln(r_tau - 1), ln(zeta), clamped
    auto unpack = [](const std::vector<double>& t) {
        return std::pair{1.0 + std::exp(std::clamp(t[0], -12.0, 3.0)), std::exp(std::clamp(t[1], -7.0, 4.0))};
    };
    auto nll = [&](const std::vector<double>& t) {
        const auto [r, z] = unpack(t);
        return -cluster_power_log_likelihood(weak_fractions, r, z) / n;
    };
    detail::SimplexResult best;
    bool have = false;
    for (double r0 : {1.5, 3.0})
        for (double z0 : {1.0, 5.0}) {
            auto r = detail::nelder_mead(nll, {std::log(r0 - 1.0), std::log(z0)}, {0.3, 0.3}, 600, 1e-10, 1e-5);
            if (!have || r.f < best.f) {
                best = std::move(r);
                have = true;
            }
        }
    const bool at_bound = best.x[0] <= -12.0 + 1e-6 || best.x[1] <= -7.0 + 1e-6;
    if (!best.converged && !at_bound) {
        std::ostringstream msg;
        msg << "cluster power fit did not converge after " << best.evaluations << " evaluations";
        fail(ErrorCode::Convergence, msg.str());
    }
    ClusterPowerFit fit;
    std::tie(fit.r_tau, fit.zeta) = unpack(best.x);
    fit.log_likelihood = -best.f * n;
    fit.iterations = best.evaluations;
    return fit;
}

double fit_angular_spread(const std::vector<double>& spreads_deg) {
    require(!spreads_deg.empty(), "no spreads to fit");
    double s = 0.0;
    for (double v : spreads_deg) {
        require(v >= 0.0, "spreads must be non-negative");
        s += v;
    }
    return s / static_cast<double>(spreads_deg.size());
}

double fit_cluster_count(const std::vector<int>& counts) {
    require(!counts.empty(), "no cluster counts to fit");
    double s = 0.0;
    for (int k : counts) {
        require(k >= 1, "cluster counts must be at least 1");
        s += k;
    }
    return s / static_cast<double>(counts.size());
}

namespace {

std::vector<std::string> read_lines(const std::string& path) {
    std::ifstream in(path);
    if (!in) fail(ErrorCode::Io, "cannot open " + path);
    std::vector<std::string> lines;
    std::string line;
    while (std::getline(in, line)) lines.push_back(line);
    return lines;
}

[[noreturn]] void parse_error(const std::string& path, std::size_t line, const std::string& what) {
    fail(ErrorCode::Parse, path + ":" + std::to_string(line) + ": " + what);
}

// Maps required column names to positions in the header.
std::vector<std::size_t> header_columns(const std::string& path, const std::vector<std::string>& lines,
                                        const std::vector<std::string>& names) {
    if (lines.empty() || detail::trim(lines[0]).empty()) parse_error(path, 1, "missing header");
    const auto head = detail::split_csv(lines[0]);
    std::vector<std::size_t> pos;
    for (const auto& name : names) {
        auto it = std::find(head.begin(), head.end(), name);
        if (it == head.end()) parse_error(path, 1, "missing column " + name);
        pos.push_back(static_cast<std::size_t>(it - head.begin()));
    }
    return pos;
}

}  // namespace

AngularPowerMap read_power_map_csv(const std::string& path) {
    const auto lines = read_lines(path);
    const auto col =
        header_columns(path, lines, {"tx_az_deg", "tx_el_deg", "rx_az_deg", "rx_el_deg", "status", "power_dbm"});
    AngularPowerMap map;
    for (std::size_t ln = 1; ln < lines.size(); ++ln) {
        if (detail::trim(lines[ln]).empty()) continue;
        const auto f = detail::split_csv(lines[ln]);
        if (f.size() <= *std::max_element(col.begin(), col.end())) parse_error(path, ln + 1, "too few fields");
        MapCell c;
        double* angles[4] = {&c.tx_az, &c.tx_el, &c.rx_az, &c.rx_el};
        for (int k = 0; k < 4; ++k)
            if (!detail::parse_num(f[col[static_cast<std::size_t>(k)]], *angles[k]) || !std::isfinite(*angles[k]))
                parse_error(path, ln + 1, "bad angle");
        const auto st = f[col[4]];
        if (st == "M") {
            c.status = CellStatus::NotMeasured;
        } else if (st == "B") {
            c.status = CellStatus::BelowThreshold;
        } else if (st == "P") {
            double dbm = 0.0;
            if (!detail::parse_num(f[col[5]], dbm) || !std::isfinite(dbm)) parse_error(path, ln + 1, "bad power_dbm");
            c.status = CellStatus::Power;
            c.power_mw = std::pow(10.0, dbm / 10.0);
        } else {
            parse_error(path, ln + 1, "status must be M, B or P");
        }
        map.cells.push_back(c);
    }
    if (map.cells.empty()) parse_error(path, 2, "no data rows");
    return map;
}

void write_power_map_csv(const std::string& path, const AngularPowerMap& map) {
    std::ofstream out(path);
    if (!out) fail(ErrorCode::Io, "cannot write " + path);
    out << "tx_az_deg,tx_el_deg,rx_az_deg,rx_el_deg,status,power_dbm\n";
    for (const auto& c : map.cells) {
        out << detail::fmt_num(c.tx_az) << ',' << detail::fmt_num(c.tx_el) << ',' << detail::fmt_num(c.rx_az) << ','
            << detail::fmt_num(c.rx_el) << ',';
        switch (c.status) {
            case CellStatus::NotMeasured: out << "M,\n"; break;
            case CellStatus::BelowThreshold: out << "B,\n"; break;
            case CellStatus::Power: out << "P," << detail::fmt_num(10.0 * std::log10(c.power_mw)) << '\n'; break;
        }
    }
    if (!out) fail(ErrorCode::Io, "write failed: " + path);
}

std::vector<PathLossSample> read_path_loss_csv(const std::string& path) {
    const auto lines = read_lines(path);
    const auto col = header_columns(path, lines, {"distance_m", "pl_db", "state"});
    std::vector<PathLossSample> out;
    for (std::size_t ln = 1; ln < lines.size(); ++ln) {
        if (detail::trim(lines[ln]).empty()) continue;
        const auto f = detail::split_csv(lines[ln]);
        if (f.size() <= *std::max_element(col.begin(), col.end())) parse_error(path, ln + 1, "too few fields");
        PathLossSample s;
        if (!detail::parse_num(f[col[0]], s.distance) || !(s.distance > 0.0))
            parse_error(path, ln + 1, "distance_m must be a positive number");
        const auto st = f[col[2]];
        if (st.size() != 1 || (st[0] != 'L' && st[0] != 'N' && st[0] != 'O'))
            parse_error(path, ln + 1, "state must be L, N or O");
        s.state = state_from_letter(st[0]);
        if (s.state == LinkState::Outage) {
            s.path_loss = std::numeric_limits<double>::infinity();
        } else if (!detail::parse_num(f[col[1]], s.path_loss) || !std::isfinite(s.path_loss)) {
            parse_error(path, ln + 1, "bad pl_db");
        }
        out.push_back(s);
    }
    if (out.empty()) parse_error(path, 2, "no data rows");
    return out;
}

void write_path_loss_csv(const std::string& path, const std::vector<PathLossSample>& samples) {
    std::ofstream out(path);
    if (!out) fail(ErrorCode::Io, "cannot write " + path);
    out << "distance_m,pl_db,state\n";
    for (const auto& s : samples) {
        out << detail::fmt_num(s.distance) << ',';
        if (s.state != LinkState::Outage) out << detail::fmt_num(s.path_loss);
        out << ',' << state_letter(s.state) << '\n';
    }
    if (!out) fail(ErrorCode::Io, "write failed: " + path);
}

}  // namespace mmw

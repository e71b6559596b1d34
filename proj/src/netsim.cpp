#include "mmw/netsim.hpp"

#include <algorithm>
#include <atomic>
#include <cmath>
#include <exception>
#include <limits>
#include <mutex>
#include <numbers>
#include <thread>

#include "mmw/error.hpp"
#include "mmw/stats.hpp"

namespace mmw {

namespace {

constexpr double kPi = std::numbers::pi;
constexpr double kNegInf = -std::numeric_limits<double>::infinity();

double db2lin(double db) { return std::pow(10.0, 0.1 * db); }
double lin2db(double lin) { return lin > 0.0 ? 10.0 * std::log10(lin) : kNegInf; }

ArrayGeometry cell_array(const NetworkConfig& cfg, const Cell& cell) {
    ArrayGeometry g = cfg.bs_array;
    g.boresight_azimuth = cell.azimuth;
    return g;
}

/// Beam-dependent terms of every non-serving link, shared by both directions.
struct InterferenceTerms {
    std::vector<double> ue_q;               // v_ue(x)^H Q_ue v_ue(x), per entry
    std::vector<std::vector<double>> bs_q;  // v_bs(c->w)^H Q_bs v_bs(c->w), w over served(c)
    std::vector<std::vector<int>> cell_links;  // per cell, entry indices sorted by UE
};

InterferenceTerms interference_terms(const Deployment& dep, const LinkTable& links, const NetworkConfig& cfg) {
    InterferenceTerms t;
    const std::size_t n = links.entries.size();
    t.ue_q.assign(n, 0.0);
    t.bs_q.assign(n, {});
    t.cell_links.assign(dep.cells.size(), {});
    for (std::size_t i = 0; i < n; ++i) t.cell_links[static_cast<std::size_t>(links.entries[i].cell)].push_back(static_cast<int>(i));
    for (auto& v : t.cell_links)
        std::sort(v.begin(), v.end(), [&](int a, int b) { return links.entries[a].ue < links.entries[b].ue; });

    for (std::size_t i = 0; i < n; ++i) {
        const LinkBudgetEntry& e = links.entries[i];
        if (e.serving) continue;
        const int own = links.serving_link[static_cast<std::size_t>(e.ue)];
        const auto& served = links.served_ues[static_cast<std::size_t>(e.cell)];
        // Unserved UEs neither receive nor transmit; idle cells do not transmit.
        if (own < 0 && served.empty()) continue;
        const SubpathSet& sub = links.subpaths[i];
        if (own >= 0) {
            const CMatrix a_ue = steering_factor(sub, cfg.ue_array, true);
            t.ue_q[i] = factor_quadratic(a_ue, links.ue_beam[static_cast<std::size_t>(own)]);
        }
        if (!served.empty()) {
            const CMatrix a_bs = steering_factor(sub, cell_array(cfg, dep.cells[static_cast<std::size_t>(e.cell)]), false);
            t.bs_q[i].reserve(served.size());
            for (int w : served) {
                const int wl = links.serving_link[static_cast<std::size_t>(w)];
                t.bs_q[i].push_back(factor_quadratic(a_bs, links.bs_beam[static_cast<std::size_t>(wl)]));
            }
        }
    }
    return t;
}

SinrResult sinr_with_terms(const Deployment& dep, const LinkTable& links, const NetworkConfig& cfg, Direction dir,
                           const InterferenceTerms& terms) {
    const std::size_t n_ues = dep.ues.size();
    SinrResult out;
    out.sinr_db.assign(n_ues, kNegInf);
    out.inr_db.assign(n_ues, kNegInf);
    const double arr = static_cast<double>(cfg.ue_array.size()) * static_cast<double>(cfg.bs_array.size());
    const int slots = std::max(1, cfg.slot_draws);

    auto link_gain = [&](int i, double ue_q, double bs_q) {
        return arr * ue_q * bs_q / links.trace[static_cast<std::size_t>(i)];
    };

    if (dir == Direction::Downlink) {
        const double p_tx = db2lin(cfg.dl_tx_power);  // mW
        const double noise = db2lin(thermal_noise_dbm(cfg.bandwidth, cfg.ue_noise_figure));
        // links of each UE
        std::vector<std::vector<int>> ue_links(n_ues);
        for (std::size_t i = 0; i < links.entries.size(); ++i)
            ue_links[static_cast<std::size_t>(links.entries[i].ue)].push_back(static_cast<int>(i));
        for (std::size_t u = 0; u < n_ues; ++u) {
            const int own = links.serving_link[u];
            if (own < 0) continue;
            const double signal = p_tx * links.entries[static_cast<std::size_t>(own)].effective_gain_dl;
            Rng rng = Rng::stream({links.slot_key, 0, u});
            double interference = 0.0;
            for (int s = 0; s < slots; ++s) {
                for (int i : ue_links[u]) {
                    if (i == own) continue;
                    const auto& served = links.served_ues[static_cast<std::size_t>(links.entries[static_cast<std::size_t>(i)].cell)];
                    if (served.empty()) continue;
                    const auto pick = rng.below(served.size());
                    interference += p_tx * link_gain(i, terms.ue_q[static_cast<std::size_t>(i)], terms.bs_q[static_cast<std::size_t>(i)][pick]);
                }
            }
            interference /= slots;
            out.sinr_db[u] = lin2db(signal / (interference + noise));
            out.inr_db[u] = lin2db(interference / noise);
        }
        return out;
    }

    const double p_tx = db2lin(cfg.ul_tx_power);
    for (std::size_t c = 0; c < dep.cells.size(); ++c) {
        const auto& served = links.served_ues[c];
        if (served.empty()) continue;
        const auto& cl = terms.cell_links[c];
        // interfering cells: serving cells of other UEs visible to this cell
        std::vector<int> jcells;
        for (int i : cl) {
            const int j = links.serving_cell(links.entries[static_cast<std::size_t>(i)].ue);
            if (j >= 0 && j != static_cast<int>(c)) jcells.push_back(j);
        }
        std::sort(jcells.begin(), jcells.end());
        jcells.erase(std::unique(jcells.begin(), jcells.end()), jcells.end());

        auto find_link = [&](int ue) -> int {
            auto it = std::lower_bound(cl.begin(), cl.end(), ue,
                                       [&](int i, int u) { return links.entries[static_cast<std::size_t>(i)].ue < u; });
            if (it != cl.end() && links.entries[static_cast<std::size_t>(*it)].ue == ue) return *it;
            return -1;
        };

        const double share = cfg.ul_noise_per_share ? cfg.bandwidth / static_cast<double>(served.size()) : cfg.bandwidth;
        const double noise = db2lin(thermal_noise_dbm(share, cfg.bs_noise_figure));
        for (std::size_t mi = 0; mi < served.size(); ++mi) {
            const int m = served[mi];
            const int own = links.serving_link[static_cast<std::size_t>(m)];
            const double signal = p_tx * links.entries[static_cast<std::size_t>(own)].effective_gain_ul;
            Rng rng = Rng::stream({links.slot_key, 1, static_cast<std::uint64_t>(m)});
            double interference = 0.0;
            for (int s = 0; s < slots; ++s) {
                for (int j : jcells) {
                    const auto& sj = links.served_ues[static_cast<std::size_t>(j)];
                    const int w = sj[rng.below(sj.size())];
                    const int i = find_link(w);
                    if (i < 0) continue;
                    interference += p_tx * link_gain(i, terms.ue_q[static_cast<std::size_t>(i)], terms.bs_q[static_cast<std::size_t>(i)][mi]);
                }
            }
            interference /= slots;
            out.sinr_db[static_cast<std::size_t>(m)] = lin2db(signal / (interference + noise));
            out.inr_db[static_cast<std::size_t>(m)] = lin2db(interference / noise);
        }
    }
    return out;
}

}  // namespace

void NetworkConfig::validate() const {
    require(area_width > 0.0 && area_height > 0.0, "area must be positive");
    require(isd > 0.0, "isd must be positive");
    require(sectors_per_site >= 1, "need at least one sector per site");
    require(ues_per_cell >= 0, "ues_per_cell must be non-negative");
    require(std::isfinite(dl_tx_power) && std::isfinite(ul_tx_power) && std::isfinite(bs_noise_figure) &&
                std::isfinite(ue_noise_figure),
            "powers and noise figures must be finite");
    require(bandwidth > 0.0, "bandwidth must be positive");
    require(overhead >= 0.0 && overhead <= 1.0 && duplex_split >= 0.0 && duplex_split <= 1.0,
            "fractions must lie in [0, 1]");
    require(rho_max > 0.0, "rho_max must be positive");
    require(d_shift >= 0.0, "d_shift must be non-negative");
    require(subpaths_per_cluster >= 1, "subpaths_per_cluster must be positive");
    require(bs_height >= 0.0 && ue_height >= 0.0, "heights must be non-negative");
    bs_array.validate();
    ue_array.validate();
    band.validate();
}

int LinkTable::serving_cell(int ue) const {
    const int l = serving_link[static_cast<std::size_t>(ue)];
    return l < 0 ? -1 : entries[static_cast<std::size_t>(l)].cell;
}

Deployment drop_network(const NetworkConfig& cfg, Rng& rng) {
    cfg.validate();
    const double row_spacing = cfg.isd * std::sqrt(3.0) / 2.0;
    const int n_cols = static_cast<int>(std::lround(cfg.area_width / cfg.isd));
    const int n_rows = static_cast<int>(std::lround(cfg.area_height / row_spacing)) + 1;
    if (n_cols < 1) fail(ErrorCode::InvalidArgument, "area too small for one cell site");

    Deployment dep;
    dep.sectors_per_site = cfg.sectors_per_site;
    const double yc = cfg.area_height / 2.0;
    for (int k = 0; k < n_rows; ++k) {
        const double y = yc + (k - (n_rows - 1) / 2.0) * row_spacing;
        const double shift = (k % 2 == 0) ? -cfg.isd / 4.0 : cfg.isd / 4.0;
        for (int j = 0; j < n_cols; ++j) dep.sites.push_back({(j + 0.5) * cfg.isd + shift, y});
    }
    for (std::size_t s = 0; s < dep.sites.size(); ++s)
        for (int k = 0; k < cfg.sectors_per_site; ++k)
            dep.cells.push_back({static_cast<int>(s), 2.0 * kPi * k / cfg.sectors_per_site});

    const std::size_t n_ues = dep.cells.size() * static_cast<std::size_t>(cfg.ues_per_cell);
    dep.ues.reserve(n_ues);
    for (std::size_t u = 0; u < n_ues; ++u) {
        const double x = rng.uniform(0.0, cfg.area_width);
        const double y = rng.uniform(0.0, cfg.area_height);
        dep.ues.push_back({x, y});
    }
    return dep;
}

std::vector<bool> interior_sites(const Deployment& dep, const NetworkConfig& cfg) {
    const double m = cfg.interior_margin_isd * cfg.isd;
    std::vector<bool> out(dep.sites.size());
    for (std::size_t s = 0; s < dep.sites.size(); ++s) {
        const Site& p = dep.sites[s];
        out[s] = p.x >= m && p.x <= cfg.area_width - m && p.y >= m && p.y <= cfg.area_height - m;
    }
    return out;
}

bool sector_visible(const Deployment& dep, int cell, int ue) {
    const Cell& c = dep.cells[static_cast<std::size_t>(cell)];
    const Site& s = dep.sites[static_cast<std::size_t>(c.site)];
    const UePosition& u = dep.ues[static_cast<std::size_t>(ue)];
    const double dx = u.x - s.x;
    const double dy = u.y - s.y;
    if (dx == 0.0 && dy == 0.0) return c.azimuth == 0.0;
    const double half = kPi / dep.sectors_per_site;
    // offset from boresight in [-pi, pi); each azimuth belongs to exactly one sector
    const double off = std::remainder(std::atan2(dy, dx) - c.azimuth, 2.0 * kPi);
    return off >= -half && off < half;
}

LinkTable realize_links(const Deployment& dep, const NetworkConfig& cfg, Rng& rng) {
    cfg.validate();
    LinkTable t;
    const std::uint64_t base = rng();
    t.slot_key = rng();
    const double dh = cfg.bs_height - cfg.ue_height;
    LinkOverrides ov;
    ov.d_shift = cfg.d_shift;
    ov.suppress_los = cfg.suppress_los;
    ov.force_state = cfg.force_state;
    const double arr = static_cast<double>(cfg.ue_array.size()) * static_cast<double>(cfg.bs_array.size());

    for (std::size_t u = 0; u < dep.ues.size(); ++u) {
        for (std::size_t c = 0; c < dep.cells.size(); ++c) {
            if (!sector_visible(dep, static_cast<int>(c), static_cast<int>(u))) continue;
            const Site& s = dep.sites[static_cast<std::size_t>(dep.cells[c].site)];
            const double horiz = std::hypot(dep.ues[u].x - s.x, dep.ues[u].y - s.y);
            const double d = std::hypot(horiz, dh);
            Rng prng = Rng::stream({base, u, c});
            LinkRealization link = sample_link(d, los_elevation(horiz, cfg.bs_height, cfg.ue_height), cfg.band, prng, ov);
            if (link.outage()) continue;

            SubpathSet sub = synthesize_subpaths(link, cfg.subpaths_per_cluster, prng);
            const CMatrix a_ue = steering_factor(sub, cfg.ue_array, true);
            const CMatrix a_bs = steering_factor(sub, cell_array(cfg, dep.cells[c]), false);
            DominantEigen e_ue = dominant_eigen_of_factor(a_ue);
            DominantEigen e_bs = dominant_eigen_of_factor(a_bs);
            const double tr = sub.total_power();

            LinkBudgetEntry e;
            e.ue = static_cast<int>(u);
            e.cell = static_cast<int>(c);
            e.distance = d;
            e.state = link.state;
            e.omni_path_loss = link.omni_path_loss;
            e.effective_gain_dl = arr * e_ue.value * e_bs.value / tr;
            e.effective_gain_ul = e.effective_gain_dl;
            t.entries.push_back(e);
            t.subpaths.push_back(std::move(sub));
            t.ue_beam.push_back(std::move(e_ue.vector));
            t.bs_beam.push_back(std::move(e_bs.vector));
            t.trace.push_back(tr);
        }
    }

    t.serving_link.assign(dep.ues.size(), -1);
    for (std::size_t i = 0; i < t.entries.size(); ++i) {
        const auto u = static_cast<std::size_t>(t.entries[i].ue);
        const int cur = t.serving_link[u];
        if (cur < 0 || t.entries[i].effective_gain_dl > t.entries[static_cast<std::size_t>(cur)].effective_gain_dl)
            t.serving_link[u] = static_cast<int>(i);
    }
    t.served_ues.assign(dep.cells.size(), {});
    for (std::size_t u = 0; u < dep.ues.size(); ++u) {
        const int l = t.serving_link[u];
        if (l < 0) continue;
        t.entries[static_cast<std::size_t>(l)].serving = true;
        t.served_ues[static_cast<std::size_t>(t.entries[static_cast<std::size_t>(l)].cell)].push_back(static_cast<int>(u));
    }
    return t;
}

SinrResult compute_sinr(const Deployment& dep, const LinkTable& links, const NetworkConfig& cfg, Direction dir) {
    return sinr_with_terms(dep, links, cfg, dir, interference_terms(dep, links, cfg));
}

double thermal_noise_dbm(double bandwidth_hz, double noise_figure_db) {
    return -174.0 + 10.0 * std::log10(bandwidth_hz) + noise_figure_db;
}

double sinr_to_rate(double sinr_db, const NetworkConfig& cfg) {
    if (std::isnan(sinr_db) || sinr_db == kNegInf) return 0.0;
    if (sinr_db == std::numeric_limits<double>::infinity()) return cfg.rho_max;
    return std::min(std::log2(1.0 + std::pow(10.0, 0.1 * (sinr_db - cfg.delta))), cfg.rho_max);
}

DropResult schedule_drop(const Deployment& dep, const LinkTable& links, const SinrResult& dl, const SinrResult& ul,
                         const NetworkConfig& cfg, int drop) {
    DropResult r;
    r.drop = drop;
    r.sites = static_cast<int>(dep.sites.size());
    r.cells = static_cast<int>(dep.cells.size());
    r.total_ues = static_cast<int>(dep.ues.size());
    const auto interior = interior_sites(dep, cfg);
    const double m = cfg.interior_margin_isd * cfg.isd;
    const double scale = (1.0 - cfg.overhead) * cfg.duplex_split * cfg.bandwidth;

    std::vector<double> tput_dl(dep.cells.size(), 0.0), tput_ul(dep.cells.size(), 0.0);
    for (std::size_t u = 0; u < dep.ues.size(); ++u) {
        const int c = links.serving_cell(static_cast<int>(u));
        UeSample s;
        s.ue = static_cast<int>(u);
        s.drop = drop;
        s.dl_sinr_db = dl.sinr_db[u];
        s.ul_sinr_db = ul.sinr_db[u];
        s.dl_inr_db = dl.inr_db[u];
        s.ul_inr_db = ul.inr_db[u];
        s.served = c >= 0;
        bool counted = false;
        if (s.served) {
            const double n = static_cast<double>(links.served_ues[static_cast<std::size_t>(c)].size());
            s.dl_rate_bps = scale / n * sinr_to_rate(s.dl_sinr_db, cfg);
            s.ul_rate_bps = scale / n * sinr_to_rate(s.ul_sinr_db, cfg);
            tput_dl[static_cast<std::size_t>(c)] += s.dl_rate_bps;
            tput_ul[static_cast<std::size_t>(c)] += s.ul_rate_bps;
            counted = interior[static_cast<std::size_t>(dep.cells[static_cast<std::size_t>(c)].site)];
        } else {
            const UePosition& p = dep.ues[u];
            counted = p.x >= m && p.x <= cfg.area_width - m && p.y >= m && p.y <= cfg.area_height - m;
        }
        if (counted) r.ues.push_back(s);
    }
    for (std::size_t c = 0; c < dep.cells.size(); ++c) {
        if (!interior[static_cast<std::size_t>(dep.cells[c].site)]) continue;
        r.cell_tput_dl.push_back(tput_dl[c]);
        r.cell_tput_ul.push_back(tput_ul[c]);
    }
    return r;
}

RateReport schedule_and_report(std::vector<DropResult> drops, const NetworkConfig& cfg) {
    require(!drops.empty(), "at least one drop is required");
    std::sort(drops.begin(), drops.end(), [](const DropResult& a, const DropResult& b) { return a.drop < b.drop; });
    RateReport rep;
    rep.n_drops = static_cast<int>(drops.size());
    for (auto& d : drops) {
        rep.ues.insert(rep.ues.end(), d.ues.begin(), d.ues.end());
        rep.cell_tput_dl.insert(rep.cell_tput_dl.end(), d.cell_tput_dl.begin(), d.cell_tput_dl.end());
        rep.cell_tput_ul.insert(rep.cell_tput_ul.end(), d.cell_tput_ul.begin(), d.cell_tput_ul.end());
    }
    if (!rep.cell_tput_dl.empty()) {
        rep.mean_cell_tput_dl = mean(rep.cell_tput_dl);
        rep.mean_cell_tput_ul = mean(rep.cell_tput_ul);
    }
    const double denom = cfg.duplex_split * cfg.bandwidth;
    rep.spectral_eff_dl = denom > 0.0 ? rep.mean_cell_tput_dl / denom : 0.0;
    rep.spectral_eff_ul = denom > 0.0 ? rep.mean_cell_tput_ul / denom : 0.0;

    if (!rep.ues.empty()) {
        std::vector<double> dl, ul;
        std::size_t served = 0, below0 = 0, nd_dl = 0, nd_ul = 0;
        for (const auto& s : rep.ues) {
            dl.push_back(s.dl_rate_bps);
            ul.push_back(s.ul_rate_bps);
            if (s.dl_sinr_db < 0.0) ++below0;
            if (!s.served) continue;
            ++served;
            if (s.dl_inr_db < 0.0) ++nd_dl;
            if (s.ul_inr_db < 0.0) ++nd_ul;
        }
        rep.edge_rate_dl = quantile(dl, 0.05);
        rep.edge_rate_ul = quantile(ul, 0.05);
        const double n = static_cast<double>(rep.ues.size());
        rep.frac_dl_sinr_below_0db = static_cast<double>(below0) / n;
        rep.frac_unserved = static_cast<double>(rep.ues.size() - served) / n;
        if (served > 0) {
            rep.inr_noise_dominated_fraction_dl = static_cast<double>(nd_dl) / static_cast<double>(served);
            rep.inr_noise_dominated_fraction_ul = static_cast<double>(nd_ul) / static_cast<double>(served);
        }
    }
    return rep;
}

DropResult simulate_drop(const NetworkConfig& cfg, std::uint64_t seed, int drop) {
    Rng rng = Rng::stream({seed, static_cast<std::uint64_t>(drop)});
    const Deployment dep = drop_network(cfg, rng);
    const LinkTable links = realize_links(dep, cfg, rng);
    const InterferenceTerms terms = interference_terms(dep, links, cfg);
    const SinrResult dl = sinr_with_terms(dep, links, cfg, Direction::Downlink, terms);
    const SinrResult ul = sinr_with_terms(dep, links, cfg, Direction::Uplink, terms);
    return schedule_drop(dep, links, dl, ul, cfg, drop);
}

RateReport simulate(const NetworkConfig& cfg, std::uint64_t seed, int n_drops, int threads) {
    require(n_drops >= 1, "need at least one drop");
    cfg.validate();
    std::vector<DropResult> results(static_cast<std::size_t>(n_drops));
    std::atomic<int> next{0};
    std::exception_ptr error;
    std::mutex error_mutex;
    auto worker = [&] {
        try {
            for (int d = next++; d < n_drops; d = next++)
                results[static_cast<std::size_t>(d)] = simulate_drop(cfg, seed, d);
        } catch (...) {
            std::lock_guard lock(error_mutex);
            if (!error) error = std::current_exception();
            next = n_drops;  // stop the other workers early
        }
    };
    const int n_threads = std::clamp(threads, 1, n_drops);
    if (n_threads == 1) {
        worker();
    } else {
        std::vector<std::thread> pool;
        for (int i = 0; i < n_threads; ++i) pool.emplace_back(worker);
        for (auto& th : pool) th.join();
    }
    if (error) std::rethrow_exception(error);
    return schedule_and_report(std::move(results), cfg);
}

}  // namespace mmw

#include "mmw/experiments.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <filesystem>
#include <fstream>
#include <numbers>
#include <sstream>

#include "mmw/config.hpp"
#include "mmw/error.hpp"
#include "mmw/mimo.hpp"
#include "mmw/stats.hpp"
#include "text.hpp"

namespace mmw {

namespace {

using detail::fmt_num;

constexpr int kDefaultDrops = 20;

std::uint64_t require_seed(const ExperimentSpec& spec) {
    if (!spec.seed) fail(ErrorCode::InvalidArgument, "a seed is required");
    return *spec.seed;
}

bool want_csv(const ExperimentSpec& spec) {
    if (spec.format != "csv" && spec.format != "txt")
        fail(ErrorCode::InvalidArgument, "format must be csv or txt");
    return spec.format == "csv";
}

std::filesystem::path out_dir(const ExperimentSpec& spec) {
    std::filesystem::path dir(spec.out_dir);
    std::error_code ec;
    std::filesystem::create_directories(dir, ec);
    if (ec) fail(ErrorCode::Io, "cannot create output directory " + spec.out_dir + ": " + ec.message());
    return dir;
}

class OutFile {
public:
    OutFile(const std::filesystem::path& path, ExperimentOutcome& outcome) : path_(path.string()), out_(path) {
        if (!out_) fail(ErrorCode::Io, "cannot write " + path_);
        outcome.files.push_back(path_);
    }
    ~OutFile() noexcept(false) {
        out_.flush();
        if (!out_ && std::uncaught_exceptions() == 0) fail(ErrorCode::Io, "write failed: " + path_);
    }
    template <class T>
    OutFile& operator<<(const T& v) {
        out_ << v;
        return *this;
    }

private:
    std::string path_;
    std::ofstream out_;
};

std::string csv_row(std::initializer_list<double> values) {
    std::string s;
    bool first = true;
    for (double v : values) {
        if (!first) s += ',';
        s += fmt_num(v);
        first = false;
    }
    return s + '\n';
}

BandParameters resolve_spec_band(const ExperimentSpec& spec) {
    if (spec.band) return resolve_band(*spec.band);
    if (!spec.config_path.empty()) return load_config(spec.config_path).band;
    return band_preset("28ghz-nyc");
}

std::string kv(const std::string& key, double v) { return key + " = " + fmt_num(v) + "\n"; }
std::string kv(const std::string& key, const std::string& v) { return key + " = " + v + "\n"; }

std::string array_label(const ArrayGeometry& g) {
    return std::to_string(g.n_horizontal) + "x" + std::to_string(g.n_vertical);
}

// Conditional LOS draw for a link known to be usable.
LinkState usable_state(double d, const BandParameters& band, Rng& rng) {
    const auto p = link_state_probabilities(d, band);
    const double usable = p.p_los + p.p_nlos;
    return rng.uniform() * usable < p.p_los ? LinkState::Los : LinkState::Nlos;
}

}  // namespace

NetworkConfig resolve_network(const ExperimentSpec& spec) {
    NetworkConfig cfg;
    if (!spec.config_path.empty()) cfg = load_config(spec.config_path).network;
    if (spec.band) cfg.band = resolve_band(*spec.band);
    else if (spec.config_path.empty()) cfg.band = band_preset("28ghz-nyc");
    if (spec.ue_array) cfg.ue_array = parse_array(*spec.ue_array, cfg.ue_array);
    if (spec.bs_array) cfg.bs_array = parse_array(*spec.bs_array, cfg.bs_array);
    if (spec.d_shift) cfg.d_shift = *spec.d_shift;
    if (spec.no_los) cfg.suppress_los = true;
    if (spec.area) cfg.area_width = cfg.area_height = *spec.area;
    cfg.validate();
    return cfg;
}

ExperimentOutcome run_experiment(const ExperimentSpec& spec) {
    if (spec.command == "channel-stats") return run_channel_stats(spec);
    if (spec.command == "bf-analysis") return run_bf_analysis(spec);
    if (spec.command == "netsim") return run_netsim(spec);
    if (spec.command == "estimate") return run_estimation(spec);
    if (spec.command == "dump-channel") return run_channel_dump(spec);
    fail(ErrorCode::InvalidArgument, "unknown command '" + spec.command + "'");
}

// ---------------------------------------------------------------------------
// channel statistics

ExperimentOutcome run_channel_stats(const ExperimentSpec& spec) {
    const std::uint64_t seed = require_seed(spec);
    const BandParameters band = resolve_spec_band(spec);
    const int n = spec.samples.value_or(100000);
    require(n >= 1, "samples must be positive");
    const bool csv = want_csv(spec);
    const auto dir = out_dir(spec);
    ExperimentOutcome res;

    // path loss on a distance grid, equal draws per grid point and state
    std::vector<double> grid_d;
    for (double d = 10.0; d <= 400.0 + 1e-9; d += 10.0) grid_d.push_back(d);
    const int per_point = std::max(1, n / static_cast<int>(grid_d.size()));
    std::vector<PathLossSample> scatter;
    std::ostringstream pl_csv;
    pl_csv << "distance_m,in_validity_range,nlos_model_db,los_model_db,umi_2p5ghz_db,nlos_empirical_mean_db,"
              "nlos_empirical_std_db,los_empirical_mean_db,los_empirical_std_db\n";
    for (std::size_t i = 0; i < grid_d.size(); ++i) {
        const double d = grid_d[i];
        std::vector<double> nl, lo;
        Rng rng = Rng::stream({seed, 1, i});
        for (int j = 0; j < per_point; ++j) {
            nl.push_back(sample_path_loss(d, LinkState::Nlos, band, rng));
            lo.push_back(sample_path_loss(d, LinkState::Los, band, rng));
            if (in_validity_range(d)) {
                scatter.push_back({d, nl.back(), LinkState::Nlos});
                scatter.push_back({d, lo.back(), LinkState::Los});
            }
        }
        pl_csv << csv_row({d, in_validity_range(d) ? 1.0 : 0.0, median_path_loss(d, LinkState::Nlos, band),
                           median_path_loss(d, LinkState::Los, band), umi_path_loss(d, 2.5), mean(nl), stddev(nl),
                           mean(lo), stddev(lo)});
    }
    const auto fit_n = fit_path_loss(scatter, LinkState::Nlos);
    const auto fit_l = fit_path_loss(scatter, LinkState::Los);

    // cluster counts, fractions and spreads from full link draws
    std::vector<int> counts;
    std::vector<double> all_fractions, weak_k2, sp[4];
    for (int i = 0; i < n; ++i) {
        Rng rng = Rng::stream({seed, 2, static_cast<std::uint64_t>(i)});
        const int k = sample_num_clusters(band, rng);
        counts.push_back(k);
        const auto f = sample_cluster_power_fractions(k, band, rng);
        all_fractions.insert(all_fractions.end(), f.begin(), f.end());
        const auto g = sample_cluster_geometry(k, LinkState::Nlos, 0.0, band, rng);
        for (const auto& c : g) {
            sp[0].push_back(rad2deg(c.spread_aod_az));
            sp[1].push_back(rad2deg(c.spread_aod_el));
            sp[2].push_back(rad2deg(c.spread_aoa_az));
            sp[3].push_back(rad2deg(c.spread_aoa_el));
        }
        const auto f2 = sample_cluster_power_fractions(2, band, rng);
        weak_k2.push_back(std::min(f2[0], f2[1]));
    }

    std::ostringstream k_csv;
    k_csv << "k,model_pmf,empirical_pmf,count\n";
    const int kmax = *std::max_element(counts.begin(), counts.end());
    for (int k = 1; k <= std::max(kmax, 8); ++k) {
        // P(K = k) for K = max(Poisson, 1)
        double pk = std::exp(-band.lambda_k) * std::pow(band.lambda_k, k) / std::tgamma(k + 1.0);
        if (k == 1) pk += std::exp(-band.lambda_k);
        const auto c = std::count(counts.begin(), counts.end(), k);
        k_csv << k << ',' << fmt_num(pk) << ',' << fmt_num(static_cast<double>(c) / n) << ',' << c << '\n';
    }

    // weak-fraction model CDF for K = 2 from the ratio density
    std::sort(all_fractions.begin(), all_fractions.end());
    std::sort(weak_k2.begin(), weak_k2.end());
    std::ostringstream f_csv;
    f_csv << "fraction,empirical_cdf_all,empirical_cdf_weak_k2,model_cdf_weak_k2\n";
    {
        // P(w <= t) = P(|X| >= x(t)), X the dB ratio; integrate the density
        const double dx = 0.02;
        std::vector<double> xs, tail;
        double acc = 0.0;
        const double xmax = 120.0;
        std::vector<double> dens;
        for (double x = 0.0; x <= xmax + 1e-9; x += dx) {
            xs.push_back(x);
            dens.push_back(band.zeta > 0.0 ? 2.0 * cluster_ratio_density(x, band.r_tau, band.zeta) : 0.0);
        }
        tail.assign(xs.size(), 0.0);
        for (std::size_t i = xs.size() - 1; i-- > 0;) {
            acc += 0.5 * (dens[i] + dens[i + 1]) * dx;
            tail[i] = acc;
        }
        for (int i = 0; i <= 100; ++i) {
            const double t = i / 100.0;
            double model = 1.0;
            if (t <= 0.0) {
                model = 0.0;
            } else if (t < 0.5) {
                const double x = 10.0 * std::log10((1.0 - t) / t);
                const auto j = std::min<std::size_t>(static_cast<std::size_t>(x / dx), xs.size() - 1);
                model = band.zeta > 0.0 ? tail[j] : 0.0;
            }
            f_csv << csv_row({t, ecdf_sorted(all_fractions, t), ecdf_sorted(weak_k2, t), model});
        }
    }

    const double means[4] = {band.bs_az_spread_mean, band.bs_el_spread_mean, band.ue_az_spread_mean,
                             band.ue_el_spread_mean};
    for (auto& v : sp) std::sort(v.begin(), v.end());
    std::ostringstream s_csv;
    s_csv << "spread_deg,bs_az_empirical,bs_az_model,bs_el_empirical,bs_el_model,ue_az_empirical,ue_az_model,"
             "ue_el_empirical,ue_el_model\n";
    for (int i = 0; i <= 100; ++i) {
        const double x = i;
        std::string row = fmt_num(x);
        for (int k = 0; k < 4; ++k) {
            const double model = means[k] > 0.0 ? 1.0 - std::exp(-x / means[k]) : 1.0;
            row += ',' + fmt_num(ecdf_sorted(sp[k], x)) + ',' + fmt_num(model);
        }
        s_csv << row << '\n';
    }

    std::ostringstream p_csv;
    p_csv << "distance_m,p_out,p_los,p_nlos,empirical_out,empirical_los,empirical_nlos\n";
    std::vector<double> grid_s;
    for (double d = 0.0; d <= 400.0 + 1e-9; d += 5.0) grid_s.push_back(d);
    const int per_state = std::max(1, n / static_cast<int>(grid_s.size()));
    for (std::size_t i = 0; i < grid_s.size(); ++i) {
        const double d = grid_s[i];
        const auto p = link_state_probabilities(d, band);
        int c[3] = {0, 0, 0};
        Rng rng = Rng::stream({seed, 3, i});
        for (int j = 0; j < per_state; ++j) ++c[static_cast<int>(sample_link_state(d, band, rng))];
        p_csv << csv_row({d, p.p_out, p.p_los, p.p_nlos, static_cast<double>(c[2]) / per_state,
                          static_cast<double>(c[0]) / per_state, static_cast<double>(c[1]) / per_state});
    }

    std::ostringstream sum;
    sum << "[ChannelStats]\n" << kv("band", band.name) << kv("samples", n) << kv("seed", static_cast<double>(seed));
    sum << kv("nlos_fit_alpha", fit_n.alpha) << kv("nlos_fit_beta", fit_n.beta) << kv("nlos_fit_sigma", fit_n.sigma);
    sum << kv("los_fit_alpha", fit_l.alpha) << kv("los_fit_beta", fit_l.beta) << kv("los_fit_sigma", fit_l.sigma);
    sum << kv("mean_cluster_count", fit_cluster_count(counts));
    sum << kv("median_weak_fraction_k2", quantile_sorted(weak_k2, 0.5));
    sum << kv("mean_bs_az_spread_deg", mean(sp[0])) << kv("mean_bs_el_spread_deg", mean(sp[1]))
        << kv("mean_ue_az_spread_deg", mean(sp[2])) << kv("mean_ue_el_spread_deg", mean(sp[3]));
    sum << kv("outage_onset_m", outage_onset_distance(band));
    sum << kv("nlos_minus_umi_at_100m_db", median_path_loss(100.0, LinkState::Nlos, band) - umi_path_loss(100.0, 2.5));

    if (csv) {
        OutFile(dir / "path_loss.csv", res) << pl_csv.str();
        OutFile(dir / "cluster_count.csv", res) << k_csv.str();
        OutFile(dir / "power_fraction.csv", res) << f_csv.str();
        OutFile(dir / "angular_spread.csv", res) << s_csv.str();
        OutFile(dir / "state_probability.csv", res) << p_csv.str();
    }
    OutFile(dir / "channel_stats.txt", res) << sum.str();
    res.summary = sum.str();
    return res;
}

// ---------------------------------------------------------------------------
// beamforming analysis

std::vector<BfSample> bf_statistics(const BandParameters& band, const ArrayGeometry& bs, const ArrayGeometry& ue,
                                    int n, std::uint64_t seed, int subpaths_per_cluster) {
    require(n >= 1, "need at least one link");
    std::vector<BfSample> out;
    out.reserve(static_cast<std::size_t>(n));
    const double n_bs = bs.size(), n_ue = ue.size();
    for (int i = 0; i < n; ++i) {
        Rng rng = Rng::stream({seed, 0xBF, static_cast<std::uint64_t>(i)});
        const double d = rng.uniform(kValidityMin, kValidityMax);
        const double el = los_elevation(d, 10.0, 2.0);
        LinkOverrides ov;
        ov.force_state = usable_state(d, band, rng);
        const auto serving = sample_link(d, el, band, rng, ov);
        ov.force_state = usable_state(d, band, rng);
        const auto other = sample_link(d, el, band, rng, ov);
        const auto s1 = synthesize_subpaths(serving, subpaths_per_cluster, rng);
        const auto s2 = synthesize_subpaths(other, subpaths_per_cluster, rng);

        const CMatrix a_rx = steering_factor(s1, ue, true), a_tx = steering_factor(s1, bs, false);
        const CMatrix b_rx = steering_factor(s2, ue, true), b_tx = steering_factor(s2, bs, false);
        const auto e_rx = eigenvalues_of_factor(a_rx), e_tx = eigenvalues_of_factor(a_tx);
        const double tr1 = a_rx.squaredNorm(), tr2 = b_rx.squaredNorm();
        const auto v_rx = dominant_eigen_of_factor(a_rx).vector;
        const auto v_tx = dominant_eigen_of_factor(a_tx).vector;

        BfSample b;
        b.serving_rx = 10.0 * std::log10(e_rx(0) / (tr1 / n_ue));
        b.serving_tx = 10.0 * std::log10(e_tx(0) / (tr1 / n_bs));
        b.total = b.serving_rx + b.serving_tx;
        b.interfering_rx = 10.0 * std::log10(factor_quadratic(b_rx, v_rx) / (tr2 / n_ue));
        b.interfering_tx = 10.0 * std::log10(factor_quadratic(b_tx, v_tx) / (tr2 / n_bs));
        for (int r = 1; r <= 4; ++r)
            b.phi[r - 1] = r <= std::min(ue.size(), bs.size()) ? power_fraction_from_eigenvalues(e_rx, e_tx, r) : 1.0;
        out.push_back(b);
    }
    return out;
}

ExperimentOutcome run_bf_analysis(const ExperimentSpec& spec) {
    const std::uint64_t seed = require_seed(spec);
    const NetworkConfig cfg = resolve_network(spec);
    const int n = spec.samples.value_or(10000);
    const bool csv = want_csv(spec);
    const auto dir = out_dir(spec);
    ExperimentOutcome res;

    const auto samples = bf_statistics(cfg.band, cfg.bs_array, cfg.ue_array, n, seed, cfg.subpaths_per_cluster);
    std::vector<double> col[10];
    for (const auto& s : samples) {
        col[0].push_back(s.serving_rx);
        col[1].push_back(s.serving_tx);
        col[2].push_back(s.interfering_rx);
        col[3].push_back(s.interfering_tx);
        col[4].push_back(s.total);
        for (int r = 0; r < 4; ++r) col[5 + r].push_back(s.phi[r]);
        col[9].push_back(s.serving_tx - s.interfering_tx);
    }
    std::vector<std::vector<double>> grids;
    for (auto& c : col) grids.push_back(percentile_grid(c));

    if (csv) {
        OutFile f(dir / "bf_gain_cdf.csv", res);
        f << "percentile,serving_rx_db,serving_tx_db,interfering_rx_db,interfering_tx_db,serving_total_db\n";
        for (int p = 0; p <= 100; ++p)
            f << csv_row({static_cast<double>(p), grids[0][p], grids[1][p], grids[2][p], grids[3][p], grids[4][p]});
        OutFile g(dir / "phi_cdf.csv", res);
        g << "percentile,phi_1,phi_2,phi_3,phi_4\n";
        for (int p = 0; p <= 100; ++p)
            g << csv_row({static_cast<double>(p), grids[5][p], grids[6][p], grids[7][p], grids[8][p]});
    }
    std::ostringstream sum;
    sum << "[BfAnalysis]\n" << kv("band", cfg.band.name) << kv("bs_array", array_label(cfg.bs_array))
        << kv("ue_array", array_label(cfg.ue_array)) << kv("links", n) << kv("seed", static_cast<double>(seed));
    sum << kv("max_gain_rx_db", 10.0 * std::log10(cfg.ue_array.size()))
        << kv("max_gain_tx_db", 10.0 * std::log10(cfg.bs_array.size()));
    sum << kv("median_serving_rx_db", grids[0][50]) << kv("median_serving_tx_db", grids[1][50])
        << kv("median_interfering_rx_db", grids[2][50]) << kv("median_interfering_tx_db", grids[3][50])
        << kv("median_total_db", grids[4][50]);
    sum << kv("median_gap_rx_db", grids[0][50] - grids[2][50]) << kv("median_gap_tx_db", grids[1][50] - grids[3][50]);
    for (int r = 0; r < 4; ++r) sum << kv("median_phi_" + std::to_string(r + 1), grids[5 + r][50]);
    OutFile(dir / "bf_analysis.txt", res) << sum.str();
    res.summary = sum.str();
    return res;
}

// ---------------------------------------------------------------------------
// network simulation

std::vector<Table3Row> table3_rows(const NetworkConfig& base) {
    std::vector<Table3Row> rows;
    auto add = [&](const std::string& label, const char* band, int ue, double d_shift, bool no_los,
                   std::initializer_list<double> cited) {
        Table3Row r;
        r.label = label;
        r.cfg = base;
        r.cfg.band = band_preset(band);
        r.cfg.ue_array.n_horizontal = r.cfg.ue_array.n_vertical = ue;
        r.cfg.d_shift = d_shift;
        r.cfg.suppress_los = no_los;
        std::copy(cited.begin(), cited.end(), r.reference);
        rows.push_back(r);
    };
    add("28 GHz 8x8 hybrid", "28ghz-nyc", 8, 0, false, {3.34, 3.16, 1668, 1580, 52.28, 34.78});
    add("28 GHz 4x4 hybrid", "28ghz-nyc", 4, 0, false, {3.03, 2.94, 1514, 1468, 28.47, 19.90});
    add("28 GHz 4x4 d_shift=50m", "28ghz-nyc", 4, 50, false, {2.90, 2.91, 1450, 1454, 17.62, 17.49});
    add("28 GHz 4x4 d_shift=75m", "28ghz-nyc", 4, 75, false, {2.58, 2.60, 1289, 1298, 0.54, 0.09});
    add("28 GHz 4x4 no LOS d_shift=50m", "28ghz-nyc", 4, 50, true, {2.16, 2.34, 1081, 1168, 11.14, 15.19});
    add("73 GHz 4x4 hybrid", "73ghz-nyc", 4, 0, false, {2.58, 2.58, 1288, 1291, 10.02, 8.92});
    add("73 GHz 8x8 hybrid", "73ghz-nyc", 8, 0, false, {2.93, 2.88, 1465, 1439, 24.08, 19.76});
    return rows;
}

namespace {

std::string netsim_summary(const NetworkConfig& cfg, const RateReport& r, std::uint64_t seed) {
    std::ostringstream s;
    s << "[NetsimSummary]\n" << kv("band", cfg.band.name) << kv("bs_array", array_label(cfg.bs_array))
      << kv("ue_array", array_label(cfg.ue_array)) << kv("d_shift_m", cfg.d_shift)
      << kv("suppress_los", cfg.suppress_los ? "true" : "false") << kv("area_m", cfg.area_width)
      << kv("drops", r.n_drops) << kv("seed", static_cast<double>(seed));
    s << kv("spectral_eff_dl_bps_hz", r.spectral_eff_dl) << kv("spectral_eff_ul_bps_hz", r.spectral_eff_ul)
      << kv("cell_tput_dl_mbps", r.mean_cell_tput_dl / 1e6) << kv("cell_tput_ul_mbps", r.mean_cell_tput_ul / 1e6)
      << kv("edge_rate_dl_mbps", r.edge_rate_dl / 1e6) << kv("edge_rate_ul_mbps", r.edge_rate_ul / 1e6)
      << kv("frac_dl_sinr_below_0db", r.frac_dl_sinr_below_0db)
      << kv("noise_dominated_fraction_dl", r.inr_noise_dominated_fraction_dl)
      << kv("noise_dominated_fraction_ul", r.inr_noise_dominated_fraction_ul) << kv("frac_unserved", r.frac_unserved)
      << kv("ue_samples", static_cast<double>(r.ues.size()))
      << kv("interior_cells", static_cast<double>(r.cell_tput_dl.size()));
    return s.str();
}

void write_netsim_csv(const std::filesystem::path& dir, const RateReport& r, ExperimentOutcome& res) {
    {
        OutFile f(dir / "ue_samples.csv", res);
        f << "ue_id,drop,dl_sinr_db,ul_sinr_db,dl_rate_bps,ul_rate_bps,served_flag\n";
        for (const auto& u : r.ues)
            f << u.ue << ',' << u.drop << ',' << fmt_num(u.dl_sinr_db) << ',' << fmt_num(u.ul_sinr_db) << ','
              << fmt_num(u.dl_rate_bps) << ',' << fmt_num(u.ul_rate_bps) << ',' << (u.served ? 1 : 0) << '\n';
    }
    std::vector<double> c[4];
    for (const auto& u : r.ues) {
        c[0].push_back(u.dl_sinr_db);
        c[1].push_back(u.ul_sinr_db);
        c[2].push_back(u.dl_rate_bps / 1e6);
        c[3].push_back(u.ul_rate_bps / 1e6);
    }
    std::vector<std::vector<double>> g;
    for (auto& v : c) g.push_back(percentile_grid(v));
    OutFile f(dir / "cdf.csv", res);
    f << "percentile,dl_sinr_db,ul_sinr_db,dl_rate_mbps,ul_rate_mbps\n";
    for (int p = 0; p <= 100; ++p) f << csv_row({static_cast<double>(p), g[0][p], g[1][p], g[2][p], g[3][p]});
}

}  // namespace

ExperimentOutcome run_netsim(const ExperimentSpec& spec) {
    const std::uint64_t seed = require_seed(spec);
    const NetworkConfig cfg = resolve_network(spec);
    const int drops = spec.drops.value_or(kDefaultDrops);
    const bool csv = want_csv(spec);
    const auto dir = out_dir(spec);
    ExperimentOutcome res;

    if (!spec.table3) {
        const RateReport r = simulate(cfg, seed, drops, spec.threads);
        if (csv) write_netsim_csv(dir, r, res);
        res.summary = netsim_summary(cfg, r, seed);
        OutFile(dir / "summary.txt", res) << res.summary;
        return res;
    }

    const auto rows = table3_rows(cfg);
    std::ostringstream table, tcsv;
    char line[256];
    std::snprintf(line, sizeof line, "%-31s %-6s %13s %13s %15s %15s %13s %13s\n", "configuration", "source",
                  "SE DL", "SE UL", "tput DL", "tput UL", "edge DL", "edge UL");
    table << line;
    tcsv << "configuration,source,se_dl_bps_hz,se_ul_bps_hz,tput_dl_mbps,tput_ul_mbps,edge_dl_mbps,edge_ul_mbps\n";
    auto emit = [&](const std::string& label, const char* source, const double* v) {
        std::snprintf(line, sizeof line, "%-31s %-6s %13.2f %13.2f %15.0f %15.0f %13.2f %13.2f\n", label.c_str(),
                      source, v[0], v[1], v[2], v[3], v[4], v[5]);
        table << line;
        tcsv << label << ',' << source;
        for (int i = 0; i < 6; ++i) tcsv << ',' << fmt_num(v[i]);
        tcsv << '\n';
    };
    for (std::size_t i = 0; i < rows.size(); ++i) {
        const RateReport r = simulate(rows[i].cfg, seed, drops, spec.threads);
        const double model[6] = {r.spectral_eff_dl,     r.spectral_eff_ul,   r.mean_cell_tput_dl / 1e6,
                                 r.mean_cell_tput_ul / 1e6, r.edge_rate_dl / 1e6, r.edge_rate_ul / 1e6};
        emit(rows[i].label, "model", model);
        emit(rows[i].label, "cited", rows[i].reference);
        if (csv) {
            const auto sub = dir / ("table3_row" + std::to_string(i + 1));
            std::filesystem::create_directories(sub);
            write_netsim_csv(sub, r, res);
            OutFile(sub / "summary.txt", res) << netsim_summary(rows[i].cfg, r, seed);
        }
    }
    emit("2.5 GHz LTE 20+20 MHz FDD", "cited", kLteReference);
    table << "spectral efficiency in bps/Hz, throughput in Mbps/cell, 5% edge rate in Mbps/UE; drops = " << drops
          << ", seed = " << seed << "\n";
    if (csv) OutFile(dir / "table3.csv", res) << tcsv.str();
    OutFile(dir / "table3.txt", res) << table.str();
    res.summary = table.str();
    return res;
}

// ---------------------------------------------------------------------------
// estimation

namespace {

const double kFourTx[4] = {20.0, 110.0, 200.0, 290.0};
const double kFourRx[4] = {60.0, 150.0, 240.0, 330.0};

}  // namespace

std::vector<std::pair<double, double>> four_cluster_truth() {
    std::vector<std::pair<double, double>> out;
    for (int k = 0; k < 4; ++k) out.emplace_back(kFourTx[k], kFourRx[k]);
    return out;
}

AngularPowerMap four_cluster_map(std::uint64_t seed) {
    LinkRealization link;
    link.state = LinkState::Nlos;
    link.distance = 100.0;
    link.omni_path_loss = 100.0;
    const double fractions[4] = {0.4, 0.3, 0.2, 0.1};
    for (int k = 0; k < 4; ++k) {
        PathCluster c;
        c.power_fraction = fractions[k];
        c.aod_az = deg2rad(kFourTx[k]);
        c.aoa_az = deg2rad(kFourRx[k]);
        c.aod_el = deg2rad(-5.0);
        c.aoa_el = deg2rad(5.0);
        c.spread_aod_az = deg2rad(6.0);
        c.spread_aoa_az = deg2rad(8.0);
        c.spread_aoa_el = deg2rad(3.0);
        link.clusters.push_back(c);
    }
    Rng rng = Rng::stream({seed, 0xF3});
    const auto sub = synthesize_subpaths(link, 20, rng);
    return map_from_subpaths(sub, 10.0, 10.0, 30.0);
}

SelfTestReport estimation_self_test(const BandParameters& truth, int locations, std::uint64_t seed) {
    require(locations >= 10, "self-test needs at least ten locations");
    std::vector<PathLossSample> pl;
    std::vector<LinkStateSample> states;
    std::vector<int> counts;
    std::vector<double> weak, sp[4];
    for (int i = 0; i < locations; ++i) {
        Rng rng = Rng::stream({seed, 0xE5, static_cast<std::uint64_t>(i)});
        // log-uniform spacing keeps most locations short of the outage
        // region and widens the log-distance spread of the path loss fit
        const double d = 30.0 * std::pow(14.0, rng.uniform());
        const auto link = sample_link(d, los_elevation(d, 10.0, 2.0), truth, rng);
        states.push_back({d, link.state});
        // every location contributes a two-cluster split for the power fit
        const auto f2 = sample_cluster_power_fractions(2, truth, rng);
        weak.push_back(std::min(f2[0], f2[1]));
        if (link.outage()) continue;
        pl.push_back({d, link.omni_path_loss, link.state});
        counts.push_back(static_cast<int>(link.clusters.size()));
        for (const auto& c : link.clusters) {
            sp[0].push_back(rad2deg(c.spread_aod_az));
            sp[1].push_back(rad2deg(c.spread_aod_el));
            sp[2].push_back(rad2deg(c.spread_aoa_az));
            sp[3].push_back(rad2deg(c.spread_aoa_el));
        }
    }

    SelfTestReport rep;
    rep.fitted = truth;
    rep.fitted.name = truth.name + "-fitted";
    auto check = [&](const std::string& name, double t, double f, double tol) {
        FitCheck c{name, t, f, tol, std::abs(f - t) <= tol};
        rep.pass = rep.pass && c.pass;
        rep.checks.push_back(c);
    };

    const auto fn = fit_path_loss(pl, LinkState::Nlos);
    const auto fl = fit_path_loss(pl, LinkState::Los);
    check("nlos_alpha", truth.nlos_alpha, fn.alpha, 2.0);
    check("nlos_beta", truth.nlos_beta, fn.beta, 0.15);
    check("nlos_sigma", truth.nlos_sigma, fn.sigma, 1.0);
    check("los_alpha", truth.los_alpha, fl.alpha, 2.0);
    check("los_beta", truth.los_beta, fl.beta, 0.15);
    check("los_sigma", truth.los_sigma, fl.sigma, 1.0);
    rep.fitted.nlos_alpha = fn.alpha;
    rep.fitted.nlos_beta = fn.beta;
    rep.fitted.nlos_sigma = fn.sigma;
    rep.fitted.los_alpha = fl.alpha;
    rep.fitted.los_beta = fl.beta;
    rep.fitted.los_sigma = fl.sigma;

    const auto ls = fit_link_state(states);
    check("a_out", truth.a_out, ls.a_out, 0.1 * truth.a_out);
    check("b_out", truth.b_out, ls.b_out, 0.1 * truth.b_out);
    check("a_los", truth.a_los, ls.a_los, 0.1 * truth.a_los);
    rep.fitted.a_out = ls.a_out;
    rep.fitted.b_out = ls.b_out;
    rep.fitted.a_los = ls.a_los;

    const auto cp = fit_cluster_power(weak);
    check("r_tau", truth.r_tau, cp.r_tau, 0.3);
    check("zeta", truth.zeta, cp.zeta, 0.5);
    rep.fitted.r_tau = cp.r_tau;
    rep.fitted.zeta = cp.zeta;

    // The empirical-mean estimator targets E[max(Poisson, 1)], not lambda.
    const double lam = truth.lambda_k;
    const double censored_mean = lam + std::exp(-lam);
    const double censored_var = lam + std::exp(-lam) * (1.0 - 2.0 * lam) - std::exp(-2.0 * lam);
    const double k_fit = fit_cluster_count(counts);
    check("lambda_k (censored mean)", censored_mean, k_fit,
          4.0 * std::sqrt(std::max(censored_var, 1e-12) / static_cast<double>(counts.size())));
    rep.fitted.lambda_k = k_fit;

    const char* names[4] = {"bs_az_spread_mean", "bs_el_spread_mean", "ue_az_spread_mean", "ue_el_spread_mean"};
    double* targets[4] = {&rep.fitted.bs_az_spread_mean, &rep.fitted.bs_el_spread_mean,
                          &rep.fitted.ue_az_spread_mean, &rep.fitted.ue_el_spread_mean};
    const double truths[4] = {truth.bs_az_spread_mean, truth.bs_el_spread_mean, truth.ue_az_spread_mean,
                              truth.ue_el_spread_mean};
    for (int k = 0; k < 4; ++k) {
        const double m = fit_angular_spread(sp[k]);
        // exponential: standard error of the mean is mean / sqrt(n)
        check(names[k], truths[k], m, 4.0 * truths[k] / std::sqrt(static_cast<double>(sp[k].size())) + 1e-12);
        *targets[k] = m;
    }

    const auto map = four_cluster_map(seed);
    const auto clusters = detect_clusters(map, {.seed = seed});
    check("detected_clusters", 4.0, static_cast<double>(clusters.size()), 0.0);
    if (clusters.size() == 4) {
        double worst = 0.0;
        for (const auto& [tx, rx] : four_cluster_truth()) {
            double best = 1e9;
            for (const auto& c : clusters)
                best = std::min(best, std::max(std::abs(std::remainder(c.center[0] - tx, 360.0)),
                                               std::abs(std::remainder(c.center[2] - rx, 360.0))));
            worst = std::max(worst, best);
        }
        check("cluster_center_error_deg", 0.0, worst, 10.0);
    }
    return rep;
}

ExperimentOutcome run_estimation(const ExperimentSpec& spec) {
    const std::uint64_t seed = require_seed(spec);
    const bool csv = want_csv(spec);
    ExperimentOutcome res;
    BandParameters base = resolve_spec_band(spec);

    if (spec.self_test) {
        const auto dir = out_dir(spec);
        const int n = spec.samples.value_or(10000);
        const auto rep = estimation_self_test(base, n, seed);
        std::ostringstream table;
        table << "parameter,truth,fitted,delta,tolerance,pass\n";
        for (const auto& c : rep.checks)
            table << c.parameter << ',' << fmt_num(c.truth) << ',' << fmt_num(c.fitted) << ','
                  << fmt_num(c.fitted - c.truth) << ',' << fmt_num(c.tolerance) << ',' << (c.pass ? 1 : 0) << '\n';
        if (csv) OutFile(dir / "self_test.csv", res) << table.str();
        OutFile(dir / "fitted_card.txt", res) << band_to_text(rep.fitted);
        std::ostringstream sum;
        sum << "[EstimationSelfTest]\n" << kv("band", base.name) << kv("locations", n)
            << kv("seed", static_cast<double>(seed)) << kv("pass", rep.pass ? "true" : "false");
        for (const auto& c : rep.checks)
            sum << c.parameter << " = " << fmt_num(c.fitted) << "  ; truth " << fmt_num(c.truth) << ", tolerance "
                << fmt_num(c.tolerance) << (c.pass ? "" : "  FAIL") << '\n';
        OutFile(dir / "estimation.txt", res) << sum.str();
        res.summary = sum.str();
        res.status = rep.pass ? 0 : 1;
        return res;
    }

    if (spec.map_csv.empty() && spec.pathloss_csv.empty())
        fail(ErrorCode::InvalidArgument, "estimate needs --self-test, --map or --pathloss");
    // parse every input before creating outputs
    AngularPowerMap map;
    std::vector<PathLossSample> samples;
    if (!spec.map_csv.empty()) map = read_power_map_csv(spec.map_csv);
    if (!spec.pathloss_csv.empty()) samples = read_path_loss_csv(spec.pathloss_csv);
    const auto dir = out_dir(spec);

    std::ostringstream sum;
    sum << "[Estimation]\n";
    BandParameters fitted = base;
    fitted.name = base.name + "-fitted";
    if (!spec.map_csv.empty()) {
        const auto clusters = detect_clusters(map, {.seed = seed});
        sum << kv("map", spec.map_csv) << kv("detected_clusters", static_cast<double>(clusters.size()));
        std::ostringstream c;
        c << "cluster,tx_az_deg,tx_el_deg,rx_az_deg,rx_el_deg,spread_tx_az_deg,spread_tx_el_deg,spread_rx_az_deg,"
             "spread_rx_el_deg,power_dbm,power_fraction\n";
        for (std::size_t i = 0; i < clusters.size(); ++i) {
            const auto& e = clusters[i];
            c << i << ',' << fmt_num(e.center[0]) << ',' << fmt_num(e.center[1]) << ',' << fmt_num(e.center[2]) << ','
              << fmt_num(e.center[3]) << ',' << fmt_num(e.spread[0]) << ',' << fmt_num(e.spread[1]) << ','
              << fmt_num(e.spread[2]) << ',' << fmt_num(e.spread[3]) << ',' << fmt_num(10.0 * std::log10(e.power_mw))
              << ',' << fmt_num(e.power_fraction) << '\n';
        }
        if (csv) OutFile(dir / "clusters.csv", res) << c.str();
    }
    if (!spec.pathloss_csv.empty()) {
        sum << kv("pathloss", spec.pathloss_csv) << kv("samples", static_cast<double>(samples.size()));
        auto count = [&](LinkState s) {
            return std::count_if(samples.begin(), samples.end(), [s](const PathLossSample& p) { return p.state == s; });
        };
        if (count(LinkState::Nlos) >= 2) {
            const auto f = fit_path_loss(samples, LinkState::Nlos);
            fitted.nlos_alpha = f.alpha;
            fitted.nlos_beta = f.beta;
            fitted.nlos_sigma = f.sigma;
            sum << kv("nlos_alpha", f.alpha) << kv("nlos_beta", f.beta) << kv("nlos_sigma", f.sigma);
        }
        if (count(LinkState::Los) >= 2) {
            const auto f = fit_path_loss(samples, LinkState::Los);
            fitted.los_alpha = f.alpha;
            fitted.los_beta = f.beta;
            fitted.los_sigma = f.sigma;
            sum << kv("los_alpha", f.alpha) << kv("los_beta", f.beta) << kv("los_sigma", f.sigma);
        }
        std::vector<LinkStateSample> st;
        for (const auto& s : samples) st.push_back({s.distance, s.state});
        if (st.size() >= 3) {
            const auto ls = fit_link_state(st);
            fitted.a_out = ls.a_out;
            fitted.b_out = ls.b_out;
            fitted.a_los = ls.a_los;
            sum << kv("a_out", ls.a_out) << kv("b_out", ls.b_out) << kv("a_los", ls.a_los)
                << kv("link_state_boundary", ls.boundary ? "true" : "false");
        }
    }
    OutFile(dir / "fitted_card.txt", res) << band_to_text(fitted);
    OutFile(dir / "estimation.txt", res) << sum.str();
    res.summary = sum.str();
    return res;
}

// ---------------------------------------------------------------------------
// channel dump

ExperimentOutcome run_channel_dump(const ExperimentSpec& spec) {
    const std::uint64_t seed = require_seed(spec);
    const NetworkConfig cfg = resolve_network(spec);
    const double d = spec.distance.value_or(100.0);
    require(d > 0.0, "distance must be positive");
    const bool csv = want_csv(spec);
    const auto dir = out_dir(spec);
    ExperimentOutcome res;

    Rng rng = Rng::stream({seed, 0xD0});
    LinkOverrides ov;
    ov.force_state = usable_state(d, cfg.band, rng);
    const auto link = sample_link(d, los_elevation(d, cfg.bs_height, cfg.ue_height), cfg.band, rng, ov);
    const auto sub = synthesize_subpaths(link, cfg.subpaths_per_cluster, rng);
    const auto h = channel_matrix(sub, cfg.ue_array, cfg.bs_array, 0.0, 0.0, rng);
    const auto cov = covariances(sub, cfg.ue_array, cfg.bs_array);

    const std::pair<const char*, const CMatrix*> mats[] = {{"h", &h.h}, {"q_rx", &cov.q_rx}, {"q_tx", &cov.q_tx}};
    for (const auto& [name, m] : mats) {
        const auto bin = dir / (std::string(name) + ".bin");
        write_matrix_binary(bin.string(), *m);
        res.files.push_back(bin.string());
        if (csv) {
            const auto c = dir / (std::string(name) + ".csv");
            write_matrix_csv(c.string(), *m);
            res.files.push_back(c.string());
        }
    }
    const auto g = bf_gain_long_term(cov);
    std::ostringstream sum;
    sum << "[ChannelDump]\n" << kv("band", cfg.band.name) << kv("distance_m", d)
        << kv("state", std::string(to_string(link.state))) << kv("omni_path_loss_db", link.omni_path_loss)
        << kv("clusters", static_cast<double>(link.clusters.size())) << kv("n_rx", cfg.ue_array.size())
        << kv("n_tx", cfg.bs_array.size()) << kv("bf_gain_rx_db", g.gain_rx) << kv("bf_gain_tx_db", g.gain_tx)
        << kv("bf_gain_instantaneous_db", bf_gain_instantaneous(h))
        << kv("layout", "row-major little-endian float64, interleaved re/im, no header");
    OutFile(dir / "channel.txt", res) << sum.str();
    res.summary = sum.str();
    return res;
}

}  // namespace mmw

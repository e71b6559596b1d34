#pragma once

#include <cstdint>
#include <optional>
#include <vector>

#include "mmw/channel_model.hpp"
#include "mmw/mimo.hpp"
#include "mmw/random.hpp"

namespace mmw {

struct NetworkConfig {
    double area_width = 2000.0;   // m
    double area_height = 2000.0;  // m
    double isd = 200.0;           // m
    int sectors_per_site = 3;
    int ues_per_cell = 10;
    double dl_tx_power = 30.0;     // dBm
    double ul_tx_power = 20.0;     // dBm
    double bs_noise_figure = 5.0;  // dB
    double ue_noise_figure = 7.0;  // dB
    double bandwidth = 1e9;        // Hz
    double overhead = 0.2;
    double duplex_split = 0.5;
    double delta = 3.0;     // dB
    double rho_max = 4.8;   // bps/Hz
    ArrayGeometry bs_array{8, 8, 0.5, 0.0, 0.17453292519943295};  // 10 degree downtilt
    ArrayGeometry ue_array{4, 4, 0.5, 0.0, 0.0};
    BandParameters band;
    double d_shift = 0.0;
    bool suppress_los = false;
    std::optional<LinkState> force_state;

    double bs_height = 10.0;
    double ue_height = 2.0;
    int subpaths_per_cluster = 20;
    int slot_draws = 10;
    /// Statistics come from cells whose sites lie at least this many ISDs
    /// inside the area boundary.
    double interior_margin_isd = 2.0;
    /// UL noise is integrated over the UE's share of the band.
    bool ul_noise_per_share = true;

    void validate() const;
};

struct Site {
    double x = 0.0;
    double y = 0.0;
};

struct Cell {
    int site = 0;
    double azimuth = 0.0;  // sector boresight, radians
};

struct UePosition {
    double x = 0.0;
    double y = 0.0;
};

struct Deployment {
    std::vector<Site> sites;
    std::vector<Cell> cells;
    std::vector<UePosition> ues;
    int sectors_per_site = 3;
};

/// One visible, non-outage UE-cell link. Pairs absent from the table have
/// zero gain (outage or behind the sector).
struct LinkBudgetEntry {
    int ue = 0;
    int cell = 0;
    double distance = 0.0;
    LinkState state = LinkState::Nlos;
    double omni_path_loss = 0.0;     // dB
    double effective_gain_dl = 0.0;  // linear, own eigenbeams at both ends
    double effective_gain_ul = 0.0;
    bool serving = false;
};

struct LinkTable {
    std::vector<LinkBudgetEntry> entries;
    std::vector<SubpathSet> subpaths;  // parallel to entries
    std::vector<CVector> ue_beam;      // dominant eigvec at the UE end
    std::vector<CVector> bs_beam;      // dominant eigvec at the BS end
    std::vector<double> trace;         // total link power
    std::vector<int> serving_link;     // per UE, -1 when unserved
    std::vector<std::vector<int>> served_ues;  // per cell
    std::uint64_t slot_key = 0;

    int serving_cell(int ue) const;
};

Deployment drop_network(const NetworkConfig& cfg, Rng& rng);

/// Site indices whose statistics are collected.
std::vector<bool> interior_sites(const Deployment& dep, const NetworkConfig& cfg);

/// True when the UE's azimuth from the site falls inside the sector's
/// 360/sectors degree wedge. Every UE sees exactly one sector per site.
bool sector_visible(const Deployment& dep, int cell, int ue);

LinkTable realize_links(const Deployment& dep, const NetworkConfig& cfg, Rng& rng);

enum class Direction { Downlink, Uplink };

struct SinrResult {
    std::vector<double> sinr_db;  // per UE, -inf when unserved
    std::vector<double> inr_db;   // per UE, -inf without interference
};

SinrResult compute_sinr(const Deployment& dep, const LinkTable& links, const NetworkConfig& cfg, Direction dir);

/// Thermal noise in dBm over `bandwidth_hz` with the given noise figure.
double thermal_noise_dbm(double bandwidth_hz, double noise_figure_db);

/// min(log2(1 + 10^((sinr - delta)/10)), rho_max); -inf maps to 0.
double sinr_to_rate(double sinr_db, const NetworkConfig& cfg);

struct UeSample {
    int ue = 0;
    int drop = 0;
    double dl_sinr_db = 0.0;
    double ul_sinr_db = 0.0;
    double dl_inr_db = 0.0;
    double ul_inr_db = 0.0;
    double dl_rate_bps = 0.0;
    double ul_rate_bps = 0.0;
    bool served = false;
};

struct DropResult {
    int drop = 0;
    std::vector<UeSample> ues;             // interior UEs only
    std::vector<double> cell_tput_dl;      // interior cells, bps
    std::vector<double> cell_tput_ul;
    int sites = 0;
    int cells = 0;
    int total_ues = 0;
};

struct RateReport {
    std::vector<UeSample> ues;
    std::vector<double> cell_tput_dl;
    std::vector<double> cell_tput_ul;
    double mean_cell_tput_dl = 0.0;  // bps
    double mean_cell_tput_ul = 0.0;
    double spectral_eff_dl = 0.0;  // bps/Hz, overhead included, duplex excluded
    double spectral_eff_ul = 0.0;
    double edge_rate_dl = 0.0;  // 5th percentile, bps
    double edge_rate_ul = 0.0;
    double inr_noise_dominated_fraction_dl = 0.0;
    double inr_noise_dominated_fraction_ul = 0.0;
    double frac_dl_sinr_below_0db = 0.0;
    double frac_unserved = 0.0;
    int n_drops = 0;
};

/// Rates for one evaluated drop: equal resource shares per cell.
DropResult schedule_drop(const Deployment& dep, const LinkTable& links, const SinrResult& dl,
                         const SinrResult& ul, const NetworkConfig& cfg, int drop);

/// Pools drop results (in drop order) into one report.
RateReport schedule_and_report(std::vector<DropResult> drops, const NetworkConfig& cfg);

/// Runs one full drop with streams derived from (seed, drop).
DropResult simulate_drop(const NetworkConfig& cfg, std::uint64_t seed, int drop);

/// Runs drops 0..n_drops-1 on `threads` workers; output is independent of the
/// thread count.
RateReport simulate(const NetworkConfig& cfg, std::uint64_t seed, int n_drops, int threads = 1);

}  // namespace mmw

#include <cmath>
#include <limits>

#include "doctest.h"
#include "mmw/channel_model.hpp"
#include "mmw/error.hpp"
#include "mmw/mimo.hpp"
#include "mmw/netsim.hpp"

using namespace mmw;

namespace {

constexpr double kInf = std::numeric_limits<double>::infinity();

// Small network for fast tests: 5x6 sites, interior margin of one ISD.
NetworkConfig small_network() {
    NetworkConfig cfg;
    cfg.area_width = 1000.0;
    cfg.area_height = 1000.0;
    cfg.interior_margin_isd = 1.0;
    cfg.ues_per_cell = 4;
    cfg.slot_draws = 3;
    return cfg;
}

// One sector, one site, one UE.
NetworkConfig single_cell() {
    NetworkConfig cfg;
    cfg.area_width = 200.0;
    cfg.area_height = 10.0;
    cfg.sectors_per_site = 1;
    cfg.ues_per_cell = 1;
    cfg.interior_margin_isd = 0.0;
    cfg.force_state = LinkState::Los;
    return cfg;
}

}  // namespace

TEST_CASE("rate mapping") {
    const NetworkConfig cfg;
    CHECK(sinr_to_rate(3.0, cfg) == doctest::Approx(1.0).epsilon(1e-15));
    CHECK(sinr_to_rate(30.0, cfg) == 4.8);
    CHECK(sinr_to_rate(-kInf, cfg) == 0.0);
    CHECK(sinr_to_rate(10.0, cfg) == doctest::Approx(std::log2(1.0 + std::pow(10.0, 0.7))));
    double prev = 0.0;
    for (double s = -20.0; s <= 40.0; s += 0.5) {
        const double r = sinr_to_rate(s, cfg);
        CHECK(r >= prev);
        prev = r;
    }
}

TEST_CASE("thermal noise") {
    CHECK(thermal_noise_dbm(1e9, 7.0) == doctest::Approx(-174.0 + 90.0 + 7.0).epsilon(1e-12));
    CHECK(thermal_noise_dbm(1e8, 5.0) == doctest::Approx(-174.0 + 80.0 + 5.0).epsilon(1e-12));
}

TEST_CASE("hex lattice and sectors") {
    NetworkConfig cfg;
    Rng rng(1);
    const auto dep = drop_network(cfg, rng);
    CHECK(dep.sites.size() == 130u);
    CHECK(dep.cells.size() == 390u);
    CHECK(dep.ues.size() == 3900u);
    for (int u = 0; u < 200; ++u) {
        for (std::size_t s = 0; s < dep.sites.size(); ++s) {
            int visible = 0;
            for (int k = 0; k < 3; ++k) visible += sector_visible(dep, static_cast<int>(3 * s + k), u);
            CHECK(visible == 1);
        }
    }
    // nearest neighbours sit one ISD apart
    double nearest = 1e9;
    for (std::size_t s = 1; s < dep.sites.size(); ++s)
        nearest = std::min(nearest, std::hypot(dep.sites[s].x - dep.sites[0].x, dep.sites[s].y - dep.sites[0].y));
    CHECK(nearest == doctest::Approx(200.0));
}

TEST_CASE("forced outage leaves everybody unserved") {
    auto cfg = small_network();
    cfg.force_state = LinkState::Outage;
    const auto r = simulate_drop(cfg, 5, 0);
    REQUIRE(!r.ues.empty());
    for (const auto& u : r.ues) {
        CHECK(!u.served);
        CHECK(u.dl_rate_bps == 0.0);
        CHECK(u.ul_rate_bps == 0.0);
        CHECK(u.dl_sinr_db == -kInf);
    }
    for (double t : r.cell_tput_dl) CHECK(t == 0.0);
}

TEST_CASE("single cell without interference hits the rate cap") {
    const auto cfg = single_cell();
    Rng rng(3);
    const auto dep = drop_network(cfg, rng);
    REQUIRE(dep.sites.size() == 1u);
    REQUIRE(dep.ues.size() == 1u);
    const auto links = realize_links(dep, cfg, rng);
    REQUIRE(links.entries.size() == 1u);
    const auto& e = links.entries[0];
    CHECK(e.state == LinkState::Los);

    // effective gain = omni gain times both long-term beamforming gains
    ArrayGeometry bs = cfg.bs_array;
    bs.boresight_azimuth = dep.cells[0].azimuth;
    const auto g = bf_gain_long_term(covariances(links.subpaths[0], cfg.ue_array, bs));
    CHECK(e.effective_gain_dl == doctest::Approx(std::pow(10.0, -0.1 * (e.omni_path_loss - g.total))).epsilon(1e-9));

    const auto dl = compute_sinr(dep, links, cfg, Direction::Downlink);
    const auto ul = compute_sinr(dep, links, cfg, Direction::Uplink);
    CHECK(dl.inr_db[0] == -kInf);
    const double snr = cfg.dl_tx_power + 10.0 * std::log10(e.effective_gain_dl) -
                       thermal_noise_dbm(cfg.bandwidth, cfg.ue_noise_figure);
    CHECK(dl.sinr_db[0] == doctest::Approx(snr).epsilon(1e-12));
    const auto r = schedule_drop(dep, links, dl, ul, cfg, 0);
    REQUIRE(r.ues.size() == 1u);
    CHECK(r.ues[0].dl_rate_bps == doctest::Approx(1.92e9).epsilon(1e-12));
    CHECK(r.cell_tput_dl[0] == r.ues[0].dl_rate_bps);
}

TEST_CASE("cell throughput is the sum of its UE rates") {
    const auto cfg = small_network();
    Rng rng(7);
    const auto dep = drop_network(cfg, rng);
    const auto links = realize_links(dep, cfg, rng);
    const auto dl = compute_sinr(dep, links, cfg, Direction::Downlink);
    const auto ul = compute_sinr(dep, links, cfg, Direction::Uplink);
    const auto r = schedule_drop(dep, links, dl, ul, cfg, 0);
    const auto interior = interior_sites(dep, cfg);
    double ue_sum = 0.0, cell_sum = 0.0;
    for (const auto& u : r.ues)
        if (u.served) ue_sum += u.dl_rate_bps;
    for (double t : r.cell_tput_dl) cell_sum += t;
    CHECK(cell_sum == doctest::Approx(ue_sum).epsilon(1e-12));

    for (std::size_t u = 0; u < dep.ues.size(); ++u) {
        if (links.serving_link[u] < 0) {
            CHECK(dl.sinr_db[u] == -kInf);
            continue;
        }
        // interference only lowers SINR below SNR
        const double sinr = dl.sinr_db[u];
        const double inr = dl.inr_db[u];
        const double snr = sinr + 10.0 * std::log10(1.0 + std::pow(10.0, 0.1 * inr));
        CHECK(sinr <= snr + 1e-12);
        // serving cell maximises the DL effective gain among visible links
        const auto& s = links.entries[static_cast<std::size_t>(links.serving_link[u])];
        for (const auto& e : links.entries)
            if (e.ue == static_cast<int>(u)) CHECK(e.effective_gain_dl <= s.effective_gain_dl);
    }
    CHECK(interior.size() == dep.sites.size());
}

TEST_CASE("served count never grows with d_shift") {
    auto cfg = small_network();
    int prev = 1 << 30;
    for (double shift : {0.0, 25.0, 50.0, 75.0}) {
        cfg.d_shift = shift;
        Rng rng(11);
        const auto dep = drop_network(cfg, rng);
        const auto links = realize_links(dep, cfg, rng);
        int served = 0;
        for (int l : links.serving_link) served += l >= 0;
        CHECK(served <= prev);
        prev = served;
    }
}

TEST_CASE("simulation is thread-count invariant") {
    const auto cfg = small_network();
    const auto a = simulate(cfg, 19, 3, 1);
    const auto b = simulate(cfg, 19, 3, 3);
    REQUIRE(a.ues.size() == b.ues.size());
    for (std::size_t i = 0; i < a.ues.size(); ++i) {
        CHECK(a.ues[i].dl_sinr_db == b.ues[i].dl_sinr_db);
        CHECK(a.ues[i].ul_rate_bps == b.ues[i].ul_rate_bps);
    }
    CHECK(a.mean_cell_tput_dl == b.mean_cell_tput_dl);
    CHECK(a.edge_rate_ul == b.edge_rate_ul);
    CHECK(a.n_drops == 3);
}

TEST_CASE("report aggregates") {
    const auto cfg = small_network();
    const auto rep = simulate(cfg, 23, 2, 1);
    double sum = 0.0;
    for (double t : rep.cell_tput_dl) sum += t;
    CHECK(rep.mean_cell_tput_dl == doctest::Approx(sum / rep.cell_tput_dl.size()));
    CHECK(rep.spectral_eff_dl == doctest::Approx(rep.mean_cell_tput_dl / (cfg.duplex_split * cfg.bandwidth)));
    CHECK(rep.frac_unserved >= 0.0);
    CHECK(rep.frac_unserved <= 1.0);
}

TEST_CASE("network validation") {
    NetworkConfig cfg;
    cfg.isd = 0.0;
    CHECK_THROWS_AS(cfg.validate(), Error);
    cfg = {};
    cfg.d_shift = -1.0;
    CHECK_THROWS_AS(cfg.validate(), Error);
    cfg = {};
    cfg.overhead = 1.5;
    CHECK_THROWS_AS(simulate(cfg, 1, 1), Error);
    CHECK_THROWS_AS(simulate(NetworkConfig{}, 1, 0), Error);
}

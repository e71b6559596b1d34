#include "mmw/channel_model.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <numbers>

#include "mmw/error.hpp"

namespace mmw {

namespace {

constexpr double kPi = std::numbers::pi;

}  // namespace

void BandParameters::validate() const {
    require(carrier_freq > 0.0, "carrier_freq must be positive");
    require(nlos_sigma > 0.0 && los_sigma > 0.0, "shadowing sigmas must be positive");
    require(lambda_k > 0.0, "lambda_k must be positive");
    require(r_tau > 1.0, "r_tau must exceed 1");
    require(zeta >= 0.0, "zeta must be non-negative");
    require(bs_az_spread_mean >= 0.0 && bs_el_spread_mean >= 0.0 && ue_az_spread_mean >= 0.0 &&
                ue_el_spread_mean >= 0.0,
            "angular spread means must be non-negative");
    require(a_out > 0.0, "a_out must be positive");
    require(a_los > 0.0, "a_los must be positive");
    require(std::isfinite(nlos_alpha) && std::isfinite(nlos_beta) && std::isfinite(los_alpha) &&
                std::isfinite(los_beta) && std::isfinite(b_out),
            "path-loss and outage coefficients must be finite");
}

BandParameters band_preset(std::string_view name) {
    BandParameters b;
    if (name == "28ghz-nyc") {
        b.name = "28ghz-nyc";
        return b;
    }
    if (name == "73ghz-nyc" || name == "73ghz-nyc-combined") {
        b.name = std::string(name);
        b.carrier_freq = 73.0;
        if (name == "73ghz-nyc") {
            b.nlos_alpha = 82.7;
            b.nlos_beta = 2.69;
            b.nlos_sigma = 7.7;
        } else {
            b.nlos_alpha = 86.6;
            b.nlos_beta = 2.45;
            b.nlos_sigma = 8.0;
        }
        b.los_alpha = 69.8;
        b.los_beta = 2.0;
        b.los_sigma = 5.8;
        b.lambda_k = 1.9;
        b.r_tau = 3.0;
        b.zeta = 4.0;
        b.bs_az_spread_mean = 10.5;
        b.bs_el_spread_mean = 0.0;
        b.ue_az_spread_mean = 15.4;
        b.ue_el_spread_mean = 3.5;
        // link-state law reuses the 28 GHz fit
        return b;
    }
    if (name == "rank-one-smoke") {
        // single cluster with no spread: every covariance has rank one
        b.name = "rank-one-smoke";
        b.lambda_k = 1e-9;
        b.bs_az_spread_mean = 0.0;
        b.bs_el_spread_mean = 0.0;
        b.ue_az_spread_mean = 0.0;
        b.ue_el_spread_mean = 0.0;
        return b;
    }
    fail(ErrorCode::InvalidArgument, "unknown band preset '" + std::string(name) + "'");
}

std::vector<std::string> band_preset_names() { return {"28ghz-nyc", "73ghz-nyc", "73ghz-nyc-combined", "rank-one-smoke"}; }

std::string_view to_string(LinkState s) {
    switch (s) {
        case LinkState::Los: return "LOS";
        case LinkState::Nlos: return "NLOS";
        case LinkState::Outage: return "Outage";
    }
    return "?";
}

char state_letter(LinkState s) {
    switch (s) {
        case LinkState::Los: return 'L';
        case LinkState::Nlos: return 'N';
        case LinkState::Outage: return 'O';
    }
    return '?';
}

LinkState state_from_letter(char c) {
    switch (c) {
        case 'L': return LinkState::Los;
        case 'N': return LinkState::Nlos;
        case 'O': return LinkState::Outage;
        default: fail(ErrorCode::Parse, std::string("unknown link state '") + c + "'");
    }
}

double LinkRealization::omni_gain() const {
    if (outage()) return 0.0;
    return std::pow(10.0, -0.1 * omni_path_loss);
}

StateProbabilities link_state_probabilities(double d, const BandParameters& band) {
    return link_state_probabilities(d, band, LinkOverrides{});
}

StateProbabilities link_state_probabilities(double d, const BandParameters& band, const LinkOverrides& ov) {
    require(d >= 0.0, "distance must be non-negative");
    StateProbabilities p;
    const double d_out = d + ov.d_shift;
    p.p_out = std::max(0.0, 1.0 - std::exp(-band.a_out * d_out + band.b_out));
    p.p_los = (1.0 - p.p_out) * std::exp(-band.a_los * d);
    if (ov.suppress_los) p.p_los = 0.0;
    p.p_nlos = 1.0 - p.p_out - p.p_los;
    return p;
}

double outage_onset_distance(const BandParameters& band) {
    require(band.a_out > 0.0, "a_out must be positive");
    return band.b_out / band.a_out;
}

LinkState sample_link_state(double d, const BandParameters& band, Rng& rng, const LinkOverrides& ov) {
    const StateProbabilities p = link_state_probabilities(d, band, ov);
    const double u = rng.uniform();
    if (ov.force_state) return *ov.force_state;
    if (u < p.p_out) return LinkState::Outage;
    if (u < p.p_out + p.p_los) return LinkState::Los;
    return LinkState::Nlos;
}

double median_path_loss(double d, LinkState state, const BandParameters& band) {
    if (state == LinkState::Outage) fail(ErrorCode::Outage, "no finite path loss in outage");
    require(d > 0.0, "distance must be positive");
    const bool los = state == LinkState::Los;
    const double alpha = los ? band.los_alpha : band.nlos_alpha;
    const double beta = los ? band.los_beta : band.nlos_beta;
    return alpha + 10.0 * beta * std::log10(d);
}

double sample_path_loss(double d, LinkState state, const BandParameters& band, Rng& rng) {
    const double median = median_path_loss(d, state, band);
    const double sigma = state == LinkState::Los ? band.los_sigma : band.nlos_sigma;
    const double xi = rng.normal();
    return median + sigma * xi;
}

int sample_num_clusters(const BandParameters& band, Rng& rng) {
    const auto k = rng.poisson(band.lambda_k);
    return static_cast<int>(std::max<std::uint64_t>(k, 1));
}

std::vector<double> sample_cluster_power_fractions(int k, const BandParameters& band, Rng& rng) {
    require(k >= 1, "cluster count must be at least 1");
    std::vector<double> gamma(static_cast<std::size_t>(k));
    double total = 0.0;
    for (auto& g : gamma) {
        const double u = rng.uniform_pos();
        const double z = band.zeta * rng.normal();
        g = std::pow(u, band.r_tau - 1.0) * std::pow(10.0, -0.1 * z);
        total += g;
    }
    for (auto& g : gamma) g /= total;
    return gamma;
}

std::vector<PathCluster> sample_cluster_geometry(int k, LinkState /*state*/, double los_elevation,
                                                 const BandParameters& band, Rng& rng) {
    require(k >= 1, "cluster count must be at least 1");
    std::vector<PathCluster> out(static_cast<std::size_t>(k));
    for (auto& c : out) {
        c.power_fraction = 0.0;
        c.aod_az = 2.0 * kPi * rng.uniform();
        c.aoa_az = 2.0 * kPi * rng.uniform();
        c.aod_el = -los_elevation;
        c.aoa_el = los_elevation;
        c.spread_aod_az = deg2rad(rng.exponential_mean(band.bs_az_spread_mean));
        c.spread_aod_el = deg2rad(rng.exponential_mean(band.bs_el_spread_mean));
        c.spread_aoa_az = deg2rad(rng.exponential_mean(band.ue_az_spread_mean));
        c.spread_aoa_el = deg2rad(rng.exponential_mean(band.ue_el_spread_mean));
    }
    return out;
}

LinkRealization sample_link(double d, double los_elevation, const BandParameters& band, Rng& rng,
                            const LinkOverrides& ov) {
    require(d > 0.0, "distance must be positive");
    LinkRealization link;
    link.distance = d;
    link.state = sample_link_state(d, band, rng, ov);
    if (link.state == LinkState::Outage) {
        link.omni_path_loss = std::numeric_limits<double>::infinity();
        return link;
    }
    link.omni_path_loss = sample_path_loss(d, link.state, band, rng);
    const int k = sample_num_clusters(band, rng);
    const auto fractions = sample_cluster_power_fractions(k, band, rng);
    link.clusters = sample_cluster_geometry(k, link.state, los_elevation, band, rng);
    for (std::size_t i = 0; i < link.clusters.size(); ++i) link.clusters[i].power_fraction = fractions[i];
    return link;
}

double los_elevation(double horizontal_distance, double bs_height, double ue_height) {
    return std::atan2(bs_height - ue_height, horizontal_distance);
}

double umi_path_loss(double d, double fc_ghz) {
    require(d > 0.0 && fc_ghz > 0.0, "distance and frequency must be positive");
    return 22.7 + 36.7 * std::log10(d) + 26.0 * std::log10(fc_ghz);
}

double wrap_angle(double rad) {
    double w = std::fmod(rad, 2.0 * kPi);
    if (w < 0.0) w += 2.0 * kPi;
    if (w >= 2.0 * kPi) w = 0.0;
    return w;
}

double deg2rad(double deg) { return deg * kPi / 180.0; }
double rad2deg(double rad) { return rad * 180.0 / kPi; }

}  // namespace mmw

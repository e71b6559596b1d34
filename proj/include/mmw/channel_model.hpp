#pragma once

#include <optional>
#include <string>
#include <string_view>
#include <vector>

#include "mmw/random.hpp"

namespace mmw {

/// Large-scale parameter card for one carrier frequency. Path-loss values are
/// in dB, spreads in degrees, link-state coefficients in 1/m.
struct BandParameters {
    std::string name;
    double carrier_freq = 28.0;  // GHz
    double nlos_alpha = 72.0;
    double nlos_beta = 2.92;
    double nlos_sigma = 8.7;
    double los_alpha = 61.4;
    double los_beta = 2.0;
    double los_sigma = 5.8;
    double lambda_k = 1.8;
    double r_tau = 2.8;
    double zeta = 4.0;
    double bs_az_spread_mean = 10.2;
    double bs_el_spread_mean = 0.0;
    double ue_az_spread_mean = 15.5;
    double ue_el_spread_mean = 6.0;
    double a_out = 0.0334;
    double b_out = 5.2;
    double a_los = 0.0149;

    /// Throws InvalidArgument when an invariant is violated.
    void validate() const;
};

/// Built-in cards: "28ghz-nyc", "73ghz-nyc" (2 m UE-height NLOS fit),
/// "73ghz-nyc-combined" (both UE heights) and "rank-one-smoke" (one cluster,
/// zero spreads; for smoke tests).
BandParameters band_preset(std::string_view name);
std::vector<std::string> band_preset_names();

enum class LinkState { Los, Nlos, Outage };

std::string_view to_string(LinkState s);
char state_letter(LinkState s);
LinkState state_from_letter(char c);

struct PathCluster {
    double power_fraction = 1.0;
    // central angles, radians
    double aod_az = 0.0;
    double aod_el = 0.0;
    double aoa_az = 0.0;
    double aoa_el = 0.0;
    // rms spreads, radians
    double spread_aod_az = 0.0;
    double spread_aod_el = 0.0;
    double spread_aoa_az = 0.0;
    double spread_aoa_el = 0.0;
};

struct LinkRealization {
    double distance = 0.0;
    LinkState state = LinkState::Outage;
    double omni_path_loss = 0.0;  // dB, +inf in outage
    std::vector<PathCluster> clusters;

    bool outage() const { return state == LinkState::Outage; }
    /// Linear omnidirectional gain 10^(-PL/10); 0 in outage.
    double omni_gain() const;
};

struct StateProbabilities {
    double p_out = 0.0;
    double p_los = 0.0;
    double p_nlos = 0.0;
};

/// Perturbations of the link-state law used by the outage studies.
struct LinkOverrides {
    std::optional<LinkState> force_state;
    double d_shift = 0.0;       // outage curve evaluated at d + d_shift
    bool suppress_los = false;  // LOS probability mass moved to NLOS
};

StateProbabilities link_state_probabilities(double d, const BandParameters& band);
StateProbabilities link_state_probabilities(double d, const BandParameters& band, const LinkOverrides& ov);

/// Distance at which the outage probability leaves zero: b_out / a_out.
double outage_onset_distance(const BandParameters& band);

LinkState sample_link_state(double d, const BandParameters& band, Rng& rng, const LinkOverrides& ov = {});

double median_path_loss(double d, LinkState state, const BandParameters& band);
double sample_path_loss(double d, LinkState state, const BandParameters& band, Rng& rng);

/// K ~ max(Poisson(lambda_K), 1).
int sample_num_clusters(const BandParameters& band, Rng& rng);

/// gamma'_k = U_k^(r_tau - 1) 10^(-0.1 Z_k), Z_k ~ N(0, zeta^2), normalized to sum 1.
std::vector<double> sample_cluster_power_fractions(int k, const BandParameters& band, Rng& rng);

/// Central angles and rms spreads for `k` clusters. Azimuths are uniform and
/// independent at both ends; elevations follow the LOS geometry (the BS looks
/// down by `los_elevation`, the UE looks up by it). power_fraction is left at 0.
std::vector<PathCluster> sample_cluster_geometry(int k, LinkState state, double los_elevation,
                                                 const BandParameters& band, Rng& rng);

LinkRealization sample_link(double d, double los_elevation, const BandParameters& band, Rng& rng,
                            const LinkOverrides& ov = {});

/// Elevation of the BS as seen from the UE, radians.
double los_elevation(double horizontal_distance, double bs_height, double ue_height);

/// 3GPP urban-micro path loss, used as a microwave comparison baseline.
double umi_path_loss(double d, double fc_ghz);

/// Range of distances over which the path-loss fits were measured.
inline constexpr double kValidityMin = 30.0;
inline constexpr double kValidityMax = 200.0;
inline bool in_validity_range(double d) { return d >= kValidityMin && d <= kValidityMax; }

double wrap_angle(double rad);  // to [0, 2*pi)
double deg2rad(double deg);
double rad2deg(double rad);

}  // namespace mmw

#pragma once

#include <array>
#include <cstdint>
#include <string>
#include <vector>

#include "mmw/channel_model.hpp"
#include "mmw/mimo.hpp"

namespace mmw {

enum class CellStatus { NotMeasured, BelowThreshold, Power };

/// One measured pointing combination. Angles in degrees, power in mW.
struct MapCell {
    double tx_az = 0.0;
    double tx_el = 0.0;
    double rx_az = 0.0;
    double rx_el = 0.0;
    CellStatus status = CellStatus::NotMeasured;
    double power_mw = 0.0;
};

/// Sparse angular power map: only the cells that were swept are listed.
struct AngularPowerMap {
    std::vector<MapCell> cells;
    double az_step = 10.0;  // degrees
    double el_step = 10.0;
    double total_power() const;
    std::size_t valid_cells() const;
};

/// Dimension order of centers and spreads: tx_az, tx_el, rx_az, rx_el.
struct ClusterEstimate {
    std::array<double, 4> center{};  // degrees, azimuths in [0, 360)
    std::array<double, 4> spread{};  // rms degrees after power clipping
    double power_mw = 0.0;
    double power_fraction = 0.0;
    std::vector<int> members;  // indices into AngularPowerMap::cells
};

struct ClusterDetectOptions {
    int restarts = 10;
    int max_clusters = 20;
    int max_iterations = 200;
    double clip_fraction = 0.1;  // cluster power dropped before spread estimation
    std::uint64_t seed = 0;
};

struct KMeansResult {
    std::vector<int> assignment;  // per map cell, -1 for cells without power
    std::vector<std::array<double, 4>> centers;
    std::vector<double> objective_trace;  // after every assignment step
    double objective = 0.0;
    int iterations = 0;
};

/// One weighted K-means run from the seeding selected by `restart` (restart 0
/// is the deterministic farthest-point seeding).
KMeansResult weighted_kmeans(const AngularPowerMap& map, int k, int restart, const ClusterDetectOptions& opt = {});

/// Power-weighted K-means for K = 1, 2, ... keeping the last clustering before
/// two clusters fall within two pooled deviations of each other in every
/// dimension or a cluster comes up empty. Throws Outage on a map with no power.
std::vector<ClusterEstimate> detect_clusters(const AngularPowerMap& map, const ClusterDetectOptions& opt = {});

/// Weighted within-cluster squared angular distance (azimuths wrapped).
double kmeans_objective(const AngularPowerMap& map, const std::vector<ClusterEstimate>& clusters);

/// Bins subpath powers onto the measurement grid. Cells more than
/// `dynamic_range_db` below the strongest cell are marked BelowThreshold.
AngularPowerMap map_from_subpaths(const SubpathSet& sub, double az_step, double el_step,
                                  double dynamic_range_db = 40.0);

struct PathLossSample {
    double distance = 0.0;  // m
    double path_loss = 0.0;  // dB
    LinkState state = LinkState::Nlos;
};

struct PathLossFit {
    double alpha = 0.0;
    double beta = 0.0;
    double sigma = 0.0;
    int n = 0;
};

/// Least squares of PL on 10 log10(d) for the samples in `state`.
PathLossFit fit_path_loss(const std::vector<PathLossSample>& samples, LinkState state);

struct LinkStateSample {
    double distance = 0.0;
    LinkState state = LinkState::Nlos;
};

struct LinkStateFit {
    double a_out = 0.0;
    double b_out = 0.0;
    double a_los = 0.0;
    double log_likelihood = 0.0;
    int iterations = 0;
    /// Set when the optimum sits on the search boundary, e.g. a state never
    /// appears in the data.
    bool boundary = false;
};

double link_state_log_likelihood(const std::vector<LinkStateSample>& samples, double a_out, double b_out,
                                 double a_los);
LinkStateFit fit_link_state(const std::vector<LinkStateSample>& samples);

struct ClusterPowerFit {
    double r_tau = 0.0;
    double zeta = 0.0;  // dB
    double log_likelihood = 0.0;
    int iterations = 0;
};

/// Density of the two-cluster power ratio in dB, 10 log10(gamma_1 / gamma_2),
/// with the uniform latent variables integrated out by quadrature.
double cluster_ratio_density(double x_db, double r_tau, double zeta);
/// Log-likelihood of weak-cluster fractions (each in (0, 0.5]) from K = 2 links.
double cluster_power_log_likelihood(const std::vector<double>& weak_fractions, double r_tau, double zeta);
ClusterPowerFit fit_cluster_power(const std::vector<double>& weak_fractions);

/// Exponential MLE: the sample mean.
double fit_angular_spread(const std::vector<double>& spreads_deg);
/// Empirical mean of the observed cluster counts (no censoring correction).
double fit_cluster_count(const std::vector<int>& counts);

AngularPowerMap read_power_map_csv(const std::string& path);
void write_power_map_csv(const std::string& path, const AngularPowerMap& map);
std::vector<PathLossSample> read_path_loss_csv(const std::string& path);
void write_path_loss_csv(const std::string& path, const std::vector<PathLossSample>& samples);

}  // namespace mmw

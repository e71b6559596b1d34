#pragma once

#include <cstdint>
#include <optional>
#include <string>
#include <vector>

#include "mmw/channel_model.hpp"
#include "mmw/estimation.hpp"
#include "mmw/netsim.hpp"

namespace mmw {

/// One batch run. Unset optionals fall back to the config file, then to the
/// built-in defaults.
struct ExperimentSpec {
    std::string command;  // channel-stats | bf-analysis | netsim | estimate | dump-channel
    std::string config_path;
    std::optional<std::uint64_t> seed;  // required
    std::optional<int> drops;
    std::optional<int> samples;
    std::optional<std::string> band;  // preset name or card path
    std::optional<std::string> ue_array;
    std::optional<std::string> bs_array;
    std::optional<double> d_shift;
    bool no_los = false;
    bool table3 = false;
    bool self_test = false;
    std::optional<double> area;  // square side, m
    int threads = 1;
    std::optional<double> distance;  // dump-channel link distance, m
    std::string map_csv;
    std::string pathloss_csv;
    std::string out_dir = "out";
    std::string format = "csv";  // csv | txt
};

struct ExperimentOutcome {
    int status = 0;  // 0 ok, 1 a self-test tolerance failed
    std::string summary;
    std::vector<std::string> files;
};

ExperimentOutcome run_experiment(const ExperimentSpec& spec);
ExperimentOutcome run_channel_stats(const ExperimentSpec& spec);
ExperimentOutcome run_bf_analysis(const ExperimentSpec& spec);
ExperimentOutcome run_netsim(const ExperimentSpec& spec);
ExperimentOutcome run_estimation(const ExperimentSpec& spec);
ExperimentOutcome run_channel_dump(const ExperimentSpec& spec);

/// Network configuration after applying config file, band and flags.
NetworkConfig resolve_network(const ExperimentSpec& spec);

struct BfSample {
    double serving_rx = 0.0;  // dB over omni, UE end
    double serving_tx = 0.0;  // dB over omni, BS end
    double interfering_rx = 0.0;
    double interfering_tx = 0.0;
    double total = 0.0;
    double phi[4] = {0, 0, 0, 0};
};

/// Long-term beamforming statistics over `n` independent links at distances
/// uniform in the model's validity range. The interfering sample applies one
/// link's eigenbeams to a second link drawn at the same distance, so both
/// share their central elevations.
std::vector<BfSample> bf_statistics(const BandParameters& band, const ArrayGeometry& bs, const ArrayGeometry& ue,
                                    int n, std::uint64_t seed, int subpaths_per_cluster = 20);

struct Table3Row {
    std::string label;
    NetworkConfig cfg;
    // published values: spectral eff DL/UL, cell throughput DL/UL (Mbps), 5% edge DL/UL (Mbps)
    double reference[6] = {0, 0, 0, 0, 0, 0};
};

/// The seven mmW configurations of the capacity table, derived from `base`.
std::vector<Table3Row> table3_rows(const NetworkConfig& base);
/// Cited 2.5 GHz LTE reference values in the same column order (not simulated).
inline constexpr double kLteReference[6] = {2.69, 2.36, 53.8, 47.2, 1.80, 1.94};

/// Four well-separated clusters binned on a 10 degree grid.
AngularPowerMap four_cluster_map(std::uint64_t seed);
/// Ground-truth (tx_az, rx_az) centers of four_cluster_map, degrees.
std::vector<std::pair<double, double>> four_cluster_truth();

struct FitCheck {
    std::string parameter;
    double truth = 0.0;
    double fitted = 0.0;
    double tolerance = 0.0;
    bool pass = false;
};

struct SelfTestReport {
    std::vector<FitCheck> checks;
    BandParameters fitted;
    bool pass = true;
};

/// Synthesizes `locations` links from `truth`, fits every card parameter and
/// compares against the truth with the module tolerances.
SelfTestReport estimation_self_test(const BandParameters& truth, int locations, std::uint64_t seed);

}  // namespace mmw

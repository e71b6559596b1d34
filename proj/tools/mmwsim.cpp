// Command-line front end. Everything goes through the C interface so the tool
// exercises the same surface external callers see.
#include <cstdio>
#include <string>
#include <utility>
#include <vector>

#include "CLI11.hpp"
#include "mmw/mmwchan.h"

namespace {

struct Options {
    std::string config;
    std::string seed;
    std::string drops, samples, band, ue_array, bs_array, d_shift, area, distance, map, pathloss;
    int threads = 1;
    bool no_los = false, table3 = false, self_test = false;
    std::string out = "out";
    std::string format = "csv";
};

// Exit codes: 0 ok, 1 self-test tolerance failure, 2 usage or input error,
// 3 runtime failure.
int exit_code(mmw_status s) {
    switch (s) {
        case MMW_OK: return 0;
        case MMW_ERR_TOLERANCE: return 1;
        case MMW_ERR_INVALID_ARGUMENT:
        case MMW_ERR_PARSE:
        case MMW_ERR_IO: return 2;
        default: return 3;
    }
}

int run(const std::string& command, const Options& o) {
    mmw_experiment* exp = nullptr;
    mmw_status s = mmw_experiment_create(command.c_str(), &exp);
    std::vector<std::pair<const char*, std::string>> kv = {
        {"config", o.config},     {"seed", o.seed},         {"drops", o.drops},   {"samples", o.samples},
        {"band", o.band},         {"ue-array", o.ue_array}, {"bs-array", o.bs_array},
        {"d-shift", o.d_shift},   {"area", o.area},         {"distance", o.distance},
        {"map", o.map},           {"pathloss", o.pathloss}, {"out", o.out},       {"format", o.format},
        {"threads", std::to_string(o.threads)},
        {"no-los", o.no_los ? "1" : "0"},
        {"table3", o.table3 ? "1" : "0"},
        {"self-test", o.self_test ? "1" : "0"},
    };
    for (const auto& [key, value] : kv) {
        if (s != MMW_OK) break;
        if (!value.empty()) s = mmw_experiment_set(exp, key, value.c_str());
    }
    int passed = 0;
    if (s == MMW_OK) s = mmw_experiment_run(exp, &passed);
    if (s == MMW_OK || s == MMW_ERR_TOLERANCE) {
        std::fputs(mmw_experiment_summary(exp), stdout);
        for (size_t i = 0; i < mmw_experiment_file_count(exp); ++i)
            std::printf("wrote %s\n", mmw_experiment_file(exp, i));
    }
    if (s != MMW_OK) std::fprintf(stderr, "mmwsim %s: %s\n", command.c_str(), mmw_last_error());
    mmw_experiment_free(exp);
    return exit_code(s);
}

}  // namespace

int main(int argc, char** argv) {
    CLI::App app{"mmWave statistical channel simulator and capacity evaluator"};
    app.require_subcommand(1);
    app.set_version_flag("--version", std::string(mmw_version()));

    Options o;
    auto common = [&o](CLI::App* sub) {
        sub->add_option("--config", o.config, "parameter card ([BandParameters]/[NetworkConfig])")
            ->check(CLI::ExistingFile);
        sub->add_option("--seed", o.seed, "master RNG seed")->required();
        sub->add_option("--band", o.band, "band preset name or card path");
        sub->add_option("--out", o.out, "output directory")->capture_default_str();
        sub->add_option("--format", o.format, "csv or txt")
            ->check(CLI::IsMember({"csv", "txt"}))
            ->capture_default_str();
    };
    auto arrays = [&o](CLI::App* sub) {
        sub->add_option("--ue-array", o.ue_array, "UE array as HxV, e.g. 4x4");
        sub->add_option("--bs-array", o.bs_array, "BS array as HxV, e.g. 8x8");
    };

    auto* stats = app.add_subcommand("channel-stats", "sample links and report large-scale statistics");
    common(stats);
    stats->add_option("--samples", o.samples, "number of links");
    stats->add_option("--d-shift", o.d_shift, "outage distance shift, m");
    stats->add_flag("--no-los", o.no_los, "suppress the LOS state");

    auto* bf = app.add_subcommand("bf-analysis", "beamforming gain and rank statistics");
    common(bf);
    arrays(bf);
    bf->add_option("--samples", o.samples, "number of links");

    auto* net = app.add_subcommand("netsim", "hexagonal-network capacity simulation");
    common(net);
    arrays(net);
    net->add_option("--drops", o.drops, "independent drops");
    net->add_option("--d-shift", o.d_shift, "outage distance shift, m");
    net->add_flag("--no-los", o.no_los, "suppress the LOS state");
    net->add_flag("--table3", o.table3, "run the seven reference configurations");
    net->add_option("--area", o.area, "square deployment side, m");
    net->add_option("--threads", o.threads, "worker threads")->check(CLI::PositiveNumber)->capture_default_str();

    auto* est = app.add_subcommand("estimate", "fit model parameters from measurement files");
    common(est);
    est->add_option("--samples", o.samples, "synthetic locations for --self-test");
    est->add_flag("--self-test", o.self_test, "synthesize data from the card and recover it");
    est->add_option("--map", o.map, "angular power map CSV")->check(CLI::ExistingFile);
    est->add_option("--pathloss", o.pathloss, "path loss samples CSV")->check(CLI::ExistingFile);

    auto* dump = app.add_subcommand("dump-channel", "write one channel realization and its covariances");
    common(dump);
    arrays(dump);
    dump->add_option("--distance", o.distance, "link distance, m");
    dump->add_option("--d-shift", o.d_shift, "outage distance shift, m");
    dump->add_flag("--no-los", o.no_los, "suppress the LOS state");

    try {
        app.parse(argc, argv);
    } catch (const CLI::ParseError& e) {
        const int rc = app.exit(e);
        return rc == 0 ? 0 : 2;
    }
    return run(app.get_subcommands().front()->get_name(), o);
}

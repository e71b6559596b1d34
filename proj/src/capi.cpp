#include "mmw/mmwchan.h"

#include <cstring>
#include <exception>
#include <new>
#include <string>

#include "mmw/config.hpp"
#include "mmw/error.hpp"
#include "mmw/experiments.hpp"
#include "mmw/netsim.hpp"
#include "text.hpp"

struct mmw_band {
    mmw::BandParameters p;
};

struct mmw_experiment {
    mmw::ExperimentSpec spec;
    mmw::ExperimentOutcome outcome;
};

namespace {

thread_local std::string g_last_error;

mmw_status to_status(mmw::ErrorCode c) {
    switch (c) {
        case mmw::ErrorCode::InvalidArgument: return MMW_ERR_INVALID_ARGUMENT;
        case mmw::ErrorCode::Outage: return MMW_ERR_OUTAGE;
        case mmw::ErrorCode::Degenerate: return MMW_ERR_DEGENERATE;
        case mmw::ErrorCode::Parse: return MMW_ERR_PARSE;
        case mmw::ErrorCode::Io: return MMW_ERR_IO;
        case mmw::ErrorCode::Convergence: return MMW_ERR_CONVERGENCE;
        case mmw::ErrorCode::Tolerance: return MMW_ERR_TOLERANCE;
        case mmw::ErrorCode::Internal: return MMW_ERR_INTERNAL;
    }
    return MMW_ERR_INTERNAL;
}

template <class F>
mmw_status guarded(F&& f) {
    try {
        g_last_error.clear();
        return f();
    } catch (const mmw::Error& e) {
        g_last_error = e.what();
        return to_status(e.code());
    } catch (const std::bad_alloc&) {
        g_last_error = "out of memory";
        return MMW_ERR_INTERNAL;
    } catch (const std::exception& e) {
        g_last_error = e.what();
        return MMW_ERR_INTERNAL;
    } catch (...) {
        g_last_error = "unknown error";
        return MMW_ERR_INTERNAL;
    }
}

mmw_status null_arg(const char* what) {
    g_last_error = std::string("null argument: ") + what;
    return MMW_ERR_INVALID_ARGUMENT;
}

double parse_double(const char* key, const char* value) {
    double v = 0.0;
    if (!mmw::detail::parse_num(value, v)) mmw::fail(mmw::ErrorCode::InvalidArgument, std::string("bad number for ") + key);
    return v;
}

int parse_int(const char* key, const char* value) {
    const double v = parse_double(key, value);
    if (v != static_cast<int>(v)) mmw::fail(mmw::ErrorCode::InvalidArgument, std::string("expected an integer for ") + key);
    return static_cast<int>(v);
}

bool parse_bool(const char* key, const char* value) {
    const std::string s = value;
    if (s == "1" || s == "true") return true;
    if (s == "0" || s == "false") return false;
    mmw::fail(mmw::ErrorCode::InvalidArgument, std::string("expected 0 or 1 for ") + key);
}

}  // namespace

extern "C" {

const char* mmw_version(void) { return "1.0.0"; }

const char* mmw_last_error(void) { return g_last_error.c_str(); }

const char* mmw_status_string(mmw_status status) {
    switch (status) {
        case MMW_OK: return "ok";
        case MMW_ERR_INVALID_ARGUMENT: return "invalid argument";
        case MMW_ERR_OUTAGE: return "outage";
        case MMW_ERR_DEGENERATE: return "degenerate input";
        case MMW_ERR_PARSE: return "parse error";
        case MMW_ERR_IO: return "i/o error";
        case MMW_ERR_CONVERGENCE: return "no convergence";
        case MMW_ERR_TOLERANCE: return "tolerance exceeded";
        case MMW_ERR_INTERNAL: return "internal error";
    }
    return "unknown status";
}

const char* mmw_band_preset_name(size_t index) {
    static const auto names = mmw::band_preset_names();
    return index < names.size() ? names[index].c_str() : nullptr;
}

mmw_status mmw_band_preset(const char* name, mmw_band** out) {
    if (!name) return null_arg("name");
    if (!out) return null_arg("out");
    return guarded([&] {
        *out = new mmw_band{mmw::band_preset(name)};
        return MMW_OK;
    });
}

mmw_status mmw_band_load(const char* path, mmw_band** out) {
    if (!path) return null_arg("path");
    if (!out) return null_arg("out");
    return guarded([&] {
        *out = new mmw_band{mmw::load_config(path).band};
        return MMW_OK;
    });
}

void mmw_band_free(mmw_band* band) { delete band; }

mmw_status mmw_band_get(const mmw_band* band, const char* field, double* value) {
    if (!band) return null_arg("band");
    if (!field) return null_arg("field");
    if (!value) return null_arg("value");
    return guarded([&] {
        *value = mmw::band_field(band->p, field);
        return MMW_OK;
    });
}

mmw_status mmw_band_set(mmw_band* band, const char* field, double value) {
    if (!band) return null_arg("band");
    if (!field) return null_arg("field");
    return guarded([&] {
        mmw::BandParameters next = band->p;
        mmw::set_band_field(next, field, value);
        next.validate();
        band->p = next;
        return MMW_OK;
    });
}

mmw_status mmw_band_to_text(const mmw_band* band, char* buf, size_t len, size_t* needed) {
    if (!band) return null_arg("band");
    return guarded([&] {
        const std::string text = mmw::band_to_text(band->p);
        if (needed) *needed = text.size() + 1;
        if (!buf) return MMW_OK;
        if (len < text.size() + 1) mmw::fail(mmw::ErrorCode::InvalidArgument, "buffer too small");
        std::memcpy(buf, text.c_str(), text.size() + 1);
        return MMW_OK;
    });
}

mmw_status mmw_link_state_probabilities(const mmw_band* band, double distance_m, double* p_out, double* p_los,
                                        double* p_nlos) {
    if (!band) return null_arg("band");
    if (!p_out || !p_los || !p_nlos) return null_arg("output");
    return guarded([&] {
        mmw::require(distance_m >= 0.0, "distance must be non-negative");
        const auto p = mmw::link_state_probabilities(distance_m, band->p);
        *p_out = p.p_out;
        *p_los = p.p_los;
        *p_nlos = p.p_nlos;
        return MMW_OK;
    });
}

mmw_status mmw_outage_onset_distance(const mmw_band* band, double* distance_m) {
    if (!band) return null_arg("band");
    if (!distance_m) return null_arg("distance_m");
    return guarded([&] {
        *distance_m = mmw::outage_onset_distance(band->p);
        return MMW_OK;
    });
}

mmw_status mmw_median_path_loss(const mmw_band* band, double distance_m, char state, double* pl_db) {
    if (!band) return null_arg("band");
    if (!pl_db) return null_arg("pl_db");
    return guarded([&] {
        mmw::require(state == 'L' || state == 'N' || state == 'O', "state must be L, N or O");
        *pl_db = mmw::median_path_loss(distance_m, mmw::state_from_letter(state), band->p);
        return MMW_OK;
    });
}

mmw_status mmw_umi_path_loss(double distance_m, double fc_ghz, double* pl_db) {
    if (!pl_db) return null_arg("pl_db");
    return guarded([&] {
        *pl_db = mmw::umi_path_loss(distance_m, fc_ghz);
        return MMW_OK;
    });
}

mmw_status mmw_sinr_to_rate(double sinr_db, double* bps_per_hz) {
    if (!bps_per_hz) return null_arg("bps_per_hz");
    return guarded([&] {
        *bps_per_hz = mmw::sinr_to_rate(sinr_db, mmw::NetworkConfig{});
        return MMW_OK;
    });
}

mmw_status mmw_experiment_create(const char* command, mmw_experiment** out) {
    if (!command) return null_arg("command");
    if (!out) return null_arg("out");
    return guarded([&] {
        const std::string c = command;
        if (c != "channel-stats" && c != "bf-analysis" && c != "netsim" && c != "estimate" && c != "dump-channel")
            mmw::fail(mmw::ErrorCode::InvalidArgument, "unknown command '" + c + "'");
        auto* e = new mmw_experiment;
        e->spec.command = c;
        *out = e;
        return MMW_OK;
    });
}

void mmw_experiment_free(mmw_experiment* exp) { delete exp; }

mmw_status mmw_experiment_set(mmw_experiment* exp, const char* key, const char* value) {
    if (!exp) return null_arg("exp");
    if (!key) return null_arg("key");
    if (!value) return null_arg("value");
    return guarded([&] {
        auto& s = exp->spec;
        const std::string k = key;
        if (k == "config") s.config_path = value;
        else if (k == "seed") {
            const std::string v = value;
            std::uint64_t seed = 0;
            if (v.empty() || v.find_first_not_of("0123456789") != std::string::npos)
                mmw::fail(mmw::ErrorCode::InvalidArgument, "seed must be a non-negative integer");
            try {
                seed = std::stoull(v);
            } catch (const std::exception&) {
                mmw::fail(mmw::ErrorCode::InvalidArgument, "seed out of range");
            }
            s.seed = seed;
        } else if (k == "drops") s.drops = parse_int(key, value);
        else if (k == "samples") s.samples = parse_int(key, value);
        else if (k == "band") s.band = value;
        else if (k == "ue-array") s.ue_array = value;
        else if (k == "bs-array") s.bs_array = value;
        else if (k == "d-shift") s.d_shift = parse_double(key, value);
        else if (k == "no-los") s.no_los = parse_bool(key, value);
        else if (k == "table3") s.table3 = parse_bool(key, value);
        else if (k == "self-test") s.self_test = parse_bool(key, value);
        else if (k == "area") s.area = parse_double(key, value);
        else if (k == "threads") s.threads = parse_int(key, value);
        else if (k == "distance") s.distance = parse_double(key, value);
        else if (k == "map") s.map_csv = value;
        else if (k == "pathloss") s.pathloss_csv = value;
        else if (k == "out") s.out_dir = value;
        else if (k == "format") s.format = value;
        else mmw::fail(mmw::ErrorCode::InvalidArgument, "unknown option '" + k + "'");
        return MMW_OK;
    });
}

mmw_status mmw_experiment_run(mmw_experiment* exp, int* passed) {
    if (!exp) return null_arg("exp");
    return guarded([&] {
        exp->outcome = {};
        exp->outcome = mmw::run_experiment(exp->spec);
        const bool ok = exp->outcome.status == 0;
        if (passed) *passed = ok ? 1 : 0;
        if (!ok) {
            g_last_error = "self-test tolerance exceeded";
            return MMW_ERR_TOLERANCE;
        }
        return MMW_OK;
    });
}

const char* mmw_experiment_summary(const mmw_experiment* exp) { return exp ? exp->outcome.summary.c_str() : ""; }

size_t mmw_experiment_file_count(const mmw_experiment* exp) { return exp ? exp->outcome.files.size() : 0; }

const char* mmw_experiment_file(const mmw_experiment* exp, size_t index) {
    if (!exp || index >= exp->outcome.files.size()) return nullptr;
    return exp->outcome.files[index].c_str();
}

}  // extern "C"

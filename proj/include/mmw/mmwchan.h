/* C interface to the mmWave channel simulator. All handles are opaque; every
 * call that can fail returns an mmw_status and leaves a message retrievable
 * with mmw_last_error() on the calling thread. */
#ifndef MMWCHAN_H
#define MMWCHAN_H

#include <stddef.h>
#include <stdint.h>

#if defined(_WIN32)
#define MMW_API __declspec(dllexport)
#else
#define MMW_API __attribute__((visibility("default")))
#endif

#ifdef __cplusplus
extern "C" {
#endif

typedef enum mmw_status {
    MMW_OK = 0,
    MMW_ERR_INVALID_ARGUMENT = 1,
    MMW_ERR_OUTAGE = 2,
    MMW_ERR_DEGENERATE = 3,
    MMW_ERR_PARSE = 4,
    MMW_ERR_IO = 5,
    MMW_ERR_CONVERGENCE = 6,
    MMW_ERR_TOLERANCE = 7,
    MMW_ERR_INTERNAL = 8
} mmw_status;

/* link states as single letters */
#define MMW_STATE_LOS 'L'
#define MMW_STATE_NLOS 'N'
#define MMW_STATE_OUTAGE 'O'

typedef struct mmw_band mmw_band;
typedef struct mmw_experiment mmw_experiment;

MMW_API const char* mmw_version(void);
/* Message of the last failed call on this thread; "" when none. */
MMW_API const char* mmw_last_error(void);
MMW_API const char* mmw_status_string(mmw_status status);

/* Band parameter cards. Preset names are enumerated by index until NULL. */
MMW_API const char* mmw_band_preset_name(size_t index);
MMW_API mmw_status mmw_band_preset(const char* name, mmw_band** out);
MMW_API mmw_status mmw_band_load(const char* path, mmw_band** out);
MMW_API void mmw_band_free(mmw_band* band);
MMW_API mmw_status mmw_band_get(const mmw_band* band, const char* field, double* value);
MMW_API mmw_status mmw_band_set(mmw_band* band, const char* field, double value);
/* Writes the card as structured text into buf (NUL terminated). *needed gets
 * the full length including the terminator, so a NULL buf sizes the call. */
MMW_API mmw_status mmw_band_to_text(const mmw_band* band, char* buf, size_t len, size_t* needed);

/* Large-scale model */
MMW_API mmw_status mmw_link_state_probabilities(const mmw_band* band, double distance_m, double* p_out,
                                                double* p_los, double* p_nlos);
MMW_API mmw_status mmw_outage_onset_distance(const mmw_band* band, double* distance_m);
MMW_API mmw_status mmw_median_path_loss(const mmw_band* band, double distance_m, char state, double* pl_db);
MMW_API mmw_status mmw_umi_path_loss(double distance_m, double fc_ghz, double* pl_db);
/* Spectral efficiency under the default network configuration. */
MMW_API mmw_status mmw_sinr_to_rate(double sinr_db, double* bps_per_hz);

/* Batch experiments. Commands: channel-stats, bf-analysis, netsim, estimate,
 * dump-channel. Option keys mirror the command-line flags without dashes
 * prefix: config, seed, drops, samples, band, ue-array, bs-array, d-shift,
 * no-los, table3, self-test, area, threads, distance, map, pathloss, out,
 * format. Boolean options take "1"/"0". */
MMW_API mmw_status mmw_experiment_create(const char* command, mmw_experiment** out);
MMW_API void mmw_experiment_free(mmw_experiment* exp);
MMW_API mmw_status mmw_experiment_set(mmw_experiment* exp, const char* key, const char* value);
/* Runs the experiment. *passed is 1 unless a self-test tolerance failed, in
 * which case the call also returns MMW_ERR_TOLERANCE. */
MMW_API mmw_status mmw_experiment_run(mmw_experiment* exp, int* passed);
/* Valid until the next run or free. */
MMW_API const char* mmw_experiment_summary(const mmw_experiment* exp);
MMW_API size_t mmw_experiment_file_count(const mmw_experiment* exp);
MMW_API const char* mmw_experiment_file(const mmw_experiment* exp, size_t index);

#ifdef __cplusplus
}
#endif

#endif

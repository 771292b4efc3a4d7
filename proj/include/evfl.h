#ifndef EVFL_H
#define EVFL_H
/*
 * C API for the event-driven vertical federated learning simulator.
 *
 * All functions are thread-compatible: distinct evfl_config handles may be
 * used from distinct threads; a single handle must not be shared without
 * external synchronization.  Every failure sets a thread-local message
 * readable via evfl_last_error().
 */

#include <stdint.h>

#ifdef __cplusplus
extern "C" {
#endif

typedef enum evfl_status {
    EVFL_OK = 0,
    EVFL_ERR_CONFIG = 1,   /* invalid configuration (parse or validation) */
    EVFL_ERR_RUNTIME = 2,  /* run failed (every sweep point aborted, IO, ...) */
    EVFL_ERR_PARTIAL = 3,  /* some sweep points aborted, others succeeded */
    EVFL_ERR_ARGUMENT = 4  /* NULL handle / malformed argument */
} evfl_status;

typedef struct evfl_config evfl_config;

/* Library semantic version, e.g. "0.1.0". */
const char* evfl_version(void);

/* Thread-local message for the most recent failure ("" when none). */
const char* evfl_last_error(void);

/* Frees strings returned through char** out-parameters. */
void evfl_string_free(char* s);

/* ---- configuration ---------------------------------------------------- */

evfl_status evfl_config_parse(const char* json_text, evfl_config** out);
evfl_status evfl_config_load(const char* path, evfl_config** out);
void evfl_config_free(evfl_config* cfg);

/*
 * EVFL_OK when the configuration is semantically valid.  On EVFL_ERR_CONFIG,
 * *diagnostics_out (when non-NULL) receives a newline-joined report; free it
 * with evfl_string_free.
 */
evfl_status evfl_config_validate(const evfl_config* cfg, char** diagnostics_out);

evfl_status evfl_config_set_output_dir(evfl_config* cfg, const char* dir);
evfl_status evfl_config_set_seeds(evfl_config* cfg, uint64_t data_seed,
                                  uint64_t init_seed, uint64_t activation_seed);
evfl_status evfl_config_get_seeds(const evfl_config* cfg, uint64_t* data_seed,
                                  uint64_t* init_seed, uint64_t* activation_seed);

/* Canonical JSON (sorted keys); free with evfl_string_free. */
evfl_status evfl_config_serialize(const evfl_config* cfg, char** json_out);

/* ---- running ----------------------------------------------------------- */

/*
 * Expands the sweep and runs every point, writing the artifact tree under
 * the output directory (output_dir_or_null overrides the config when given).
 *
 *   EVFL_OK           every sweep point completed
 *   EVFL_ERR_PARTIAL  some points aborted (manifest.csv has details)
 *   EVFL_ERR_RUNTIME  every point aborted, or the run could not start
 *   EVFL_ERR_CONFIG   configuration invalid
 */
evfl_status evfl_run(const evfl_config* cfg, const char* output_dir_or_null);

/* ---- offline regret audit ---------------------------------------------- */

/*
 * Computes the empirical dynamic local regret of a saved gradient trace with
 * window l and decay alpha.  checkpoints_csv_or_null is a comma-separated
 * ascending list of horizons ("1000,3000,10000"); the trace length is always
 * audited and appended when missing.  When out_csv_or_null is given the
 * (T, value) series is written there.  *total_out (when non-NULL) receives
 * the value at the full trace length.
 */
evfl_status evfl_audit_trace(const char* trace_path, uint64_t l, double alpha,
                             const char* checkpoints_csv_or_null,
                             const char* out_csv_or_null, double* total_out);

#ifdef __cplusplus
}
#endif
#endif /* EVFL_H */

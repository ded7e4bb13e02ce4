#ifndef HYBO_HYBO_H
#define HYBO_HYBO_H

/* C interface to the hybo library. Every function returns a hybo_status; on
 * failure hybo_last_error() describes the problem (per thread). Strings
 * returned through char** are owned by the caller and released with
 * hybo_string_free. */

#include <stddef.h>
#include <stdint.h>

#ifdef __cplusplus
extern "C" {
#endif

#if defined(__GNUC__)
#define HYBO_API __attribute__((visibility("default")))
#else
#define HYBO_API
#endif

typedef enum hybo_status {
  HYBO_OK = 0,
  HYBO_CHECK_FAILED = 1,     /* a verification suite reported a failing check */
  HYBO_INVALID_ARGUMENT = 2, /* bad argument or configuration */
  HYBO_NUMERICAL = 3,        /* training aborted on a non-finite value */
  HYBO_IO = 4,               /* file, data or checkpoint problem */
  HYBO_DOMAIN = 5,           /* input outside a function's domain */
  HYBO_INTERNAL = 6
} hybo_status;

typedef struct hybo_config hybo_config;
typedef struct hybo_run hybo_run;

/* Receives one JSON Lines record per epoch. */
typedef void (*hybo_log_fn)(const char* jsonl, void* user);

HYBO_API const char* hybo_version(void);
HYBO_API const char* hybo_last_error(void);
HYBO_API void hybo_string_free(char* s);

/* Runs a verification suite ("all" for every suite). *report_json receives
 * {"passed": bool, "suites": [...]}; HYBO_CHECK_FAILED when any check fails. */
HYBO_API hybo_status hybo_verify(const char* suite, uint64_t seed, size_t trials, char** report_json);

/* Writes a synthetic dataset ("tree-kg", "tree-graph", "barbell") to out_dir.
 * options_json may hold branching, depth and size; NULL uses defaults. */
HYBO_API hybo_status hybo_generate(const char* kind, const char* options_json, uint64_t seed, const char* out_dir,
                                   char** manifest_json);

/* Run configuration parsed from JSON; unknown keys are rejected. */
HYBO_API hybo_status hybo_config_parse(const char* json_text, hybo_config** out);
/* Default configuration of a model kind ("kg", "gcn", "toy-transformer"). */
HYBO_API hybo_status hybo_config_default(const char* model, hybo_config** out);
/* Sets one dotted key, value given as JSON text (e.g. "train.lr", "0.01"). */
HYBO_API hybo_status hybo_config_set(hybo_config* config, const char* key, const char* value_json);
HYBO_API hybo_status hybo_config_to_json(const hybo_config* config, char** json_text);
HYBO_API void hybo_config_free(hybo_config* config);

/* Trains the configured model. On a numerical abort the run (holding the
 * last good parameters) is still returned together with HYBO_NUMERICAL. */
HYBO_API hybo_status hybo_train(const hybo_config* config, hybo_log_fn log, void* user, hybo_run** out);
HYBO_API hybo_status hybo_run_summary(const hybo_run* run, char** summary_json);
HYBO_API hybo_status hybo_run_save(const hybo_run* run, const char* checkpoint_path);
HYBO_API void hybo_run_free(hybo_run* run);

/* Evaluates a checkpoint on split "valid" or "test"; data_path may be NULL to
 * reuse the data source recorded in the checkpoint. */
HYBO_API hybo_status hybo_evaluate(const char* checkpoint_path, const char* data_path, const char* split,
                                   char** metrics_json);

#ifdef __cplusplus
}
#endif

#endif

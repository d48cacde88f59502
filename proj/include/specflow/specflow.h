/* Copyright 2026 The specflow Authors
 * License: Apache 2.0 (http://www.apache.org/licenses/LICENSE-2.0)
 *
 * C interface of the specflow speech restoration library. Objects are opaque
 * handles owned by the caller and released with the matching destroy call.
 * Every fallible call returns a specflow_status; on failure a description is
 * available from specflow_last_error() on the calling thread.
 */

#ifndef SPECFLOW_SPECFLOW_H_
#define SPECFLOW_SPECFLOW_H_

#include <stddef.h>
#include <stdint.h>

#if defined(_WIN32)
#if defined(SPECFLOW_BUILD_SHARED)
#define SPECFLOW_API __declspec(dllexport)
#else
#define SPECFLOW_API __declspec(dllimport)
#endif
#else
#define SPECFLOW_API __attribute__((visibility("default")))
#endif

#ifdef __cplusplus
extern "C" {
#endif

typedef enum specflow_status {
  SPECFLOW_OK = 0,
  SPECFLOW_ERR_INVALID_ARGUMENT = 1,
  SPECFLOW_ERR_SHAPE_MISMATCH = 2,
  SPECFLOW_ERR_NUMERICAL = 3,
  SPECFLOW_ERR_IO = 4,
  SPECFLOW_ERR_FORMAT = 5,
  SPECFLOW_ERR_INCOMPATIBLE = 6,
  SPECFLOW_ERR_STATE = 7,
  SPECFLOW_ERR_BUFFER_TOO_SMALL = 8,
  SPECFLOW_ERR_INTERNAL = 9
} specflow_status;

typedef struct specflow_config specflow_config;
typedef struct specflow_trainer specflow_trainer;
typedef struct specflow_model specflow_model;

/* Receives one line of text (no trailing newline). */
typedef void (*specflow_message_fn)(const char* line, void* user);
/* Receives one training log record; `line` is its JSON encoding. */
typedef void (*specflow_train_log_fn)(int step, double lr, double loss, const char* line,
                                      void* user);

typedef struct specflow_eval_summary {
  size_t count;
  double mean_si_sdr;
  double mean_si_sdr_improvement;
  double mean_lsd;
  double failure_rate;
} specflow_eval_summary;

SPECFLOW_API const char* specflow_version(void);
SPECFLOW_API const char* specflow_status_string(specflow_status status);
/* Message of the last failed call on this thread; empty when none. */
SPECFLOW_API const char* specflow_last_error(void);

/* Text outputs follow one convention: `needed` (optional) receives the
 * length including the terminator; when `capacity` is too small the call
 * returns SPECFLOW_ERR_BUFFER_TOO_SMALL and writes nothing. */

/* `mode` is "pretrain", "finetune" or "scratch" (NULL = pretrain) and selects
 * the learning-rate schedule defaults. */
SPECFLOW_API specflow_status specflow_config_create(const char* mode, specflow_config** out);
SPECFLOW_API void specflow_config_destroy(specflow_config* config);
/* Keys are validated on set; cross-field consistency is checked when the
 * configuration is used. */
SPECFLOW_API specflow_status specflow_config_set(specflow_config* config, const char* key,
                                                 const char* value);
SPECFLOW_API specflow_status specflow_config_get(const specflow_config* config,
                                                 const char* key, char* buffer,
                                                 size_t capacity, size_t* needed);
/* Applies a "key = value" file; each applied override is reported to
 * `on_override` (may be NULL) as "key = value". */
SPECFLOW_API specflow_status specflow_config_load_file(specflow_config* config,
                                                       const char* path,
                                                       specflow_message_fn on_override,
                                                       void* user);
SPECFLOW_API specflow_status specflow_config_dump(const specflow_config* config, char* buffer,
                                                  size_t capacity, size_t* needed);

/* Writes a deterministic toy corpus and returns the manifest path. The corpus
 * is written even when `manifest_path` is too small to hold the path. */
SPECFLOW_API specflow_status specflow_synth_corpus(const char* task, int count, uint64_t seed,
                                                   const char* out_dir, char* manifest_path,
                                                   size_t capacity, size_t* needed);

/* The training mode comes from the configuration ("train.mode"). `init` and
 * `resume` are checkpoint paths or NULL: `init` loads parameters only,
 * `resume` restores the full training state. */
SPECFLOW_API specflow_status specflow_trainer_create(const specflow_config* config,
                                                     const char* manifest, const char* init,
                                                     const char* resume,
                                                     specflow_trainer** out);
SPECFLOW_API void specflow_trainer_destroy(specflow_trainer* trainer);
/* Trains until `until_step` updates are complete (0 = train.total_steps). */
SPECFLOW_API specflow_status specflow_trainer_run(specflow_trainer* trainer, int until_step,
                                                  specflow_train_log_fn on_log, void* user);
SPECFLOW_API specflow_status specflow_trainer_step(const specflow_trainer* trainer,
                                                   int* step);
SPECFLOW_API specflow_status specflow_trainer_save(const specflow_trainer* trainer,
                                                   const char* path);

SPECFLOW_API specflow_status specflow_model_load(const specflow_config* config,
                                                 const char* checkpoint,
                                                 specflow_model** out);
SPECFLOW_API void specflow_model_destroy(specflow_model* model);
SPECFLOW_API specflow_status specflow_model_parameter_count(const specflow_model* model,
                                                            size_t* count);

/* Restores `in_wav` for `task` ("denoise", "bwe", "codec") into `out_wav`. */
SPECFLOW_API specflow_status specflow_enhance_file(const specflow_model* model,
                                                   const specflow_config* config,
                                                   const char* task, const char* in_wav,
                                                   const char* out_wav, uint64_t seed);
/* Target speaker extraction from a mixture with a reference prompt. */
SPECFLOW_API specflow_status specflow_extract_file(const specflow_model* model,
                                                   const specflow_config* config,
                                                   const char* mixture_wav,
                                                   const char* reference_wav,
                                                   const char* out_wav, uint64_t seed);

/* Scores a manifest. `model` may be NULL when every record has an
 * estimate_path. `report_path` (may be NULL) receives per-utterance and
 * summary JSON lines; `on_summary` (may be NULL) receives the summary table
 * line by line. */
SPECFLOW_API specflow_status specflow_evaluate(const specflow_config* config,
                                               const char* manifest,
                                               const specflow_model* model, uint64_t seed,
                                               const char* report_path,
                                               specflow_eval_summary* summary,
                                               specflow_message_fn on_summary, void* user);

SPECFLOW_API specflow_status specflow_si_sdr(const double* estimate, const double* reference,
                                             size_t length, double* out_db);
SPECFLOW_API specflow_status specflow_failure_rate(const double* improvements_db,
                                                   size_t count, double* out_rate);

#ifdef __cplusplus
}
#endif

#endif /* SPECFLOW_SPECFLOW_H_ */

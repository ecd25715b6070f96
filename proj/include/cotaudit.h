/*
 * cotaudit — C API for the CoT faithfulness auditing toolkit.
 *
 * All functions returning cotaudit_status leave a human-readable message
 * for the calling thread in cotaudit_last_error() on failure. Strings
 * returned through char** out-parameters are heap-allocated; release them
 * with cotaudit_string_free().
 */
#ifndef COTAUDIT_H
#define COTAUDIT_H

#include <stddef.h>
#include <stdint.h>

#ifdef __cplusplus
extern "C" {
#endif

typedef enum cotaudit_status {
    COTAUDIT_OK = 0,
    COTAUDIT_ERR_INVALID = 1,
    COTAUDIT_ERR_CONFIG = 2,
    COTAUDIT_ERR_MODEL = 3,
    COTAUDIT_ERR_DATASET = 4,
    COTAUDIT_ERR_IO = 5,
    COTAUDIT_ERR_ENDPOINT = 6,
    COTAUDIT_ERR_INTERNAL = 7
} cotaudit_status;

const char* cotaudit_version(void);

/* Message for the most recent failure on this thread. Valid until the next
 * failing call on the same thread. */
const char* cotaudit_last_error(void);

void cotaudit_string_free(char* s);

/* ------------------------------------------------------------------ */
/* Whole-pipeline entry points. Configs are JSON documents; see the    */
/* README for the schema.                                              */
/* ------------------------------------------------------------------ */

/* Runs a full layerwise audit. On success *summary_csv_out holds the
 * cross-model summary row(s) and *run_dir_out the report directory
 * (run.json, layers.csv, summary.csv, heatmap.svg). Either out-param may
 * be NULL. */
cotaudit_status cotaudit_run_audit(const char* config_json,
                                   char** summary_csv_out, char** run_dir_out);

/* Runs the behavioral CoT-manipulation monitor (normal vs audit-aware
 * elicitation). *report_json_out receives the behavior.json content. */
cotaudit_status cotaudit_run_behavior(const char* config_json,
                                      char** report_json_out, char** run_dir_out);

/* Merges previously written run directories into one summary table. */
cotaudit_status cotaudit_summarize(const char* const* run_dirs, size_t n_dirs,
                                   char** summary_csv_out);

/* Writes a self-contained toy model directory (config.json,
 * model.safetensors, vocab.json, merges.txt) for tests and smoke runs.
 * Pass 0 for any dimension to use the default toy size. */
cotaudit_status cotaudit_write_toy_checkpoint(const char* dir, uint64_t seed,
                                              int n_layers, int n_heads,
                                              int d_model, int d_ff,
                                              int vocab_size, int max_positions);

/* ------------------------------------------------------------------ */
/* Opaque handles for direct engine access.                            */
/* ------------------------------------------------------------------ */

typedef struct cotaudit_model cotaudit_model;
typedef struct cotaudit_tokenizer cotaudit_tokenizer;

cotaudit_status cotaudit_model_open(const char* model_dir, cotaudit_model** out);
void cotaudit_model_close(cotaudit_model* model);
int cotaudit_model_n_layers(const cotaudit_model* model);
int cotaudit_model_d_model(const cotaudit_model* model);
int cotaudit_model_vocab_size(const cotaudit_model* model);

/* Teacher-forced log-likelihood (nats) of ids[answer_start, answer_end)
 * given everything before it. Requires 0 < answer_start < answer_end. */
cotaudit_status cotaudit_model_answer_logprob(const cotaudit_model* model,
                                              const int32_t* ids, size_t n_ids,
                                              size_t answer_start,
                                              size_t answer_end,
                                              double* logprob_out);

cotaudit_status cotaudit_tokenizer_open(const char* model_dir,
                                        cotaudit_tokenizer** out);
void cotaudit_tokenizer_close(cotaudit_tokenizer* tokenizer);

/* Token ids plus per-token byte offsets. *offsets_out holds n pairs
 * (start0, end0, start1, end1, ...). Free the two arrays with
 * cotaudit_buffer_free(). */
cotaudit_status cotaudit_tokenizer_encode(const cotaudit_tokenizer* tokenizer,
                                          const char* text, int32_t** ids_out,
                                          size_t** offsets_out, size_t* n_out);

void cotaudit_buffer_free(void* buffer);

/* ------------------------------------------------------------------ */
/* Metric formula access.                                              */
/* ------------------------------------------------------------------ */

/* CoT Mediation Index: 0 when cot_drop + control_drop < drop_floor, else
 * max(0, cot_drop - control_drop) / max(cot_drop + control_drop,
 * denom_floor). Result is in [0, 1]; Bypass is 1 - CMI. */
cotaudit_status cotaudit_cmi(double cot_drop, double control_drop,
                             double drop_floor, double denom_floor,
                             double* cmi_out);

#ifdef __cplusplus
}
#endif

#endif /* COTAUDIT_H */

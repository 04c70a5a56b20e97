/* SPDX-License-Identifier: Apache-2.0 */

/*
 * llambert: LLM-assisted corpus labeling with a cheap downstream classifier.
 *
 * C interface over the native library. All objects are opaque handles
 * created by a *_create / *_load / *_build style call and released with the
 * matching *_free. Every fallible call returns an llb_status; on failure
 * llb_last_error() describes the problem (thread-local, valid until the next
 * call on the same thread). Strings returned through char** are owned by the
 * caller and must be released with llb_string_free.
 *
 * Label indices: 0 is the first label name (negative / no), 1 the second
 * (positive / yes).
 */

#ifndef LLAMBERT_LLAMBERT_H_
#define LLAMBERT_LLAMBERT_H_

#include <stddef.h>
#include <stdint.h>

#if defined(LLB_BUILDING_LIBRARY)
#define LLB_API __attribute__((visibility("default")))
#else
#define LLB_API
#endif

#ifdef __cplusplus
extern "C" {
#endif

typedef enum llb_status {
  LLB_OK = 0,
  LLB_ERR_USAGE = 1,   /* invalid argument or configuration */
  LLB_ERR_DATA = 2,    /* malformed or inconsistent input data */
  LLB_ERR_IO = 3,      /* filesystem failure */
  LLB_ERR_NUMERIC = 4, /* divergence / non-finite values */
  LLB_ERR_INTERNAL = 5
} llb_status;

typedef enum llb_split {
  LLB_SPLIT_TRAIN = 0,
  LLB_SPLIT_TEST = 1,
  LLB_SPLIT_EXTRA = 2,
  LLB_SPLIT_UNSPLIT = 3
} llb_split;

typedef enum llb_strategy {
  LLB_STRATEGY_BASELINE = 0,
  LLB_STRATEGY_LLAMBERT_TRAIN = 1,
  LLB_STRATEGY_LLAMBERT_TRAIN_EXTRA = 2,
  LLB_STRATEGY_COMBINED = 3 /* llm(extra) then gold(train) */
} llb_strategy;

typedef struct llb_strlist llb_strlist;
typedef struct llb_corpus llb_corpus;
typedef struct llb_prompt_spec llb_prompt_spec;
typedef struct llb_backend_config llb_backend_config;
typedef struct llb_labelset llb_labelset;
typedef struct llb_plan llb_plan;
typedef struct llb_model llb_model;
typedef struct llb_predictions llb_predictions;
typedef struct llb_report llb_report;

typedef struct llb_hyper {
  int dim_bits;           /* hashed feature space is 2^dim_bits (+ bias) */
  double learning_rate;   /* step t of a stage uses learning_rate / sqrt(t) */
  double l2;
  int epochs_per_stage;
  int batch_size;
} llb_hyper;

/* ---- general ------------------------------------------------------------ */

LLB_API const char* llb_version(void);
LLB_API const char* llb_last_error(void);
LLB_API void llb_string_free(char* s);
LLB_API uint64_t llb_fnv1a64(const char* data, size_t len);
LLB_API llb_status llb_file_digest(const char* path, char** hex_out);
LLB_API llb_status llb_split_from_name(const char* name, llb_split* out);
LLB_API const char* llb_split_name(llb_split split);
LLB_API llb_status llb_strategy_from_name(const char* name, llb_strategy* out);
LLB_API const char* llb_strategy_name(llb_strategy strategy);

/* ---- string lists ------------------------------------------------------- */

LLB_API llb_status llb_strlist_create(llb_strlist** out);
LLB_API llb_status llb_strlist_push(llb_strlist* list, const char* s);
LLB_API size_t llb_strlist_size(const llb_strlist* list);
LLB_API const char* llb_strlist_get(const llb_strlist* list, size_t i);
/* One entry per non-empty line. */
LLB_API llb_status llb_strlist_read_lines(const char* path, llb_strlist** out);
LLB_API llb_status llb_strlist_write_lines(const llb_strlist* list, const char* path);
LLB_API void llb_strlist_free(llb_strlist* list);

/* ---- corpus ------------------------------------------------------------- */

LLB_API llb_status llb_corpus_ingest_jsonl(const char* path, const char* task_id,
                                           const char* label0, const char* label1,
                                           llb_corpus** out);
LLB_API llb_status llb_corpus_ingest_imdb_dir(const char* root, llb_corpus** out);
LLB_API llb_status llb_corpus_ingest_umls_tsv(const char* path, llb_split split,
                                              llb_corpus** out);
LLB_API llb_status llb_corpus_load(const char* path, llb_corpus** out);
LLB_API llb_status llb_corpus_save(const llb_corpus* corpus, const char* path);
LLB_API void llb_corpus_free(llb_corpus* corpus);

LLB_API size_t llb_corpus_size(const llb_corpus* corpus);
LLB_API size_t llb_corpus_split_size(const llb_corpus* corpus, llb_split split);
LLB_API const char* llb_corpus_task_id(const llb_corpus* corpus);
LLB_API const char* llb_corpus_label_name(const llb_corpus* corpus, int index);
/* Ascending ids of one split. */
LLB_API llb_status llb_corpus_ids(const llb_corpus* corpus, llb_split split, llb_strlist** out);
/* n distinct ids sampled without replacement, ascending, deterministic. */
LLB_API llb_status llb_corpus_sample(const llb_corpus* corpus, llb_split split, size_t n,
                                     uint64_t seed, llb_strlist** out);

/* ---- prompts ------------------------------------------------------------ */

/* task is "imdb" or "umls". Exemplars come from gold-labeled documents of
 * source_split, skipping `exclude` (may be NULL). */
LLB_API llb_status llb_prompt_spec_default(const char* task, size_t k,
                                           const llb_corpus* exemplar_source,
                                           llb_split source_split, const llb_strlist* exclude,
                                           llb_prompt_spec** out);
/* Plain-text key/value prompt config (see README). */
LLB_API llb_status llb_prompt_spec_from_config(const char* config_path, size_t k,
                                               const llb_corpus* exemplar_source,
                                               llb_split source_split,
                                               const llb_strlist* exclude,
                                               llb_prompt_spec** out);
LLB_API void llb_prompt_spec_free(llb_prompt_spec* spec);
LLB_API uint64_t llb_prompt_spec_hash(const llb_prompt_spec* spec);
LLB_API size_t llb_prompt_spec_exemplar_count(const llb_prompt_spec* spec);
LLB_API const char* llb_prompt_spec_exemplar_id(const llb_prompt_spec* spec, size_t i);
/* Any of flat_text / messages_json / prompt_hash may be NULL. */
LLB_API llb_status llb_prompt_render(const llb_prompt_spec* spec, const llb_corpus* corpus,
                                     const char* doc_id, char** flat_text,
                                     char** messages_json, uint64_t* prompt_hash);
/* *label is 0/1, or -1 with *discard_reason set to "ambiguous"/"no-label"
 * (static storage). */
LLB_API llb_status llb_parse_response(const llb_prompt_spec* spec, const char* response_text,
                                      int* label, const char** discard_reason);

/* ---- LLM backend configuration ------------------------------------------ */

/* kind: "mock" or "http". */
LLB_API llb_status llb_backend_config_create(const char* kind, llb_backend_config** out);
/* Applies backend.* keys from a key/value config file. */
LLB_API llb_status llb_backend_config_load(llb_backend_config* cfg, const char* path);
/* keys: kind, base_url, model, temperature, max_tokens, max_in_flight,
 * retry.max_attempts, retry.initial_backoff_ms, retry.multiplier,
 * error_rate, garbage_rate, seed, api_key_env, timeout_s */
LLB_API llb_status llb_backend_config_set(llb_backend_config* cfg, const char* key,
                                          const char* value);
LLB_API llb_status llb_backend_config_describe(const llb_backend_config* cfg, char** json_out);
LLB_API void llb_backend_config_free(llb_backend_config* cfg);

/* ---- labels ------------------------------------------------------------- */

/* Annotate, parse and discard. cache_path may be NULL (in-memory cache).
 * manifest_out may be NULL. */
LLB_API llb_status llb_label_subset(const llb_corpus* corpus, const llb_strlist* doc_ids,
                                    const llb_prompt_spec* spec,
                                    const llb_backend_config* backend, const char* cache_path,
                                    llb_labelset** out, char** manifest_out);
/* Gold labels of one split; pass split < 0 for every split. */
LLB_API llb_status llb_labelset_gold(const llb_corpus* corpus, int split, llb_labelset** out);
LLB_API llb_status llb_labelset_load(const char* labels_path, const char* discards_path,
                                     const llb_corpus* corpus, llb_labelset** out);
LLB_API llb_status llb_labelset_save(const llb_labelset* set, const char* labels_path,
                                     const char* discards_path);
LLB_API size_t llb_labelset_size(const llb_labelset* set);
LLB_API size_t llb_labelset_discard_count(const llb_labelset* set);
/* *label = -1 when absent. */
LLB_API llb_status llb_labelset_get(const llb_labelset* set, const char* doc_id, int* label);
LLB_API void llb_labelset_free(llb_labelset* set);
LLB_API llb_status llb_agreement(const llb_labelset* a, const llb_labelset* b,
                                 double* disagreement_rate, size_t* intersection);

/* ---- training plans ----------------------------------------------------- */

LLB_API llb_status llb_plan_build(llb_strategy strategy, const llb_corpus* corpus,
                                  const llb_labelset* llm_labels, llb_split eval_split,
                                  llb_plan** out);
LLB_API llb_status llb_plan_export(const llb_plan* plan, const char* dir);
LLB_API llb_status llb_plan_load(const char* dir, llb_plan** out);
LLB_API void llb_plan_free(llb_plan* plan);
LLB_API size_t llb_plan_stage_count(const llb_plan* plan);
LLB_API size_t llb_plan_stage_size(const llb_plan* plan, size_t stage);
LLB_API const char* llb_plan_stage_name(const llb_plan* plan, size_t stage);
LLB_API size_t llb_plan_eval_size(const llb_plan* plan);
LLB_API const char* llb_plan_label_name(const llb_plan* plan, int index);
/* Flips exactly round(fraction * n) labels of one stage in place. */
LLB_API llb_status llb_plan_inject_noise(llb_plan* plan, size_t stage, double fraction,
                                         uint64_t seed, size_t* flipped);
/* Nested subsets of one stage: outs[i] is a copy of the plan whose stage
 * holds sizes[i] examples. */
LLB_API llb_status llb_plan_size_sweep(const llb_plan* plan, size_t stage, const size_t* sizes,
                                       size_t n_sizes, uint64_t seed, llb_plan** outs);
/* Gold labels of the plan's evaluation set. */
LLB_API llb_status llb_plan_eval_labels(const llb_plan* plan, llb_labelset** out);

/* ---- native classifier -------------------------------------------------- */

LLB_API void llb_hyper_default(llb_hyper* out);
LLB_API llb_status llb_model_train(const llb_plan* plan, const llb_hyper* hyper, uint64_t seed,
                                   llb_model** out);
LLB_API llb_status llb_model_save(const llb_model* model, const char* path);
LLB_API llb_status llb_model_load(const char* path, llb_model** out);
LLB_API void llb_model_free(llb_model* model);
LLB_API size_t llb_model_weight_count(const llb_model* model);
LLB_API size_t llb_model_log_length(const llb_model* model);
LLB_API llb_status llb_model_log_entry(const llb_model* model, size_t i, const char** stage,
                                       int* epoch, double* mean_loss);
LLB_API llb_status llb_model_predict_plan(const llb_model* model, const llb_plan* plan,
                                          llb_predictions** out);
LLB_API llb_status llb_model_predict_corpus(const llb_model* model, const llb_corpus* corpus,
                                            llb_split split, llb_predictions** out);

LLB_API llb_status llb_predictions_save(const llb_predictions* preds, const char* path);
LLB_API llb_status llb_predictions_load(const char* path, const char* label0,
                                        const char* label1, llb_predictions** out);
LLB_API size_t llb_predictions_size(const llb_predictions* preds);
LLB_API llb_status llb_predictions_get(const llb_predictions* preds, size_t i,
                                       const char** doc_id, int* label, double* score);
LLB_API void llb_predictions_free(llb_predictions* preds);

/* ---- evaluation --------------------------------------------------------- */

LLB_API llb_status llb_evaluate(const llb_predictions* preds, const llb_labelset* gold,
                                llb_report** out);
LLB_API double llb_report_accuracy(const llb_report* report);
LLB_API size_t llb_report_n(const llb_report* report);
/* confusion[2*gold + predicted] */
LLB_API void llb_report_confusion(const llb_report* report, size_t confusion[4]);
LLB_API llb_status llb_report_set_manifest(llb_report* report, const char* manifest_ref);
LLB_API llb_status llb_report_to_json(const llb_report* report, char** json_out);
LLB_API llb_status llb_report_table(const llb_report* report, char** table_out);
LLB_API llb_status llb_report_from_json(const char* json, llb_report** out);
LLB_API void llb_report_free(llb_report* report);

/* Two-sided 95% Student-t interval over per-seed values (n >= 2). */
LLB_API llb_status llb_ci_over_seeds(const double* values, size_t n, double* mean,
                                     double* half_width);
LLB_API llb_status llb_format_interval(double mean, double half_width, int decimals,
                                       char** out);

LLB_API llb_status llb_sample_errors(const llb_predictions* preds, const llb_labelset* gold,
                                     size_t n, uint64_t seed, llb_strlist** ids_out,
                                     size_t* disagreements);
/* errors_export.csv (doc_id,text) with texts from a plan's eval set or a
 * corpus; exactly one of plan / corpus is non-NULL. */
LLB_API llb_status llb_export_errors_csv(const llb_strlist* ids, const llb_plan* plan,
                                         const llb_corpus* corpus, const char* path);
/* counts[3*row + col]: rows model {positive, negative}, columns human
 * {positive, negative, mixed}. table_out / csv_out may be NULL. */
LLB_API llb_status llb_crosstab_human(const char* annotations_csv, const llb_predictions* preds,
                                      size_t counts[6], char** table_out, char** csv_out);

/* Sweep over noise fractions (kind "noise") or subset sizes ("size"); one
 * train/evaluate job per (x, seed), seeds base_seed + i. stage < 0 means
 * the final stage. */
LLB_API llb_status llb_sweep_run(const llb_plan* plan, const char* kind, const double* xs,
                                 size_t n_xs, size_t n_seeds, uint64_t base_seed,
                                 const llb_hyper* hyper, int stage, unsigned workers,
                                 char** csv_out, char** summary_json_out);
/* reports[i * per_point + s] is seed s of point i. */
LLB_API llb_status llb_sweep_report(const double* xs, const llb_report* const* reports,
                                    size_t n_points, size_t per_point, char** csv_out);

#ifdef __cplusplus
}  /* extern "C" */
#endif

#endif  /* LLAMBERT_LLAMBERT_H_ */

#ifndef GRIDCFC_GRIDCFC_H
#define GRIDCFC_GRIDCFC_H

#include <stddef.h>
#include <stdint.h>

#if defined(_WIN32)
#define GCFC_API __declspec(dllexport)
#else
#define GCFC_API __attribute__((visibility("default")))
#endif

#ifdef __cplusplus
extern "C" {
#endif

typedef enum gcfc_status {
  GCFC_OK = 0,
  GCFC_ERR_INVALID_ARGUMENT = 1,
  GCFC_ERR_IO = 2,
  GCFC_ERR_PARSE = 3,
  GCFC_ERR_INVALID_CASE = 4,
  GCFC_ERR_NUMERICAL = 5,
  GCFC_ERR_EMPTY = 6,
  GCFC_ERR_MISMATCH = 7,
  GCFC_ERR_INTERNAL = 99
} gcfc_status;

typedef struct gcfc_config gcfc_config;
typedef struct gcfc_case gcfc_case;
typedef struct gcfc_batch gcfc_batch;
typedef struct gcfc_matrix gcfc_matrix;
typedef struct gcfc_ranking gcfc_ranking;
typedef struct gcfc_scores gcfc_scores;
typedef struct gcfc_sweep gcfc_sweep;

typedef struct gcfc_risk {
  uint64_t n_samples;
  double served_mw;
  double cfr_mw;
  double std_mw;
  double ci95_half_width;
  double max_loss_mw;
  double risk_small;  /* loss < 10 % of served load */
  double risk_medium; /* 10-30 % */
  double risk_large;  /* > 30 % */
  uint64_t cap_hits;
  uint64_t collapses;
} gcfc_risk;

typedef void (*gcfc_progress_fn)(const char* message, void* user);

GCFC_API const char* gcfc_version(void);
/* Message of the last failed call on this thread; never NULL. */
GCFC_API const char* gcfc_last_error(void);
GCFC_API const char* gcfc_status_name(gcfc_status status);
/* Frees strings returned through char** out parameters. */
GCFC_API void gcfc_string_free(char* s);
/* Progress messages of long runs (validation plans); NULL disables. */
GCFC_API void gcfc_set_progress(gcfc_progress_fn fn, void* user);

/* Configuration */
GCFC_API gcfc_status gcfc_config_default(gcfc_config** out);
/* Relative case paths resolve against the file; GRIDCFC_* environment
   overrides apply when use_env is nonzero. */
GCFC_API gcfc_status gcfc_config_load(const char* path, int use_env, gcfc_config** out);
GCFC_API gcfc_status gcfc_config_from_json(const char* json, gcfc_config** out);
GCFC_API gcfc_status gcfc_config_to_json(const gcfc_config* cfg, char** out);
GCFC_API gcfc_status gcfc_config_set_case_path(gcfc_config* cfg, const char* path);
GCFC_API gcfc_status gcfc_config_set_samples(gcfc_config* cfg, uint64_t n_samples);
GCFC_API gcfc_status gcfc_config_set_seed(gcfc_config* cfg, uint64_t master_seed);
GCFC_API gcfc_status gcfc_config_set_workers(gcfc_config* cfg, int workers);
GCFC_API void gcfc_config_free(gcfc_config* cfg);

/* Grid cases */
/* Loads and scales the case named by the configuration. */
GCFC_API gcfc_status gcfc_case_build(const gcfc_config* cfg, gcfc_case** out);
GCFC_API gcfc_status gcfc_case_load(const char* path, gcfc_case** out);
GCFC_API gcfc_status gcfc_case_hash(const gcfc_case* c, char** out);
GCFC_API gcfc_status gcfc_case_counts(const gcfc_case* c, int* n_buses, int* n_branches);
GCFC_API gcfc_status gcfc_case_branch_label(const gcfc_case* c, int branch_index, char** out);
GCFC_API void gcfc_case_free(gcfc_case* c);

/* Cascade simulation */
GCFC_API gcfc_status gcfc_simulate(const gcfc_case* c, const gcfc_config* cfg, gcfc_batch** out);
GCFC_API gcfc_status gcfc_batch_read(const char* path, gcfc_batch** out);
GCFC_API gcfc_status gcfc_batch_write(const gcfc_batch* b, const char* path);
GCFC_API gcfc_status gcfc_batch_case_hash(const gcfc_batch* b, char** out);
GCFC_API gcfc_status gcfc_batch_risk(const gcfc_batch* b, gcfc_risk* out);
GCFC_API gcfc_status gcfc_batch_size(const gcfc_batch* b, uint64_t* n_samples);
/* One record as a JSON object. */
GCFC_API gcfc_status gcfc_batch_record_json(const gcfc_batch* b, uint64_t index, char** out);
GCFC_API void gcfc_batch_free(gcfc_batch* b);

/* Interaction graph; fails with GCFC_ERR_MISMATCH when the batch was run on
   another case. */
GCFC_API gcfc_status gcfc_interaction_build(const gcfc_batch* b, const gcfc_case* c,
                                            const gcfc_config* cfg, gcfc_matrix** out);
GCFC_API gcfc_status gcfc_matrix_read(const char* path, gcfc_matrix** out);
GCFC_API gcfc_status gcfc_matrix_write(const gcfc_matrix* m, const char* path);
GCFC_API gcfc_status gcfc_matrix_get(const gcfc_matrix* m, int from, int to, double* out);
GCFC_API gcfc_status gcfc_matrix_size(const gcfc_matrix* m, int* n_branches);
GCFC_API gcfc_status gcfc_matrix_write_edges(const gcfc_matrix* m, const char* path,
                                             double threshold);
/* ranking may be NULL; otherwise nodes carry K. */
GCFC_API gcfc_status gcfc_matrix_write_gexf(const gcfc_matrix* m, const gcfc_case* c,
                                            const gcfc_ranking* ranking, const char* path,
                                            double threshold);
GCFC_API void gcfc_matrix_free(gcfc_matrix* m);

/* Weighted HITS ranking. Returns GCFC_ERR_NUMERICAL with *out still set when
   the iteration limit was reached. */
GCFC_API gcfc_status gcfc_rank(const gcfc_matrix* m, const gcfc_config* cfg, gcfc_ranking** out);
GCFC_API gcfc_status gcfc_ranking_info(const gcfc_ranking* r, int* iterations, int* converged);
/* Branch indices by descending K; `order` must hold n_branches entries. */
GCFC_API gcfc_status gcfc_ranking_order(const gcfc_ranking* r, int* order, size_t capacity);
GCFC_API gcfc_status gcfc_ranking_scores(const gcfc_ranking* r, int branch_index, double* auth,
                                         double* hub, double* k);
GCFC_API gcfc_status gcfc_ranking_write_csv(const gcfc_ranking* r, const gcfc_case* c,
                                            const char* path);
GCFC_API void gcfc_ranking_free(gcfc_ranking* r);

/* Structural baselines; metric is "b1", "b2" or "b3". */
GCFC_API gcfc_status gcfc_structural(const gcfc_case* c, const char* metric,
                                     const gcfc_config* cfg, gcfc_scores** out);
GCFC_API gcfc_status gcfc_scores_get(const gcfc_scores* s, int branch_index, double* out);
GCFC_API gcfc_status gcfc_scores_write_csv(const gcfc_scores* s, const gcfc_case* c,
                                           const char* path);
GCFC_API void gcfc_scores_free(gcfc_scores* s);

/* Capacity-upgrade validation. mode "self" uses the first ranking file and
   sweeps its top, middle and bottom groups; mode "cross" compares the top
   group of every named ranking file. Sizes come from the configuration. */
GCFC_API gcfc_status gcfc_validate(const gcfc_case* c, const gcfc_config* cfg, const char* mode,
                                   const char* const* names, const char* const* ranking_paths,
                                   size_t n_rankings, gcfc_sweep** out);
GCFC_API gcfc_status gcfc_sweep_size(const gcfc_sweep* s, size_t* rows);
GCFC_API gcfc_status gcfc_sweep_row(const gcfc_sweep* s, size_t row, char** group, int* size,
                                    gcfc_risk* risk);
GCFC_API gcfc_status gcfc_sweep_write(const gcfc_sweep* s, const char* csv_path,
                                      const char* long_csv_path);
GCFC_API gcfc_status gcfc_sweep_bars(const gcfc_sweep* s, char** out);
GCFC_API void gcfc_sweep_free(gcfc_sweep* s);

#ifdef __cplusplus
}
#endif

#endif

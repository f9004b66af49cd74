/* C interface to the slmrf spatial prediction library.
 *
 * Every function returning slmrf_status reports failures through the status
 * code; slmrf_last_error() then describes the most recent failure on the
 * calling thread. Handles are opaque and owned by the caller, who releases
 * them with the matching *_free function. */
#ifndef SLMRF_SLMRF_H
#define SLMRF_SLMRF_H

#include <stddef.h>
#include <stdint.h>

#ifdef __cplusplus
extern "C" {
#endif

#if defined(_WIN32)
#define SLMRF_API __declspec(dllexport)
#else
#define SLMRF_API __attribute__((visibility("default")))
#endif

typedef enum slmrf_status {
  SLMRF_OK = 0,
  SLMRF_ERR_INPUT = 1,          /* malformed data, schema or arguments */
  SLMRF_ERR_SINGULAR = 2,       /* a matrix could not be factorized */
  SLMRF_ERR_FIT = 3,            /* a model fit could not be completed */
  SLMRF_ERR_NONCONVERGENCE = 4, /* fit finished but the optimizer did not converge */
  SLMRF_ERR_VERSION = 5,        /* unknown or damaged model file */
  SLMRF_ERR_IO = 6,             /* file could not be read or written */
  SLMRF_ERR_INTERNAL = 7
} slmrf_status;

typedef struct slmrf_dataset slmrf_dataset;
typedef struct slmrf_model slmrf_model;

SLMRF_API const char* slmrf_version(void);
SLMRF_API const char* slmrf_status_name(slmrf_status status);
/* Message for the last failure on this thread; empty when none. */
SLMRF_API const char* slmrf_last_error(void);

/* Default worker cap for parallel sections (at least 1). */
SLMRF_API void slmrf_set_threads(int threads);

/* Warnings go to stderr unless a handler is installed; NULL restores stderr. */
typedef void (*slmrf_warning_fn)(const char* message, void* user);
SLMRF_API void slmrf_set_warning_handler(slmrf_warning_fn fn, void* user);

/* ---- datasets ---------------------------------------------------------- */

/* `schema` assigns CSV columns to roles, for example
 * "easting:x,northing:y,response:mmi,categorical:eco,ignore:id".
 * Omit the response for prediction sites. */
SLMRF_API slmrf_status slmrf_dataset_load_csv(const char* path, const char* schema,
                                              slmrf_dataset** out);
SLMRF_API size_t slmrf_dataset_rows(const slmrf_dataset* data);
SLMRF_API size_t slmrf_dataset_cols(const slmrf_dataset* data);
/* Coordinates of row `row`; SLMRF_ERR_INPUT when out of range. */
SLMRF_API slmrf_status slmrf_dataset_location(const slmrf_dataset* data, size_t row,
                                              double* easting, double* northing);
SLMRF_API void slmrf_dataset_free(slmrf_dataset* data);

/* ---- fitting ----------------------------------------------------------- */

typedef struct slmrf_fit_config {
  const char* model;       /* ok, lm, slm, lm-tf, slm-tf, rf, rfrk */
  uint64_t seed;
  int threads;             /* 0: library default */
  size_t knots;            /* reduced-rank knots during pruning; 0: default */
  int trees;
  int mtry;                /* 0: floor(p / 3) */
  int min_node_size;
  int restarts;            /* optimizer starts per covariance fit */
  int max_iterations;      /* likelihood evaluations per start; 0: default (500) */
  int literal_tstat;       /* prune the largest |t| first */
  int in_sample_residuals; /* RFRK: krige in-sample instead of out-of-bag residuals */
} slmrf_fit_config;

/* Fills in the defaults (model "slm", seed 1, 1000 trees, ...). */
SLMRF_API void slmrf_fit_config_init(slmrf_fit_config* config);

/* Per-covariate transformation search; writes
 * covariate,family,lambda1,lambda2,aic to `csv_path`. */
SLMRF_API slmrf_status slmrf_transform(const slmrf_dataset* data, int threads,
                                       const char* csv_path);

/* Returns SLMRF_ERR_NONCONVERGENCE with *out still set when the covariance
 * optimizer stopped before converging. */
SLMRF_API slmrf_status slmrf_model_fit(const slmrf_dataset* data, const slmrf_fit_config* config,
                                       slmrf_model** out);
SLMRF_API slmrf_status slmrf_model_save(const slmrf_model* model, const char* path);
SLMRF_API slmrf_status slmrf_model_load(const char* path, slmrf_model** out);
SLMRF_API void slmrf_model_free(slmrf_model* model);

/* Pipeline label such as "SLM-TF". */
SLMRF_API const char* slmrf_model_label(const slmrf_model* model);
SLMRF_API int slmrf_model_converged(const slmrf_model* model);

/* Writes diagnostics.csv and coefficients.csv, plus the transformation,
 * selection and importance tables when the fit produced them, into the
 * existing directory `dir`. */
SLMRF_API slmrf_status slmrf_model_write_reports(const slmrf_model* model, const char* dir);

/* ---- prediction -------------------------------------------------------- */

/* Interval bounds are Gaussian for the linear and kriging models and QRF
 * quantiles for "rf", whose variance is NaN. */
typedef struct slmrf_prediction {
  double mean;
  double variance;
  double lo90, hi90;
  double lo95, hi95;
} slmrf_prediction;

/* `out` must hold slmrf_dataset_rows(sites) entries. */
SLMRF_API slmrf_status slmrf_model_predict(const slmrf_model* model, const slmrf_dataset* sites,
                                           slmrf_prediction* out, size_t capacity);

/* ---- evaluation -------------------------------------------------------- */

/* k-fold cross-validation of each listed model ("ok,slm,rf"; NULL for all
 * seven). `fast` reuses the full-data recipe in every fold instead of
 * re-running transformation search and selection. Writes
 * Model,k,RMSPE,PIC90,PIC95 to `table_csv` and interval-length summaries to
 * `lengths_csv` (may be NULL). */
SLMRF_API slmrf_status slmrf_cross_validate(const slmrf_dataset* data,
                                            const slmrf_fit_config* config, const char* models,
                                            int folds, int fast, const char* table_csv,
                                            const char* lengths_csv);

typedef struct slmrf_sim_config {
  uint64_t seed;
  int replicates;
  int n_train;
  int n_test;
  int trees;
  int mtry;
  int restarts;
  int threads;
  int in_sample_residuals;
} slmrf_sim_config;

SLMRF_API void slmrf_sim_config_init(slmrf_sim_config* config);

/* Runs the listed simulation cases (1..8) and writes one row per case. */
SLMRF_API slmrf_status slmrf_simulate(const slmrf_sim_config* config, const int* cases,
                                      size_t case_count, const char* table_csv);

#ifdef __cplusplus
}
#endif

#endif /* SLMRF_SLMRF_H */

#ifndef IVATE_IVATE_H
#define IVATE_IVATE_H

/* C interface to the ivate library. Every call returns an ivate_status;
 * on failure the message is available from ivate_last_error() on the same
 * thread until the next failing call. Objects are opaque and owned by the
 * caller once returned; release them with the matching *_free function.
 * Configurations are JSON documents with the same keys as the CLI config. */

#include <stddef.h>
#include <stdint.h>

#ifdef __cplusplus
extern "C" {
#endif

#if defined(_WIN32)
#define IVATE_API __declspec(dllexport)
#else
#define IVATE_API __attribute__((visibility("default")))
#endif

typedef enum ivate_status {
  IVATE_OK = 0,
  IVATE_ERR_INVALID_ARGUMENT = 1,
  IVATE_ERR_DATA = 2,
  IVATE_ERR_RANK_DEFICIENT = 3,
  IVATE_ERR_SEPARATION = 4,
  IVATE_ERR_NON_CONVERGENCE = 5,
  IVATE_ERR_SINGULAR_JACOBIAN = 6,
  IVATE_ERR_NON_FINITE = 7,
  IVATE_ERR_DENOMINATOR_FLOOR = 8,
  IVATE_ERR_QUADRATURE = 9,
  IVATE_ERR_EXCESS_FAILURES = 10,
  IVATE_ERR_UNSUPPORTED = 11,
  IVATE_ERR_IO = 12,
  IVATE_ERR_USAGE = 13,
  IVATE_ERR_INTERNAL = 14
} ivate_status;

typedef struct ivate_table ivate_table;
typedef struct ivate_fit_result ivate_fit_result;
typedef struct ivate_sim_result ivate_sim_result;
typedef struct ivate_riesz_result ivate_riesz_result;

IVATE_API const char* ivate_version(void);
IVATE_API const char* ivate_status_name(ivate_status status);
IVATE_API const char* ivate_last_error(void);
/* Machine-readable {"error": {"kind", "message"}} record for the last failure. */
IVATE_API const char* ivate_last_error_json(void);

/* Strings handed out by the library. */
IVATE_API void ivate_string_free(char* s);

/* ---- tables ---------------------------------------------------------- */

/* instrument: "continuous", "binary" or "categorical:K". */
IVATE_API ivate_status ivate_table_from_csv(const char* path, const char* instrument, ivate_table** out);
/* x is row-major n x p_covariates without the intercept column.
 * z_levels = 0 marks a continuous instrument, K >= 2 a categorical one. */
IVATE_API ivate_status ivate_table_from_arrays(size_t n, size_t p_covariates, const double* y, const double* d,
                                               const double* z, const double* x, int z_levels, ivate_table** out);
IVATE_API ivate_status ivate_table_dims(const ivate_table* table, size_t* n, size_t* p);
IVATE_API ivate_status ivate_table_dichotomize(const ivate_table* table, double q, ivate_table** out);
IVATE_API ivate_status ivate_table_write_csv(const ivate_table* table, const char* path);
/* Draws a table from the simulation settings ("I" or "II") using stream (seed, stream). */
IVATE_API ivate_status ivate_table_simulate(const char* setting, size_t n, uint64_t seed, uint64_t stream,
                                            ivate_table** out);
IVATE_API void ivate_table_free(ivate_table* table);

/* ---- fit ------------------------------------------------------------- */

/* Fits on `table`; the config's "input" key is ignored. */
IVATE_API ivate_status ivate_fit(const ivate_table* table, const char* config_json, ivate_fit_result** out);
/* Reads the CSV named by the config's "input" key. */
IVATE_API ivate_status ivate_fit_config(const char* config_json, ivate_fit_result** out);
IVATE_API size_t ivate_fit_count(const ivate_fit_result* result);
/* se and ci are NaN when no uncertainty was requested. */
IVATE_API ivate_status ivate_fit_estimate(const ivate_fit_result* result, size_t index, const char** estimator,
                                          double* point, double* se, double* ci_lower, double* ci_upper);
IVATE_API ivate_status ivate_fit_json(const ivate_fit_result* result, char** out);
IVATE_API ivate_status ivate_fit_csv(const ivate_fit_result* result, char** out);
IVATE_API void ivate_fit_free(ivate_fit_result* result);

/* ---- simulate -------------------------------------------------------- */

IVATE_API ivate_status ivate_simulate(const char* config_json, ivate_sim_result** out);
IVATE_API ivate_status ivate_sim_table_csv(const ivate_sim_result* result, char** out);
IVATE_API ivate_status ivate_sim_long_csv(const ivate_sim_result* result, char** out);
IVATE_API ivate_status ivate_sim_json(const ivate_sim_result* result, char** out);
IVATE_API void ivate_sim_free(ivate_sim_result* result);

/* Monte Carlo mean of delta(X) at the default parameters of a setting. */
IVATE_API ivate_status ivate_true_ate(const char* setting, uint64_t draws, uint64_t seed, double* value,
                                      double* mcse);

/* ---- riesz-check ------------------------------------------------------ */

IVATE_API ivate_status ivate_riesz_check(const char* config_json, ivate_riesz_result** out);
IVATE_API int ivate_riesz_all_pass(const ivate_riesz_result* result);
IVATE_API ivate_status ivate_riesz_json(const ivate_riesz_result* result, char** out);
IVATE_API void ivate_riesz_free(ivate_riesz_result* result);

#ifdef __cplusplus
}
#endif

#endif

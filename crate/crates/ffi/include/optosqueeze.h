#ifndef OPTOSQUEEZE_H
#define OPTOSQUEEZE_H

/* Generated by cbindgen from src/lib.rs; do not edit. */

#include <stdarg.h>
#include <stdbool.h>
#include <stddef.h>
#include <stdint.h>
#include <stdlib.h>

// Result of every fallible call.
typedef enum OsqStatus {
  OSQ_STATUS_OK = 0,
  OSQ_STATUS_NULL_POINTER = 1,
  OSQ_STATUS_INVALID_PARAMETER = 2,
  OSQ_STATUS_CONFIG = 3,
  OSQ_STATUS_NUMERICAL = 4,
  OSQ_STATUS_OUT_OF_WINDOW = 5,
  OSQ_STATUS_IO = 6,
  OSQ_STATUS_BUFFER_TOO_SMALL = 7,
  OSQ_STATUS_PANIC = 8,
} OsqStatus;

typedef enum OsqModel {
  OSQ_MODEL_QUANTUM = 0,
  OSQ_MODEL_CLASSICAL = 1,
  OSQ_MODEL_SC1 = 2,
  OSQ_MODEL_SC2 = 3,
  OSQ_MODEL_SC3 = 4,
  OSQ_MODEL_KERR = 5,
} OsqModel;

typedef enum OsqInit {
  OSQ_INIT_ZERO = 0,
  OSQ_INIT_THERMAL_MATCHED = 1,
} OsqInit;

typedef enum OsqColumn {
  OSQ_COLUMN_TIME = 0,
  OSQ_COLUMN_VAR_MIN = 1,
  OSQ_COLUMN_THETA_STAR = 2,
  OSQ_COLUMN_VAR_THETA0 = 3,
  // Zero-filled for analytic series.
  OSQ_COLUMN_STDERR = 4,
} OsqColumn;

// Physical parameters.
typedef struct OsqParams OsqParams;

// A time series of the angle-minimized variance.
typedef struct OsqSeries OsqSeries;

#ifdef __cplusplus
extern "C" {
#endif // __cplusplus

// Library version as a static NUL-terminated string.
const char *osq_version(void);

// Copy the last error message of this thread into `buf` (NUL terminated,
// truncated to `len`). Returns the full message length without the NUL.
//
// # Safety
// `buf` must be null or point to `len` writable bytes.
size_t osq_last_error(char *buf, size_t len);

// Defaults (`omega = 1`, `Gamma = 0.01`, no dissipation) with the given
// amplitude and coupling.
//
// # Safety
// `out` must be null or writable.
enum OsqStatus osq_params_new(double alpha, double k, struct OsqParams **out);

// Set a field by its configuration name (`alpha`, `k`, `omega`, `nbar_q`,
// `sigma2_cl`, `Gamma`, `kappa`, `gamma_m`, `nbar_bath`). The handle is
// unchanged when the result would be invalid.
//
// # Safety
// `params` must be a live handle and `name` a NUL-terminated string.
enum OsqStatus osq_params_set(struct OsqParams *params, const char *name, double value);

// # Safety
// `params` must be a live handle and `out` writable.
enum OsqStatus osq_params_get(const struct OsqParams *params, const char *name, double *out);

// # Safety
// `params` must be null or a handle not yet freed.
void osq_params_free(struct OsqParams *params);

// `Var_theta` of a closed-form model at `t_over_tau` mechanical periods.
//
// # Safety
// `params` must be a live handle and `out` writable.
enum OsqStatus osq_variance(const struct OsqParams *params,
                            enum OsqModel model,
                            double theta,
                            double t_over_tau,
                            double *out);

// Closed-form series at `n_times` times (in periods), minimized over a grid
// of `theta_grid` angles.
//
// # Safety
// `times` must point to `n_times` doubles; `params` live; `out` writable.
enum OsqStatus osq_analytic_series(const struct OsqParams *params,
                                   enum OsqModel model,
                                   const double *times,
                                   size_t n_times,
                                   size_t theta_grid,
                                   struct OsqSeries **out);

// Monte Carlo estimate of the classical description with `n_samples`
// phase-space samples drawn from stream `stream` of `seed`.
//
// # Safety
// As [`osq_analytic_series`].
enum OsqStatus osq_classical_ensemble(const struct OsqParams *params,
                                      size_t n_samples,
                                      const double *times,
                                      size_t n_times,
                                      size_t theta_grid,
                                      uint64_t seed,
                                      uint64_t stream,
                                      struct OsqSeries **out);

// Hybrid measurement ensemble of `n_traj` trajectories on `[0, t_final]`
// (periods) with step `dt_over_tau` and samples every `stride` periods.
// `out_conditional` receives the mean conditional variance and
// `out_state` the variance of the averaged state; either may be null.
//
// # Safety
// `params` live; non-null out-pointers writable.
enum OsqStatus osq_hybrid_ensemble(const struct OsqParams *params,
                                   size_t n_traj,
                                   double t_final,
                                   double dt_over_tau,
                                   double stride,
                                   enum OsqInit init,
                                   bool cavity_decay,
                                   size_t theta_grid,
                                   uint64_t seed,
                                   uint64_t stream,
                                   struct OsqSeries **out_conditional,
                                   struct OsqSeries **out_state);

// Number of samples, 0 for a null handle.
//
// # Safety
// `series` must be null or live.
size_t osq_series_len(const struct OsqSeries *series);

// Copy one column into `buf`, which must hold at least `osq_series_len` values.
//
// # Safety
// `series` live; `buf` writable for `len` doubles.
enum OsqStatus osq_series_column(const struct OsqSeries *series,
                                 enum OsqColumn column,
                                 double *buf,
                                 size_t len);

// Write the series as CSV to `path`.
//
// # Safety
// `series` live; `path` a NUL-terminated string.
enum OsqStatus osq_series_write_csv(const struct OsqSeries *series, const char *path);

// # Safety
// `series` must be null or a handle not yet freed.
void osq_series_free(struct OsqSeries *series);

// Run a JSON experiment configuration (as accepted by the command-line
// tool) and write its outputs into `out_dir`, or into the directory the
// configuration names when `out_dir` is null.
//
// # Safety
// `config_json` must be a NUL-terminated string; `out_dir` null or one.
enum OsqStatus osq_run_config(const char *config_json, const char *out_dir);

#ifdef __cplusplus
}  // extern "C"
#endif  // __cplusplus

#endif  /* OPTOSQUEEZE_H */

#ifndef MICROGRID_DSE_H
#define MICROGRID_DSE_H

/* Generated by cbindgen; do not edit. */

#include <stdbool.h>
#include <stddef.h>

/**
 * Status code of every fallible call.
 */
typedef enum MdseStatus {
  MDSE_STATUS_OK = 0,
  MDSE_STATUS_NULL_POINTER = 1,
  MDSE_STATUS_INVALID_UTF8 = 2,
  /**
   * Malformed or inconsistent configuration.
   */
  MDSE_STATUS_CONFIG = 3,
  /**
   * Network or measurement model rejected (unobservable, bad topology).
   */
  MDSE_STATUS_MODEL = 4,
  /**
   * Numerical failure (singular system, no redundancy).
   */
  MDSE_STATUS_NUMERIC = 5,
  MDSE_STATUS_IO = 6,
  MDSE_STATUS_OUT_OF_RANGE = 7,
  /**
   * Internal panic caught at the boundary.
   */
  MDSE_STATUS_PANIC = 8,
} MdseStatus;

typedef enum MdseVerdict {
  MDSE_VERDICT_NORMAL = 0,
  MDSE_VERDICT_CYBER_ATTACK = 1,
  MDSE_VERDICT_FAULT = 2,
  MDSE_VERDICT_COMBINED = 3,
  MDSE_VERDICT_UNRESOLVED = 4,
} MdseVerdict;

typedef enum MdseDecisionKind {
  MDSE_DECISION_KIND_ALERT = 0,
  MDSE_DECISION_KIND_TRIP = 1,
  MDSE_DECISION_KIND_UNRESOLVED = 2,
} MdseDecisionKind;

/**
 * Linear WLS problem assembled from raw rows.
 */
typedef struct MdseEstimator MdseEstimator;

/**
 * Result of a completed scenario run.
 */
typedef struct MdseRun MdseRun;

/**
 * One estimated window.
 */
typedef struct MdseWindow {
  double time_s;
  double zeta;
  size_t nu;
  double confidence;
  double area;
  enum MdseVerdict verdict;
  bool alert;
  bool trip;
} MdseWindow;

typedef struct MdseDecision {
  enum MdseDecisionKind kind;
  enum MdseVerdict verdict;
  double time_s;
  size_t window;
  size_t cause_window;
  /**
   * Negative when no matching event is scheduled.
   */
  double latency_s;
} MdseDecision;

#ifdef __cplusplus
extern "C" {
#endif // __cplusplus

/**
 * Last error message of the calling thread; empty after a successful call.
 * The pointer stays valid until the next call on the same thread.
 */
const char *mdse_last_error_message(void);

/**
 * Library version as a static NUL-terminated string.
 */
const char *mdse_version(void);

/**
 * Chi-square confidence `1 - F(zeta; nu)`.
 *
 * # Safety
 * `out` must be a valid pointer to a writable double.
 */
enum MdseStatus mdse_confidence(double zeta, size_t nu, double *out);

/**
 * Run a scenario given as a JSON config string.
 *
 * # Safety
 * `json` must be a NUL-terminated string and `out` a valid pointer.
 */
enum MdseStatus mdse_run_from_json(const char *json, struct MdseRun **out);

/**
 * Run a built-in case (`case1` .. `case4`), optionally cut to `duration_s`
 * seconds when it is positive.
 *
 * # Safety
 * `name` must be a NUL-terminated string and `out` a valid pointer.
 */
enum MdseStatus mdse_run_builtin(const char *name, double duration_s, struct MdseRun **out);

/**
 * Release a run handle. Null is ignored.
 *
 * # Safety
 * `run` must come from `mdse_run_*` and not be freed twice.
 */
void mdse_run_free(struct MdseRun *run);

/**
 * Number of estimated windows; 0 for a null handle.
 *
 * # Safety
 * `run` must be null or a live handle.
 */
size_t mdse_run_window_count(const struct MdseRun *run);

/**
 * # Safety
 * `run` must be a live handle and `out` a valid pointer.
 */
enum MdseStatus mdse_run_window(const struct MdseRun *run, size_t index, struct MdseWindow *out);

/**
 * Number of emitted decisions; 0 for a null handle.
 *
 * # Safety
 * `run` must be null or a live handle.
 */
size_t mdse_run_decision_count(const struct MdseRun *run);

/**
 * # Safety
 * `run` must be a live handle and `out` a valid pointer.
 */
enum MdseStatus mdse_run_decision(const struct MdseRun *run,
                                  size_t index,
                                  struct MdseDecision *out);

/**
 * Run report as JSON, owned by the handle; null for a null handle.
 *
 * # Safety
 * `run` must be null or a live handle.
 */
const char *mdse_run_report_json(const struct MdseRun *run);

/**
 * Write trace, decisions, report and config files into `dir`.
 *
 * # Safety
 * `run` must be a live handle and `dir` a NUL-terminated string.
 */
enum MdseStatus mdse_run_write_outputs(const struct MdseRun *run, const char *dir);

/**
 * Build a linear estimator `z = H x + e` from a row-major `rows x states`
 * matrix and per-row standard deviations.
 *
 * # Safety
 * `h` must hold `rows * states` doubles, `sigma` `rows` doubles, and `out`
 * must be a valid pointer.
 */
enum MdseStatus mdse_estimator_new(size_t states,
                                   size_t rows,
                                   const double *h,
                                   const double *sigma,
                                   struct MdseEstimator **out);

/**
 * Degrees of freedom `rows - states`; 0 for a null handle.
 *
 * # Safety
 * `est` must be null or a live handle.
 */
size_t mdse_estimator_dof(const struct MdseEstimator *est);

/**
 * Solve for `x` given `z`. `x_out` receives `states` doubles; `zeta_out` and
 * `confidence_out` may be null.
 *
 * # Safety
 * `z` must hold `rows` doubles and `x_out` `states` doubles.
 */
enum MdseStatus mdse_estimator_solve(const struct MdseEstimator *est,
                                     const double *z,
                                     double *x_out,
                                     double *zeta_out,
                                     double *confidence_out);

/**
 * Release an estimator. Null is ignored.
 *
 * # Safety
 * `est` must come from `mdse_estimator_new` and not be freed twice.
 */
void mdse_estimator_free(struct MdseEstimator *est);

#ifdef __cplusplus
}  // extern "C"
#endif  // __cplusplus

#endif  /* MICROGRID_DSE_H */

/* C ABI for the shadowcorr dual-connectivity reliability library. */

#ifndef SHADOWCORR_H
#define SHADOWCORR_H

/* Generated with cbindgen:0.29.4 */

#include <stdbool.h>
#include <stdint.h>

/**
 * Status of an FFI call.
 */
typedef enum ScStatus {
  SC_STATUS_OK = 0,
  /**
   * An input was outside the operation's domain.
   */
  SC_STATUS_DOMAIN = 1,
  /**
   * A degenerate scenario or correlation (constant indicator, |rho_h| = 1).
   */
  SC_STATUS_DEGENERATE = 2,
  /**
   * The inversion target is outside the attainable range.
   */
  SC_STATUS_UNATTAINABLE = 3,
  /**
   * Too few Monte Carlo events to form an estimate.
   */
  SC_STATUS_INSUFFICIENT_EVENTS = 4,
  /**
   * Invalid simulation configuration.
   */
  SC_STATUS_INVALID_CONFIG = 5,
  /**
   * Internal numerical failure.
   */
  SC_STATUS_INTERNAL = 6,
  /**
   * A required pointer argument was null.
   */
  SC_STATUS_NULL_POINTER = 7,
} ScStatus;

/**
 * Monte Carlo estimator selector.
 */
typedef enum ScMethod {
  SC_METHOD_PLAIN = 0,
  SC_METHOD_IMPORTANCE = 1,
} ScMethod;

/**
 * Opaque dual-link scenario under construction.
 */
typedef struct ScScenario ScScenario;

/**
 * Forward-mapping outputs for a scenario.
 */
typedef struct ScCorrelation {
  double beta1;
  double beta2;
  double eps1;
  double eps2;
  double rho_h;
  double joint_failure;
  double rho;
  double sigma_ind1;
  double sigma_ind2;
} ScCorrelation;

/**
 * A Monte Carlo estimate with its standard error.
 */
typedef struct ScEstimate {
  double estimate;
  double std_error;
  uint64_t n_samples;
} ScEstimate;

#ifdef __cplusplus
extern "C" {
#endif // __cplusplus

/**
 * Message describing the most recent failure on this thread. The pointer
 * stays valid until the next failing call on the same thread.
 */
const char *sc_last_error_message(void);

/**
 * Standard-normal density.
 *
 * # Safety
 * `out` must point to a writable double.
 */
enum ScStatus sc_normal_pdf(double x, double *out);

/**
 * Upper-tail probability Q(x) = P(Z > x).
 *
 * # Safety
 * `out` must point to a writable double.
 */
enum ScStatus sc_q_function(double x, double *out);

/**
 * Inverse Q-function for p in (0, 1).
 *
 * # Safety
 * `out` must point to a writable double.
 */
enum ScStatus sc_q_inverse(double p, double *out);

/**
 * Joint upper-orthant probability P(X1 > b1, X2 > b2) under shadowing
 * correlation rho_h.
 *
 * # Safety
 * `out` must point to a writable double.
 */
enum ScStatus sc_upper_tail(double b1, double b2, double rho_h, double *out);

/**
 * Largest event correlation attainable for the given per-link failure
 * probabilities.
 *
 * # Safety
 * `out` must point to a writable double.
 */
enum ScStatus sc_max_event_correlation(double eps1, double eps2, double *out);

/**
 * rho_h whose forward image equals `rho_target` for the given marginals.
 *
 * # Safety
 * `out` must point to a writable double.
 */
enum ScStatus sc_invert_correlation(double rho_target, double eps1, double eps2, double *out);

/**
 * The reference mapping table at eps = 1e-4: fills two arrays of length 8
 * with the tabulated rho_h values and the corresponding rho values.
 *
 * # Safety
 * `rho_h_out` and `rho_out` must point to writable arrays of 8 doubles.
 */
enum ScStatus sc_table(double *rho_h_out, double *rho_out);

/**
 * Create an empty scenario. Free with [`sc_scenario_free`].
 */
struct ScScenario *sc_scenario_new(void);

/**
 * Release a scenario created by [`sc_scenario_new`].
 *
 * # Safety
 * `scenario` must be a pointer returned by [`sc_scenario_new`] that has
 * not been freed yet, or null.
 */
void sc_scenario_free(struct ScScenario *scenario);

/**
 * Specify link `index` (0 or 1) by its normalized margin.
 *
 * # Safety
 * `scenario` must be a live handle from [`sc_scenario_new`].
 */
enum ScStatus sc_scenario_set_link_beta(struct ScScenario *scenario, uint32_t index, double beta);

/**
 * Specify link `index` (0 or 1) by its failure probability.
 *
 * # Safety
 * `scenario` must be a live handle from [`sc_scenario_new`].
 */
enum ScStatus sc_scenario_set_link_epsilon(struct ScScenario *scenario,
                                           uint32_t index,
                                           double epsilon);

/**
 * Specify link `index` (0 or 1) by its link budget (dBm/dB).
 *
 * # Safety
 * `scenario` must be a live handle from [`sc_scenario_new`].
 */
enum ScStatus sc_scenario_set_link_budget(struct ScScenario *scenario,
                                          uint32_t index,
                                          double p_t_dbm,
                                          double p_l_db,
                                          double p_th_dbm,
                                          double sigma_db);

/**
 * Set the shadowing cross-correlation.
 *
 * # Safety
 * `scenario` must be a live handle from [`sc_scenario_new`].
 */
enum ScStatus sc_scenario_set_rho_h(struct ScScenario *scenario, double rho_h);

/**
 * Forward mapping for a fully specified scenario.
 *
 * # Safety
 * `scenario` must be a live handle; `out` must point to a writable
 * [`ScCorrelation`].
 */
enum ScStatus sc_scenario_correlation(struct ScScenario *scenario, struct ScCorrelation *out);

/**
 * Residual end-to-end failure probability under packet duplication.
 *
 * # Safety
 * `scenario` must be a live handle; `out` must point to a writable double.
 */
enum ScStatus sc_scenario_dual_failure(struct ScScenario *scenario, double *out);

/**
 * Monte Carlo estimate of the joint failure probability.
 *
 * # Safety
 * `scenario` must be a live handle; `out` must point to a writable
 * [`ScEstimate`].
 */
enum ScStatus sc_scenario_estimate_joint_failure(struct ScScenario *scenario,
                                                 uint64_t n_samples,
                                                 uint64_t seed,
                                                 enum ScMethod method,
                                                 uint32_t batch_count,
                                                 struct ScEstimate *out);

/**
 * Monte Carlo estimate of the failure-event correlation (plain method).
 *
 * # Safety
 * `scenario` must be a live handle; `out` must point to a writable
 * [`ScEstimate`].
 */
enum ScStatus sc_scenario_estimate_event_correlation(struct ScScenario *scenario,
                                                     uint64_t n_samples,
                                                     uint64_t seed,
                                                     uint32_t batch_count,
                                                     struct ScEstimate *out);

#ifdef __cplusplus
}  // extern "C"
#endif  // __cplusplus

#endif  /* SHADOWCORR_H */

#ifndef PMSM_SAT_H
#define PMSM_SAT_H

/* Generated by cbindgen from src/lib.rs; do not edit. */

#include <stdarg.h>
#include <stdbool.h>
#include <stddef.h>
#include <stdint.h>
#include <stdlib.h>

/**
 * Result code of every call.
 */
typedef enum PmsmStatus {
  PMSM_STATUS_OK = 0,
  PMSM_STATUS_NULL_POINTER = 1,
  PMSM_STATUS_INVALID_ARGUMENT = 2,
  PMSM_STATUS_NON_CONVERGENCE = 3,
  PMSM_STATUS_STEP_TOO_LARGE = 4,
  PMSM_STATUS_TOO_SHORT = 5,
  PMSM_STATUS_UNRESOLVED = 6,
  PMSM_STATUS_ZERO_RIPPLE = 7,
  PMSM_STATUS_RANK_DEFICIENT = 8,
  PMSM_STATUS_NON_ZERO_MEAN = 9,
  PMSM_STATUS_UNSETTLED = 10,
  PMSM_STATUS_IO = 11,
  PMSM_STATUS_PANIC = 12,
} PmsmStatus;

typedef enum PmsmWaveformKind {
  PMSM_WAVEFORM_KIND_SQUARE = 0,
  PMSM_WAVEFORM_KIND_SINE = 1,
  /**
   * Uses the `sampled` handle of the injection.
   */
  PMSM_WAVEFORM_KIND_SAMPLED = 2,
} PmsmWaveformKind;

typedef enum PmsmColumn {
  PMSM_COLUMN_TIME = 0,
  PMSM_COLUMN_VOLTAGE_D = 1,
  PMSM_COLUMN_VOLTAGE_Q = 2,
  PMSM_COLUMN_CURRENT_D = 3,
  PMSM_COLUMN_CURRENT_Q = 4,
  PMSM_COLUMN_FLUX_D = 5,
  PMSM_COLUMN_FLUX_Q = 6,
} PmsmColumn;

/**
 * Motor parameters (opaque).
 */
typedef struct PmsmMotor PmsmMotor;

/**
 * Sampled run: time, voltages, currents and optional fluxes (opaque).
 */
typedef struct PmsmTrace PmsmTrace;

/**
 * Injection waveform (opaque); only needed for sampled waveforms.
 */
typedef struct PmsmWaveform PmsmWaveform;

typedef struct PmsmSaturation {
  double a30;
  double a12;
  double a40;
  double a22;
  double a04;
} PmsmSaturation;

/**
 * A d-q pair: flux (Wb), current (A) or ripple amplitude (A).
 */
typedef struct PmsmPair {
  double d;
  double q;
} PmsmPair;

/**
 * Symmetric 2x2 differential inductance (H).
 */
typedef struct PmsmInductance {
  double dd;
  double dq;
  double qq;
} PmsmInductance;

/**
 * `u = u_bar + u_tilde * f(omega * t)` on both axes.
 */
typedef struct PmsmInjection {
  double u_bar_d;
  double u_bar_q;
  double u_tilde_d;
  double u_tilde_q;
  /**
   * rad/s
   */
  double omega;
  enum PmsmWaveformKind kind;
  /**
   * Required when `kind` is sampled, ignored otherwise; not owned.
   */
  const struct PmsmWaveform *sampled;
} PmsmInjection;

typedef struct PmsmRipple {
  struct PmsmPair i_bar;
  struct PmsmPair i_tilde;
  struct PmsmPair residual_rms;
  size_t periods_used;
  /**
   * Standard deviation of `i_tilde` per unit current-noise standard deviation.
   */
  double tilde_sensitivity;
} PmsmRipple;

/**
 * Identification experiment on a symmetric bias grid `k * step`, `|k * step| <= max`.
 */
typedef struct PmsmPlan {
  /**
   * rad/s
   */
  double omega;
  enum PmsmWaveformKind kind;
  const struct PmsmWaveform *sampled;
  double u_tilde;
  double id_max;
  double id_step;
  double iq_max;
  double iq_step;
  /**
   * 0 selects the default.
   */
  uint32_t steps_per_period;
  /**
   * 0 selects the default.
   */
  uint32_t measure_periods;
  /**
   * Half-width of uniform current noise (A).
   */
  double noise_amp;
} PmsmPlan;

/**
 * Identified inductances (H) and saturation coefficients with 1-sigma values.
 */
typedef struct PmsmEstimate {
  double ld;
  double lq;
  struct PmsmSaturation sat;
  double sigma_ld;
  double sigma_lq;
  struct PmsmSaturation sigma_sat;
} PmsmEstimate;

#ifdef __cplusplus
extern "C" {
#endif // __cplusplus

/**
 * Message of the last failed call on this thread; empty after a success.
 * The pointer stays valid until the next call on the same thread.
 */
const char *pmsm_last_error_message(void);

/**
 * Creates a motor. `sat` may be null for an unsaturated motor.
 *
 * # Safety
 * `sat` must be null or valid; `out` must be writable.
 */
enum PmsmStatus pmsm_motor_new(double r,
                               double ld,
                               double lq,
                               double phi_m,
                               uint32_t pole_pairs,
                               const struct PmsmSaturation *sat,
                               struct PmsmMotor **out);

/**
 * # Safety
 * `m` must be null or a handle from [`pmsm_motor_new`] not yet freed.
 */
void pmsm_motor_free(struct PmsmMotor *m);

/**
 * Magnetic energy at `flux`.
 *
 * # Safety
 * `m` must be a live handle and `out` writable.
 */
enum PmsmStatus pmsm_energy(const struct PmsmMotor *m, struct PmsmPair flux, double *out);

/**
 * # Safety
 * `m` must be a live handle and `out` writable.
 */
enum PmsmStatus pmsm_currents_from_flux(const struct PmsmMotor *m,
                                        struct PmsmPair flux,
                                        struct PmsmPair *out);

/**
 * Closed-form inversion, first order in the saturation coefficients.
 *
 * # Safety
 * `m` must be a live handle and `out` writable.
 */
enum PmsmStatus pmsm_flux_first_order(const struct PmsmMotor *m,
                                      struct PmsmPair currents,
                                      struct PmsmPair *out);

/**
 * Newton inversion to `tol` amperes per component.
 *
 * # Safety
 * `m` must be a live handle and `out` writable.
 */
enum PmsmStatus pmsm_flux_exact(const struct PmsmMotor *m,
                                struct PmsmPair currents,
                                double tol,
                                struct PmsmPair *out);

/**
 * # Safety
 * `m` must be a live handle and `out` writable.
 */
enum PmsmStatus pmsm_inductance_matrix(const struct PmsmMotor *m,
                                       struct PmsmPair currents,
                                       struct PmsmInductance *out);

/**
 * First-order ripple prediction with the bias `i_bar = u_bar / R`.
 *
 * # Safety
 * Pointers must be valid.
 */
enum PmsmStatus pmsm_predict_ripple(const struct PmsmMotor *m,
                                    const struct PmsmInjection *inj,
                                    struct PmsmPair *out);

/**
 * Sampled waveform from one period of `n` uniformly spaced values.
 *
 * # Safety
 * `samples` must point to `n` doubles; `out` must be writable.
 */
enum PmsmStatus pmsm_waveform_sampled(const double *samples, size_t n, struct PmsmWaveform **out);

/**
 * # Safety
 * `w` must be null or a live handle.
 */
void pmsm_waveform_free(struct PmsmWaveform *w);

/**
 * Locked-rotor simulation from rest with step `dt`, duration `t_end`, output
 * every step and uniform current noise of half-width `noise_amp`.
 *
 * # Safety
 * Pointers must be valid; `out` receives a handle to free with [`pmsm_trace_free`].
 */
enum PmsmStatus pmsm_simulate(const struct PmsmMotor *m,
                              const struct PmsmInjection *inj,
                              double dt,
                              double t_end,
                              double noise_amp,
                              uint64_t seed,
                              struct PmsmTrace **out);

/**
 * # Safety
 * `t` must be null or a live handle.
 */
void pmsm_trace_free(struct PmsmTrace *t);

/**
 * Number of samples.
 *
 * # Safety
 * `t` must be a live handle and `out` writable.
 */
enum PmsmStatus pmsm_trace_len(const struct PmsmTrace *t, size_t *out);

/**
 * Borrows one column; the data stays valid while the trace lives.
 *
 * # Safety
 * `t` must be a live handle; `data` and `len` must be writable.
 */
enum PmsmStatus pmsm_trace_column(const struct PmsmTrace *t,
                                  enum PmsmColumn column,
                                  const double **data,
                                  size_t *len);

/**
 * # Safety
 * `t` must be a live handle and `path` a NUL-terminated string.
 */
enum PmsmStatus pmsm_trace_save_csv(const struct PmsmTrace *t, const char *path);

/**
 * # Safety
 * `path` must be a NUL-terminated string and `out` writable.
 */
enum PmsmStatus pmsm_trace_load_csv(const char *path, struct PmsmTrace **out);

/**
 * Mean and `F(omega t)` coefficient of both currents after `discard` seconds.
 *
 * # Safety
 * Pointers must be valid.
 */
enum PmsmStatus pmsm_extract_ripple(const struct PmsmTrace *t,
                                    const struct PmsmInjection *inj,
                                    double discard,
                                    struct PmsmRipple *out);

/**
 * Simulates the identification plan on motor `m` and estimates its
 * parameters. `flux_referenced` receives the flux-referenced estimate;
 * `first_order` may be null.
 *
 * # Safety
 * Pointers must be valid.
 */
enum PmsmStatus pmsm_identify(const struct PmsmMotor *m,
                              const struct PmsmPlan *plan,
                              uint64_t seed,
                              struct PmsmEstimate *flux_referenced,
                              struct PmsmEstimate *first_order);

/**
 * Library version as a NUL-terminated string with static lifetime.
 */
const char *pmsm_version(void);

#ifdef __cplusplus
}  // extern "C"
#endif  // __cplusplus

#endif  /* PMSM_SAT_H */

#ifndef BEATNLS_H
#define BEATNLS_H

/* Generated by cbindgen from beatnls-ffi; do not edit by hand. */

#include <stdarg.h>
#include <stdbool.h>
#include <stdint.h>
#include <stdlib.h>

/**
 * Result of every fallible call.
 */
typedef enum BeatnlsStatus {
  BEATNLS_STATUS_OK = 0,
  /**
   * A precondition on the inputs was violated.
   */
  BEATNLS_STATUS_INVALID_ARGUMENT = 1,
  /**
   * The computation itself failed (no bracket, no convergence, ...).
   */
  BEATNLS_STATUS_COMPUTE_ERROR = 2,
  BEATNLS_STATUS_NULL_POINTER = 3,
} BeatnlsStatus;

/**
 * Which sup-norm expression to evaluate.
 */
typedef enum BeatnlsSupMode {
  /**
   * Formula without the imaginary cross term.
   */
  BEATNLS_SUP_MODE_PAPER = 0,
  /**
   * Exact two-mode sup `|u1| + |u_-1|`.
   */
  BEATNLS_SUP_MODE_EXACT = 1,
} BeatnlsSupMode;

/**
 * Opaque birth/fold table handle.
 */
typedef struct BeatnlsBranchTable BeatnlsBranchTable;

/**
 * Two-mode state at one time.
 */
typedef struct BeatnlsReducedState {
  double u1_re;
  double u1_im;
  double u_minus1_re;
  double u_minus1_im;
  double t;
} BeatnlsReducedState;

/**
 * Parameters of one tail estimate.
 */
typedef struct BeatnlsTailParams {
  double z0;
  double delta;
  double gamma;
  double c_time;
  double cutoff_c;
  double sigma_a2;
  double sigma_b2;
  double eps;
} BeatnlsTailParams;

/**
 * One tail estimate: log-probability, its scaled value and the method
 * error.
 */
typedef struct BeatnlsTailEstimate {
  double log_p;
  double scaled;
  double err;
} BeatnlsTailEstimate;

#ifdef __cplusplus
extern "C" {
#endif // __cplusplus

/**
 * `h(xi) = |cos xi| + |sin xi|`.
 */
double beatnls_h_eval(double xi);

/**
 * Curve parametrization `tau(xi) = xi h(xi)^2 / (2 lambda^2)`.
 */
double beatnls_tau_of_xi(double xi, double lambda);

/**
 * j-th fold abscissa (the root of `h + 2 xi h' = 0` in the j-th quarter
 * period).
 *
 * # Safety
 * `out` must point to a writable `double`.
 */
enum BeatnlsStatus beatnls_collision_xi(uint32_t j, double *out);

/**
 * Decay-rate function at `(z0, tau)`; `*out_is_jump` is set to 1 when
 * `tau` was detected as a fold time (right limit returned).
 *
 * # Safety
 * `out_value` and `out_is_jump` must point to writable memory.
 */
enum BeatnlsStatus beatnls_rate_j(double z0, double tau, double *out_value, uint8_t *out_is_jump);

/**
 * Smallest solution of the implicit equation at `(tau, lambda)`.
 *
 * # Safety
 * Non-null out-pointers to writable memory.
 */
enum BeatnlsStatus beatnls_minimal_solution(double tau,
                                            double lambda,
                                            double *out_y,
                                            double *out_xi,
                                            uint32_t *out_branch_index);

/**
 * Builds a table of the first `max_index` births and folds for `lambda`.
 * The handle must be released with [`beatnls_branch_table_free`].
 *
 * # Safety
 * `out` must point to a writable handle slot.
 */
enum BeatnlsStatus beatnls_branch_table_new(double lambda,
                                            uint32_t max_index,
                                            struct BeatnlsBranchTable **out);

/**
 * Number of (birth, fold) rows in the table.
 *
 * # Safety
 * `table` must be a live handle from [`beatnls_branch_table_new`].
 */
uint32_t beatnls_branch_table_len(const struct BeatnlsBranchTable *table);

/**
 * Birth abscissa/time of the pair born at index `j` (1-based, `j <= len`).
 *
 * # Safety
 * `table` must be a live handle; out-pointers writable.
 */
enum BeatnlsStatus beatnls_branch_table_birth(const struct BeatnlsBranchTable *table,
                                              uint32_t j,
                                              double *out_xi,
                                              double *out_tau);

/**
 * Fold abscissa/time of the pair dying at index `j` (1-based, `j <= len`).
 *
 * # Safety
 * `table` must be a live handle; out-pointers writable.
 */
enum BeatnlsStatus beatnls_branch_table_collision(const struct BeatnlsBranchTable *table,
                                                  uint32_t j,
                                                  double *out_xi,
                                                  double *out_tau);

/**
 * Releases a table handle. Passing NULL is a no-op.
 *
 * # Safety
 * `table` must be NULL or a handle from [`beatnls_branch_table_new`] not
 * yet freed.
 */
void beatnls_branch_table_free(struct BeatnlsBranchTable *table);

/**
 * Exact reduced two-mode flow at time `t` from data
 * `(alpha, beta, eps)`.
 *
 * # Safety
 * `out` must point to a writable state struct.
 */
enum BeatnlsStatus beatnls_closed_form_state(double alpha_re,
                                             double alpha_im,
                                             double beta_re,
                                             double beta_im,
                                             double eps,
                                             double t,
                                             struct BeatnlsReducedState *out);

/**
 * Sup-norm of the two-mode field at time `t`.
 *
 * # Safety
 * `out` must point to a writable `double`.
 */
enum BeatnlsStatus beatnls_sup_norm_effective(double alpha_re,
                                              double alpha_im,
                                              double beta_re,
                                              double beta_im,
                                              double eps,
                                              double t,
                                              enum BeatnlsSupMode mode,
                                              double *out);

/**
 * Tail probability by tensor quadrature.
 *
 * # Safety
 * `params` and `out` must be non-null and valid.
 */
enum BeatnlsStatus beatnls_log_tail_quadrature(const struct BeatnlsTailParams *params,
                                               struct BeatnlsTailEstimate *out);

/**
 * Tail probability by importance-sampled Monte Carlo; deterministic for a
 * fixed `(seed, workers)`.
 *
 * # Safety
 * `params` and `out` must be non-null and valid.
 */
enum BeatnlsStatus beatnls_log_tail_monte_carlo(const struct BeatnlsTailParams *params,
                                                uint64_t n,
                                                uint64_t seed,
                                                uint32_t workers,
                                                struct BeatnlsTailEstimate *out);

#ifdef __cplusplus
} // extern "C"
#endif // __cplusplus

#endif /* BEATNLS_H */

#ifndef CFFCM_H
#define CFFCM_H

#include <stdarg.h>
#include <stdbool.h>
#include <stddef.h>
#include <stdint.h>
#include <stdlib.h>

typedef enum CffcmStatus {
  CFFCM_STATUS_OK = 0,
  CFFCM_STATUS_NULL_POINTER = 1,
  // Argument outside the domain of the operation.
  CFFCM_STATUS_DOMAIN = 2,
  CFFCM_STATUS_SINGULAR_PARAMETER = 3,
  CFFCM_STATUS_QUADRATURE_NOT_CONVERGED = 4,
  CFFCM_STATUS_NEWTON_NOT_CONVERGED = 5,
  CFFCM_STATUS_CG_NOT_CONVERGED = 6,
  CFFCM_STATUS_NOT_POSITIVE_DEFINITE = 7,
  // Initial data not zero at the boundary.
  CFFCM_STATUS_COMPATIBILITY = 8,
  // Output buffer shorter than required.
  CFFCM_STATUS_BUFFER_TOO_SMALL = 9,
  CFFCM_STATUS_INTERNAL = 10,
  // A Rust panic was caught at the boundary.
  CFFCM_STATUS_PANIC = 11,
} CffcmStatus;

typedef enum CffcmSolver {
  CFFCM_SOLVER_CONJUGATE_GRADIENT = 0,
  CFFCM_SOLVER_CHOLESKY = 1,
} CffcmSolver;

// Running fast CF derivative of a scalar signal.
typedef struct CffcmFastState CffcmFastState;

// A diffusion problem on `[0, S] x (0, T]`.
typedef struct CffcmProblem CffcmProblem;

// The field at the final time of a march.
typedef struct CffcmSolution CffcmSolution;

// `f(x, user_data)`
typedef double (*CffcmSpaceFn)(double x, void *user_data);

// `f(x, t, user_data)`
typedef double (*CffcmSpaceTimeFn)(double x, double t, void *user_data);

// Errors at the final time; `h1` has unit weight on the derivative.
typedef struct CffcmErrorNorms {
  double sup;
  double l2;
  double h1;
} CffcmErrorNorms;

#ifdef __cplusplus
extern "C" {
#endif // __cplusplus

// Version string of the library, statically allocated.
const char *cffcm_version(void);

// Message of the last failure on this thread, or null if none.
//
// The pointer stays valid until the next failing call on the same thread.
const char *cffcm_last_error_message(void);

// Exact CF derivative of `t^m`.
//
// # Safety
// `out` must be null or valid for writes.
enum CffcmStatus cffcm_exact_power(uint32_t m, double alpha, double t, double *out);

// Exact CF derivative of `cos(omega t)`.
//
// # Safety
// `out` must be null or valid for writes.
enum CffcmStatus cffcm_exact_cos(double omega, double alpha, double t, double *out);

// Exact CF derivative of `exp(omega t)`; fails near `omega = -beta`.
//
// # Safety
// `out` must be null or valid for writes.
enum CffcmStatus cffcm_exact_exp(double omega, double alpha, double t, double *out);

// L1 value at step `k` of `len` samples on `[0, horizon]`, summing the full
// history.
//
// # Safety
// `values` must point to `len` readable doubles; `out` must be valid for writes.
enum CffcmStatus cffcm_l1_direct(const double *values,
                                 size_t len,
                                 double horizon,
                                 double alpha,
                                 size_t k,
                                 double *out);

// L1 values at `k = 1..len-1` with tabulated coefficients, O(len^2) work.
// `out` receives `len - 1` values.
//
// # Safety
// `values` must point to `len` readable doubles and `out` to `out_len`
// writable doubles.
enum CffcmStatus cffcm_l1_sweep(const double *values,
                                size_t len,
                                double horizon,
                                double alpha,
                                double *out,
                                size_t out_len);

// Same values as [`cffcm_l1_sweep`] from the O(1)-memory recurrence.
//
// # Safety
// As for [`cffcm_l1_sweep`].
enum CffcmStatus cffcm_fast_sweep(const double *values,
                                  size_t len,
                                  double horizon,
                                  double alpha,
                                  double *out,
                                  size_t out_len);

// Starts the recurrence from `h(0) = h0`, `h(dt) = h1`.
//
// # Safety
// `out` must be valid for writes. The handle must be released with
// [`cffcm_fast_state_free`].
enum CffcmStatus cffcm_fast_state_new(double alpha,
                                      double dt,
                                      double h0,
                                      double h1,
                                      struct CffcmFastState **out);

// Advances by one step with the next sample; writes the new value to
// `value` when it is not null.
//
// # Safety
// `state` must come from [`cffcm_fast_state_new`]; `value` must be null or
// valid for writes.
enum CffcmStatus cffcm_fast_state_step(struct CffcmFastState *state, double h_next, double *value);

// Current value and step index of the recurrence.
//
// # Safety
// `state` must come from [`cffcm_fast_state_new`]; the out pointers must be
// null or valid for writes.
enum CffcmStatus cffcm_fast_state_current(const struct CffcmFastState *state,
                                          double *value,
                                          size_t *step);

// # Safety
// `state` must be null or come from [`cffcm_fast_state_new`], and must not
// be used afterwards.
void cffcm_fast_state_free(struct CffcmFastState *state);

// The manufactured three-term problem on `[0, pi]` with exact solution
// `(1 + t^2) sin x`, weights `1, 2, 3` and the order set `case` (1 to 4).
//
// # Safety
// `out` must be valid for writes. Release with [`cffcm_problem_free`].
enum CffcmStatus cffcm_problem_example(uint8_t case_, double horizon, struct CffcmProblem **out);

// A problem with `n_terms` orders, initial data `initial(x)` and forcing
// `forcing(x, t)`.
//
// # Safety
// `weights` and `alphas` must point to `n_terms` readable doubles. The
// callbacks are called with `user_data`, possibly after this function
// returns, until the problem is freed; they must not unwind.
enum CffcmStatus cffcm_problem_new(const double *weights,
                                   const double *alphas,
                                   size_t n_terms,
                                   double length,
                                   double horizon,
                                   CffcmSpaceFn initial,
                                   CffcmSpaceTimeFn forcing,
                                   void *user_data,
                                   struct CffcmProblem **out);

// Attaches an exact solution `u(x, t)` and its `x` derivative, enabling
// [`cffcm_solution_errors`].
//
// # Safety
// `problem` must come from a `cffcm_problem_*` constructor. The callback
// contract of [`cffcm_problem_new`] applies.
enum CffcmStatus cffcm_problem_set_exact(struct CffcmProblem *problem,
                                         CffcmSpaceTimeFn value,
                                         CffcmSpaceTimeFn dx,
                                         void *user_data);

// # Safety
// `problem` must be null or come from a `cffcm_problem_*` constructor, and
// must not be used afterwards.
void cffcm_problem_free(struct CffcmProblem *problem);

// Marches `steps` uniform steps with LGL degree `degree`. `tol <= 0` selects
// the default CG tolerance; it is ignored for Cholesky.
//
// # Safety
// `problem` must come from a `cffcm_problem_*` constructor and `out` must be
// valid for writes. Release the solution with [`cffcm_solution_free`].
enum CffcmStatus cffcm_solve(const struct CffcmProblem *problem,
                             size_t degree,
                             size_t steps,
                             enum CffcmSolver solver,
                             double tol,
                             struct CffcmSolution **out);

// Number of nodal values, `degree + 1`.
//
// # Safety
// `solution` must be null or come from [`cffcm_solve`].
size_t cffcm_solution_len(const struct CffcmSolution *solution);

// Copies the nodal values and, when `nodes` is not null, the node positions.
//
// # Safety
// `solution` must come from [`cffcm_solve`]; `values` (and `nodes`, if not
// null) must point to `len` writable doubles.
enum CffcmStatus cffcm_solution_values(const struct CffcmSolution *solution,
                                       double *values,
                                       double *nodes,
                                       size_t len);

// Interpolated value of the final field at `x`.
//
// # Safety
// `solution` must come from [`cffcm_solve`]; `out` must be valid for writes.
enum CffcmStatus cffcm_solution_eval(const struct CffcmSolution *solution, double x, double *out);

// Errors of `solution` against the exact solution of `problem` at the final
// time.
//
// # Safety
// `solution` must come from [`cffcm_solve`] on `problem`; `out` must be
// valid for writes.
enum CffcmStatus cffcm_solution_errors(const struct CffcmSolution *solution,
                                       const struct CffcmProblem *problem,
                                       struct CffcmErrorNorms *out);

// # Safety
// `solution` must be null or come from [`cffcm_solve`], and must not be
// used afterwards.
void cffcm_solution_free(struct CffcmSolution *solution);

#ifdef __cplusplus
}  // extern "C"
#endif  // __cplusplus

#endif  /* CFFCM_H */

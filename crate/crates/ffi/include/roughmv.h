#ifndef ROUGHMV_H
#define ROUGHMV_H

/*
 * C interface to the roughmv mean-variance solver.
 *
 * The workflow is: fill a roughmv_model and a roughmv_kernel, call
 * roughmv_solve to obtain an opaque solution handle, query the handle,
 * free it with roughmv_solution_free. Handles are immutable after the
 * solve and safe to read from several threads; create and free them on
 * whichever thread you like.
 *
 * Every fallible call returns a roughmv_status; on anything other than
 * ROUGHMV_OK a human-readable explanation is available from
 * roughmv_last_error_message() on the same thread. Scalar getters return
 * NaN when handed a null handle.
 *
 * This header is maintained by hand; the Rust test suite fails if the
 * declarations drift from the exported symbols.
 */

#include <stddef.h>
#include <stdint.h>

#ifdef __cplusplus
extern "C" {
#endif

typedef enum roughmv_status {
  ROUGHMV_OK = 0,
  ROUGHMV_NULL_POINTER = 1,
  ROUGHMV_INVALID_PARAMETER = 2,
  ROUGHMV_NUMERIC_FAILURE = 3,
  /* the value function blew up before the horizon; the error message
     carries the blow-up time */
  ROUGHMV_EXPLOSION = 4
} roughmv_status;

enum {
  ROUGHMV_KERNEL_CONSTANT = 0,
  ROUGHMV_KERNEL_FRACTIONAL = 1,
  ROUGHMV_KERNEL_EXPONENTIAL = 2
};

/* Market and preference parameters. The short rate is constant across
   this interface. `c` is the target expected terminal wealth and must be
   at least x0 * exp(rate * horizon). */
typedef struct roughmv_model {
  double v0;
  double kappa;
  double phi;
  double sigma;
  double rho;
  double theta;
  double rate;
  double horizon;
  double x0;
  double c;
} roughmv_model;

/* Memory kernel. `param` is the singularity exponent alpha for the
   fractional shape (in (1/2, 1]), the decay beta for the exponential
   shape, and ignored for the constant one. */
typedef struct roughmv_kernel {
  int32_t shape; /* one of the ROUGHMV_KERNEL_* constants */
  double scale;
  double param;
} roughmv_kernel;

/* Opaque solved problem. */
typedef struct roughmv_solution roughmv_solution;

/* Static version string, e.g. "0.1.0". Never NULL. */
const char *roughmv_version(void);

/* Explanation of the most recent failure on this thread, or an empty
   string. The pointer stays valid until the next failing call on the
   same thread. Never NULL. */
const char *roughmv_last_error_message(void);

/* Solve the mean-variance problem on a uniform grid with n_steps steps
   over [0, horizon]. On ROUGHMV_OK, *out owns the solution and must be
   released with roughmv_solution_free. */
roughmv_status roughmv_solve(const roughmv_model *model,
                             const roughmv_kernel *kernel,
                             size_t n_steps,
                             roughmv_solution **out);

/* Release a solution handle. NULL is a no-op. */
void roughmv_solution_free(roughmv_solution *sol);

/* Number of grid nodes (n_steps + 1); 0 for a NULL handle. */
size_t roughmv_solution_len(const roughmv_solution *sol);

/* Copy the grid times into buf, which must hold exactly
   roughmv_solution_len() values. */
roughmv_status roughmv_solution_times(const roughmv_solution *sol,
                                      double *buf,
                                      size_t len);

/* Copy the strategy-equation solution psi, evaluated on the grid. */
roughmv_status roughmv_solution_psi(const roughmv_solution *sol,
                                    double *buf,
                                    size_t len);

/* Copy the per-node hedging weights multiplying the target gap in the
   optimal feedback strategy. */
roughmv_status roughmv_solution_hedging_weights(const roughmv_solution *sol,
                                                double *buf,
                                                size_t len);

/* Initial scaling factor M0 of the quadratic value expansion. */
double roughmv_solution_m0(const roughmv_solution *sol);

/* Lagrange multiplier of the expectation constraint. */
double roughmv_solution_eta_star(const roughmv_solution *sol);

/* Shifted target zeta* = c - eta*; the feedback strategy steers the
   discounted wealth toward its discounted value. */
double roughmv_solution_zeta_star(const roughmv_solution *sol);

/* Variance of terminal wealth attained by the optimal strategy. */
double roughmv_solution_optimal_variance(const roughmv_solution *sol);

/* Optimal dollar volatility exposure u*(t, v, x) at grid time t, spot
   variance v, wealth x. t must lie on the grid. */
roughmv_status roughmv_optimal_control(const roughmv_solution *sol,
                                       double t,
                                       double v,
                                       double x,
                                       double *out_u);

/* Optimal dollar stock position pi*(t, v, x) = u* / sqrt(v). */
roughmv_status roughmv_optimal_exposure(const roughmv_solution *sol,
                                        double t,
                                        double v,
                                        double x,
                                        double *out_pi);

#ifdef __cplusplus
}
#endif

#endif /* ROUGHMV_H */

#ifndef AGILS_H
#define AGILS_H

#include <stdarg.h>
#include <stdbool.h>
#include <stdint.h>
#include <stdlib.h>

/**
 * Status codes returned by every fallible entry point.
 */
#define AGILS_OK 0

#define AGILS_ERR_NULL 1

#define AGILS_ERR_INVALID 2

#define AGILS_ERR_SOLVE 3

#define AGILS_ERR_BUFFER 4

#define AGILS_ERR_PANIC 5

/**
 * Opaque handle to a finished run.
 */
typedef struct AgilsRun AgilsRun;

#ifdef __cplusplus
extern "C" {
#endif // __cplusplus

/**
 * Solves the synthetic benchmark of dimension `n`. On success writes an
 * owned handle to `*out`; free it with `agils_run_free`.
 */
int32_t agils_toy_solve(uintptr_t n, struct AgilsRun **out);

/**
 * Solves one sparse-group-lasso instance generated from `seed`. The
 * reported metric is the validation error of the feasible estimator.
 */
int32_t agils_sgl_solve(uint64_t seed,
                        uintptr_t n_tr,
                        uintptr_t n_val,
                        uintptr_t n_test,
                        uintptr_t m,
                        double snr,
                        struct AgilsRun **out);

/**
 * Dimension of the hyperparameter block.
 */
uintptr_t agils_run_dim_x(const struct AgilsRun *run);

/**
 * Dimension of the lower-level block.
 */
uintptr_t agils_run_dim_y(const struct AgilsRun *run);

/**
 * Copies the hyperparameter iterate into `buf` (capacity `len`).
 */
int32_t agils_run_copy_x(const struct AgilsRun *run, double *buf, uintptr_t len);

/**
 * Copies the lower-level iterate into `buf` (capacity `len`).
 */
int32_t agils_run_copy_y(const struct AgilsRun *run, double *buf, uintptr_t len);

/**
 * Final benchmark metric (distance-to-solution for the synthetic
 * problem, validation error for sparse group Lasso). NaN on null.
 */
double agils_run_metric(const struct AgilsRun *run);

uintptr_t agils_run_outer_iterations(const struct AgilsRun *run);

uintptr_t agils_run_inner_iterations(const struct AgilsRun *run);

double agils_run_wall_time_ms(const struct AgilsRun *run);

/**
 * Releases a handle returned by a solve call. Null is a no-op.
 */
void agils_run_free(struct AgilsRun *run);

#ifdef __cplusplus
} // extern "C"
#endif // __cplusplus

#endif /* AGILS_H */

//! C ABI over the bilevel solver: opaque run handles plus plain error
//! codes. All functions are null-safe and never unwind across the
//! boundary.

use std::panic::{catch_unwind, AssertUnwindSafe};

use agils::harness::{run_sgl, run_toy, AgilsOverrides, SglBlock};
use agils::problem::Vector;

/// Status codes returned by every fallible entry point.
pub const AGILS_OK: i32 = 0;
pub const AGILS_ERR_NULL: i32 = 1;
pub const AGILS_ERR_INVALID: i32 = 2;
pub const AGILS_ERR_SOLVE: i32 = 3;
pub const AGILS_ERR_BUFFER: i32 = 4;
pub const AGILS_ERR_PANIC: i32 = 5;

/// Opaque handle to a finished run.
pub struct AgilsRun {
    x: Vector,
    y: Vector,
    metric: f64,
    outer_iterations: usize,
    total_inner_iterations: usize,
    wall_time_ms: f64,
}

fn export(run: AgilsRun, out: *mut *mut AgilsRun) -> i32 {
    if out.is_null() {
        return AGILS_ERR_NULL;
    }
    unsafe { *out = Box::into_raw(Box::new(run)) };
    AGILS_OK
}

/// Solves the synthetic benchmark of dimension `n`. On success writes an
/// owned handle to `*out`; free it with `agils_run_free`.
#[no_mangle]
pub extern "C" fn agils_toy_solve(n: usize, out: *mut *mut AgilsRun) -> i32 {
    let result = catch_unwind(AssertUnwindSafe(|| {
        run_toy(n, &AgilsOverrides::default())
    }));
    match result {
        Ok(Ok((outcome, err))) => export(
            AgilsRun {
                x: outcome.x,
                y: outcome.y_tilde,
                metric: err,
                outer_iterations: outcome.trace.outer_iterations,
                total_inner_iterations: outcome.trace.total_inner_iterations,
                wall_time_ms: outcome.trace.wall_time_ms,
            },
            out,
        ),
        Ok(Err(_)) => AGILS_ERR_SOLVE,
        Err(_) => AGILS_ERR_PANIC,
    }
}

/// Solves one sparse-group-lasso instance generated from `seed`. The
/// reported metric is the validation error of the feasible estimator.
#[no_mangle]
pub extern "C" fn agils_sgl_solve(
    seed: u64,
    n_tr: usize,
    n_val: usize,
    n_test: usize,
    m: usize,
    snr: f64,
    out: *mut *mut AgilsRun,
) -> i32 {
    if !snr.is_finite() || snr <= 0.0 {
        return AGILS_ERR_INVALID;
    }
    let block = SglBlock {
        n_tr,
        n_val,
        n_test,
        m,
        snr,
        seeds: vec![seed],
        export_data: false,
    };
    let result = catch_unwind(AssertUnwindSafe(|| {
        run_sgl(&block, seed, &AgilsOverrides::default())
    }));
    match result {
        Ok(Ok(run)) => export(
            AgilsRun {
                x: run.outcome.x,
                y: run.outcome.y_tilde,
                metric: run.metrics.val_err,
                outer_iterations: run.outcome.trace.outer_iterations,
                total_inner_iterations: run.outcome.trace.total_inner_iterations,
                wall_time_ms: run.outcome.trace.wall_time_ms,
            },
            out,
        ),
        Ok(Err(_)) => AGILS_ERR_SOLVE,
        Err(_) => AGILS_ERR_PANIC,
    }
}

/// Dimension of the hyperparameter block.
#[no_mangle]
pub extern "C" fn agils_run_dim_x(run: *const AgilsRun) -> usize {
    if run.is_null() {
        return 0;
    }
    unsafe { &*run }.x.len()
}

/// Dimension of the lower-level block.
#[no_mangle]
pub extern "C" fn agils_run_dim_y(run: *const AgilsRun) -> usize {
    if run.is_null() {
        return 0;
    }
    unsafe { &*run }.y.len()
}

/// Copies the hyperparameter iterate into `buf` (capacity `len`).
#[no_mangle]
pub extern "C" fn agils_run_copy_x(run: *const AgilsRun, buf: *mut f64, len: usize) -> i32 {
    copy_vec(run, buf, len, |r| &r.x)
}

/// Copies the lower-level iterate into `buf` (capacity `len`).
#[no_mangle]
pub extern "C" fn agils_run_copy_y(run: *const AgilsRun, buf: *mut f64, len: usize) -> i32 {
    copy_vec(run, buf, len, |r| &r.y)
}

fn copy_vec(
    run: *const AgilsRun,
    buf: *mut f64,
    len: usize,
    pick: impl Fn(&AgilsRun) -> &Vector,
) -> i32 {
    if run.is_null() || buf.is_null() {
        return AGILS_ERR_NULL;
    }
    let v = pick(unsafe { &*run });
    if len < v.len() {
        return AGILS_ERR_BUFFER;
    }
    let dst = unsafe { std::slice::from_raw_parts_mut(buf, v.len()) };
    for (d, s) in dst.iter_mut().zip(v.iter()) {
        *d = *s;
    }
    AGILS_OK
}

/// Final benchmark metric (distance-to-solution for the synthetic
/// problem, validation error for sparse group Lasso). NaN on null.
#[no_mangle]
pub extern "C" fn agils_run_metric(run: *const AgilsRun) -> f64 {
    if run.is_null() {
        return f64::NAN;
    }
    unsafe { &*run }.metric
}

#[no_mangle]
pub extern "C" fn agils_run_outer_iterations(run: *const AgilsRun) -> usize {
    if run.is_null() {
        return 0;
    }
    unsafe { &*run }.outer_iterations
}

#[no_mangle]
pub extern "C" fn agils_run_inner_iterations(run: *const AgilsRun) -> usize {
    if run.is_null() {
        return 0;
    }
    unsafe { &*run }.total_inner_iterations
}

#[no_mangle]
pub extern "C" fn agils_run_wall_time_ms(run: *const AgilsRun) -> f64 {
    if run.is_null() {
        return f64::NAN;
    }
    unsafe { &*run }.wall_time_ms
}

/// Releases a handle returned by a solve call. Null is a no-op.
#[no_mangle]
pub extern "C" fn agils_run_free(run: *mut AgilsRun) {
    if !run.is_null() {
        drop(unsafe { Box::from_raw(run) });
    }
}

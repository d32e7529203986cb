//! Iterative solvers for the proximal lower-level problem
//!   min_theta f(x, theta) + g(x, theta) + ||theta - y||^2 / (2 gamma)
//! stopped by the prox-gradient residual, and for the plain lower-level
//! problem min_theta f(x, theta) + g(x, theta).

use ndarray::{Array1, Array2};

use crate::error::{AgilsError, Result};
use crate::problem::{BilevelOracle, Vector};
use crate::prox::{prox_grad_residual, unit_step_ll_residual};

#[derive(Debug, Clone, Copy, PartialEq, Eq, serde::Serialize, serde::Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum InnerMethod {
    Pgm,
    Fista,
    /// Admissible only when the oracle declares a least-squares form
    /// for its smooth lower-level term.
    Admm,
}

impl std::fmt::Display for InnerMethod {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        match self {
            InnerMethod::Pgm => write!(f, "pgm"),
            InnerMethod::Fista => write!(f, "fista"),
            InnerMethod::Admm => write!(f, "admm"),
        }
    }
}

#[derive(Debug, Clone)]
pub struct InnerResult {
    pub theta: Vector,
    /// Final prox-gradient residual (unit-step residual for `solve_ll`).
    pub residual: f64,
    pub iterations: usize,
}

/// Lower-triangular Cholesky factor of a symmetric positive definite matrix.
struct Cholesky {
    l: Array2<f64>,
}

impl Cholesky {
    fn factor(a: &Array2<f64>) -> Result<Self> {
        let n = a.nrows();
        let mut l = Array2::<f64>::zeros((n, n));
        for i in 0..n {
            for j in 0..=i {
                let mut sum = a[(i, j)];
                for k in 0..j {
                    sum -= l[(i, k)] * l[(j, k)];
                }
                if i == j {
                    if sum <= 0.0 {
                        return Err(AgilsError::InvalidParameter(
                            "matrix not positive definite in Cholesky factorization".into(),
                        ));
                    }
                    l[(i, j)] = sum.sqrt();
                } else {
                    l[(i, j)] = sum / l[(j, j)];
                }
            }
        }
        Ok(Self { l })
    }

    fn solve(&self, b: &Vector) -> Vector {
        let n = self.l.nrows();
        let mut y = b.clone();
        for i in 0..n {
            let mut sum = y[i];
            for k in 0..i {
                sum -= self.l[(i, k)] * y[k];
            }
            y[i] = sum / self.l[(i, i)];
        }
        for i in (0..n).rev() {
            let mut sum = y[i];
            for k in i + 1..n {
                sum -= self.l[(k, i)] * y[k];
            }
            y[i] = sum / self.l[(i, i)];
        }
        y
    }
}

/// Per-run scratch state for the inner solvers. Holds the cached ADMM
/// factorization, which depends only on the oracle's Gram matrix and gamma.
pub struct InnerWorkspace {
    admm_factor: Option<(f64, Cholesky)>,
}

impl InnerWorkspace {
    pub fn new() -> Self {
        Self { admm_factor: None }
    }

    fn admm_factor(&mut self, oracle: &dyn BilevelOracle, gamma: f64) -> Result<&Cholesky> {
        let stale = match &self.admm_factor {
            Some((g, _)) => *g != gamma,
            None => true,
        };
        if stale {
            let ls = oracle.least_squares().ok_or_else(|| {
                AgilsError::InvalidParameter(
                    "ADMM requires an oracle with a declared least-squares form".into(),
                )
            })?;
            // theta-subproblem matrix: Gram + (1/gamma + rho) I with rho = 1/gamma
            let mut m = ls.gram.clone();
            let shift = 2.0 / gamma;
            for i in 0..m.nrows() {
                m[(i, i)] += shift;
            }
            self.admm_factor = Some((gamma, Cholesky::factor(&m)?));
        }
        Ok(&self.admm_factor.as_ref().unwrap().1)
    }

    /// Solves the proximal lower-level problem at (x, y) to prox-gradient
    /// residual at most `target`, starting from `warm`.
    ///
    /// `iterations` counts every inner sweep, feeding the inner-to-outer
    /// ratio statistic.
    #[allow(clippy::too_many_arguments)]
    pub fn solve_prox_ll(
        &mut self,
        oracle: &dyn BilevelOracle,
        x: &Vector,
        y: &Vector,
        gamma: f64,
        eta: f64,
        target: f64,
        warm: &Vector,
        method: InnerMethod,
        max_iter: usize,
    ) -> Result<InnerResult> {
        if !(gamma > 0.0) || !(target > 0.0) {
            return Err(AgilsError::InvalidParameter(
                "solve_prox_ll requires gamma > 0 and target > 0".into(),
            ));
        }
        if warm.iter().any(|a| !a.is_finite()) {
            return Err(AgilsError::NonFiniteIterate {
                context: "solve_prox_ll warm start".into(),
            });
        }
        match method {
            InnerMethod::Pgm => self.prox_ll_pgm(oracle, x, y, gamma, eta, target, warm, max_iter, false),
            InnerMethod::Fista => self.prox_ll_fista(oracle, x, y, gamma, eta, target, warm, max_iter),
            InnerMethod::Admm => self.prox_ll_admm(oracle, x, y, gamma, eta, target, warm, max_iter),
        }
    }

    #[allow(clippy::too_many_arguments)]
    fn prox_ll_pgm(
        &mut self,
        oracle: &dyn BilevelOracle,
        x: &Vector,
        y: &Vector,
        gamma: f64,
        eta: f64,
        target: f64,
        warm: &Vector,
        max_iter: usize,
        _accelerated: bool,
    ) -> Result<InnerResult> {
        let c = oracle.constants();
        let step = 1.0 / (c.l_fy + 1.0 / gamma);
        let mut theta = oracle.project_y(warm);
        let mut best = theta.clone();
        let mut best_res = f64::INFINITY;
        for iter in 0..=max_iter {
            let (_, grad) = oracle.grad_lower_smooth(x, &theta);
            let full_grad = &grad + &((&theta - y) / gamma);
            // residual with the module-wide eta step
            let probe = oracle.prox_lower_nonsmooth(x, &(&theta - &(eta * &full_grad)), eta);
            let res = l2(&(&theta - &probe));
            if !res.is_finite() {
                return Err(AgilsError::NonFiniteIterate {
                    context: "prox-LL PGM residual".into(),
                });
            }
            if res < best_res {
                best_res = res;
                best = theta.clone();
            }
            if res <= target {
                return Ok(InnerResult { theta, residual: res, iterations: iter.max(1) });
            }
            if iter == max_iter {
                break;
            }
            theta = if (step - eta).abs() < f64::EPSILON * eta {
                probe
            } else {
                oracle.prox_lower_nonsmooth(x, &(&theta - &(step * &full_grad)), step)
            };
        }
        Err(AgilsError::MaxIterExceeded {
            max_iter,
            residual: best_res,
            target,
            best,
        })
    }

    #[allow(clippy::too_many_arguments)]
    fn prox_ll_fista(
        &mut self,
        oracle: &dyn BilevelOracle,
        x: &Vector,
        y: &Vector,
        gamma: f64,
        eta: f64,
        target: f64,
        warm: &Vector,
        max_iter: usize,
    ) -> Result<InnerResult> {
        let c = oracle.constants();
        let step = 1.0 / (c.l_fy + 1.0 / gamma);
        let objective = |theta: &Vector| -> f64 {
            oracle.lower_objective(x, theta) + l2sq(&(theta - y)) / (2.0 * gamma)
        };
        let mut theta = oracle.project_y(warm);
        let mut momentum = theta.clone();
        let mut t_acc = 1.0_f64;
        let mut prev_obj = objective(&theta);
        let mut best = theta.clone();
        let mut best_res = f64::INFINITY;
        for iter in 0..=max_iter {
            let res = prox_grad_residual(oracle, x, &theta, y, gamma, eta)?;
            if !res.is_finite() {
                return Err(AgilsError::NonFiniteIterate {
                    context: "prox-LL FISTA residual".into(),
                });
            }
            if res < best_res {
                best_res = res;
                best = theta.clone();
            }
            if res <= target {
                return Ok(InnerResult { theta, residual: res, iterations: iter.max(1) });
            }
            if iter == max_iter {
                break;
            }
            let (_, grad) = oracle.grad_lower_smooth(x, &momentum);
            let full_grad = &grad + &((&momentum - y) / gamma);
            let next = oracle.prox_lower_nonsmooth(x, &(&momentum - &(step * &full_grad)), step);
            let next_obj = objective(&next);
            if next_obj > prev_obj {
                // restart momentum on objective increase
                t_acc = 1.0;
                momentum = theta.clone();
                let (_, grad) = oracle.grad_lower_smooth(x, &momentum);
                let full_grad = &grad + &((&momentum - y) / gamma);
                let next = oracle.prox_lower_nonsmooth(x, &(&momentum - &(step * &full_grad)), step);
                prev_obj = objective(&next);
                momentum = next.clone();
                theta = next;
                continue;
            }
            let t_next = 0.5 * (1.0 + (1.0 + 4.0 * t_acc * t_acc).sqrt());
            momentum = &next + &(((t_acc - 1.0) / t_next) * &(&next - &theta));
            theta = next;
            t_acc = t_next;
            prev_obj = next_obj;
        }
        Err(AgilsError::MaxIterExceeded {
            max_iter,
            residual: best_res,
            target,
            best,
        })
    }

    #[allow(clippy::too_many_arguments)]
    fn prox_ll_admm(
        &mut self,
        oracle: &dyn BilevelOracle,
        x: &Vector,
        y: &Vector,
        gamma: f64,
        eta: f64,
        target: f64,
        warm: &Vector,
        max_iter: usize,
    ) -> Result<InnerResult> {
        let rhs0 = oracle
            .least_squares()
            .ok_or_else(|| {
                AgilsError::InvalidParameter(
                    "ADMM requires an oracle with a declared least-squares form".into(),
                )
            })?
            .rhs
            .clone();
        let rho = 1.0 / gamma;
        let mut z = oracle.project_y(warm);
        // ADMM iterates are not monotone in the prox-gradient residual: a
        // loose relative target could accept an iterate far worse than the
        // warm start and destabilize the outer loop. Gate acceptance at
        // the residual of one prox-gradient sweep from the warm start, so
        // a returned iterate is never worse than the cheapest alternative.
        let (_, grad) = oracle.grad_lower_smooth(x, &z);
        let full_grad = &grad + &((&z - y) / gamma);
        let sweep = oracle.prox_lower_nonsmooth(x, &(&z - &(eta * &full_grad)), eta);
        let sweep_res = prox_grad_residual(oracle, x, &sweep, y, gamma, eta)?;
        let accept = target.min(sweep_res);
        let mut dual = Array1::<f64>::zeros(z.len());
        let mut best = sweep;
        let mut best_res = sweep_res;
        for iter in 0..=max_iter {
            let res = prox_grad_residual(oracle, x, &z, y, gamma, eta)?;
            if !res.is_finite() {
                return Err(AgilsError::NonFiniteIterate {
                    context: "prox-LL ADMM residual".into(),
                });
            }
            if res < best_res {
                best_res = res;
                best = z.clone();
            }
            if res <= accept {
                return Ok(InnerResult { theta: z, residual: res, iterations: iter.max(1) });
            }
            if best_res <= accept && best_res < res {
                // the gating sweep already meets the target
                return Ok(InnerResult { theta: best, residual: best_res, iterations: iter.max(1) });
            }
            if iter == max_iter {
                break;
            }
            let factor = self.admm_factor(oracle, gamma)?;
            let rhs = &rhs0 + &(y / gamma) + &(rho * (&z - &dual));
            let theta = factor.solve(&rhs);
            z = oracle.prox_lower_nonsmooth(x, &(&theta + &dual), 1.0 / rho);
            dual = &dual + &(&theta - &z);
        }
        Err(AgilsError::MaxIterExceeded {
            max_iter,
            residual: best_res,
            target,
            best,
        })
    }

    /// Inexactly solves the plain lower-level problem min phi(x, .) to
    /// unit-step residual at most `target`, starting from `warm`.
    pub fn solve_ll(
        &mut self,
        oracle: &dyn BilevelOracle,
        x: &Vector,
        target: f64,
        warm: &Vector,
        max_iter: usize,
    ) -> Result<InnerResult> {
        if !(target > 0.0) {
            return Err(AgilsError::InvalidParameter(
                "solve_ll requires target > 0".into(),
            ));
        }
        let c = oracle.constants();
        let step = if c.l_fy > 0.0 { 1.0 / c.l_fy } else { 1.0 };
        let objective = |yv: &Vector| -> f64 { oracle.lower_objective(x, yv) };
        let mut y = oracle.project_y(warm);
        let mut momentum = y.clone();
        let mut t_acc = 1.0_f64;
        let mut prev_obj = objective(&y);
        let mut best = y.clone();
        let mut best_res = f64::INFINITY;
        for iter in 0..=max_iter {
            let res = unit_step_ll_residual(oracle, x, &y)?;
            if !res.is_finite() {
                return Err(AgilsError::NonFiniteIterate {
                    context: "LL solve residual".into(),
                });
            }
            if res < best_res {
                best_res = res;
                best = y.clone();
            }
            if res <= target {
                return Ok(InnerResult { theta: y, residual: res, iterations: iter.max(1) });
            }
            if iter == max_iter {
                break;
            }
            let (_, grad) = oracle.grad_lower_smooth(x, &momentum);
            let next = oracle.prox_lower_nonsmooth(x, &(&momentum - &(step * &grad)), step);
            let next_obj = objective(&next);
            if next_obj > prev_obj {
                t_acc = 1.0;
                momentum = y.clone();
                let (_, grad) = oracle.grad_lower_smooth(x, &momentum);
                let next = oracle.prox_lower_nonsmooth(x, &(&momentum - &(step * &grad)), step);
                prev_obj = objective(&next);
                momentum = next.clone();
                y = next;
                continue;
            }
            let t_next = 0.5 * (1.0 + (1.0 + 4.0 * t_acc * t_acc).sqrt());
            momentum = &next + &(((t_acc - 1.0) / t_next) * &(&next - &y));
            y = next;
            t_acc = t_next;
            prev_obj = next_obj;
        }
        Err(AgilsError::MaxIterExceeded {
            max_iter,
            residual: best_res,
            target,
            best,
        })
    }
}

impl Default for InnerWorkspace {
    fn default() -> Self {
        Self::new()
    }
}

/// One proximal-gradient sweep on the proximal lower-level problem,
/// ignoring any residual target. Used by the single-step ablation
/// variant. The sweep starts from the subproblem center y, so the
/// resulting displacement (y - theta)/gamma is the crude one-step
/// gradient-mapping surrogate for the envelope gradient.
pub fn single_prox_step(
    oracle: &dyn BilevelOracle,
    x: &Vector,
    y: &Vector,
    gamma: f64,
    eta: f64,
) -> Result<InnerResult> {
    let c = oracle.constants();
    let step = 1.0 / (c.l_fy + 1.0 / gamma);
    let cur = oracle.project_y(y);
    let (_, grad) = oracle.grad_lower_smooth(x, &cur);
    let full_grad = &grad + &((&cur - y) / gamma);
    let theta = oracle.prox_lower_nonsmooth(x, &(&cur - &(step * &full_grad)), step);
    let residual = prox_grad_residual(oracle, x, &theta, y, gamma, eta)?;
    Ok(InnerResult { theta, residual, iterations: 1 })
}

/// Default inner iteration budget for a lower-variable dimension m.
pub fn default_max_iter(m: usize) -> usize {
    10 * m + 1000
}

/// One-shot convenience wrappers without a persistent workspace.
#[allow(clippy::too_many_arguments)]
pub fn solve_prox_ll(
    oracle: &dyn BilevelOracle,
    x: &Vector,
    y: &Vector,
    gamma: f64,
    eta: f64,
    target: f64,
    warm: &Vector,
    method: InnerMethod,
    max_iter: usize,
) -> Result<InnerResult> {
    InnerWorkspace::new().solve_prox_ll(oracle, x, y, gamma, eta, target, warm, method, max_iter)
}

pub fn solve_ll(
    oracle: &dyn BilevelOracle,
    x: &Vector,
    target: f64,
    warm: &Vector,
    max_iter: usize,
) -> Result<InnerResult> {
    InnerWorkspace::new().solve_ll(oracle, x, target, warm, max_iter)
}

fn l2(v: &Vector) -> f64 {
    v.mapv(|a| a * a).sum().sqrt()
}

fn l2sq(v: &Vector) -> f64 {
    v.mapv(|a| a * a).sum()
}

//! The AGILS outer loop: alternating proximal-linearized updates of the
//! upper and lower variables against a penalized working objective, with
//! inexact proximal lower-level solves, penalty adaptation, and a
//! feasibility-correction procedure.

use std::time::Instant;

use serde::{Deserialize, Serialize};

use crate::error::{AgilsError, Result};
use crate::inner::{default_max_iter, single_prox_step, InnerMethod, InnerWorkspace};
use crate::problem::{
    default_eta, default_gamma, default_stepsizes, ensure_finite, BilevelOracle, Vector,
};
use crate::prox::prox_grad_residual;

/// Which inexactness criterion governs each inner solve.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Variant {
    /// max(absolute, relative) target.
    Both,
    AbsoluteOnly,
    RelativeOnly,
    /// Ablation: inner target pinned to 1e-10.
    NearExact,
    /// Ablation: a single proximal-gradient sweep, targets ignored.
    SingleStep,
}

impl std::fmt::Display for Variant {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        let s = match self {
            Variant::Both => "both",
            Variant::AbsoluteOnly => "absolute_only",
            Variant::RelativeOnly => "relative_only",
            Variant::NearExact => "near_exact",
            Variant::SingleStep => "single_step",
        };
        write!(f, "{s}")
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum StopRule {
    /// Stop when k >= 1 and max(delta, s_k, t) <= tol.
    TripleMax,
    /// Stop when the relative iterate change drops below `rel_tol` and
    /// the violation estimate t drops below `tol_t`.
    RelChangeAndT,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct AgilsConfig {
    /// Proximal parameter; defaults to 1/(rho_f2 + rho_g2).
    pub gamma: Option<f64>,
    /// Constraint relaxation.
    pub epsilon: f64,
    /// Residual step; defaults to 1/(L_fy + 1/gamma).
    pub eta: Option<f64>,
    pub p0: f64,
    /// Penalty increment.
    pub rho_p: f64,
    pub c_p: f64,
    pub c_y: f64,
    pub c_ytilde: f64,
    pub c_alpha: f64,
    pub c_beta: f64,
    /// Absolute inexactness schedule s_k = s0 / (k+1)^p_s.
    pub s0: f64,
    pub p_s: f64,
    /// Relative inexactness schedule tau_k = tau0 / (k+1)^p_tau.
    pub tau0: f64,
    pub p_tau: f64,
    pub variant: Variant,
    pub inner_method: InnerMethod,
    pub stop_rule: StopRule,
    pub tol: f64,
    /// Relative-change threshold for `RelChangeAndT`.
    pub rel_tol: f64,
    /// Violation threshold for `RelChangeAndT`.
    pub tol_t: f64,
    pub max_outer: usize,
    /// Inner iteration budget; defaults to 10 m + 1000.
    pub max_inner: Option<usize>,
    /// Enforce the open-interval gamma bound instead of accepting the
    /// boundary value.
    pub strict_gamma: bool,
}

impl Default for AgilsConfig {
    fn default() -> Self {
        Self {
            gamma: None,
            epsilon: 1e-6,
            eta: None,
            p0: 0.5,
            rho_p: 0.02,
            c_p: 1.0,
            c_y: 1.0,
            c_ytilde: 1.0,
            c_alpha: 0.1,
            c_beta: 0.1,
            s0: 0.05,
            p_s: 1.05,
            tau0: 20.0,
            p_tau: 0.7,
            variant: Variant::Both,
            inner_method: InnerMethod::Pgm,
            stop_rule: StopRule::TripleMax,
            tol: 1e-6,
            rel_tol: 1e-4,
            tol_t: 0.1,
            max_outer: 200_000,
            max_inner: None,
            strict_gamma: false,
        }
    }
}

impl AgilsConfig {
    pub fn validate(&self) -> Result<()> {
        let positive = [
            ("p0", self.p0),
            ("rho_p", self.rho_p),
            ("c_p", self.c_p),
            ("c_y", self.c_y),
            ("c_ytilde", self.c_ytilde),
            ("c_alpha", self.c_alpha),
            ("c_beta", self.c_beta),
            ("s0", self.s0),
            ("tau0", self.tau0),
            ("p_tau", self.p_tau),
            ("tol", self.tol),
        ];
        for (name, v) in positive {
            if !(v > 0.0) {
                return Err(AgilsError::InvalidParameter(format!(
                    "{name} must be positive, got {v}"
                )));
            }
        }
        if self.epsilon < 0.0 {
            return Err(AgilsError::InvalidParameter(
                "epsilon must be nonnegative".into(),
            ));
        }
        if self.p_s <= 1.0 {
            // square-summability of the absolute schedule needs p_s > 1/2;
            // the benchmark settings use p_s > 1, which we require up front
            return Err(AgilsError::InvalidParameter(format!(
                "p_s must exceed 1 for a square-summable schedule, got {}",
                self.p_s
            )));
        }
        if let Some(g) = self.gamma {
            if !(g > 0.0) {
                return Err(AgilsError::InvalidParameter("gamma must be positive".into()));
            }
        }
        Ok(())
    }

    pub fn s_k(&self, k: usize) -> f64 {
        self.s0 / ((k + 1) as f64).powf(self.p_s)
    }

    pub fn tau_k(&self, k: usize) -> f64 {
        self.tau0 / ((k + 1) as f64).powf(self.p_tau)
    }
}

/// Residual target for the inner solve at outer index k, given the
/// reference residual from the criterion's bookkeeping.
pub fn inexactness_target(k: usize, cfg: &AgilsConfig, g_prev: f64) -> f64 {
    match cfg.variant {
        Variant::Both => cfg.s_k(k).max(cfg.tau_k(k) * g_prev),
        Variant::AbsoluteOnly => cfg.s_k(k),
        Variant::RelativeOnly => (cfg.tau_k(k) * g_prev).max(1e-14),
        Variant::NearExact => 1e-10,
        Variant::SingleStep => f64::INFINITY,
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum CaseTaken {
    Case1,
    Case2,
    Case3Accepted,
    Case3Rejected,
}

impl std::fmt::Display for CaseTaken {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        let s = match self {
            CaseTaken::Case1 => "case1",
            CaseTaken::Case2 => "case2",
            CaseTaken::Case3Accepted => "case3_accepted",
            CaseTaken::Case3Rejected => "case3_rejected",
        };
        write!(f, "{s}")
    }
}

/// Per-iteration metrics kept in the run trace.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct IterationRecord {
    pub k: usize,
    pub p: f64,
    pub alpha: f64,
    pub beta: f64,
    pub delta: f64,
    pub t: f64,
    pub g_half: f64,
    pub g_full: f64,
    pub g_half_target: f64,
    pub g_full_target: f64,
    pub inner_iters_half: usize,
    pub inner_iters_full: usize,
    pub psi_tilde_proxy: f64,
    pub case_taken: CaseTaken,
    /// Instance metric (toy error or validation error) when a hook is set.
    pub metric: Option<f64>,
    pub wall_time_ms: f64,
    /// Set when a correction candidate solve failed its target and the
    /// correction was rejected conservatively.
    pub correction_solve_failed: bool,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Termination {
    StopRule,
    MetricReached,
    MaxOuterExceeded,
}

#[derive(Debug, Clone)]
pub struct RunTrace {
    pub records: Vec<IterationRecord>,
    pub outer_iterations: usize,
    pub total_inner_iterations: usize,
    pub correction_count: usize,
    pub final_p: f64,
    pub termination: Termination,
    pub wall_time_ms: f64,
}

impl RunTrace {
    pub fn inner_to_outer_ratio(&self) -> f64 {
        if self.outer_iterations == 0 {
            0.0
        } else {
            self.total_inner_iterations as f64 / self.outer_iterations as f64
        }
    }
}

pub struct RunOutcome {
    pub x: Vector,
    pub y_tilde: Vector,
    pub theta_tilde: Vector,
    pub trace: RunTrace,
}

/// Initial iterates; the solver aliases theta^{-1} to theta0.
pub struct InitialPoint {
    pub x0: Vector,
    pub y0: Vector,
    pub theta0: Vector,
}

/// Optional per-iteration metric hook with an early-stop threshold,
/// evaluated at (x^{k+1}, y~^{k+1}).
pub struct MetricHook<'a> {
    pub eval: &'a (dyn Fn(&Vector, &Vector) -> f64 + Sync),
    pub stop_below: Option<f64>,
}

/// Update direction for y at (x^k, y~^k, theta~^k):
/// (1/p) grad_y F + grad_y f - (y~ - theta~)/gamma.
pub fn direction_y(
    oracle: &dyn BilevelOracle,
    x: &Vector,
    y_tilde: &Vector,
    theta_tilde: &Vector,
    p: f64,
    gamma: f64,
) -> Vector {
    let (_, gy_upper) = oracle.grad_upper(x, y_tilde);
    let (_, gy_f) = oracle.grad_lower_smooth(x, y_tilde);
    &(&gy_upper / p) + &gy_f - &((y_tilde - theta_tilde) / gamma)
}

/// y^{k+1} = Prox_{beta g~(x,.)}(y~^k - beta d_y).
pub fn update_y(
    oracle: &dyn BilevelOracle,
    x: &Vector,
    y_tilde: &Vector,
    d_y: &Vector,
    beta: f64,
) -> Vector {
    oracle.prox_lower_nonsmooth(x, &(y_tilde - &(beta * d_y)), beta)
}

/// Update direction for x at (x^k, y^{k+1}) with the half-step theta:
/// (1/p) grad_x F + grad_x phi(x, y+) - grad_x f(x, theta) - grad_x g(x, theta).
pub fn direction_x(
    oracle: &dyn BilevelOracle,
    x: &Vector,
    y_next: &Vector,
    theta_half: &Vector,
    p: f64,
) -> Vector {
    let (gx_upper, _) = oracle.grad_upper(x, y_next);
    let (gx_f_y, _) = oracle.grad_lower_smooth(x, y_next);
    let gx_g_y = oracle.grad_x_lower_nonsmooth(x, y_next);
    let (gx_f_th, _) = oracle.grad_lower_smooth(x, theta_half);
    let gx_g_th = oracle.grad_x_lower_nonsmooth(x, theta_half);
    &(&gx_upper / p) + &gx_f_y + &gx_g_y - &gx_f_th - &gx_g_th
}

/// x^{k+1} = Proj_X(x^k - alpha d_x).
pub fn update_x(oracle: &dyn BilevelOracle, x: &Vector, d_x: &Vector, alpha: f64) -> Vector {
    oracle.project_x(&(x - &(alpha * d_x)))
}

/// t^{k+1} = max(phi(x,y) - phi(x,theta) - ||theta - y||^2/(2 gamma) - epsilon, 0).
pub fn constraint_violation_estimate(
    oracle: &dyn BilevelOracle,
    x: &Vector,
    y: &Vector,
    theta: &Vector,
    gamma: f64,
    epsilon: f64,
) -> f64 {
    let gap = oracle.lower_objective(x, y)
        - oracle.lower_objective(x, theta)
        - l2sq(&(theta - y)) / (2.0 * gamma)
        - epsilon;
    gap.max(0.0)
}

fn l2(v: &Vector) -> f64 {
    v.mapv(|a| a * a).sum().sqrt()
}

fn l2sq(v: &Vector) -> f64 {
    v.mapv(|a| a * a).sum()
}

fn joint_norm(dx: &Vector, dy: &Vector) -> f64 {
    (l2sq(dx) + l2sq(dy)).sqrt()
}

/// Penalized merit value (1/p)(F - F_lb) + phi(x, y) - (phi(x, theta) + ||theta-y||^2/(2 gamma)),
/// evaluated with the achieved theta; an upper bound on the working
/// objective up to inner error.
fn merit_proxy(
    oracle: &dyn BilevelOracle,
    x: &Vector,
    y: &Vector,
    theta: &Vector,
    p: f64,
    gamma: f64,
) -> f64 {
    (oracle.upper(x, y) - oracle.upper_lower_bound()) / p + oracle.lower_objective(x, y)
        - (oracle.lower_objective(x, theta) + l2sq(&(theta - y)) / (2.0 * gamma))
}

/// Descent comparator of the feasibility correction: the penalized
/// envelope gap at the candidate must not exceed the one at (y+, theta+).
fn correction_score(
    oracle: &dyn BilevelOracle,
    x: &Vector,
    y: &Vector,
    theta: &Vector,
    p: f64,
    gamma: f64,
) -> f64 {
    oracle.upper(x, y) / p + oracle.lower_objective(x, y)
        - (oracle.lower_objective(x, theta) + l2sq(&(theta - y)) / (2.0 * gamma))
}

struct ResolvedParams {
    gamma: f64,
    eta: f64,
    max_inner: usize,
}

fn resolve_params(oracle: &dyn BilevelOracle, cfg: &AgilsConfig) -> Result<ResolvedParams> {
    cfg.validate()?;
    let c = oracle.constants();
    c.validate()?;
    let gamma = match cfg.gamma {
        Some(g) => g,
        None => default_gamma(&c)?,
    };
    let denom = c.rho_f2 + c.rho_g2;
    if denom > 0.0 {
        let bound = 1.0 / denom;
        let ok = if cfg.strict_gamma {
            gamma < bound
        } else {
            gamma <= bound + 1e-12
        };
        if !ok {
            return Err(AgilsError::InvalidParameter(format!(
                "gamma = {gamma} outside the admissible range (0, {bound}]"
            )));
        }
    }
    let eta = cfg.eta.unwrap_or_else(|| default_eta(&c, gamma));
    if !(eta > 0.0) {
        return Err(AgilsError::InvalidParameter("eta must be positive".into()));
    }
    let (_, m) = oracle.dims();
    Ok(ResolvedParams {
        gamma,
        eta,
        max_inner: cfg.max_inner.unwrap_or_else(|| default_max_iter(m)),
    })
}

/// Runs AGILS from `init`, returning the final (x, y~) and a full trace.
pub fn agils_solve(
    oracle: &dyn BilevelOracle,
    cfg: &AgilsConfig,
    init: &InitialPoint,
    metric_hook: Option<&MetricHook>,
) -> Result<RunOutcome> {
    let params = resolve_params(oracle, cfg)?;
    let gamma = params.gamma;
    let eta = params.eta;
    let max_inner = params.max_inner;
    let c = oracle.constants();
    let start = Instant::now();

    let mut inner = InnerWorkspace::new();
    let mut x = oracle.project_x(&init.x0);
    let mut y = oracle.project_y(&init.y0);
    let mut y_tilde = y.clone();
    let mut theta = oracle.project_y(&init.theta0);
    let mut theta_tilde = theta.clone();
    let mut p = cfg.p0;

    // theta^{-1} aliases theta~^0: both criterion references start from
    // the residual of the initial theta at (x^0, y^0)
    let g0 = prox_grad_residual(oracle, &x, &theta, &y, gamma, eta)?;
    let mut g_one_back = g0; // residual of theta^k at (x^k, y^k)
    let mut g_two_back = g0; // residual of theta^{k-1} at (x^{k-1}, y^{k-1})

    let mut records: Vec<IterationRecord> = Vec::new();
    let mut total_inner = 0usize;
    let mut correction_count = 0usize;
    let mut termination = Termination::MaxOuterExceeded;
    let mut outer_done = 0usize;

    for k in 0..cfg.max_outer {
        let iter_start = Instant::now();
        let (alpha, beta) = default_stepsizes(&c, p, cfg.c_alpha, cfg.c_beta)?;

        // y update
        let d_y = direction_y(oracle, &x, &y_tilde, &theta_tilde, p, gamma);
        let y_next = update_y(oracle, &x, &y_tilde, &d_y, beta);
        ensure_finite(&y_next, "y update")?;

        // half-step theta at (x^k, y^{k+1})
        let target_half = inexactness_target(k, cfg, g_two_back);
        let half = if cfg.variant == Variant::SingleStep {
            single_prox_step(oracle, &x, &y_next, gamma, eta)?
        } else {
            inner.solve_prox_ll(
                oracle,
                &x,
                &y_next,
                gamma,
                eta,
                target_half,
                &theta,
                cfg.inner_method,
                max_inner,
            )?
        };
        total_inner += half.iterations;

        // x update
        let d_x = direction_x(oracle, &x, &y_next, &half.theta, p);
        let x_next = update_x(oracle, &x, &d_x, alpha);
        ensure_finite(&x_next, "x update")?;

        // full-step theta at (x^{k+1}, y^{k+1})
        let target_full = inexactness_target(k + 1, cfg, g_one_back);
        let full = if cfg.variant == Variant::SingleStep {
            single_prox_step(oracle, &x_next, &y_next, gamma, eta)?
        } else {
            inner.solve_prox_ll(
                oracle,
                &x_next,
                &y_next,
                gamma,
                eta,
                target_full,
                &half.theta,
                cfg.inner_method,
                max_inner,
            )?
        };
        total_inner += full.iterations;

        let delta = joint_norm(&(&x_next - &x), &(&y_next - &y_tilde));
        let t = constraint_violation_estimate(
            oracle,
            &x_next,
            &y_next,
            &full.theta,
            gamma,
            cfg.epsilon,
        );

        // stopping rules (checked before the penalty/correction step)
        let stopped = k >= 1
            && match cfg.stop_rule {
                StopRule::TripleMax => delta.max(cfg.s_k(k)).max(t) <= cfg.tol,
                StopRule::RelChangeAndT => {
                    let rel = joint_norm(&(&x_next - &x), &(&y_next - &y))
                        / (1.0 + l2sq(&x) + l2sq(&y)).sqrt();
                    rel < cfg.rel_tol && t < cfg.tol_t
                }
            };

        // penalty update / feasibility correction
        let trigger = delta < cfg.c_p * (1.0 / p).min(t);
        let gap = l2(&(&y_next - &full.theta));
        let p_before = p;
        let mut correction_solve_failed = false;
        let (case_taken, new_y_tilde, new_theta_tilde) = if !trigger {
            (CaseTaken::Case1, y_next.clone(), full.theta.clone())
        } else if gap <= cfg.c_y * gamma / p {
            p += cfg.rho_p;
            (CaseTaken::Case2, y_next.clone(), full.theta.clone())
        } else {
            correction_count += 1;
            let ll_target = (cfg.c_ytilde / p_before * delta).max(1e-14);
            let candidate = inner.solve_ll(oracle, &x_next, ll_target, &y_next, max_inner);
            match candidate {
                Ok(cand) => {
                    total_inner += cand.iterations;
                    let target_corr = inexactness_target(k + 1, cfg, g_one_back);
                    let corr_theta = inner.solve_prox_ll(
                        oracle,
                        &x_next,
                        &cand.theta,
                        gamma,
                        eta,
                        target_corr,
                        &full.theta,
                        cfg.inner_method,
                        max_inner,
                    )?;
                    total_inner += corr_theta.iterations;
                    let lhs = correction_score(
                        oracle, &x_next, &cand.theta, &corr_theta.theta, p_before, gamma,
                    );
                    let rhs =
                        correction_score(oracle, &x_next, &y_next, &full.theta, p_before, gamma);
                    if lhs <= rhs {
                        (CaseTaken::Case3Accepted, cand.theta, corr_theta.theta)
                    } else {
                        p += cfg.rho_p;
                        (CaseTaken::Case3Rejected, y_next.clone(), full.theta.clone())
                    }
                }
                Err(AgilsError::MaxIterExceeded { .. }) => {
                    // candidate solve missed its target: reject conservatively
                    correction_solve_failed = true;
                    p += cfg.rho_p;
                    (CaseTaken::Case3Rejected, y_next.clone(), full.theta.clone())
                }
                Err(e) => return Err(e),
            }
        };

        let psi = merit_proxy(oracle, &x_next, &new_y_tilde, &new_theta_tilde, p_before, gamma);
        let metric = metric_hook.map(|h| (h.eval)(&x_next, &new_y_tilde));

        records.push(IterationRecord {
            k,
            p: p_before,
            alpha,
            beta,
            delta,
            t,
            g_half: half.residual,
            g_full: full.residual,
            g_half_target: target_half,
            g_full_target: target_full,
            inner_iters_half: half.iterations,
            inner_iters_full: full.iterations,
            psi_tilde_proxy: psi,
            case_taken,
            metric,
            wall_time_ms: iter_start.elapsed().as_secs_f64() * 1e3,
            correction_solve_failed,
        });

        // advance criterion bookkeeping and state
        g_two_back = g_one_back;
        g_one_back = full.residual;
        x = x_next;
        y = y_next;
        y_tilde = new_y_tilde;
        theta = full.theta;
        theta_tilde = new_theta_tilde;
        outer_done = k + 1;

        if stopped {
            termination = Termination::StopRule;
            break;
        }
        if let Some(h) = metric_hook {
            if let (Some(threshold), Some(mv)) = (h.stop_below, metric) {
                if mv < threshold {
                    termination = Termination::MetricReached;
                    break;
                }
            }
        }
    }

    Ok(RunOutcome {
        x,
        y_tilde,
        theta_tilde,
        trace: RunTrace {
            records,
            outer_iterations: outer_done,
            total_inner_iterations: total_inner,
            correction_count,
            final_p: p,
            termination,
            wall_time_ms: start.elapsed().as_secs_f64() * 1e3,
        },
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::instances::{make_toy, QuadraticInstance};

    #[test]
    fn inexactness_target_examples() {
        let cfg = AgilsConfig::default(); // s0 = 0.05, p_s = 1.05
        assert_eq!(inexactness_target(0, &cfg, 0.0), 0.05);

        let abs = AgilsConfig {
            variant: Variant::AbsoluteOnly,
            ..Default::default()
        };
        let expect = 0.05 / 4.0_f64.powf(1.05);
        assert!((inexactness_target(3, &abs, 123.0) - expect).abs() < 1e-12);
        assert!((expect - 0.011664).abs() < 1e-5);

        let rel = AgilsConfig {
            variant: Variant::RelativeOnly,
            ..Default::default()
        };
        let expect = 20.0 / 2.0_f64.powf(0.7) * 0.1;
        assert!((inexactness_target(1, &rel, 0.1) - expect).abs() < 1e-12);
        assert!((expect - 1.2311).abs() < 1e-4);
        // zero reference is floored
        assert_eq!(inexactness_target(1, &rel, 0.0), 1e-14);
    }

    #[test]
    fn direction_y_zero_cases() {
        let inst = QuadraticInstance::new(Vector::zeros(3));
        // F = 0, grad_y f(., c) = 0 at y = c = 0, theta~ = y~ kills the
        // envelope term
        let x = Vector::zeros(1);
        let y = Vector::zeros(3);
        let d = direction_y(&inst, &x, &y, &y, 2.0, 1.0);
        assert!(d.iter().all(|v| v.abs() < 1e-15));

        // theta~ = y~ + gamma w makes the envelope term contribute +w
        let w = Vector::from(vec![1.0, -2.0, 0.5]);
        let gamma = 0.5;
        let theta = &y + &(gamma * &w);
        let d = direction_y(&inst, &x, &y, &theta, 2.0, gamma);
        for (a, b) in d.iter().zip(w.iter()) {
            assert!((a - b).abs() < 1e-12);
        }
    }

    #[test]
    fn direction_y_toy_fixed_point() {
        // toy at x = 0, y~ = theta~ = a: grad_y f = 0, so d_y = (1/p) 1
        let inst = make_toy(4).unwrap();
        let a = inst.offsets().clone();
        let d = direction_y(&inst, &Vector::zeros(4), &a, &a, 0.5, 1.0);
        for v in d.iter() {
            assert!((v - 2.0).abs() < 1e-12);
        }
    }

    #[test]
    fn direction_x_cancellation_and_toy() {
        let inst = make_toy(4).unwrap();
        let x = Vector::from(vec![0.2, 0.3, 0.4, 0.5]);
        let y = Vector::from(vec![1.0, -1.0, 0.5, 0.0]);
        // theta = y: everything cancels except (1/p) grad_x F = 0 for toy
        let d = direction_x(&inst, &x, &y, &y, 2.0);
        assert!(d.iter().all(|v| v.abs() < 1e-15));

        // toy: d_x = |y+| - |theta| componentwise
        let th = Vector::from(vec![0.5, -0.25, 0.0, 2.0]);
        let d = direction_x(&inst, &x, &y, &th, 2.0);
        for i in 0..4 {
            assert!((d[i] - (y[i].abs() - th[i].abs())).abs() < 1e-12);
        }
    }

    #[test]
    fn update_steps_behave() {
        let inst = make_toy(4).unwrap();
        let x = Vector::from(vec![0.5; 4]);
        let y = Vector::from(vec![0.4, -0.4, 0.0, 1.0]);
        // d_y = 0 with zero prox weight keeps y
        let zero_x = Vector::zeros(4);
        let kept = update_y(&inst, &zero_x, &y, &Vector::zeros(4), 0.1);
        assert_eq!(kept, y);
        // update_y equals componentwise soft threshold at x weights
        let d = Vector::from(vec![0.1, 0.2, -0.3, 0.0]);
        let beta = 0.2;
        let got = update_y(&inst, &x, &y, &d, beta);
        for i in 0..4 {
            let v = y[i] - beta * d[i];
            let lam = beta * x[i];
            let expect = v.signum() * (v.abs() - lam).max(0.0);
            assert!((got[i] - expect).abs() < 1e-15);
        }
        // x step clamps into the box
        let stepped = update_x(&inst, &x, &Vector::from(vec![-10.0, 10.0, 0.0, 0.1]), 1.0);
        assert_eq!(stepped.to_vec(), vec![1.0, 0.0, 0.5, 0.4]);
        // d_x = 0 keeps x
        assert_eq!(update_x(&inst, &x, &Vector::zeros(4), 1.0), x);
    }

    #[test]
    fn violation_estimate_cases() {
        let inst = make_toy(4).unwrap();
        let x = Vector::from(vec![0.5; 4]);
        let y = Vector::from(vec![0.1, -0.2, 0.3, 0.0]);
        // theta = y gives max(-eps, 0) = 0
        assert_eq!(constraint_violation_estimate(&inst, &x, &y, &y, 1.0, 1e-6), 0.0);

        // deliberately infeasible y: value equals the direct evaluation
        // (gamma large enough that the quadratic term stays small)
        let y_bad = inst.offsets().mapv(|a| a + 5.0);
        let theta = Vector::zeros(4);
        let gamma = 100.0;
        let got = constraint_violation_estimate(&inst, &x, &y_bad, &theta, gamma, 1e-6);
        let direct = inst.lower_objective(&x, &y_bad)
            - inst.lower_objective(&x, &theta)
            - (&theta - &y_bad).mapv(|v| v * v).sum() / (2.0 * gamma)
            - 1e-6;
        assert!(got > 0.0);
        assert!((got - direct).abs() < 1e-12);
    }

    #[test]
    fn config_validation() {
        let mut cfg = AgilsConfig::default();
        assert!(cfg.validate().is_ok());
        cfg.p_s = 0.9;
        assert!(cfg.validate().is_err());
        let cfg = AgilsConfig {
            p0: 0.0,
            ..Default::default()
        };
        assert!(cfg.validate().is_err());
    }

    #[test]
    fn stationary_start_stops_immediately() {
        // F contributes only grad_y F = 0 for the quadratic; with
        // y0 = theta0 = c the iterates never move and the triple-max stop
        // rule fires at k = 1
        let c = Vector::from(vec![0.3, -0.7]);
        let inst = QuadraticInstance::new(c.clone());
        // s0 below tol so the absolute-target term does not dominate the
        // stop rule max
        let cfg = AgilsConfig {
            gamma: Some(1.0),
            tol: 1e-4,
            s0: 1e-6,
            ..Default::default()
        };
        let init = InitialPoint {
            x0: Vector::zeros(1),
            y0: c.clone(),
            theta0: c.clone(),
        };
        let out = agils_solve(&inst, &cfg, &init, None).unwrap();
        assert_eq!(out.trace.termination, Termination::StopRule);
        assert!(out.trace.outer_iterations <= 3);
        let last = out.trace.records.last().unwrap();
        assert!(last.delta < 1e-10);
        assert_eq!(last.t, 0.0);
    }

    #[test]
    fn penalty_monotone_with_exact_increments() {
        let inst = make_toy(8).unwrap();
        let cfg = AgilsConfig {
            max_outer: 300,
            tol: 1e-12,
            ..Default::default()
        };
        let init = InitialPoint {
            x0: Vector::zeros(8),
            y0: inst.offsets().clone(),
            theta0: inst.offsets().clone(),
        };
        let out = agils_solve(&inst, &cfg, &init, None).unwrap();
        let mut prev_p = cfg.p0;
        for rec in &out.trace.records {
            assert!(rec.p >= prev_p - 1e-15);
            let inc = rec.p - prev_p;
            assert!(inc.abs() < 1e-12 || (inc - cfg.rho_p).abs() < 1e-12);
            prev_p = rec.p;
        }
    }

    #[test]
    fn trace_residuals_meet_targets() {
        let inst = make_toy(8).unwrap();
        let cfg = AgilsConfig {
            max_outer: 100,
            tol: 1e-12,
            ..Default::default()
        };
        let init = InitialPoint {
            x0: Vector::zeros(8),
            y0: inst.offsets().clone(),
            theta0: inst.offsets().clone(),
        };
        let out = agils_solve(&inst, &cfg, &init, None).unwrap();
        for rec in &out.trace.records {
            assert!(rec.g_half <= rec.g_half_target * (1.0 + 1e-12));
            assert!(rec.g_full <= rec.g_full_target * (1.0 + 1e-12));
        }
    }
}

//! The bilevel-problem oracle interface and the constants bundle.
//!
//! A bilevel problem here is
//!   min_{x in X, y in Y} F(x, y)  s.t.  y in argmin_y f(x, y) + g(x, y),
//! with f smooth, g prox-friendly in y and differentiable in x.

use ndarray::Array1;

use crate::error::{AgilsError, Result};

/// Dense 64-bit vectors throughout; instances are dense.
pub type Vector = Array1<f64>;

/// Smoothness and weak-convexity moduli of the problem data.
///
/// `l_fx`/`l_fy` are the Lipschitz moduli of the partial gradients of f,
/// `l_g1`/`l_g2` those of `grad_x g` in x and y, and `rho_*` the
/// weak-convexity moduli of f and g in (x, y).
#[derive(Debug, Clone, Copy, Default, PartialEq)]
pub struct ProblemConstants {
    pub l_fx: f64,
    pub l_fy: f64,
    pub l_f_upper_x: f64,
    pub l_f_upper_y: f64,
    pub l_g1: f64,
    pub l_g2: f64,
    pub rho_f1: f64,
    pub rho_f2: f64,
    pub rho_g1: f64,
    pub rho_g2: f64,
}

impl ProblemConstants {
    pub fn validate(&self) -> Result<()> {
        let all = [
            self.l_fx,
            self.l_fy,
            self.l_f_upper_x,
            self.l_f_upper_y,
            self.l_g1,
            self.l_g2,
            self.rho_f1,
            self.rho_f2,
            self.rho_g1,
            self.rho_g2,
        ];
        if all.iter().any(|c| !c.is_finite() || *c < 0.0) {
            return Err(AgilsError::InvalidParameter(
                "problem constants must be finite and nonnegative".into(),
            ));
        }
        Ok(())
    }
}

/// Fixed least-squares structure of the smooth lower-level term,
/// f(x, y) = ||A y - b||^2 / (2 n), independent of x. Declared by an
/// oracle to make the ADMM inner solver admissible.
#[derive(Debug, Clone)]
pub struct LeastSquaresForm {
    /// Gram matrix A^T A / n.
    pub gram: ndarray::Array2<f64>,
    /// Right-hand side A^T b / n.
    pub rhs: Vector,
}

/// Callable surface of a bilevel problem instance.
///
/// All obligations are total on X x Y. Implementations are immutable
/// after construction and safe for concurrent read-only use.
pub trait BilevelOracle: Sync {
    /// (n, m): dimensions of the upper and lower variables.
    fn dims(&self) -> (usize, usize);

    fn constants(&self) -> ProblemConstants;

    /// Upper-level objective F(x, y).
    fn upper(&self, x: &Vector, y: &Vector) -> f64;

    /// Both partial gradients of F in one call.
    fn grad_upper(&self, x: &Vector, y: &Vector) -> (Vector, Vector);

    /// Smooth lower-level term f(x, y).
    fn lower_smooth(&self, x: &Vector, y: &Vector) -> f64;

    /// Both partial gradients of f in one call.
    fn grad_lower_smooth(&self, x: &Vector, y: &Vector) -> (Vector, Vector);

    /// Nonsmooth lower-level term g(x, y).
    fn lower_nonsmooth(&self, x: &Vector, y: &Vector) -> f64;

    /// Partial gradient of g with respect to x.
    fn grad_x_lower_nonsmooth(&self, x: &Vector, y: &Vector) -> Vector;

    /// Prox_{step * (g(x, .) + indicator_Y)}(v). The result lies in Y.
    fn prox_lower_nonsmooth(&self, x: &Vector, v: &Vector, step: f64) -> Vector;

    fn project_x(&self, v: &Vector) -> Vector;

    fn project_y(&self, v: &Vector) -> Vector;

    /// Lower-level objective phi(x, y) = f(x, y) + g(x, y).
    fn lower_objective(&self, x: &Vector, y: &Vector) -> f64 {
        self.lower_smooth(x, y) + self.lower_nonsmooth(x, y)
    }

    /// Lower bound on F over X x Y, used only for monitoring.
    fn upper_lower_bound(&self) -> f64 {
        0.0
    }

    /// Least-squares structure of f(x, .), when it has one.
    fn least_squares(&self) -> Option<&LeastSquaresForm> {
        None
    }
}

/// Fail hard on NaN/Inf crossing an oracle boundary.
pub fn ensure_finite(v: &Vector, context: &str) -> Result<()> {
    if v.iter().all(|a| a.is_finite()) {
        Ok(())
    } else {
        Err(AgilsError::NonFiniteIterate {
            context: context.to_string(),
        })
    }
}

pub fn ensure_finite_scalar(s: f64, context: &str) -> Result<()> {
    if s.is_finite() {
        Ok(())
    } else {
        Err(AgilsError::NonFiniteIterate {
            context: context.to_string(),
        })
    }
}

/// Smoothness moduli of the penalized working objective at penalty p:
/// L_psi_x = L_Fx/p + L_fx + L_g1 + rho_f1 + rho_g1,
/// L_psi_y = L_Fy/p + L_fy.
pub fn effective_smoothness(c: &ProblemConstants, p: f64) -> Result<(f64, f64)> {
    if !(p > 0.0) {
        return Err(AgilsError::InvalidParameter(format!(
            "penalty p must be positive, got {p}"
        )));
    }
    let l_psi_x = c.l_f_upper_x / p + c.l_fx + c.l_g1 + c.rho_f1 + c.rho_g1;
    let l_psi_y = c.l_f_upper_y / p + c.l_fy;
    Ok((l_psi_x, l_psi_y))
}

/// Step sizes alpha = 1/(L_psi_x + c_alpha), beta = 1/(L_psi_y + c_beta),
/// sitting inside the admissible range [0, 2/(L + c)].
pub fn default_stepsizes(
    c: &ProblemConstants,
    p: f64,
    c_alpha: f64,
    c_beta: f64,
) -> Result<(f64, f64)> {
    if !(c_alpha > 0.0) || !(c_beta > 0.0) {
        return Err(AgilsError::InvalidParameter(
            "c_alpha and c_beta must be positive".into(),
        ));
    }
    let (l_psi_x, l_psi_y) = effective_smoothness(c, p)?;
    Ok((1.0 / (l_psi_x + c_alpha), 1.0 / (l_psi_y + c_beta)))
}

/// Default proximal parameter gamma = 1/(rho_f2 + rho_g2).
pub fn default_gamma(c: &ProblemConstants) -> Result<f64> {
    let denom = c.rho_f2 + c.rho_g2;
    if denom <= 0.0 {
        return Err(AgilsError::InvalidParameter(
            "rho_f2 + rho_g2 = 0: gamma must be user-supplied".into(),
        ));
    }
    Ok(1.0 / denom)
}

/// Default proximal-gradient step eta = 1/(L_fy + 1/gamma), fixed per run.
pub fn default_eta(c: &ProblemConstants, gamma: f64) -> f64 {
    1.0 / (c.l_fy + 1.0 / gamma)
}

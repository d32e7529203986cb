//! Grid search and random search over hyperparameters. Each candidate
//! solves the plain lower-level problem and is scored by the upper
//! objective at the resulting estimator.

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::error::{AgilsError, Result};
use crate::inner::InnerWorkspace;
use crate::problem::{BilevelOracle, Vector};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum SearchMode {
    /// Grid over one or two axes with tied coordinates.
    GridTied,
    RandomUniform,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum SearchScale {
    Linear,
    /// Coordinates are base-10 exponents; candidates are 10^rho.
    Log10,
}

/// Search-space description for both baselines.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct SearchSpec {
    pub mode: SearchMode,
    pub scale: SearchScale,
    pub lo: f64,
    pub hi: f64,
    /// GridTied: points per axis. RandomUniform: total budget.
    pub budget: usize,
    /// Number of tied axes for the grid: 1 ties every coordinate to one
    /// value; 2 ties the first dim-1 coordinates to one axis and the last
    /// coordinate to the second.
    pub grid_axes: usize,
    /// Residual target for the per-candidate lower-level solves.
    pub ll_target: f64,
    pub ll_max_iter: usize,
}

impl SearchSpec {
    pub fn validate(&self) -> Result<()> {
        if self.lo >= self.hi {
            return Err(AgilsError::InvalidParameter(format!(
                "search bounds out of order: {} >= {}",
                self.lo, self.hi
            )));
        }
        if self.budget == 0 {
            return Err(AgilsError::InvalidParameter("budget must be >= 1".into()));
        }
        if !matches!(self.grid_axes, 1 | 2) {
            return Err(AgilsError::InvalidParameter(
                "grid_axes must be 1 or 2".into(),
            ));
        }
        Ok(())
    }

    /// Toy default: a 100-point tied grid on [0, 1].
    pub fn toy_grid() -> Self {
        Self {
            mode: SearchMode::GridTied,
            scale: SearchScale::Linear,
            lo: 0.0,
            hi: 1.0,
            budget: 100,
            grid_axes: 1,
            ll_target: 1e-6,
            ll_max_iter: 50_000,
        }
    }

    /// Toy default: 100 uniform samples from [0, 1]^n.
    pub fn toy_random() -> Self {
        Self {
            mode: SearchMode::RandomUniform,
            budget: 100,
            ..Self::toy_grid()
        }
    }

    /// SGL default: 20 x 20 grid in log10 space over [-9, 2], group
    /// weights tied on one axis, the l1 weight on the other.
    pub fn sgl_grid() -> Self {
        Self {
            mode: SearchMode::GridTied,
            scale: SearchScale::Log10,
            lo: -9.0,
            hi: 2.0,
            budget: 20,
            grid_axes: 2,
            ll_target: 1e-6,
            ll_max_iter: 50_000,
        }
    }

    /// SGL default: 400 uniform samples in log10 space.
    pub fn sgl_random() -> Self {
        Self {
            mode: SearchMode::RandomUniform,
            budget: 400,
            ..Self::sgl_grid()
        }
    }
}

/// One scored candidate.
#[derive(Debug, Clone)]
pub struct SearchCell {
    pub index: usize,
    /// Raw coordinates in search space (log-coordinates for Log10 scale).
    pub coords: Vec<f64>,
    pub x: Vector,
    pub score: Option<f64>,
    pub inner_iters: usize,
}

#[derive(Debug)]
pub struct SearchResult {
    pub x_best: Vector,
    pub y_best: Vector,
    pub score_best: f64,
    pub table: Vec<SearchCell>,
}

fn to_hyperparams(coords: &[f64], dim: usize, spec: &SearchSpec) -> Vector {
    // tied pattern: one axis ties all coordinates, two axes tie
    // the first dim-1 coordinates and the last one separately
    let mut x = Vector::zeros(dim);
    match coords.len() {
        1 => x.fill(scale_value(coords[0], spec)),
        2 => {
            let head = scale_value(coords[0], spec);
            for i in 0..dim - 1 {
                x[i] = head;
            }
            x[dim - 1] = scale_value(coords[1], spec);
        }
        _ => {
            for (i, c) in coords.iter().enumerate() {
                x[i] = scale_value(*c, spec);
            }
        }
    }
    x
}

fn scale_value(c: f64, spec: &SearchSpec) -> f64 {
    match spec.scale {
        SearchScale::Linear => c,
        SearchScale::Log10 => 10f64.powf(c),
    }
}

fn axis_points(spec: &SearchSpec) -> Vec<f64> {
    if spec.budget == 1 {
        return vec![0.5 * (spec.lo + spec.hi)];
    }
    (0..spec.budget)
        .map(|i| spec.lo + (spec.hi - spec.lo) * i as f64 / (spec.budget - 1) as f64)
        .collect()
}

fn score_candidates(
    instance: &dyn BilevelOracle,
    candidates: Vec<Vec<f64>>,
    spec: &SearchSpec,
    inner: &mut InnerWorkspace,
) -> Result<SearchResult> {
    let (dim, m) = instance.dims();
    let mut table = Vec::with_capacity(candidates.len());
    let mut best: Option<(f64, Vector, Vector)> = None;
    // warm-start each solve from the previous accepted solution
    // (regularization-path order)
    let mut warm = Vector::zeros(m);
    for (index, coords) in candidates.into_iter().enumerate() {
        let x = to_hyperparams(&coords, dim, spec);
        match inner.solve_ll(instance, &x, spec.ll_target, &warm, spec.ll_max_iter) {
            Ok(res) => {
                let score = instance.upper(&x, &res.theta);
                warm = res.theta.clone();
                if best.as_ref().map_or(true, |(s, _, _)| score < *s) {
                    best = Some((score, x.clone(), res.theta.clone()));
                }
                table.push(SearchCell {
                    index,
                    coords,
                    x,
                    score: Some(score),
                    inner_iters: res.iterations,
                });
            }
            Err(AgilsError::MaxIterExceeded { .. }) => {
                // record the failed cell and move on
                table.push(SearchCell {
                    index,
                    coords,
                    x,
                    score: None,
                    inner_iters: spec.ll_max_iter,
                });
            }
            Err(e) => return Err(e),
        }
    }
    let (score_best, x_best, y_best) = best.ok_or_else(|| {
        AgilsError::InvalidParameter("no search candidate produced a score".into())
    })?;
    Ok(SearchResult {
        x_best,
        y_best,
        score_best,
        table,
    })
}

/// Enumerates the tied grid in axis order, solving the lower-level
/// problem per cell and scoring by the upper objective at the estimator.
pub fn grid_search(
    instance: &dyn BilevelOracle,
    spec: &SearchSpec,
    inner: &mut InnerWorkspace,
) -> Result<SearchResult> {
    spec.validate()?;
    if spec.mode != SearchMode::GridTied {
        return Err(AgilsError::InvalidParameter(
            "grid_search needs a GridTied spec".into(),
        ));
    }
    let axis = axis_points(spec);
    let mut candidates = Vec::new();
    match spec.grid_axes {
        1 => {
            for &a in &axis {
                candidates.push(vec![a]);
            }
        }
        _ => {
            // descending sweeps keep the path order from strong to weak
            // regularization so warm starts stay cheap
            for &a in axis.iter().rev() {
                for &b in axis.iter().rev() {
                    candidates.push(vec![a, b]);
                }
            }
        }
    }
    score_candidates(instance, candidates, spec, inner)
}

/// Uniform i.i.d. samples in the (possibly log-scaled) box, deterministic
/// per seed; best by upper-objective score.
pub fn random_search(
    instance: &dyn BilevelOracle,
    spec: &SearchSpec,
    seed: u64,
    inner: &mut InnerWorkspace,
) -> Result<SearchResult> {
    spec.validate()?;
    if spec.mode != SearchMode::RandomUniform {
        return Err(AgilsError::InvalidParameter(
            "random_search needs a RandomUniform spec".into(),
        ));
    }
    let (dim, _) = instance.dims();
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let candidates: Vec<Vec<f64>> = (0..spec.budget)
        .map(|_| (0..dim).map(|_| rng.gen_range(spec.lo..spec.hi)).collect())
        .collect();
    score_candidates(instance, candidates, spec, inner)
}

//! Benchmark problem instances: the nonsmooth toy problem with known
//! solution set, and sparse group Lasso bilevel hyperparameter selection
//! on synthetic Gaussian data.

use std::io::{BufRead, BufWriter, Write};
use std::path::Path;
use std::sync::OnceLock;

use ndarray::{Array1, Array2};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::StandardNormal;

use crate::error::{AgilsError, Result};
use crate::inner::{InnerMethod, InnerWorkspace};
use crate::problem::{
    default_gamma, BilevelOracle, LeastSquaresForm, ProblemConstants, Vector,
};
use crate::prox::{prox_sparse_group_lasso, soft_threshold_weighted, GroupStructure};

// ---------------------------------------------------------------------------
// Toy instance
// ---------------------------------------------------------------------------

/// min sum_i y_i  s.t.  y in argmin sum_i sqrt((y_i - a_i)^2 + 1/n^2) + sum_i x_i |y_i|,
/// with x in [0, 1]^n, a_i = -2/n^(2/3) on the first half and +2/n^(2/3)
/// on the second half.
#[derive(Debug, Clone)]
pub struct ToyInstance {
    n: usize,
    a: Vector,
    smoothing: f64,
}

impl ToyInstance {
    pub fn n(&self) -> usize {
        self.n
    }

    pub fn offsets(&self) -> &Vector {
        &self.a
    }
}

pub fn make_toy(n: usize) -> Result<ToyInstance> {
    if n < 2 || n % 2 != 0 {
        return Err(AgilsError::InvalidParameter(format!(
            "toy instance needs an even n >= 2, got {n}"
        )));
    }
    let scale = 2.0 / (n as f64).powf(2.0 / 3.0);
    let a = Array1::from_shape_fn(n, |i| if i < n / 2 { -scale } else { scale });
    Ok(ToyInstance {
        n,
        a,
        smoothing: 1.0 / (n as f64 * n as f64),
    })
}

impl BilevelOracle for ToyInstance {
    fn dims(&self) -> (usize, usize) {
        (self.n, self.n)
    }

    fn constants(&self) -> ProblemConstants {
        ProblemConstants {
            l_fy: self.n as f64,
            rho_g1: 1.0,
            rho_g2: 1.0,
            ..Default::default()
        }
    }

    fn upper(&self, _x: &Vector, y: &Vector) -> f64 {
        y.sum()
    }

    fn grad_upper(&self, _x: &Vector, y: &Vector) -> (Vector, Vector) {
        (Vector::zeros(self.n), Vector::from_elem(y.len(), 1.0))
    }

    fn lower_smooth(&self, _x: &Vector, y: &Vector) -> f64 {
        y.iter()
            .zip(self.a.iter())
            .map(|(yi, ai)| ((yi - ai) * (yi - ai) + self.smoothing).sqrt())
            .sum()
    }

    fn grad_lower_smooth(&self, _x: &Vector, y: &Vector) -> (Vector, Vector) {
        let gy = Array1::from_iter(y.iter().zip(self.a.iter()).map(|(yi, ai)| {
            let d = yi - ai;
            d / (d * d + self.smoothing).sqrt()
        }));
        (Vector::zeros(self.n), gy)
    }

    fn lower_nonsmooth(&self, x: &Vector, y: &Vector) -> f64 {
        x.iter().zip(y.iter()).map(|(xi, yi)| xi * yi.abs()).sum()
    }

    fn grad_x_lower_nonsmooth(&self, _x: &Vector, y: &Vector) -> Vector {
        y.mapv(f64::abs)
    }

    fn prox_lower_nonsmooth(&self, x: &Vector, v: &Vector, step: f64) -> Vector {
        let weights = x.mapv(|xi| (step * xi).max(0.0));
        soft_threshold_weighted(v, &weights).expect("nonnegative prox weights")
    }

    fn project_x(&self, v: &Vector) -> Vector {
        v.mapv(|a| a.clamp(0.0, 1.0))
    }

    fn project_y(&self, v: &Vector) -> Vector {
        v.clone()
    }

    fn upper_lower_bound(&self) -> f64 {
        // optimal upper value: y_i = a_i on the first half, 0 after
        self.a.iter().take(self.n / 2).sum()
    }
}

/// Distance of z = (x, y) to the known solution set, scaled by
/// sqrt(1 + min-norm-solution^2). The solution set is separable:
/// first half x_i = 0, y_i = a_i; second half y_i = 0 and
/// x_i in [a_i / sqrt(a_i^2 + 1/n^2), 1].
pub fn toy_error(inst: &ToyInstance, x: &Vector, y: &Vector) -> f64 {
    let n = inst.n;
    let mut dist_sq = 0.0;
    let mut min_norm_sq = 0.0;
    for i in 0..n {
        let ai = inst.a[i];
        if i < n / 2 {
            dist_sq += x[i] * x[i] + (y[i] - ai) * (y[i] - ai);
            min_norm_sq += ai * ai;
        } else {
            let lo = ai / (ai * ai + inst.smoothing).sqrt();
            let clamped = x[i].clamp(lo, 1.0);
            dist_sq += (x[i] - clamped) * (x[i] - clamped) + y[i] * y[i];
            min_norm_sq += lo * lo;
        }
    }
    dist_sq.sqrt() / (1.0 + min_norm_sq).sqrt()
}

// ---------------------------------------------------------------------------
// Analytic quadratic instance
// ---------------------------------------------------------------------------

/// g = 0, Y = R^m, f(x, theta) = ||theta - c||^2 / 2. The proximal
/// lower-level solution is (gamma c + y)/(1 + gamma) in closed form,
/// which makes this the calibration target for residual-based tests.
#[derive(Debug, Clone)]
pub struct QuadraticInstance {
    center: Vector,
    ls: LeastSquaresForm,
}

impl QuadraticInstance {
    pub fn new(center: Vector) -> Self {
        let m = center.len();
        Self {
            ls: LeastSquaresForm {
                gram: Array2::eye(m),
                rhs: center.clone(),
            },
            center,
        }
    }

    /// Exact minimizer of the proximal lower-level problem at (., y).
    pub fn prox_ll_solution(&self, y: &Vector, gamma: f64) -> Vector {
        (&(gamma * &self.center) + y) / (1.0 + gamma)
    }
}

impl BilevelOracle for QuadraticInstance {
    fn dims(&self) -> (usize, usize) {
        (1, self.center.len())
    }

    fn constants(&self) -> ProblemConstants {
        ProblemConstants {
            l_fy: 1.0,
            ..Default::default()
        }
    }

    fn upper(&self, _x: &Vector, _y: &Vector) -> f64 {
        0.0
    }

    fn grad_upper(&self, x: &Vector, y: &Vector) -> (Vector, Vector) {
        (Vector::zeros(x.len()), Vector::zeros(y.len()))
    }

    fn lower_smooth(&self, _x: &Vector, y: &Vector) -> f64 {
        0.5 * (y - &self.center).mapv(|a| a * a).sum()
    }

    fn grad_lower_smooth(&self, x: &Vector, y: &Vector) -> (Vector, Vector) {
        (Vector::zeros(x.len()), y - &self.center)
    }

    fn lower_nonsmooth(&self, _x: &Vector, _y: &Vector) -> f64 {
        0.0
    }

    fn grad_x_lower_nonsmooth(&self, x: &Vector, _y: &Vector) -> Vector {
        Vector::zeros(x.len())
    }

    fn prox_lower_nonsmooth(&self, _x: &Vector, v: &Vector, _step: f64) -> Vector {
        v.clone()
    }

    fn project_x(&self, v: &Vector) -> Vector {
        v.clone()
    }

    fn project_y(&self, v: &Vector) -> Vector {
        v.clone()
    }

    fn least_squares(&self) -> Option<&LeastSquaresForm> {
        Some(&self.ls)
    }
}

// ---------------------------------------------------------------------------
// Sparse group Lasso instance
// ---------------------------------------------------------------------------

/// Bilevel hyperparameter selection for sparse group Lasso. The upper
/// variable x holds J group weights plus one l1 weight; the lower
/// variable is the coefficient vector.
pub struct SglInstance {
    pub a_tr: Array2<f64>,
    pub a_val: Array2<f64>,
    pub a_test: Array2<f64>,
    pub b_tr: Vector,
    pub b_val: Vector,
    pub b_test: Vector,
    pub groups: GroupStructure,
    pub y_true: Vector,
    pub sigma: f64,
    constants: ProblemConstants,
    least_squares: OnceLock<LeastSquaresForm>,
}

pub const SGL_NUM_GROUPS: usize = 5;

/// True coefficients: group i (1-based) has its first 2i entries equal
/// to 2i, the rest zero. For very small groups the fill is clipped to the
/// group size so that reduced test instances stay well defined.
pub fn sgl_true_coefficients(m: usize) -> Result<Vector> {
    if m % SGL_NUM_GROUPS != 0 {
        return Err(AgilsError::InvalidParameter(format!(
            "m must be divisible by {SGL_NUM_GROUPS}, got {m}"
        )));
    }
    let group_size = m / SGL_NUM_GROUPS;
    let mut y = Vector::zeros(m);
    for g in 0..SGL_NUM_GROUPS {
        let fill = 2 * (g + 1);
        for j in 0..fill.min(group_size) {
            y[g * group_size + j] = fill as f64;
        }
    }
    Ok(y)
}

fn sample_matrix(rng: &mut ChaCha8Rng, rows: usize, cols: usize) -> Array2<f64> {
    // row-major fill for cross-platform reproducibility given the seed
    let mut m = Array2::zeros((rows, cols));
    for i in 0..rows {
        for j in 0..cols {
            m[(i, j)] = rng.sample(StandardNormal);
        }
    }
    m
}

fn sample_vector(rng: &mut ChaCha8Rng, len: usize) -> Vector {
    Array1::from_shape_fn(len, |_| rng.sample(StandardNormal))
}

fn l2(v: &Vector) -> f64 {
    v.mapv(|a| a * a).sum().sqrt()
}

/// Largest eigenvalue of A^T A by power iteration.
pub fn spectral_norm_sq(a: &Array2<f64>) -> f64 {
    let m = a.ncols();
    let mut v = Vector::from_elem(m, 1.0 / (m as f64).sqrt());
    let mut lambda = 0.0;
    for _ in 0..200 {
        let w = a.t().dot(&a.dot(&v));
        let norm = l2(&w);
        if norm == 0.0 {
            return 0.0;
        }
        let next = norm; // Rayleigh quotient for unit v
        v = w / norm;
        if (next - lambda).abs() <= 1e-10 * next.max(1.0) {
            return next;
        }
        lambda = next;
    }
    lambda
}

/// Generates a synthetic sparse-group-lasso instance. Rows of every
/// split are i.i.d. standard normal; a single noise level sigma is
/// chosen so the training-split SNR identity ||A y|| / ||b - A y|| = snr
/// holds exactly.
pub fn make_sgl(
    seed: u64,
    n_tr: usize,
    n_val: usize,
    n_test: usize,
    m: usize,
    snr: f64,
) -> Result<SglInstance> {
    if n_tr == 0 || n_val == 0 || n_test == 0 {
        return Err(AgilsError::InvalidParameter(
            "split sizes must be positive".into(),
        ));
    }
    let y_true = sgl_true_coefficients(m)?;
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let a_tr = sample_matrix(&mut rng, n_tr, m);
    let a_val = sample_matrix(&mut rng, n_val, m);
    let a_test = sample_matrix(&mut rng, n_test, m);
    let eps_tr = sample_vector(&mut rng, n_tr);
    let eps_val = sample_vector(&mut rng, n_val);
    let eps_test = sample_vector(&mut rng, n_test);

    let signal = a_tr.dot(&y_true);
    let sigma = l2(&signal) / (snr * l2(&eps_tr));
    let b_tr = &signal + &(sigma * &eps_tr);
    let b_val = &a_val.dot(&y_true) + &(sigma * &eps_val);
    let b_test = &a_test.dot(&y_true) + &(sigma * &eps_test);

    let constants = ProblemConstants {
        l_f_upper_y: spectral_norm_sq(&a_val) / n_val as f64,
        l_fy: spectral_norm_sq(&a_tr) / n_tr as f64,
        rho_g1: 1.0,
        rho_g2: m as f64,
        ..Default::default()
    };

    Ok(SglInstance {
        a_tr,
        a_val,
        a_test,
        b_tr,
        b_val,
        b_test,
        groups: GroupStructure::equal_groups(m, SGL_NUM_GROUPS)?,
        y_true,
        sigma,
        constants,
        least_squares: OnceLock::new(),
    })
}

impl SglInstance {
    pub fn m(&self) -> usize {
        self.a_tr.ncols()
    }

    fn half_mse(a: &Array2<f64>, b: &Vector, y: &Vector) -> f64 {
        let r = &a.dot(y) - b;
        r.mapv(|v| v * v).sum() / (2.0 * a.nrows() as f64)
    }

    fn half_mse_grad(a: &Array2<f64>, b: &Vector, y: &Vector) -> Vector {
        let r = &a.dot(y) - b;
        a.t().dot(&r) / a.nrows() as f64
    }

    /// Mean squared error (no 1/2 factor) of y on a split.
    pub fn mse(a: &Array2<f64>, b: &Vector, y: &Vector) -> f64 {
        let r = &a.dot(y) - b;
        r.mapv(|v| v * v).sum() / a.nrows() as f64
    }
}

impl BilevelOracle for SglInstance {
    fn dims(&self) -> (usize, usize) {
        (SGL_NUM_GROUPS + 1, self.m())
    }

    fn constants(&self) -> ProblemConstants {
        self.constants
    }

    fn upper(&self, _x: &Vector, y: &Vector) -> f64 {
        Self::half_mse(&self.a_val, &self.b_val, y)
    }

    fn grad_upper(&self, x: &Vector, y: &Vector) -> (Vector, Vector) {
        (
            Vector::zeros(x.len()),
            Self::half_mse_grad(&self.a_val, &self.b_val, y),
        )
    }

    fn lower_smooth(&self, _x: &Vector, y: &Vector) -> f64 {
        Self::half_mse(&self.a_tr, &self.b_tr, y)
    }

    fn grad_lower_smooth(&self, x: &Vector, y: &Vector) -> (Vector, Vector) {
        (
            Vector::zeros(x.len()),
            Self::half_mse_grad(&self.a_tr, &self.b_tr, y),
        )
    }

    fn lower_nonsmooth(&self, x: &Vector, y: &Vector) -> f64 {
        let mut total = 0.0;
        for (j, r) in self.groups.ranges().iter().enumerate() {
            let norm = y
                .slice(ndarray::s![r.clone()])
                .mapv(|a| a * a)
                .sum()
                .sqrt();
            total += x[j] * norm;
        }
        total + x[SGL_NUM_GROUPS] * y.mapv(f64::abs).sum()
    }

    fn grad_x_lower_nonsmooth(&self, _x: &Vector, y: &Vector) -> Vector {
        let mut g = Vector::zeros(SGL_NUM_GROUPS + 1);
        for (j, r) in self.groups.ranges().iter().enumerate() {
            g[j] = y
                .slice(ndarray::s![r.clone()])
                .mapv(|a| a * a)
                .sum()
                .sqrt();
        }
        g[SGL_NUM_GROUPS] = y.mapv(f64::abs).sum();
        g
    }

    fn prox_lower_nonsmooth(&self, x: &Vector, v: &Vector, step: f64) -> Vector {
        let group_w = Array1::from_iter(x.iter().take(SGL_NUM_GROUPS).map(|w| (step * w).max(0.0)));
        let l1_w = (step * x[SGL_NUM_GROUPS]).max(0.0);
        prox_sparse_group_lasso(v, &self.groups, &group_w, l1_w)
            .expect("nonnegative prox weights")
    }

    fn project_x(&self, v: &Vector) -> Vector {
        v.mapv(|a| a.max(0.0))
    }

    fn project_y(&self, v: &Vector) -> Vector {
        v.clone()
    }

    fn least_squares(&self) -> Option<&LeastSquaresForm> {
        Some(self.least_squares.get_or_init(|| LeastSquaresForm {
            gram: self.a_tr.t().dot(&self.a_tr) / self.a_tr.nrows() as f64,
            rhs: self.a_tr.t().dot(&self.b_tr) / self.a_tr.nrows() as f64,
        }))
    }
}

/// End-of-run quality metrics for a sparse-group-lasso solution.
#[derive(Debug, Clone, Copy)]
pub struct SglMetrics {
    pub val_err: f64,
    pub test_err: f64,
    pub test_err_infeasible: f64,
    pub feasibility: f64,
}

/// Evaluates the metric suite at hyperparameters x and iterate y_iter.
///
/// The sparse-group-lasso estimator is recomputed by a tight lower-level
/// solve warm-started at y_iter; feasibility compares phi against the
/// Moreau envelope from a tight proximal solve.
pub fn sgl_metrics(
    inst: &SglInstance,
    x: &Vector,
    y_iter: &Vector,
    inner: &mut InnerWorkspace,
) -> Result<SglMetrics> {
    let max_iter = 200 * inst.m() + 20_000;
    let estimator = inner.solve_ll(inst, x, 1e-8, y_iter, max_iter)?.theta;
    let val_err = SglInstance::mse(&inst.a_val, &inst.b_val, &estimator);
    let test_err = SglInstance::mse(&inst.a_test, &inst.b_test, &estimator);
    let test_err_infeasible = SglInstance::mse(&inst.a_test, &inst.b_test, y_iter);

    let gamma = default_gamma(&inst.constants())?;
    let eta = crate::problem::default_eta(&inst.constants(), gamma);
    let tight = inner.solve_prox_ll(
        inst,
        x,
        y_iter,
        gamma,
        eta,
        1e-10,
        &estimator,
        InnerMethod::Fista,
        max_iter,
    )?;
    let envelope = inst.lower_objective(x, &tight.theta)
        + (&tight.theta - y_iter).mapv(|a| a * a).sum() / (2.0 * gamma);
    let feasibility =
        (inst.lower_objective(x, y_iter) - envelope) / inst.a_val.nrows() as f64;
    Ok(SglMetrics {
        val_err,
        test_err,
        test_err_infeasible,
        feasibility,
    })
}

// ---------------------------------------------------------------------------
// Matrix import/export
// ---------------------------------------------------------------------------

/// Writes a matrix as text: "rows cols" header, then row-major rows of
/// space-separated doubles (round-trip formatting).
pub fn write_matrix(path: &Path, a: &Array2<f64>) -> Result<()> {
    let mut w = BufWriter::new(std::fs::File::create(path)?);
    writeln!(w, "{} {}", a.nrows(), a.ncols())?;
    for row in a.rows() {
        let line: Vec<String> = row.iter().map(|v| format!("{v}")).collect();
        writeln!(w, "{}", line.join(" "))?;
    }
    Ok(())
}

pub fn read_matrix(path: &Path) -> Result<Array2<f64>> {
    let file = std::fs::File::open(path)?;
    let mut lines = std::io::BufReader::new(file).lines();
    let header = lines
        .next()
        .ok_or_else(|| AgilsError::Config(format!("{}: empty matrix file", path.display())))??;
    let mut it = header.split_whitespace();
    let parse_dim = |s: Option<&str>| -> Result<usize> {
        s.and_then(|v| v.parse().ok())
            .ok_or_else(|| AgilsError::Config(format!("{}: bad matrix header", path.display())))
    };
    let rows = parse_dim(it.next())?;
    let cols = parse_dim(it.next())?;
    let mut data = Vec::with_capacity(rows * cols);
    for line in lines {
        for tok in line?.split_whitespace() {
            data.push(tok.parse::<f64>().map_err(|e| {
                AgilsError::Config(format!("{}: bad matrix entry: {e}", path.display()))
            })?);
        }
    }
    if data.len() != rows * cols {
        return Err(AgilsError::Config(format!(
            "{}: expected {} entries, found {}",
            path.display(),
            rows * cols,
            data.len()
        )));
    }
    Array2::from_shape_vec((rows, cols), data)
        .map_err(|e| AgilsError::Config(format!("matrix shape error: {e}")))
}

pub fn write_vector(path: &Path, v: &Vector) -> Result<()> {
    let a = v.clone().insert_axis(ndarray::Axis(1));
    write_matrix(path, &a)
}

pub fn read_vector(path: &Path) -> Result<Vector> {
    let a = read_matrix(path)?;
    Ok(Array1::from_iter(a.iter().copied()))
}

/// Writes the generated dataset (design matrices and responses of every
/// split) into `dir` so external tools can reuse it.
pub fn export_sgl_dataset(inst: &SglInstance, dir: &Path) -> Result<()> {
    std::fs::create_dir_all(dir)?;
    write_matrix(&dir.join("A_tr.txt"), &inst.a_tr)?;
    write_matrix(&dir.join("A_val.txt"), &inst.a_val)?;
    write_matrix(&dir.join("A_test.txt"), &inst.a_test)?;
    write_vector(&dir.join("b_tr.txt"), &inst.b_tr)?;
    write_vector(&dir.join("b_val.txt"), &inst.b_val)?;
    write_vector(&dir.join("b_test.txt"), &inst.b_test)?;
    write_vector(&dir.join("y_true.txt"), &inst.y_true)?;
    Ok(())
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn toy_offsets_n2() {
        let inst = make_toy(2).unwrap();
        let expect = 2.0_f64.powf(1.0 / 3.0);
        assert!((inst.a[0] + expect).abs() < 1e-12);
        assert!((inst.a[1] - expect).abs() < 1e-12);
    }

    #[test]
    fn toy_rejects_bad_n() {
        assert!(make_toy(3).is_err());
        assert!(make_toy(0).is_err());
    }

    #[test]
    fn toy_grad_vanishes_at_offsets() {
        let inst = make_toy(4).unwrap();
        let x = Vector::zeros(4);
        let (_, gy) = inst.grad_lower_smooth(&x, &inst.a.clone());
        assert!(gy.iter().all(|g| g.abs() < 1e-14));
    }

    #[test]
    fn toy_curvature_bound_is_n_at_offsets() {
        // max_i of the 1-D second derivative (1/n^2)/((y-a)^2+1/n^2)^(3/2)
        // attained at y = a with value n
        let n = 6usize;
        let inst = make_toy(n).unwrap();
        let s = inst.smoothing;
        let second = |d: f64| s / (d * d + s).powf(1.5);
        assert!((second(0.0) - n as f64).abs() < 1e-9);
        for d in [0.01, 0.1, 1.0] {
            assert!(second(d) < n as f64);
        }
    }

    #[test]
    fn toy_error_zero_on_solution() {
        let n = 4usize;
        let inst = make_toy(n).unwrap();
        let mut x = Vector::zeros(n);
        let mut y = Vector::zeros(n);
        for i in 0..n {
            if i < n / 2 {
                y[i] = inst.a[i];
            } else {
                x[i] = inst.a[i] / (inst.a[i] * inst.a[i] + inst.smoothing).sqrt();
            }
        }
        assert!(toy_error(&inst, &x, &y) < 1e-14);
    }

    #[test]
    fn toy_error_endpoint_n2() {
        let inst = make_toy(2).unwrap();
        let x = Vector::from(vec![0.0, 0.9294980154]);
        let y = Vector::from(vec![-(2.0_f64.powf(1.0 / 3.0)), 0.0]);
        assert!(toy_error(&inst, &x, &y) < 1e-6);
    }

    #[test]
    fn toy_error_matches_brute_force_projection() {
        // coordinate-wise search over the solution set on a fine grid, n = 2
        let inst = make_toy(2).unwrap();
        let x = Vector::from(vec![0.3, 0.2]);
        let y = Vector::from(vec![-0.9, 0.4]);
        let lo = inst.a[1] / (inst.a[1] * inst.a[1] + inst.smoothing).sqrt();
        let mut best = f64::INFINITY;
        let steps = 20_000usize;
        for k in 0..=steps {
            let x2 = lo + (1.0 - lo) * k as f64 / steps as f64;
            let d = (x[0] - 0.0).powi(2)
                + (y[0] - inst.a[0]).powi(2)
                + (x[1] - x2).powi(2)
                + (y[1] - 0.0).powi(2);
            best = best.min(d);
        }
        let min_norm_sq = inst.a[0] * inst.a[0] + lo * lo;
        let brute = best.sqrt() / (1.0 + min_norm_sq).sqrt();
        assert!((toy_error(&inst, &x, &y) - brute).abs() < 1e-3);
    }

    #[test]
    fn sgl_true_coefficients_pattern() {
        let y = sgl_true_coefficients(300).unwrap();
        // group 3 (1-based) starts at 120 and has first 6 entries equal 6
        for j in 0..6 {
            assert_eq!(y[120 + j], 6.0);
        }
        assert_eq!(y[126], 0.0);
        assert!(sgl_true_coefficients(301).is_err());
    }

    #[test]
    fn sgl_snr_identity() {
        let inst = make_sgl(7, 40, 40, 40, 50, 3.0).unwrap();
        let signal = inst.a_tr.dot(&inst.y_true);
        let noise = &inst.b_tr - &signal;
        let snr = l2(&signal) / l2(&noise);
        assert!((snr - 3.0).abs() < 1e-12);
    }

    #[test]
    fn sgl_deterministic_per_seed() {
        let a = make_sgl(11, 20, 20, 20, 50, 3.0).unwrap();
        let b = make_sgl(11, 20, 20, 20, 50, 3.0).unwrap();
        assert_eq!(a.a_tr, b.a_tr);
        assert_eq!(a.b_test, b.b_test);
        let c = make_sgl(12, 20, 20, 20, 50, 3.0).unwrap();
        assert_ne!(a.a_tr, c.a_tr);
    }

    #[test]
    fn spectral_norm_matches_known_matrix() {
        // diag(3, 1): largest eigenvalue of A^T A is 9
        let a = Array2::from_shape_vec((2, 2), vec![3.0, 0.0, 0.0, 1.0]).unwrap();
        assert!((spectral_norm_sq(&a) - 9.0).abs() < 1e-8);
    }

    #[test]
    fn matrix_roundtrip() {
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("m.txt");
        let a = Array2::from_shape_vec((2, 3), vec![1.5, -2.0, 0.25, 1e-17, 3.0, -0.0]).unwrap();
        write_matrix(&path, &a).unwrap();
        let b = read_matrix(&path).unwrap();
        assert_eq!(a, b);
    }
}

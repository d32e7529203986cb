//! Experiment orchestration: config parsing, single runs, seed sweeps,
//! dimension sweeps, ablations, baselines, and the on-disk artifacts
//! (per-run trace CSV, per-run summary, aggregate summary).

use std::io::{BufRead, BufWriter, Write};
use std::path::{Path, PathBuf};

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::baselines::{grid_search, random_search, SearchSpec};
use crate::error::{AgilsError, Result};
use crate::inner::{InnerMethod, InnerWorkspace};
use crate::instances::{export_sgl_dataset, make_sgl, make_toy, sgl_metrics, toy_error};
use crate::problem::Vector;
use crate::solver::{
    agils_solve, AgilsConfig, CaseTaken, InitialPoint, IterationRecord, MetricHook, RunOutcome,
    StopRule, Termination, Variant,
};

/// Worker-pool cap for seed-level parallelism.
pub const WORKERS_ENV: &str = "AGILS_WORKERS";

// ---------------------------------------------------------------------------
// Configuration
// ---------------------------------------------------------------------------

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum ExperimentKind {
    Toy,
    Sgl,
    Baseline,
    Sweep,
    Ablation,
}

/// Partial AGILS parameter block: unset fields keep the per-benchmark
/// defaults.
#[derive(Debug, Clone, Default, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct AgilsOverrides {
    pub gamma: Option<f64>,
    pub epsilon: Option<f64>,
    pub eta: Option<f64>,
    pub p0: Option<f64>,
    pub rho_p: Option<f64>,
    pub c_p: Option<f64>,
    pub c_y: Option<f64>,
    pub c_ytilde: Option<f64>,
    pub c_alpha: Option<f64>,
    pub c_beta: Option<f64>,
    pub s0: Option<f64>,
    pub p_s: Option<f64>,
    pub tau0: Option<f64>,
    pub p_tau: Option<f64>,
    pub variant: Option<Variant>,
    pub inner_method: Option<InnerMethod>,
    pub stop_rule: Option<StopRule>,
    pub tol: Option<f64>,
    pub rel_tol: Option<f64>,
    pub tol_t: Option<f64>,
    pub max_outer: Option<usize>,
    pub max_inner: Option<usize>,
    pub strict_gamma: Option<bool>,
}

impl AgilsOverrides {
    pub fn apply(&self, mut cfg: AgilsConfig) -> AgilsConfig {
        macro_rules! set {
            ($($field:ident),*) => {
                $(if let Some(v) = self.$field { cfg.$field = v; })*
            };
        }
        set!(
            epsilon, p0, rho_p, c_p, c_y, c_ytilde, c_alpha, c_beta, s0, p_s, tau0, p_tau,
            variant, inner_method, stop_rule, tol, rel_tol, tol_t, max_outer, strict_gamma
        );
        if self.gamma.is_some() {
            cfg.gamma = self.gamma;
        }
        if self.eta.is_some() {
            cfg.eta = self.eta;
        }
        if self.max_inner.is_some() {
            cfg.max_inner = self.max_inner;
        }
        cfg
    }
}

#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct ToyBlock {
    pub n: usize,
    pub seeds: Vec<u64>,
}

impl Default for ToyBlock {
    fn default() -> Self {
        Self { n: 200, seeds: vec![0] }
    }
}

#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct SglBlock {
    pub n_tr: usize,
    pub n_val: usize,
    pub n_test: usize,
    pub m: usize,
    pub snr: f64,
    pub seeds: Vec<u64>,
    pub export_data: bool,
}

impl Default for SglBlock {
    fn default() -> Self {
        Self {
            n_tr: 200,
            n_val: 200,
            n_test: 200,
            m: 300,
            snr: 3.0,
            seeds: (0..20).collect(),
            export_data: false,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum BaselineMethod {
    Grid,
    Random,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct BaselineBlock {
    pub method: BaselineMethod,
    pub target: ExperimentKind,
    pub seed: u64,
    /// Overrides for the search space; None keeps per-target defaults.
    pub spec: Option<SearchSpec>,
}

impl Default for BaselineBlock {
    fn default() -> Self {
        Self {
            method: BaselineMethod::Grid,
            target: ExperimentKind::Toy,
            seed: 0,
            spec: None,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum SweepKind {
    ToyDims,
    SglDims,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct SweepBlock {
    pub kind: SweepKind,
    pub toy_dims: Vec<usize>,
    /// Each entry: [n_tr, n_val, n_test, m].
    pub sgl_sizes: Vec<[usize; 4]>,
}

impl Default for SweepBlock {
    fn default() -> Self {
        Self {
            kind: SweepKind::ToyDims,
            toy_dims: vec![200, 400, 600],
            sgl_sizes: vec![[1000, 1000, 1000, 1500]],
        }
    }
}

#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct AblationBlock {
    pub variants: Vec<Variant>,
    /// Outer budget multiplier for the single-step variant, relative to
    /// the reference run's outer iterations.
    pub single_step_budget_factor: usize,
}

impl Default for AblationBlock {
    fn default() -> Self {
        Self {
            variants: vec![Variant::Both, Variant::NearExact, Variant::SingleStep],
            single_step_budget_factor: 5,
        }
    }
}

#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ExperimentConfig {
    pub kind: ExperimentKind,
    #[serde(default)]
    pub out_dir: PathBuf,
    #[serde(default)]
    pub toy: ToyBlock,
    #[serde(default)]
    pub sgl: SglBlock,
    #[serde(default)]
    pub agils: AgilsOverrides,
    #[serde(default)]
    pub baseline: BaselineBlock,
    #[serde(default)]
    pub sweep: SweepBlock,
    #[serde(default)]
    pub ablation: AblationBlock,
}

impl ExperimentConfig {
    pub fn new(kind: ExperimentKind) -> Self {
        Self {
            kind,
            out_dir: PathBuf::from("out"),
            toy: ToyBlock::default(),
            sgl: SglBlock::default(),
            agils: AgilsOverrides::default(),
            baseline: BaselineBlock::default(),
            sweep: SweepBlock::default(),
            ablation: AblationBlock::default(),
        }
    }
}

/// Parses a TOML experiment config; unknown keys are rejected and parse
/// errors carry the offending location.
pub fn parse_config(path: &Path) -> Result<ExperimentConfig> {
    let text = std::fs::read_to_string(path)?;
    let cfg: ExperimentConfig = toml::from_str(&text)
        .map_err(|e| AgilsError::Config(format!("{}: {e}", path.display())))?;
    if matches!(cfg.kind, ExperimentKind::Toy | ExperimentKind::Ablation) && cfg.toy.seeds.is_empty()
    {
        return Err(AgilsError::Config("toy.seeds must be nonempty".into()));
    }
    if cfg.kind == ExperimentKind::Sgl && cfg.sgl.seeds.is_empty() {
        return Err(AgilsError::Config("sgl.seeds must be nonempty".into()));
    }
    Ok(cfg)
}

/// Default AGILS parameters for the toy problem of size n.
pub fn toy_defaults(n: usize) -> AgilsConfig {
    AgilsConfig {
        c_y: 50.0 * (n as f64).sqrt(),
        c_ytilde: 50.0 * (n as f64).sqrt(),
        ..AgilsConfig::default()
    }
}

/// Default AGILS parameters for sparse group Lasso with lower
/// dimension m.
pub fn sgl_defaults(m: usize) -> AgilsConfig {
    AgilsConfig {
        p0: 6.0,
        rho_p: 0.01,
        s0: 5.0,
        p_s: 1.05,
        tau0: 10.0,
        p_tau: 0.2,
        c_y: 50.0 * (m as f64).sqrt(),
        c_ytilde: 50.0 * (m as f64).sqrt(),
        stop_rule: StopRule::RelChangeAndT,
        rel_tol: 0.005 / m as f64,
        tol_t: 0.1,
        ..AgilsConfig::default()
    }
}

// ---------------------------------------------------------------------------
// Artifacts: trace CSV, summaries, aggregate
// ---------------------------------------------------------------------------

pub const TRACE_HEADER: &str =
    "k,p,alpha,beta,delta,t,G_half,G_full,inner_half,inner_full,psi_proxy,case,err_or_val,ms";

fn fmt_case(c: CaseTaken) -> &'static str {
    match c {
        CaseTaken::Case1 => "case1",
        CaseTaken::Case2 => "case2",
        CaseTaken::Case3Accepted => "case3_accepted",
        CaseTaken::Case3Rejected => "case3_rejected",
    }
}

fn parse_case(s: &str) -> Result<CaseTaken> {
    Ok(match s {
        "case1" => CaseTaken::Case1,
        "case2" => CaseTaken::Case2,
        "case3_accepted" => CaseTaken::Case3Accepted,
        "case3_rejected" => CaseTaken::Case3Rejected,
        other => return Err(AgilsError::Config(format!("unknown case tag: {other}"))),
    })
}

/// Streams the trace records to a UTF-8 CSV ('.' decimal, no locale),
/// flushing every 1000 rows.
pub fn write_trace_csv(path: &Path, records: &[IterationRecord]) -> Result<()> {
    let mut w = BufWriter::new(std::fs::File::create(path)?);
    writeln!(w, "{TRACE_HEADER}")?;
    for (i, r) in records.iter().enumerate() {
        let metric = r.metric.map(|m| format!("{m}")).unwrap_or_default();
        writeln!(
            w,
            "{},{},{},{},{},{},{},{},{},{},{},{},{},{}",
            r.k,
            r.p,
            r.alpha,
            r.beta,
            r.delta,
            r.t,
            r.g_half,
            r.g_full,
            r.inner_iters_half,
            r.inner_iters_full,
            r.psi_tilde_proxy,
            fmt_case(r.case_taken),
            metric,
            r.wall_time_ms
        )?;
        if (i + 1) % 1000 == 0 {
            w.flush()?;
        }
    }
    w.flush()?;
    Ok(())
}

/// Reads back a trace CSV. Residual targets and the correction flag are
/// not part of the file format and come back as defaults.
pub fn read_trace_csv(path: &Path) -> Result<Vec<IterationRecord>> {
    let file = std::fs::File::open(path)?;
    let mut lines = std::io::BufReader::new(file).lines();
    let header = lines
        .next()
        .ok_or_else(|| AgilsError::Config(format!("{}: empty trace", path.display())))??;
    if header != TRACE_HEADER {
        return Err(AgilsError::Config(format!(
            "{}: unexpected trace header",
            path.display()
        )));
    }
    let mut records = Vec::new();
    for line in lines {
        let line = line?;
        let parts: Vec<&str> = line.split(',').collect();
        if parts.len() != 14 {
            return Err(AgilsError::Config(format!(
                "{}: expected 14 columns, found {}",
                path.display(),
                parts.len()
            )));
        }
        let num = |s: &str| -> Result<f64> {
            s.parse()
                .map_err(|e| AgilsError::Config(format!("bad trace value {s:?}: {e}")))
        };
        let int = |s: &str| -> Result<usize> {
            s.parse()
                .map_err(|e| AgilsError::Config(format!("bad trace value {s:?}: {e}")))
        };
        records.push(IterationRecord {
            k: int(parts[0])?,
            p: num(parts[1])?,
            alpha: num(parts[2])?,
            beta: num(parts[3])?,
            delta: num(parts[4])?,
            t: num(parts[5])?,
            g_half: num(parts[6])?,
            g_full: num(parts[7])?,
            g_half_target: f64::INFINITY,
            g_full_target: f64::INFINITY,
            inner_iters_half: int(parts[8])?,
            inner_iters_full: int(parts[9])?,
            psi_tilde_proxy: num(parts[10])?,
            case_taken: parse_case(parts[11])?,
            metric: if parts[12].is_empty() {
                None
            } else {
                Some(num(parts[12])?)
            },
            wall_time_ms: num(parts[13])?,
            correction_solve_failed: false,
        });
    }
    Ok(records)
}

/// End-of-run summary written as structured text with a stable key order.
#[derive(Debug, Clone)]
pub struct RunSummary {
    pub label: String,
    /// Named final metrics in output order.
    pub metrics: Vec<(String, f64)>,
    pub wall_time_s: f64,
    pub outer_iterations: usize,
    pub total_inner_iterations: usize,
    pub inner_to_outer_ratio: f64,
    pub correction_count: usize,
    pub final_p: f64,
    pub termination: Termination,
}

impl RunSummary {
    pub fn from_trace(label: String, trace: &crate::solver::RunTrace, metrics: Vec<(String, f64)>) -> Self {
        Self {
            label,
            metrics,
            wall_time_s: trace.wall_time_ms / 1e3,
            outer_iterations: trace.outer_iterations,
            total_inner_iterations: trace.total_inner_iterations,
            inner_to_outer_ratio: trace.inner_to_outer_ratio(),
            correction_count: trace.correction_count,
            final_p: trace.final_p,
            termination: trace.termination,
        }
    }

    pub fn ok(&self) -> bool {
        self.termination != Termination::MaxOuterExceeded
    }
}

pub fn write_summary(path: &Path, s: &RunSummary) -> Result<()> {
    let mut w = BufWriter::new(std::fs::File::create(path)?);
    writeln!(w, "label = {}", s.label)?;
    for (k, v) in &s.metrics {
        writeln!(w, "{k} = {v}")?;
    }
    writeln!(w, "wall_time_s = {}", s.wall_time_s)?;
    writeln!(w, "outer_iterations = {}", s.outer_iterations)?;
    writeln!(w, "total_inner_iterations = {}", s.total_inner_iterations)?;
    writeln!(w, "inner_to_outer_ratio = {}", s.inner_to_outer_ratio)?;
    writeln!(w, "correction_count = {}", s.correction_count)?;
    writeln!(w, "final_p = {}", s.final_p)?;
    writeln!(w, "termination = {:?}", s.termination)?;
    Ok(())
}

/// Columnwise mean and sample standard deviation (n-1 denominator) over
/// the shared metric keys, in first-summary order.
pub fn aggregate(summaries: &[RunSummary]) -> Result<Vec<(String, f64, f64)>> {
    let first = summaries
        .first()
        .ok_or_else(|| AgilsError::InvalidParameter("aggregate needs >= 1 summary".into()))?;
    let mut out = Vec::new();
    let mut keys: Vec<String> = first.metrics.iter().map(|(k, _)| k.clone()).collect();
    keys.push("wall_time_s".into());
    keys.push("inner_to_outer_ratio".into());
    for key in keys {
        let values: Vec<f64> = summaries
            .iter()
            .filter_map(|s| {
                if key == "wall_time_s" {
                    Some(s.wall_time_s)
                } else if key == "inner_to_outer_ratio" {
                    Some(s.inner_to_outer_ratio)
                } else {
                    s.metrics.iter().find(|(k, _)| *k == key).map(|(_, v)| *v)
                }
            })
            .collect();
        if values.is_empty() {
            continue;
        }
        let n = values.len() as f64;
        let mean = values.iter().sum::<f64>() / n;
        let std = if values.len() > 1 {
            (values.iter().map(|v| (v - mean) * (v - mean)).sum::<f64>() / (n - 1.0)).sqrt()
        } else {
            0.0
        };
        out.push((key, mean, std));
    }
    Ok(out)
}

pub fn write_aggregate(path: &Path, rows: &[(String, f64, f64)]) -> Result<()> {
    let mut w = BufWriter::new(std::fs::File::create(path)?);
    writeln!(w, "metric,mean,std")?;
    for (k, mean, std) in rows {
        writeln!(w, "{k},{mean:.2},{std:.2}")?;
    }
    Ok(())
}

/// Exports a baseline score table as CSV.
pub fn write_search_table(path: &Path, result: &crate::baselines::SearchResult) -> Result<()> {
    let mut w = BufWriter::new(std::fs::File::create(path)?);
    writeln!(w, "index,coords,val_err,inner_iters")?;
    for cell in &result.table {
        let coords = cell
            .coords
            .iter()
            .map(|c| format!("{c}"))
            .collect::<Vec<_>>()
            .join(" ");
        let score = cell.score.map(|s| format!("{s}")).unwrap_or_default();
        writeln!(w, "{},{},{},{}", cell.index, coords, score, cell.inner_iters)?;
    }
    Ok(())
}

// ---------------------------------------------------------------------------
// Runs
// ---------------------------------------------------------------------------

/// Solves the toy problem of size n, stopping once the distance-to-solution
/// metric drops below 1/n (the benchmark's termination rule).
pub fn run_toy(n: usize, overrides: &AgilsOverrides) -> Result<(RunOutcome, f64)> {
    let inst = make_toy(n)?;
    let cfg = overrides.apply(toy_defaults(n));
    let init = InitialPoint {
        x0: Vector::zeros(n),
        y0: inst.offsets().clone(),
        theta0: inst.offsets().clone(),
    };
    let eval = |x: &Vector, y: &Vector| toy_error(&inst, x, y);
    let hook = MetricHook {
        eval: &eval,
        stop_below: Some(1.0 / n as f64),
    };
    let out = agils_solve(&inst, &cfg, &init, Some(&hook))?;
    let err = toy_error(&inst, &out.x, &out.y_tilde);
    Ok((out, err))
}

/// Result of one sparse-group-lasso run.
pub struct SglRun {
    pub outcome: RunOutcome,
    pub metrics: crate::instances::SglMetrics,
}

pub fn run_sgl(block: &SglBlock, seed: u64, overrides: &AgilsOverrides) -> Result<SglRun> {
    let inst = make_sgl(seed, block.n_tr, block.n_val, block.n_test, block.m, block.snr)?;
    let cfg = overrides.apply(sgl_defaults(block.m));
    let (nx, m) = crate::problem::BilevelOracle::dims(&inst);
    let init = InitialPoint {
        x0: Vector::from_elem(nx, 1.0),
        y0: Vector::from_elem(m, 1.0),
        theta0: Vector::from_elem(m, 1.0),
    };
    let eval = |x: &Vector, y: &Vector| crate::problem::BilevelOracle::upper(&inst, x, y);
    let hook = MetricHook {
        eval: &eval,
        stop_below: None,
    };
    let out = agils_solve(&inst, &cfg, &init, Some(&hook))?;
    let mut ws = InnerWorkspace::new();
    let metrics = sgl_metrics(&inst, &out.x, &out.y_tilde, &mut ws)?;
    Ok(SglRun {
        outcome: out,
        metrics,
    })
}

fn configure_pool() {
    if let Ok(v) = std::env::var(WORKERS_ENV) {
        if let Ok(n) = v.parse::<usize>() {
            // ignore failure: the global pool can only be built once
            let _ = rayon::ThreadPoolBuilder::new().num_threads(n).build_global();
        }
    }
}

pub struct ExperimentReport {
    pub summaries: Vec<RunSummary>,
    pub failures: Vec<String>,
}

impl ExperimentReport {
    pub fn ok(&self) -> bool {
        self.failures.is_empty()
    }
}

/// Runs the configured experiment, writing per-run traces and summaries
/// plus an aggregate file into `out_dir`.
pub fn run_experiment(cfg: &ExperimentConfig) -> Result<ExperimentReport> {
    configure_pool();
    std::fs::create_dir_all(&cfg.out_dir)?;
    match cfg.kind {
        ExperimentKind::Toy => run_toy_experiment(cfg),
        ExperimentKind::Sgl => run_sgl_experiment(cfg),
        ExperimentKind::Baseline => run_baseline_experiment(cfg),
        ExperimentKind::Sweep => run_sweep_experiment(cfg),
        ExperimentKind::Ablation => run_ablation_experiment(cfg),
    }
}

fn finish(
    cfg: &ExperimentConfig,
    results: Vec<std::result::Result<RunSummary, String>>,
) -> Result<ExperimentReport> {
    let mut summaries = Vec::new();
    let mut failures = Vec::new();
    for r in results {
        match r {
            Ok(s) => {
                if !s.ok() {
                    failures.push(format!("{}: did not terminate normally", s.label));
                }
                summaries.push(s);
            }
            Err(e) => failures.push(e),
        }
    }
    if !summaries.is_empty() {
        let rows = aggregate(&summaries)?;
        write_aggregate(&cfg.out_dir.join("aggregate.csv"), &rows)?;
    }
    Ok(ExperimentReport {
        summaries,
        failures,
    })
}

fn run_toy_experiment(cfg: &ExperimentConfig) -> Result<ExperimentReport> {
    let n = cfg.toy.n;
    let results: Vec<_> = cfg
        .toy
        .seeds
        .par_iter()
        .map(|seed| -> std::result::Result<RunSummary, String> {
            let label = format!("toy_n{n}_seed{seed}");
            let (out, err) = run_toy(n, &cfg.agils).map_err(|e| format!("{label}: {e}"))?;
            write_trace_csv(&cfg.out_dir.join(format!("trace_{label}.csv")), &out.trace.records)
                .map_err(|e| format!("{label}: {e}"))?;
            let summary =
                RunSummary::from_trace(label.clone(), &out.trace, vec![("error".into(), err)]);
            write_summary(&cfg.out_dir.join(format!("summary_{label}.txt")), &summary)
                .map_err(|e| format!("{label}: {e}"))?;
            Ok(summary)
        })
        .collect();
    finish(cfg, results)
}

fn run_sgl_experiment(cfg: &ExperimentConfig) -> Result<ExperimentReport> {
    if cfg.sgl.export_data {
        let first = cfg.sgl.seeds.first().copied().unwrap_or(0);
        let inst = make_sgl(
            first,
            cfg.sgl.n_tr,
            cfg.sgl.n_val,
            cfg.sgl.n_test,
            cfg.sgl.m,
            cfg.sgl.snr,
        )?;
        export_sgl_dataset(&inst, &cfg.out_dir.join(format!("data_seed{first}")))?;
    }
    let results: Vec<_> = cfg
        .sgl
        .seeds
        .par_iter()
        .map(|&seed| -> std::result::Result<RunSummary, String> {
            let label = format!("sgl_m{}_seed{seed}", cfg.sgl.m);
            let run = run_sgl(&cfg.sgl, seed, &cfg.agils).map_err(|e| format!("{label}: {e}"))?;
            write_trace_csv(
                &cfg.out_dir.join(format!("trace_{label}.csv")),
                &run.outcome.trace.records,
            )
            .map_err(|e| format!("{label}: {e}"))?;
            let mut metrics = vec![
                ("val_err".into(), run.metrics.val_err),
                ("test_err".into(), run.metrics.test_err),
                ("test_err_infeasible".into(), run.metrics.test_err_infeasible),
                ("feasibility".into(), run.metrics.feasibility),
            ];
            for (i, v) in run.outcome.x.iter().enumerate() {
                metrics.push((format!("x{}", i + 1), *v));
            }
            let summary = RunSummary::from_trace(label.clone(), &run.outcome.trace, metrics);
            write_summary(&cfg.out_dir.join(format!("summary_{label}.txt")), &summary)
                .map_err(|e| format!("{label}: {e}"))?;
            Ok(summary)
        })
        .collect();
    finish(cfg, results)
}

fn run_baseline_experiment(cfg: &ExperimentConfig) -> Result<ExperimentReport> {
    let mut ws = InnerWorkspace::new();
    let (label, result, n_val) = match cfg.baseline.target {
        ExperimentKind::Toy => {
            let inst = make_toy(cfg.toy.n)?;
            let (label, spec) = match cfg.baseline.method {
                BaselineMethod::Grid => ("baseline_grid_toy", SearchSpec::toy_grid()),
                BaselineMethod::Random => ("baseline_random_toy", SearchSpec::toy_random()),
            };
            let spec = cfg.baseline.spec.clone().unwrap_or(spec);
            let result = match cfg.baseline.method {
                BaselineMethod::Grid => grid_search(&inst, &spec, &mut ws)?,
                BaselineMethod::Random => random_search(&inst, &spec, cfg.baseline.seed, &mut ws)?,
            };
            (label.to_string(), result, 1.0)
        }
        ExperimentKind::Sgl => {
            let seed = cfg.baseline.seed;
            let inst = make_sgl(
                seed,
                cfg.sgl.n_tr,
                cfg.sgl.n_val,
                cfg.sgl.n_test,
                cfg.sgl.m,
                cfg.sgl.snr,
            )?;
            let (label, spec) = match cfg.baseline.method {
                BaselineMethod::Grid => (format!("baseline_grid_sgl_seed{seed}"), SearchSpec::sgl_grid()),
                BaselineMethod::Random => {
                    (format!("baseline_random_sgl_seed{seed}"), SearchSpec::sgl_random())
                }
            };
            let spec = cfg.baseline.spec.clone().unwrap_or(spec);
            let result = match cfg.baseline.method {
                BaselineMethod::Grid => grid_search(&inst, &spec, &mut ws)?,
                BaselineMethod::Random => random_search(&inst, &spec, seed, &mut ws)?,
            };
            (label, result, 1.0)
        }
        other => {
            return Err(AgilsError::Config(format!(
                "baseline target must be toy or sgl, got {other:?}"
            )))
        }
    };
    let _ = n_val;
    write_search_table(&cfg.out_dir.join(format!("{label}.csv")), &result)?;
    let total_inner: usize = result.table.iter().map(|c| c.inner_iters).sum();
    let summary = RunSummary {
        label: label.clone(),
        metrics: vec![("val_err".into(), score_to_val_err(cfg, result.score_best))],
        wall_time_s: 0.0,
        outer_iterations: result.table.len(),
        total_inner_iterations: total_inner,
        inner_to_outer_ratio: total_inner as f64 / result.table.len() as f64,
        correction_count: 0,
        final_p: 0.0,
        termination: Termination::StopRule,
    };
    write_summary(&cfg.out_dir.join(format!("summary_{label}.txt")), &summary)?;
    finish(cfg, vec![Ok(summary)])
}

/// Baseline scores for SGL are upper-objective values (half MSE on the
/// validation split); the reported validation error has no 1/2 factor.
fn score_to_val_err(cfg: &ExperimentConfig, score: f64) -> f64 {
    match cfg.baseline.target {
        ExperimentKind::Sgl => 2.0 * score,
        _ => score,
    }
}

fn run_sweep_experiment(cfg: &ExperimentConfig) -> Result<ExperimentReport> {
    match cfg.sweep.kind {
        SweepKind::ToyDims => {
            let results: Vec<_> = cfg
                .sweep
                .toy_dims
                .par_iter()
                .map(|&n| -> std::result::Result<RunSummary, String> {
                    let label = format!("sweep_toy_n{n}");
                    let (out, err) = run_toy(n, &cfg.agils).map_err(|e| format!("{label}: {e}"))?;
                    write_trace_csv(
                        &cfg.out_dir.join(format!("trace_{label}.csv")),
                        &out.trace.records,
                    )
                    .map_err(|e| format!("{label}: {e}"))?;
                    let summary = RunSummary::from_trace(
                        label.clone(),
                        &out.trace,
                        vec![("error".into(), err), ("n".into(), n as f64)],
                    );
                    write_summary(&cfg.out_dir.join(format!("summary_{label}.txt")), &summary)
                        .map_err(|e| format!("{label}: {e}"))?;
                    Ok(summary)
                })
                .collect();
            finish(cfg, results)
        }
        SweepKind::SglDims => {
            let results: Vec<_> = cfg
                .sweep
                .sgl_sizes
                .par_iter()
                .map(|&[n_tr, n_val, n_test, m]| -> std::result::Result<RunSummary, String> {
                    let label = format!("sweep_sgl_m{m}");
                    let block = SglBlock {
                        n_tr,
                        n_val,
                        n_test,
                        m,
                        snr: cfg.sgl.snr,
                        seeds: cfg.sgl.seeds.clone(),
                        export_data: false,
                    };
                    // the scalability runs use the relaxed stopping rule
                    let mut overrides = cfg.agils.clone();
                    if overrides.rel_tol.is_none() {
                        overrides.rel_tol = Some(0.1 / m as f64);
                    }
                    let seed = cfg.sgl.seeds.first().copied().unwrap_or(0);
                    let run =
                        run_sgl(&block, seed, &overrides).map_err(|e| format!("{label}: {e}"))?;
                    write_trace_csv(
                        &cfg.out_dir.join(format!("trace_{label}.csv")),
                        &run.outcome.trace.records,
                    )
                    .map_err(|e| format!("{label}: {e}"))?;
                    let metrics = vec![
                        ("val_err".into(), run.metrics.val_err),
                        ("test_err".into(), run.metrics.test_err),
                        ("feasibility".into(), run.metrics.feasibility),
                        ("m".into(), m as f64),
                    ];
                    let summary =
                        RunSummary::from_trace(label.clone(), &run.outcome.trace, metrics);
                    write_summary(&cfg.out_dir.join(format!("summary_{label}.txt")), &summary)
                        .map_err(|e| format!("{label}: {e}"))?;
                    Ok(summary)
                })
                .collect();
            finish(cfg, results)
        }
    }
}

fn run_ablation_experiment(cfg: &ExperimentConfig) -> Result<ExperimentReport> {
    let n = cfg.toy.n;
    // reference run fixes the outer budget for the single-step variant
    let mut reference = cfg.agils.clone();
    reference.variant = Some(Variant::Both);
    let (ref_out, _) = run_toy(n, &reference)?;
    let ref_outer = ref_out.trace.outer_iterations;

    let mut results = Vec::new();
    for &variant in &cfg.ablation.variants {
        let label = format!("ablation_toy_n{n}_{variant}");
        let mut overrides = cfg.agils.clone();
        overrides.variant = Some(variant);
        if variant == Variant::SingleStep {
            overrides.max_outer = Some(
                overrides
                    .max_outer
                    .unwrap_or(ref_outer * cfg.ablation.single_step_budget_factor),
            );
        }
        let run = run_toy(n, &overrides);
        results.push(match run {
            Ok((out, err)) => {
                match write_trace_csv(
                    &cfg.out_dir.join(format!("trace_{label}.csv")),
                    &out.trace.records,
                ) {
                    Ok(()) => {
                        let summary = RunSummary::from_trace(
                            label.clone(),
                            &out.trace,
                            vec![("error".into(), err)],
                        );
                        let _ =
                            write_summary(&cfg.out_dir.join(format!("summary_{label}.txt")), &summary);
                        Ok(summary)
                    }
                    Err(e) => Err(format!("{label}: {e}")),
                }
            }
            Err(e) => Err(format!("{label}: {e}")),
        });
    }
    // the single-step variant is expected to exhaust its budget; keep the
    // summary but do not flag the experiment
    let mut report = finish(cfg, results)?;
    report
        .failures
        .retain(|f| !f.contains("single_step"));
    Ok(report)
}

use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Parser, Subcommand, ValueEnum};

use agils::harness::{
    parse_config, run_experiment, BaselineMethod, ExperimentConfig, ExperimentKind, SweepKind,
};

#[derive(Parser)]
#[command(name = "agils", about = "Bilevel hyperparameter optimization benchmarks", version)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Clone, Copy, ValueEnum)]
enum MethodArg {
    Grid,
    Random,
}

#[derive(Clone, Copy, ValueEnum)]
enum SweepArg {
    ToyDims,
    SglDims,
}

#[derive(Subcommand)]
enum Command {
    /// Run the synthetic benchmark of a given dimension
    SolveToy {
        #[arg(long)]
        n: usize,
        #[arg(long)]
        config: Option<PathBuf>,
        #[arg(long)]
        out: PathBuf,
        #[arg(long)]
        seed: Option<u64>,
    },
    /// Run sparse group Lasso hyperparameter selection over K seeds
    SolveSgl {
        #[arg(long)]
        config: Option<PathBuf>,
        #[arg(long)]
        seeds: Option<usize>,
        #[arg(long)]
        out: PathBuf,
        /// Also export the generated dataset as text matrices
        #[arg(long)]
        export_data: bool,
    },
    /// Grid or random hyperparameter search baseline
    Baseline {
        #[arg(long, value_enum)]
        method: MethodArg,
        #[arg(long)]
        config: Option<PathBuf>,
        #[arg(long)]
        out: PathBuf,
    },
    /// Dimension sweeps over either benchmark
    Sweep {
        #[arg(long, value_enum)]
        kind: SweepArg,
        #[arg(long)]
        config: Option<PathBuf>,
        #[arg(long)]
        out: PathBuf,
    },
    /// Inexactness ablation on the synthetic benchmark
    Ablation {
        #[arg(long)]
        config: Option<PathBuf>,
        #[arg(long)]
        out: PathBuf,
    },
}

fn load(config: &Option<PathBuf>, kind: ExperimentKind) -> Result<ExperimentConfig, String> {
    let mut cfg = match config {
        Some(path) => parse_config(path).map_err(|e| e.to_string())?,
        None => ExperimentConfig::new(kind),
    };
    cfg.kind = kind;
    Ok(cfg)
}

fn run(cli: Cli) -> Result<bool, String> {
    let cfg = match &cli.command {
        Command::SolveToy { n, config, out, seed } => {
            let mut cfg = load(config, ExperimentKind::Toy)?;
            cfg.toy.n = *n;
            if let Some(s) = seed {
                cfg.toy.seeds = vec![*s];
            }
            cfg.out_dir = out.clone();
            cfg
        }
        Command::SolveSgl { config, seeds, out, export_data } => {
            let mut cfg = load(config, ExperimentKind::Sgl)?;
            if let Some(k) = seeds {
                cfg.sgl.seeds = (0..*k as u64).collect();
            }
            if *export_data {
                cfg.sgl.export_data = true;
            }
            cfg.out_dir = out.clone();
            cfg
        }
        Command::Baseline { method, config, out } => {
            let mut cfg = load(config, ExperimentKind::Baseline)?;
            cfg.baseline.method = match method {
                MethodArg::Grid => BaselineMethod::Grid,
                MethodArg::Random => BaselineMethod::Random,
            };
            cfg.out_dir = out.clone();
            cfg
        }
        Command::Sweep { kind, config, out } => {
            let mut cfg = load(config, ExperimentKind::Sweep)?;
            cfg.sweep.kind = match kind {
                SweepArg::ToyDims => SweepKind::ToyDims,
                SweepArg::SglDims => SweepKind::SglDims,
            };
            cfg.out_dir = out.clone();
            cfg
        }
        Command::Ablation { config, out } => {
            let mut cfg = load(config, ExperimentKind::Ablation)?;
            cfg.out_dir = out.clone();
            cfg
        }
    };
    let report = run_experiment(&cfg).map_err(|e| e.to_string())?;
    for s in &report.summaries {
        let metrics = s
            .metrics
            .iter()
            .map(|(k, v)| format!("{k}={v:.6}"))
            .collect::<Vec<_>>()
            .join(" ");
        println!(
            "{}: {} outer={} inner={} wall={:.2}s [{:?}]",
            s.label, metrics, s.outer_iterations, s.total_inner_iterations, s.wall_time_s,
            s.termination
        );
    }
    for f in &report.failures {
        eprintln!("FAILED: {f}");
    }
    Ok(report.ok())
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    match run(cli) {
        Ok(true) => ExitCode::SUCCESS,
        Ok(false) => ExitCode::from(1),
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(2)
        }
    }
}

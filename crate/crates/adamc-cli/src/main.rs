//! Command-line harness: configure and run adaptive Monte Carlo experiments,
//! replicate studies, and quadrature oracle checks.
//!
//! Exit codes: 0 on success, 1 on configuration errors, 2 on runtime faults.

mod config;
mod output;

use std::fmt::Write as _;
use std::path::{Path, PathBuf};
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand};

use adamc::engine::{run, run_replicate, RunReport};
use adamc::oracle::{optimal_variance, QuadratureGrid, QuadratureOracle};
use adamc::param::NaturalParameter;

use config::{parse_config, Assembled, ExperimentConfig, FamilyKind};
use output::{write_atomic, OracleRow, OracleStarRow};

#[derive(Parser)]
#[command(name = "adamc", about = "Adaptive Monte Carlo integration experiments")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Execute one run and write summary.json + trajectory.csv.
    Run(CommonArgs),
    /// Execute independent replicates and write replicates.csv + aggregate.json.
    Replicate(CommonArgs),
    /// Evaluate V, K, and ∇V by quadrature at configured θ probes and search
    /// for the optimal variance; writes oracle.jsonl.
    Oracle(CommonArgs),
}

#[derive(Args)]
struct CommonArgs {
    /// Path to a flat `key = value` configuration file.
    #[arg(long)]
    config: PathBuf,
    /// Override the configured seed.
    #[arg(long)]
    seed: Option<u64>,
    /// Override the configured iteration count.
    #[arg(long)]
    iters: Option<u64>,
    /// Override the configured output directory.
    #[arg(long)]
    out: Option<PathBuf>,
    /// Override the configured replicate count.
    #[arg(long)]
    replicates: Option<u64>,
}

enum Failure {
    Config(String),
    Runtime(String),
}

impl From<config::ConfigError> for Failure {
    fn from(e: config::ConfigError) -> Self {
        Failure::Config(e.to_string())
    }
}

impl From<adamc::Error> for Failure {
    fn from(e: adamc::Error) -> Self {
        Failure::Runtime(e.to_string())
    }
}

impl From<std::io::Error> for Failure {
    fn from(e: std::io::Error) -> Self {
        Failure::Runtime(e.to_string())
    }
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    let (args, mode) = match &cli.command {
        Command::Run(a) => (a, Mode::Run),
        Command::Replicate(a) => (a, Mode::Replicate),
        Command::Oracle(a) => (a, Mode::Oracle),
    };
    match execute(args, mode) {
        Ok(()) => ExitCode::SUCCESS,
        Err(Failure::Config(msg)) => {
            eprintln!("configuration error: {msg}");
            ExitCode::from(1)
        }
        Err(Failure::Runtime(msg)) => {
            eprintln!("runtime fault: {msg}");
            ExitCode::from(2)
        }
    }
}

#[derive(Clone, Copy)]
enum Mode {
    Run,
    Replicate,
    Oracle,
}

fn execute(args: &CommonArgs, mode: Mode) -> Result<(), Failure> {
    let text = std::fs::read_to_string(&args.config)
        .map_err(|e| Failure::Config(format!("cannot read {}: {e}", args.config.display())))?;
    let mut experiment = parse_config(&text)?;
    if let Some(seed) = args.seed {
        experiment.seed = seed;
    }
    if let Some(iters) = args.iters {
        if iters == 0 {
            return Err(Failure::Config("key `n_iters`: must be >= 1".to_string()));
        }
        experiment.n_iters = iters;
    }
    if let Some(out) = &args.out {
        experiment.out_dir = out.display().to_string();
    }
    if let Some(reps) = args.replicates {
        experiment.replicates = reps;
    }

    let assembled = experiment.assemble()?;
    let out_dir = PathBuf::from(&experiment.out_dir);
    match mode {
        Mode::Run => cmd_run(&experiment, &assembled, &out_dir),
        Mode::Replicate => cmd_replicate(&experiment, &assembled, &out_dir),
        Mode::Oracle => cmd_oracle(&experiment, &assembled, &out_dir),
    }
}

fn cmd_run(
    experiment: &ExperimentConfig,
    assembled: &Assembled,
    out_dir: &Path,
) -> Result<(), Failure> {
    let report = run(
        &*assembled.problem,
        &*assembled.family,
        &assembled.set,
        &assembled.run,
    )?;
    let echo = experiment.echo(assembled);
    write_atomic(&out_dir.join("summary.json"), &output::summary_json(&report, &echo))?;
    write_atomic(&out_dir.join("trajectory.csv"), &output::trajectory_csv(&report))?;
    if matches!(assembled.family_kind, FamilyKind::NaturalGaussian) {
        if let Some(csv) = output::ellipses_csv(&report) {
            write_atomic(&out_dir.join("ellipses.csv"), &csv)?;
        }
    }
    println!(
        "estimate = {} ± {} (n = {}, seed = {})",
        report.estimate, report.std_error, report.n, report.seed
    );
    Ok(())
}

fn cmd_replicate(
    experiment: &ExperimentConfig,
    assembled: &Assembled,
    out_dir: &Path,
) -> Result<(), Failure> {
    if experiment.replicates < 2 {
        return Err(Failure::Config(
            "key `replicates`: must be >= 2".to_string(),
        ));
    }
    let reports: Vec<RunReport<f64>> = match &experiment.replicate_seeds {
        None => adamc::engine::run_replicates(
            &*assembled.problem,
            &*assembled.family,
            &assembled.set,
            &assembled.run,
            experiment.replicates,
        )?,
        Some(seeds) => {
            // Explicit per-replicate seeds; equal seeds give identical runs.
            if seeds.len() != experiment.replicates as usize {
                return Err(Failure::Config(format!(
                    "key `replicate.seeds`: expected {} seeds, got {}",
                    experiment.replicates,
                    seeds.len()
                )));
            }
            seeds
                .iter()
                .map(|&seed| {
                    let mut cfg = assembled.run.clone();
                    cfg.seed = seed;
                    run_replicate(
                        &*assembled.problem,
                        &*assembled.family,
                        &assembled.set,
                        &cfg,
                        0,
                    )
                })
                .collect::<adamc::Result<_>>()?
        }
    };
    write_atomic(&out_dir.join("replicates.csv"), &output::replicates_csv(&reports))?;
    write_atomic(&out_dir.join("aggregate.json"), &output::aggregate_json(&reports))?;
    println!(
        "{} replicates written to {}",
        reports.len(),
        out_dir.display()
    );
    Ok(())
}

fn cmd_oracle(
    experiment: &ExperimentConfig,
    assembled: &Assembled,
    out_dir: &Path,
) -> Result<(), Failure> {
    let k = assembled.problem.sample_dim();
    if k > 2 {
        return Err(Failure::Config(format!("oracle unsupported for k={k}")));
    }
    let grid = QuadratureGrid::default_for(&*assembled.problem)?;
    let oracle = QuadratureOracle::new(&*assembled.problem, &*assembled.family, &grid)?;

    let probes: Vec<NaturalParameter<f64>> = if experiment.oracle_thetas.is_empty() {
        vec![assembled.run.theta1.clone()]
    } else {
        let shape = assembled.family.param_shape();
        experiment
            .oracle_thetas
            .iter()
            .map(|flat| NaturalParameter::from_flat(&shape, flat))
            .collect::<adamc::Result<_>>()
            .map_err(|e| Failure::Config(format!("key `oracle.thetas`: {e}")))?
    };

    let mut lines = String::new();
    for theta in &probes {
        let v = oracle.variance(theta)?;
        let log_k = oracle.log_moment(4, theta)?;
        let k_value = log_k.exp();
        let grad = oracle.grad_variance_fd(theta, 1e-4)?;
        let flat = theta.flatten();
        let row = OracleRow {
            theta: &flat,
            v,
            k: k_value.is_finite().then_some(k_value),
            log_k,
            grad: &grad,
        };
        writeln!(lines, "{}", serde_json::to_string(&row).expect("row serializes")).unwrap();
    }

    let best = optimal_variance(
        &*assembled.problem,
        &*assembled.family,
        &assembled.set,
        &grid,
    )?;
    let star_flat = best.theta_star.flatten();
    let star = OracleStarRow {
        theta_star: &star_flat,
        v_star: best.v_star,
        converged: best.converged,
    };
    writeln!(lines, "{}", serde_json::to_string(&star).expect("row serializes")).unwrap();

    write_atomic(&out_dir.join("oracle.jsonl"), &lines)?;
    println!("oracle rows written to {}", out_dir.display());
    Ok(())
}

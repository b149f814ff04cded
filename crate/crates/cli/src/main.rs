//! `dagmip`: learn directed acyclic graphs from data generated by
//! nonlinear additive structural equation models with Gaussian noise.
//!
//! The estimator scores graphs with a group-l0-penalized Gaussian
//! likelihood over a shared basis expansion and minimizes it exactly (up
//! to a certified optimality gap) with a built-in branch-and-bound solver.
//! All logarithms are natural logarithms.
//!
//! Exit codes: 0 success; 2 input error; 3 solver infeasible; 4 every
//! grid cell hit its time limit. `DAGMIP_THREADS` caps the thread pool
//! used for bootstrap replicates and multi-worker solves.

use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand};

use dagmip::error::Error;
use dagmip::pipeline::{self, FitConfig};
use dagmip::priors::{bootstrap_proportions, GreedyLearner};
use dagmip::sem::{Dataset, SemSpec};

#[derive(Parser)]
#[command(
    name = "dagmip",
    version,
    about = "DAG structure learning for nonlinear additive Gaussian SEMs via certified branch-and-bound"
)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Sample a dataset from a SEM spec JSON and write CSV (plus the
    /// ground-truth graph JSON).
    Simulate(SimulateArgs),
    /// Fit a DAG to a CSV dataset: basis -> Gram -> priors -> penalty
    /// grid x variance regimes -> BIC choice.
    Fit(FitArgs),
    /// Cross-check the solver against exhaustive enumeration (p <= 5).
    Certify(CertifyArgs),
    /// SHD decomposition between two graph JSON files.
    Metrics(MetricsArgs),
    /// Estimate bootstrap proportions and constraint sets only.
    Priors(PriorsArgs),
    /// Flatten a fit result (or trial batch) into plot-ready CSV.
    EmitPlotData(EmitArgs),
}

#[derive(Args)]
struct SimulateArgs {
    /// SEM spec JSON: {"p", "edges": [{"from","to","fn","params"}], "sigmas", "seed"}.
    #[arg(long)]
    spec: PathBuf,
    #[arg(long)]
    n: usize,
    #[arg(long, default_value_t = 0)]
    seed: u64,
    /// Output CSV path.
    #[arg(long)]
    out: PathBuf,
    /// Optional ground-truth graph JSON path.
    #[arg(long)]
    truth: Option<PathBuf>,
}

#[derive(Args)]
struct FitArgs {
    /// Fit configuration JSON (see README for the schema).
    #[arg(long)]
    config: PathBuf,
    /// Input data CSV with a header row.
    #[arg(long)]
    data: PathBuf,
    /// Result JSON path (stdout when omitted).
    #[arg(long)]
    out: Option<PathBuf>,
    /// Also write the chosen graph in DOT format.
    #[arg(long)]
    dot: Option<PathBuf>,
    /// Print solver progress to stderr.
    #[arg(long)]
    progress: bool,
}

#[derive(Args)]
struct CertifyArgs {
    #[arg(long)]
    config: PathBuf,
    #[arg(long)]
    data: PathBuf,
    /// Report JSON path (stdout when omitted).
    #[arg(long)]
    out: Option<PathBuf>,
}

#[derive(Args)]
struct MetricsArgs {
    #[arg(long)]
    estimated: PathBuf,
    #[arg(long)]
    truth: PathBuf,
    #[arg(long)]
    out: Option<PathBuf>,
}

#[derive(Args)]
struct PriorsArgs {
    #[arg(long)]
    config: PathBuf,
    #[arg(long)]
    data: PathBuf,
    /// Write the p x p selection-proportion matrix CSV here.
    #[arg(long)]
    proportions: Option<PathBuf>,
    /// Write the constraint sets (graph JSON per set) here.
    #[arg(long)]
    sets: Option<PathBuf>,
}

#[derive(Args)]
struct EmitArgs {
    /// A fit-result JSON whose grid table becomes CSV rows.
    #[arg(long, conflicts_with = "trials")]
    result: Option<PathBuf>,
    /// A JSON array of {"n","method","recovery_rate","mean_shd"} rows.
    #[arg(long)]
    trials: Option<PathBuf>,
    /// Attach SHD columns against this ground-truth graph JSON.
    #[arg(long)]
    truth: Option<PathBuf>,
    /// Output CSV path (stdout when omitted).
    #[arg(long)]
    out: Option<PathBuf>,
}

fn main() -> ExitCode {
    if let Ok(threads) = std::env::var("DAGMIP_THREADS") {
        if let Ok(n) = threads.parse::<usize>() {
            let _ = rayon::ThreadPoolBuilder::new().num_threads(n).build_global();
        }
    }
    let cli = Cli::parse();
    match run(cli) {
        Ok(code) => code,
        Err(err) => {
            eprintln!("error: {:#}", err);
            let code = match err.downcast_ref::<Error>() {
                Some(Error::Infeasible) => 3,
                Some(Error::Solve(_)) => 3,
                _ => 2,
            };
            ExitCode::from(code)
        }
    }
}

fn write_or_print(path: &Option<PathBuf>, content: &str) -> anyhow::Result<()> {
    match path {
        Some(p) => std::fs::write(p, content)?,
        None => println!("{}", content),
    }
    Ok(())
}

fn run(cli: Cli) -> anyhow::Result<ExitCode> {
    match cli.command {
        Command::Simulate(args) => {
            let spec_text = std::fs::read_to_string(&args.spec)?;
            let spec = SemSpec::from_json_str(&spec_text)?;
            pipeline::simulate_to_files(&spec, args.n, args.seed, &args.out, args.truth.as_deref())?;
            eprintln!(
                "wrote {} rows x {} columns to {}",
                args.n,
                spec.p,
                args.out.display()
            );
            Ok(ExitCode::SUCCESS)
        }
        Command::Fit(args) => {
            let mut config = load_config(&args.config)?;
            if args.progress && config.solver.progress_every.is_none() {
                config.solver.progress_every = Some(50);
            }
            let result = pipeline::fit_csv(&config, &args.data)?;
            for warning in &result.warnings {
                eprintln!("warning: {}", warning);
            }
            write_or_print(&args.out, &result.to_json_string()?)?;
            if let Some(dot_path) = &args.dot {
                let dag = result.dag()?;
                std::fs::write(dot_path, dag.to_dot(None))?;
            }
            if result.all_cells_timed_out {
                eprintln!("every grid cell hit its time limit; results are best-effort");
                return Ok(ExitCode::from(4));
            }
            Ok(ExitCode::SUCCESS)
        }
        Command::Certify(args) => {
            let config = load_config(&args.config)?;
            let data = Dataset::read_csv(&args.data)?;
            let report = pipeline::certify(&config, &data)?;
            for cell in &report.cells {
                println!(
                    "lambda^2 = {:<12} regime = {:<8} delta = {:>12.3e}  {}",
                    cell.lambda_sq,
                    cell.regime.to_string(),
                    cell.delta,
                    if cell.pass { "PASS" } else { "FAIL" }
                );
            }
            write_or_print(&args.out, &serde_json::to_string_pretty(&report)?)?;
            if report.pass {
                Ok(ExitCode::SUCCESS)
            } else {
                Ok(ExitCode::from(3))
            }
        }
        Command::Metrics(args) => {
            let est = std::fs::read_to_string(&args.estimated)?;
            let truth = std::fs::read_to_string(&args.truth)?;
            let breakdown = pipeline::metrics_from_json(&est, &truth)?;
            write_or_print(&args.out, &serde_json::to_string_pretty(&breakdown)?)?;
            Ok(ExitCode::SUCCESS)
        }
        Command::Priors(args) => {
            let config = load_config(&args.config)?;
            let data = Dataset::read_csv(&args.data)?;
            let prior = config.priors.clone().unwrap_or_default();
            let learner = GreedyLearner {
                basis: config.basis,
                penalty: None,
            };
            let report = bootstrap_proportions(
                &data,
                prior.bootstrap_b,
                &learner,
                dagmip::rng::derive(config.seed, "priors", 0),
            )?;
            if let Some(path) = &args.proportions {
                std::fs::write(path, report.to_csv())?;
            }
            let system = dagmip::basis::BasisSystem::fit(&config.basis, &data)?;
            let sets = pipeline::estimate_sets(&config, &data, &system)?;
            let sets_json = serde_json::json!({
                "superstructure": sets.superstructure.to_json(),
                "partial_order": sets.partial_order.to_json(),
                "stable": sets.stable.to_json(),
            });
            write_or_print(&args.sets, &serde_json::to_string_pretty(&sets_json)?)?;
            Ok(ExitCode::SUCCESS)
        }
        Command::EmitPlotData(args) => {
            let csv = if let Some(result_path) = &args.result {
                let text = std::fs::read_to_string(result_path)?;
                let result: pipeline::FitResult = serde_json::from_str(&text)?;
                let mut rows = result.grid.clone();
                if let Some(truth_path) = &args.truth {
                    let truth_text = std::fs::read_to_string(truth_path)?;
                    let truth = dagmip::graph::Dag::from_json_str(&truth_text)?;
                    for row in rows.iter_mut() {
                        row.attach_shd(result.graph.p, &truth)?;
                    }
                }
                pipeline::emit_grid_csv(&rows)
            } else if let Some(trials_path) = &args.trials {
                let text = std::fs::read_to_string(trials_path)?;
                let rows: Vec<pipeline::TrialRow> = serde_json::from_str(&text)?;
                pipeline::emit_trials_csv(&rows)
            } else {
                anyhow::bail!("pass --result or --trials");
            };
            write_or_print(&args.out, &csv)?;
            Ok(ExitCode::SUCCESS)
        }
    }
}

fn load_config(path: &PathBuf) -> anyhow::Result<FitConfig> {
    let text = std::fs::read_to_string(path)?;
    Ok(FitConfig::from_json_str(&text)?)
}

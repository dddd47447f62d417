//! Benchmark CLI: `abopt <run|compare|stability|tune> [flags]`.
//!
//! Flags override values from the optional `--config` file. Exit codes:
//! 0 success, 1 configuration error, 2 runtime or numerical failure.

use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Parser, Subcommand};

use abopt::bench::{self, CliError, ExperimentConfig};

#[derive(Parser)]
#[command(name = "abopt", about = "Adaptive Bayesian optimization benchmark harness")]
struct Cli {
    #[command(subcommand)]
    command: Command,

    /// Experiment configuration file (flat key = value lines).
    #[arg(long, global = true)]
    config: Option<PathBuf>,

    /// Output directory for traces and reports.
    #[arg(long, global = true)]
    out: Option<PathBuf>,

    /// Base seed for run batches.
    #[arg(long, global = true)]
    seed: Option<u64>,

    /// Number of independent runs per variant.
    #[arg(long, global = true)]
    runs: Option<usize>,

    /// Optimization iterations per run.
    #[arg(long, global = true)]
    iters: Option<usize>,

    /// Restrict to one variant (original | adaptive).
    #[arg(long, global = true)]
    variant: Option<String>,

    /// Benchmark problem
    /// (robust_1d | multi_combined | multi_decoupled | quadratic_test).
    #[arg(long, global = true)]
    problem: Option<String>,

    /// Worker threads for parallel batches (default: all cores).
    #[arg(long, global = true)]
    jobs: Option<usize>,
}

#[derive(Subcommand)]
enum Command {
    /// Run batches and write per-run trace CSVs plus convergence summaries.
    Run,
    /// Compare two variants with paired seeds; writes compare.json.
    Compare,
    /// Stability check over several run counts; writes stability.csv.
    Stability,
    /// Tune kernel variance and lengthscale; writes tuned.json.
    Tune,
}

fn load_config(cli: &Cli) -> Result<ExperimentConfig, CliError> {
    let mut cfg = match &cli.config {
        Some(path) => {
            let text = std::fs::read_to_string(path).map_err(|source| CliError::ConfigIo {
                path: path.clone(),
                source,
            })?;
            ExperimentConfig::parse(&text)?
        }
        None => ExperimentConfig::default(),
    };
    if let Some(out) = &cli.out {
        cfg.out_dir = out.clone();
    }
    if let Some(seed) = cli.seed {
        cfg.base_seed = seed;
    }
    if let Some(runs) = cli.runs {
        cfg.runs = runs;
    }
    if let Some(iters) = cli.iters {
        cfg.iterations = iters;
    }
    if let Some(variant) = &cli.variant {
        let parsed = variant
            .parse()
            .map_err(bench::ConfigError::Semantic)?;
        cfg.variants = vec![parsed];
    }
    if let Some(problem) = &cli.problem {
        cfg.problem = problem
            .parse()
            .map_err(bench::ConfigError::Semantic)?;
    }
    if let Some(jobs) = cli.jobs {
        cfg.jobs = Some(jobs);
    }
    Ok(cfg)
}

fn dispatch(cli: &Cli) -> Result<Vec<PathBuf>, CliError> {
    let cfg = load_config(cli)?;
    match cli.command {
        Command::Run => bench::cmd_run(&cfg),
        Command::Compare => bench::cmd_compare(&cfg),
        Command::Stability => bench::cmd_stability(&cfg),
        Command::Tune => bench::cmd_tune(&cfg),
    }
}

fn main() -> ExitCode {
    let cli = match Cli::try_parse() {
        Ok(cli) => cli,
        Err(err) => {
            // Help and version are not errors; anything else is a usage
            // problem and maps to the config-error exit code.
            use clap::error::ErrorKind;
            let code = match err.kind() {
                ErrorKind::DisplayHelp | ErrorKind::DisplayVersion => 0,
                _ => 1,
            };
            let _ = err.print();
            return ExitCode::from(code);
        }
    };
    match dispatch(&cli) {
        Ok(paths) => {
            for path in paths {
                println!("wrote {}", path.display());
            }
            ExitCode::SUCCESS
        }
        Err(err) => {
            eprintln!("error: {err}");
            ExitCode::from(err.exit_code() as u8)
        }
    }
}

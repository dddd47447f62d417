//! Command-line experiment harness: runs batches, writes per-run trace CSVs,
//! convergence summaries, statistical comparison reports, stability tables,
//! and tuned kernel hyperparameters.
//!
//! All numeric CSV cells use 9 significant digits with `.` as the decimal
//! separator; JSON numbers carry full round-trip precision. Every file is
//! assembled in memory first and written only after all computation has
//! finished, so concurrent execution cannot reorder output content.

pub mod config;

use std::fs;
use std::io;
use std::path::{Path, PathBuf};

use serde::Serialize;
use thiserror::Error;

use crate::adaptive::Variant;
use crate::objectives::{multiobjective_components, robust_objective, ObjectiveSpec};
use crate::optimizer::{run_batch, ObjectiveKind, RunTrace, TunedKernel};
use crate::rng::SeededRng;
use crate::stats::{self, StatsError};

pub use config::{ConfigError, ExperimentConfig, Problem};

#[derive(Debug, Error)]
pub enum CliError {
    #[error(transparent)]
    Config(#[from] ConfigError),
    #[error("could not read config file {path}: {source}")]
    ConfigIo { path: PathBuf, source: io::Error },
    #[error("run {run} failed: {message}")]
    RunFailed { run: usize, message: String },
    #[error(transparent)]
    Stats(#[from] StatsError),
    #[error("could not write {path}: {source}")]
    Io { path: PathBuf, source: io::Error },
    #[error("{0}")]
    Runtime(String),
}

impl CliError {
    /// Exit code contract: 0 success, 1 configuration error, 2 runtime or
    /// numerical failure.
    pub fn exit_code(&self) -> i32 {
        match self {
            CliError::Config(_) | CliError::ConfigIo { .. } => 1,
            CliError::Stats(StatsError::BadRunCount | StatsError::OverlappingSeeds { .. }) => 1,
            _ => 2,
        }
    }
}

/// One CSV cell: 9 significant digits, `.` decimal, no separators.
fn fmt_float(value: f64) -> String {
    if value == 0.0 {
        "0".to_string()
    } else {
        format!("{value:.8e}")
    }
}

fn median(values: &mut [f64]) -> f64 {
    values.sort_by(f64::total_cmp);
    let n = values.len();
    if n % 2 == 1 {
        values[n / 2]
    } else {
        0.5 * (values[n / 2 - 1] + values[n / 2])
    }
}

type ScalarObjective<'a> = Box<dyn Fn(&[f64], u64) -> f64 + Sync + 'a>;

/// The benchmark objective behind a problem name.
enum ProblemObjective<'a> {
    Scalar(ScalarObjective<'a>),
    Decoupled(&'a ObjectiveSpec),
}

impl<'a> ProblemObjective<'a> {
    fn new(problem: Problem, spec: &'a ObjectiveSpec) -> Self {
        match problem {
            Problem::Robust1d => ProblemObjective::Scalar(Box::new(move |x, seed| {
                -robust_objective(x[0], spec, &mut SeededRng::new(seed))
            })),
            Problem::MultiCombined => ProblemObjective::Scalar(Box::new(move |x, seed| {
                let (over, under) = multiobjective_components(x[0], spec, &mut SeededRng::new(seed));
                over + spec.penalty_weight * under
            })),
            Problem::QuadraticTest => {
                ProblemObjective::Scalar(Box::new(|x, _seed| (x[0] - 1.0) * (x[0] - 1.0)))
            }
            Problem::MultiDecoupled => ProblemObjective::Decoupled(spec),
        }
    }

    fn kind(&self) -> ObjectiveKind<'_> {
        match self {
            ProblemObjective::Scalar(f) => ObjectiveKind::Scalar(&**f),
            ProblemObjective::Decoupled(spec) => ObjectiveKind::DecoupledDemand(spec),
        }
    }
}

fn with_pool<T: Send>(jobs: Option<usize>, task: impl FnOnce() -> T + Send) -> Result<T, CliError> {
    match jobs {
        None => Ok(task()),
        Some(threads) => {
            let pool = rayon::ThreadPoolBuilder::new()
                .num_threads(threads.max(1))
                .build()
                .map_err(|e| CliError::Runtime(e.to_string()))?;
            Ok(pool.install(task))
        }
    }
}

/// Runs the configured batch for one variant; any per-run failure aborts the
/// command with the failing run index.
fn execute_batch(cfg: &ExperimentConfig, variant: Variant) -> Result<Vec<RunTrace>, CliError> {
    let spec = cfg.objective_spec();
    let opt = cfg.optimization_config(variant)?;
    let objective = ProblemObjective::new(cfg.problem, &spec);
    let results = with_pool(cfg.jobs, || run_batch(&opt, &objective.kind(), cfg.runs))?;
    results
        .into_iter()
        .enumerate()
        .map(|(run, result)| {
            result.map_err(|e| CliError::RunFailed {
                run,
                message: e.to_string(),
            })
        })
        .collect()
}

fn trace_csv(trace: &RunTrace) -> String {
    let mut out = String::from("iteration,x,y,best_so_far,offset,jitter,combined_value\n");
    for r in &trace.records {
        let x = r
            .x
            .iter()
            .map(|v| fmt_float(*v))
            .collect::<Vec<_>>()
            .join(";");
        out.push_str(&format!(
            "{},{},{},{},{},{},{}\n",
            r.index,
            x,
            fmt_float(r.y),
            fmt_float(r.best_so_far),
            fmt_float(r.offset),
            fmt_float(r.jitter),
            fmt_float(r.combined_value),
        ));
    }
    out
}

/// Convergence summary across a batch: per-record median of best-so-far, its
/// improvement rate, and the cumulative distribution grid.
fn summary_csv(batch: &[RunTrace]) -> String {
    let rows = batch[0].records.len();
    let mut medians = Vec::with_capacity(rows);
    for i in 0..rows {
        let mut column: Vec<f64> = batch.iter().map(|t| t.records[i].best_so_far).collect();
        medians.push(median(&mut column));
    }
    let rates = stats::improvement_rate(&medians).unwrap_or_default();
    let cumulative = stats::cumulative_distribution(rows);

    let mut out =
        String::from("index,best_so_far_median,improvement_rate,cumulative_distribution\n");
    for i in 0..rows {
        let rate = if i == 0 {
            String::new()
        } else {
            fmt_float(rates[i - 1])
        };
        out.push_str(&format!(
            "{},{},{},{}\n",
            i,
            fmt_float(medians[i]),
            rate,
            fmt_float(cumulative[i]),
        ));
    }
    out
}

fn write_outputs(
    out_dir: &Path,
    files: Vec<(String, String)>,
) -> Result<Vec<PathBuf>, CliError> {
    fs::create_dir_all(out_dir).map_err(|source| CliError::Io {
        path: out_dir.to_path_buf(),
        source,
    })?;
    let mut paths = Vec::with_capacity(files.len());
    for (name, content) in files {
        let path = out_dir.join(name);
        fs::write(&path, content).map_err(|source| CliError::Io {
            path: path.clone(),
            source,
        })?;
        paths.push(path);
    }
    Ok(paths)
}

/// `run`: one trace CSV per run per variant plus a per-variant summary CSV.
pub fn cmd_run(cfg: &ExperimentConfig) -> Result<Vec<PathBuf>, CliError> {
    let mut files = Vec::new();
    for &variant in &cfg.variants {
        let batch = execute_batch(cfg, variant)?;
        for (k, trace) in batch.iter().enumerate() {
            files.push((format!("trace_{variant}_run{k:03}.csv"), trace_csv(trace)));
        }
        files.push((format!("summary_{variant}.csv"), summary_csv(&batch)));
    }
    write_outputs(&cfg.out_dir, files)
}

#[derive(Debug, Serialize)]
struct CompareDoc<'a> {
    problem: Problem,
    label_a: &'a str,
    label_b: &'a str,
    n_runs: usize,
    t_stat: f64,
    p_value: f64,
    cohens_d: f64,
    hedges_g: f64,
    /// Alias of `hedges_g`; both names circulate for the corrected effect size.
    hedges_d: f64,
    cliffs_delta: f64,
    /// Negated final best values per run -- larger is better.
    final_best_a: Vec<f64>,
    final_best_b: Vec<f64>,
}

/// `compare`: paired batches (shared run seeds) for exactly two variants,
/// compared on negated final best values, written as JSON.
pub fn cmd_compare(cfg: &ExperimentConfig) -> Result<Vec<PathBuf>, CliError> {
    let [variant_a, variant_b] = cfg.variants[..] else {
        return Err(ConfigError::Semantic(format!(
            "compare needs exactly two variants, got {}",
            cfg.variants.len()
        ))
        .into());
    };
    let batch_a = execute_batch(cfg, variant_a)?;
    let batch_b = execute_batch(cfg, variant_b)?;
    // Negate so that larger means better; the optimizer minimizes.
    let scores_a: Vec<f64> = batch_a.iter().map(|t| -t.best_y).collect();
    let scores_b: Vec<f64> = batch_b.iter().map(|t| -t.best_y).collect();
    let label_a = variant_a.to_string();
    let label_b = variant_b.to_string();
    let report = stats::compare(&scores_a, &scores_b, &label_a, &label_b)?;

    let doc = CompareDoc {
        problem: cfg.problem,
        label_a: &report.label_a,
        label_b: &report.label_b,
        n_runs: cfg.runs,
        t_stat: report.t_stat,
        p_value: report.p_value,
        cohens_d: report.cohens_d,
        hedges_g: report.hedges_g,
        hedges_d: report.hedges_g,
        cliffs_delta: report.cliffs_delta,
        final_best_a: scores_a,
        final_best_b: scores_b,
    };
    let json = serde_json::to_string_pretty(&doc).expect("report serializes") + "\n";
    write_outputs(&cfg.out_dir, vec![("compare.json".to_string(), json)])
}

/// `stability`: per variant and run count, a Welch test between two
/// disjointly seeded batches, written as CSV.
pub fn cmd_stability(cfg: &ExperimentConfig) -> Result<Vec<PathBuf>, CliError> {
    let spec = cfg.objective_spec();
    let max_runs = cfg.run_counts.iter().copied().max().unwrap_or(0) as u64;
    let mut out = String::from("variant,mode,run_count,t_stat,p_value\n");
    for &variant in &cfg.variants {
        let opt = cfg.optimization_config(variant)?;
        let objective = ProblemObjective::new(cfg.problem, &spec);
        let seed_a = cfg.base_seed;
        let seed_b = cfg.base_seed.wrapping_add(max_runs);
        let table = with_pool(cfg.jobs, || {
            stats::stability_check(&opt, &objective.kind(), &cfg.run_counts, seed_a, seed_b)
        })??;
        for row in &table.rows {
            out.push_str(&format!(
                "{},{},{},{},{}\n",
                row.variant,
                row.mode,
                row.run_count,
                fmt_float(row.t_stat),
                fmt_float(row.p_value),
            ));
        }
    }
    write_outputs(&cfg.out_dir, vec![("stability.csv".to_string(), out)])
}

/// `tune`: meta-tunes kernel variance and lengthscale on the robust
/// objective, written as JSON.
pub fn cmd_tune(cfg: &ExperimentConfig) -> Result<Vec<PathBuf>, CliError> {
    let spec = cfg.objective_spec();
    let inner = cfg.optimization_config(Variant::Original)?;
    let tuned: TunedKernel = with_pool(cfg.jobs, || {
        crate::optimizer::tune_kernel_hyperparameters(cfg.tune_outer_iterations, &inner, &spec)
    })?
    .map_err(|e| CliError::Runtime(e.to_string()))?;
    let json = serde_json::to_string_pretty(&tuned).expect("report serializes") + "\n";
    write_outputs(&cfg.out_dir, vec![("tuned.json".to_string(), json)])
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn float_formatting_is_nine_significant_digits() {
        assert_eq!(fmt_float(0.0), "0");
        assert_eq!(fmt_float(-0.0), "0");
        assert_eq!(fmt_float(0.01), "1.00000000e-2");
        assert_eq!(fmt_float(-0.398942280401), "-3.98942280e-1");
        assert_eq!(fmt_float(12345.6789), "1.23456789e4");
    }

    #[test]
    fn median_of_even_and_odd_lengths() {
        assert_eq!(median(&mut [3.0, 1.0, 2.0]), 2.0);
        assert_eq!(median(&mut [4.0, 1.0, 2.0, 3.0]), 2.5);
    }

    #[test]
    fn summary_rate_column_is_consistent_with_stats() {
        let cfg = ExperimentConfig {
            runs: 2,
            iterations: 2,
            initial_design_size: 2,
            candidates: 32,
            refine_top: 2,
            refine_iters: 4,
            ..ExperimentConfig::default()
        };
        let batch = execute_batch(&cfg, Variant::Adaptive).unwrap();
        let summary = summary_csv(&batch);
        let lines: Vec<&str> = summary.lines().skip(1).collect();
        assert_eq!(lines.len(), 4);
        // Recompute the rate column from the medians column.
        let medians: Vec<f64> = lines
            .iter()
            .map(|l| l.split(',').nth(1).unwrap().parse().unwrap())
            .collect();
        let rates = stats::improvement_rate(&medians).unwrap();
        for (i, line) in lines.iter().enumerate().skip(1) {
            let cell: f64 = line.split(',').nth(2).unwrap().parse().unwrap();
            assert!((cell - rates[i - 1]).abs() < 1e-7);
        }
    }
}

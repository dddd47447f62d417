//! Statistical comparison of optimization run populations: Welch's t-test,
//! standardized effect sizes, Cliff's delta, convergence summaries, and the
//! multi-run stability protocol.
//!
//! Cliff's delta is the exact O(n^2) pairwise count; any faster
//! implementation must reproduce it bit for bit, so the count is the
//! canonical definition here.

use serde::Serialize;
use thiserror::Error;

use crate::adaptive::Variant;
use crate::optimizer::{run_batch, Mode, ObjectiveKind, OptimizationConfig, RunError, RunTrace};
use crate::special::student_t_two_sided_p;

#[derive(Debug, Error)]
pub enum StatsError {
    #[error("need at least {needed} values per sample, got {got_a} and {got_b}")]
    TooFew {
        needed: usize,
        got_a: usize,
        got_b: usize,
    },
    #[error("undefined statistic: both samples have zero variance")]
    ZeroVariance,
    #[error("undefined effect size: pooled standard deviation is zero")]
    ZeroPooledSd,
    #[error("bias correction needs more than 3 total observations, got {0}")]
    SampleTooSmall(usize),
    #[error("sample is empty")]
    EmptySample,
    #[error("series needs at least 2 values, got {0}")]
    TooShortSeries(usize),
    #[error("run counts must be non-empty and each at least 2")]
    BadRunCount,
    #[error("stability batches need disjoint seed ranges: {seed_a} and {seed_b} overlap within {runs} runs")]
    OverlappingSeeds { seed_a: u64, seed_b: u64, runs: usize },
    #[error("optimization run failed: {0}")]
    Run(#[from] RunError),
}

fn mean(xs: &[f64]) -> f64 {
    xs.iter().sum::<f64>() / xs.len() as f64
}

/// Unbiased (n-1) sample variance.
fn sample_variance(xs: &[f64]) -> f64 {
    let m = mean(xs);
    xs.iter().map(|x| (x - m) * (x - m)).sum::<f64>() / (xs.len() - 1) as f64
}

/// Welch's unequal-variance t-test with Welch-Satterthwaite degrees of
/// freedom; returns `(t, two_sided_p)`.
pub fn welch_t(a: &[f64], b: &[f64]) -> Result<(f64, f64), StatsError> {
    if a.len() < 2 || b.len() < 2 {
        return Err(StatsError::TooFew {
            needed: 2,
            got_a: a.len(),
            got_b: b.len(),
        });
    }
    let (na, nb) = (a.len() as f64, b.len() as f64);
    let (va, vb) = (sample_variance(a), sample_variance(b));
    if va == 0.0 && vb == 0.0 {
        return Err(StatsError::ZeroVariance);
    }
    let sea = va / na;
    let seb = vb / nb;
    let se = (sea + seb).sqrt();
    let t = (mean(a) - mean(b)) / se;
    let df = (sea + seb) * (sea + seb)
        / (sea * sea / (na - 1.0) + seb * seb / (nb - 1.0));
    Ok((t, student_t_two_sided_p(t, df)))
}

/// Cohen's d with the pooled (n-1) standard deviation.
pub fn cohens_d(a: &[f64], b: &[f64]) -> Result<f64, StatsError> {
    if a.len() < 2 || b.len() < 2 {
        return Err(StatsError::TooFew {
            needed: 2,
            got_a: a.len(),
            got_b: b.len(),
        });
    }
    let (na, nb) = (a.len() as f64, b.len() as f64);
    let pooled = (((na - 1.0) * sample_variance(a) + (nb - 1.0) * sample_variance(b))
        / (na + nb - 2.0))
        .sqrt();
    if pooled == 0.0 {
        return Err(StatsError::ZeroPooledSd);
    }
    Ok((mean(a) - mean(b)) / pooled)
}

/// Hedges' g: Cohen's d with the small-sample correction `1 - 3/(4N - 9)`.
pub fn hedges_g(a: &[f64], b: &[f64]) -> Result<f64, StatsError> {
    let total = a.len() + b.len();
    if total <= 3 {
        return Err(StatsError::SampleTooSmall(total));
    }
    Ok(cohens_d(a, b)? * (1.0 - 3.0 / (4.0 * total as f64 - 9.0)))
}

/// Cliff's delta: `(#{a_i > b_j} - #{a_i < b_j}) / (n_a n_b)`, ties counting
/// zero.
pub fn cliffs_delta(a: &[f64], b: &[f64]) -> Result<f64, StatsError> {
    if a.is_empty() || b.is_empty() {
        return Err(StatsError::EmptySample);
    }
    let mut greater = 0i64;
    let mut less = 0i64;
    for &x in a {
        for &y in b {
            if x > y {
                greater += 1;
            } else if x < y {
                less += 1;
            }
        }
    }
    Ok((greater - less) as f64 / (a.len() * b.len()) as f64)
}

/// Running minimum of a series of observed values.
pub fn best_so_far(values: &[f64]) -> Result<Vec<f64>, StatsError> {
    if values.is_empty() {
        return Err(StatsError::EmptySample);
    }
    let mut best = f64::INFINITY;
    Ok(values
        .iter()
        .map(|&v| {
            best = best.min(v);
            best
        })
        .collect())
}

/// First differences of a best-value series; entries are non-positive when
/// the input is a running minimum.
pub fn improvement_rate(best: &[f64]) -> Result<Vec<f64>, StatsError> {
    if best.len() < 2 {
        return Err(StatsError::TooShortSeries(best.len()));
    }
    Ok(best.windows(2).map(|w| w[1] - w[0]).collect())
}

/// The uniform cumulative grid `[1/n, 2/n, ..., 1]`.
pub fn cumulative_distribution(n: usize) -> Vec<f64> {
    (1..=n).map(|i| i as f64 / n as f64).collect()
}

/// All five comparison statistics over two samples of final best values.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct ComparisonReport {
    pub label_a: String,
    pub label_b: String,
    pub n_a: usize,
    pub n_b: usize,
    pub t_stat: f64,
    pub p_value: f64,
    pub cohens_d: f64,
    pub hedges_g: f64,
    pub cliffs_delta: f64,
}

pub fn compare(
    a: &[f64],
    b: &[f64],
    label_a: &str,
    label_b: &str,
) -> Result<ComparisonReport, StatsError> {
    let (t_stat, p_value) = welch_t(a, b)?;
    Ok(ComparisonReport {
        label_a: label_a.to_string(),
        label_b: label_b.to_string(),
        n_a: a.len(),
        n_b: b.len(),
        t_stat,
        p_value,
        cohens_d: cohens_d(a, b)?,
        hedges_g: hedges_g(a, b)?,
        cliffs_delta: cliffs_delta(a, b)?,
    })
}

/// One stability measurement: a Welch test between two independently seeded
/// batches of `run_count` runs each.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct StabilityRow {
    pub variant: Variant,
    pub mode: Mode,
    pub run_count: usize,
    pub t_stat: f64,
    pub p_value: f64,
}

#[derive(Debug, Clone, PartialEq, Default, Serialize)]
pub struct StabilityTable {
    pub rows: Vec<StabilityRow>,
}

/// Runs the stability protocol for each requested run count: two batches of
/// equal size with disjoint seed ranges (`seed_a + i` and `seed_b + i`),
/// Welch-tested on their final best values. `p > 0.05` reads as stable.
pub fn stability_check(
    config: &OptimizationConfig,
    objective: &ObjectiveKind<'_>,
    run_counts: &[usize],
    seed_a: u64,
    seed_b: u64,
) -> Result<StabilityTable, StatsError> {
    if run_counts.is_empty() || run_counts.iter().any(|&n| n < 2) {
        return Err(StatsError::BadRunCount);
    }
    let max_runs = *run_counts.iter().max().expect("non-empty");
    if seed_a.abs_diff(seed_b) < max_runs as u64 {
        return Err(StatsError::OverlappingSeeds {
            seed_a,
            seed_b,
            runs: max_runs,
        });
    }

    let final_bests = |base_seed: u64, n: usize| -> Result<Vec<f64>, StatsError> {
        let mut cfg = config.clone();
        cfg.seed = base_seed;
        let traces: Result<Vec<RunTrace>, RunError> =
            run_batch(&cfg, objective, n).into_iter().collect();
        Ok(traces?.iter().map(|t| t.best_y).collect())
    };

    let mut table = StabilityTable::default();
    for &n in run_counts {
        let batch_a = final_bests(seed_a, n)?;
        let batch_b = final_bests(seed_b, n)?;
        let (t_stat, p_value) = welch_t(&batch_a, &batch_b)?;
        table.rows.push(StabilityRow {
            variant: config.variant,
            mode: config.mode,
            run_count: n,
            t_stat,
            p_value,
        });
    }
    Ok(table)
}

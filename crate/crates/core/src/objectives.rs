//! Stochastic benchmark objectives built on thresholded Gaussian demand.
//!
//! One evaluation draws `sample_count` demand values from
//! `Normal(x, demand_sd)` and reduces them to an expected-overage profit term
//! and an expected-underage penalty term around a threshold. The robust
//! objective is `-mean(max(d - threshold, 0)) - weight * mean(max(threshold - d, 0))`,
//! computed from a single shared sample set. The same samples decompose into
//! the (overage, underage) pair used by the multi-objective benchmarks, so
//! the scalar and decoupled variants optimize the same underlying quantity.
//!
//! [`analytic_expected_robust`] evaluates the exact expectation of the robust
//! objective in closed form and serves as the deterministic test oracle.

use thiserror::Error;

use crate::rng::SeededRng;
use crate::special::{normal_cdf, normal_pdf};

#[derive(Debug, Error)]
pub enum ObjectiveError {
    #[error("invalid objective parameter {name}: {value}")]
    InvalidParameter { name: &'static str, value: f64 },
    #[error("sample_count must be at least 1")]
    EmptySampleCount,
    #[error("bounds must satisfy lo < hi in every dimension, got [{lo}, {hi}]")]
    BadBounds { lo: f64, hi: f64 },
}

/// Definition of the stochastic demand objective.
#[derive(Debug, Clone, PartialEq)]
pub struct ObjectiveSpec {
    pub threshold: f64,
    pub penalty_weight: f64,
    pub sample_count: usize,
    pub demand_sd: f64,
    /// Benchmark input domain, one `(lo, hi)` interval per dimension.
    pub bounds: Vec<(f64, f64)>,
}

impl Default for ObjectiveSpec {
    fn default() -> Self {
        Self {
            threshold: 2.0,
            penalty_weight: 0.1,
            sample_count: 1000,
            demand_sd: 1.0,
            bounds: vec![(-5.0, 5.0)],
        }
    }
}

impl ObjectiveSpec {
    pub fn validate(&self) -> Result<(), ObjectiveError> {
        if !self.threshold.is_finite() {
            return Err(ObjectiveError::InvalidParameter {
                name: "threshold",
                value: self.threshold,
            });
        }
        if !self.penalty_weight.is_finite() || self.penalty_weight < 0.0 {
            return Err(ObjectiveError::InvalidParameter {
                name: "penalty_weight",
                value: self.penalty_weight,
            });
        }
        if self.sample_count == 0 {
            return Err(ObjectiveError::EmptySampleCount);
        }
        if !self.demand_sd.is_finite() || self.demand_sd <= 0.0 {
            return Err(ObjectiveError::InvalidParameter {
                name: "demand_sd",
                value: self.demand_sd,
            });
        }
        for &(lo, hi) in &self.bounds {
            if !lo.is_finite() || !hi.is_finite() || lo >= hi {
                return Err(ObjectiveError::BadBounds { lo, hi });
            }
        }
        Ok(())
    }
}

/// Draws `sample_count` demand values from `Normal(x, demand_sd)`.
pub fn demand_samples(x: f64, spec: &ObjectiveSpec, rng: &mut SeededRng) -> Vec<f64> {
    (0..spec.sample_count)
        .map(|_| rng.next_normal_with(x, spec.demand_sd))
        .collect()
}

fn mean_overage_underage(samples: &[f64], threshold: f64) -> (f64, f64) {
    let mut over = 0.0;
    let mut under = 0.0;
    for &d in samples {
        over += (d - threshold).max(0.0);
        under += (threshold - d).max(0.0);
    }
    let n = samples.len() as f64;
    (over / n, under / n)
}

/// Negated expected overage: `-mean(max(d - threshold, 0))`. Always <= 0.
pub fn stochastic_profit(x: f64, spec: &ObjectiveSpec, rng: &mut SeededRng) -> f64 {
    let samples = demand_samples(x, spec, rng);
    -mean_overage_underage(&samples, spec.threshold).0
}

/// Weighted expected underage: `weight * mean(max(threshold - d, 0))`. Always >= 0.
pub fn penalty_term(x: f64, spec: &ObjectiveSpec, rng: &mut SeededRng) -> f64 {
    let samples = demand_samples(x, spec, rng);
    spec.penalty_weight * mean_overage_underage(&samples, spec.threshold).1
}

/// Robust penalized objective, profit minus penalty over one shared sample set.
pub fn robust_objective(x: f64, spec: &ObjectiveSpec, rng: &mut SeededRng) -> f64 {
    let samples = demand_samples(x, spec, rng);
    let (over, under) = mean_overage_underage(&samples, spec.threshold);
    -over - spec.penalty_weight * under
}

/// Overage and underage components from one shared sample set.
///
/// Both are non-negative and to be minimized;
/// `-(f1 + penalty_weight * f2)` equals [`robust_objective`] on the same samples.
pub fn multiobjective_components(x: f64, spec: &ObjectiveSpec, rng: &mut SeededRng) -> (f64, f64) {
    let samples = demand_samples(x, spec, rng);
    mean_overage_underage(&samples, spec.threshold)
}

/// Exact expectation of [`robust_objective`] under the sampling distribution.
///
/// With `a = (x - threshold) / sd`:
/// `E[max(D - t, 0)] = sd * (pdf(a) + a * cdf(a))` and
/// `E[max(t - D, 0)] = sd * (pdf(a) - a * cdf(-a))`.
pub fn analytic_expected_robust(x: f64, spec: &ObjectiveSpec) -> f64 {
    let sd = spec.demand_sd;
    let a = (x - spec.threshold) / sd;
    let expected_over = sd * (normal_pdf(a) + a * normal_cdf(a));
    let expected_under = sd * (normal_pdf(a) - a * normal_cdf(-a));
    -expected_over - spec.penalty_weight * expected_under
}

/// The input at which the expected robust objective is maximal, solved from
/// `cdf(a) = weight / (1 + weight)` by bisection. Used by tests and the
/// benchmark harness to anchor convergence checks.
pub fn analytic_optimum(spec: &ObjectiveSpec) -> (f64, f64) {
    let target = spec.penalty_weight / (1.0 + spec.penalty_weight);
    let (mut lo, mut hi) = (-12.0, 12.0);
    for _ in 0..200 {
        let mid = 0.5 * (lo + hi);
        if normal_cdf(mid) < target {
            lo = mid;
        } else {
            hi = mid;
        }
    }
    let x_star = spec.threshold + 0.5 * (lo + hi) * spec.demand_sd;
    (x_star, analytic_expected_robust(x_star, spec))
}

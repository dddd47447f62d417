//! Optimization loops: the sequential single/combined-objective loop, the
//! decoupled two-surrogate loop, batch execution, and kernel hyperparameter
//! meta-tuning.
//!
//! A run is strictly sequential; batches of runs are embarrassingly parallel
//! with per-run seeds `base + run_index`, so results are identical whatever
//! the execution order. Objective evaluations receive their own derived seed,
//! making every observed value a pure function of `(x, spec, seed)`.

use std::fmt;
use std::str::FromStr;

use rayon::prelude::*;
use thiserror::Error;

use crate::acquisition::{propose_from_posterior, propose_next, SearchSettings};
use crate::adaptive::{combined_value, condition_mean, variant_controls, AdaptiveSchedule, Variant};
use crate::gp::{fit, Dataset, FittedGp, GpError, KernelParams};
use crate::objectives::{multiobjective_components, robust_objective, ObjectiveSpec};
use crate::rng::{derive_seed, SeededRng};

/// Jitter ceiling for the Cholesky retry policy.
const MAX_ESCALATED_JITTER: f64 = 1e-4;
/// Stream tag separating the meta-tuner's seed space from ordinary runs.
const TUNE_STREAM: u64 = 0x74756e65;
/// Score assigned to a failed inner run during meta-tuning.
const WORST_TUNE_SCORE: f64 = 1e6;

#[derive(Debug, Error)]
pub enum ConfigError {
    #[error("bounds must be non-empty")]
    NoBounds,
    #[error("bound {index} must satisfy lo < hi and be finite, got [{lo}, {hi}]")]
    BadBound { index: usize, lo: f64, hi: f64 },
    #[error("iterations must be at least 1")]
    NoIterations,
    #[error("initial_design_size must be at least 1")]
    NoDesign,
    #[error("candidate count must be at least 1")]
    NoCandidates,
    #[error("refine_top must be at least 1")]
    NoRefineTop,
}

#[derive(Debug, Error)]
pub enum RunError {
    #[error("invalid configuration: {0}")]
    Config(#[from] ConfigError),
    #[error("mode {0} must be run with run_decoupled")]
    WrongMode(Mode),
    #[error("gp failure at iteration {iteration}: {source}")]
    Gp { iteration: usize, source: GpError },
    #[error("objective returned non-finite value {value} at evaluation {index}")]
    NonFiniteObservation { index: usize, value: f64 },
}

/// How the benchmark objective is presented to the optimizer.
#[derive(Debug, Clone, Copy, PartialEq, Eq, serde::Serialize)]
#[serde(rename_all = "snake_case")]
pub enum Mode {
    /// One scalar stochastic objective.
    Single,
    /// The scalarized (overage, underage) pair, evaluated jointly.
    CombinedMulti,
    /// One surrogate per component, evaluated independently.
    DecoupledMulti,
}

impl fmt::Display for Mode {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        let name = match self {
            Mode::Single => "single",
            Mode::CombinedMulti => "combined_multi",
            Mode::DecoupledMulti => "decoupled_multi",
        };
        write!(f, "{name}")
    }
}

impl FromStr for Mode {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        match s {
            "single" => Ok(Mode::Single),
            "combined_multi" => Ok(Mode::CombinedMulti),
            "decoupled_multi" => Ok(Mode::DecoupledMulti),
            other => Err(format!(
                "unknown mode `{other}` (expected single|combined_multi|decoupled_multi)"
            )),
        }
    }
}

/// Full configuration of one optimization run.
#[derive(Debug, Clone, PartialEq)]
pub struct OptimizationConfig {
    pub bounds: Vec<(f64, f64)>,
    pub iterations: usize,
    pub initial_design_size: usize,
    pub variant: Variant,
    pub mode: Mode,
    pub kernel: KernelParams,
    pub schedule: AdaptiveSchedule,
    pub seed: u64,
    pub search: SearchSettings,
}

impl Default for OptimizationConfig {
    fn default() -> Self {
        Self {
            bounds: vec![(-5.0, 5.0)],
            iterations: 30,
            initial_design_size: 5,
            variant: Variant::Adaptive,
            mode: Mode::Single,
            kernel: KernelParams::default(),
            schedule: AdaptiveSchedule::default(),
            seed: 42,
            search: SearchSettings::default(),
        }
    }
}

impl OptimizationConfig {
    pub fn validate(&self) -> Result<(), ConfigError> {
        if self.bounds.is_empty() {
            return Err(ConfigError::NoBounds);
        }
        for (index, &(lo, hi)) in self.bounds.iter().enumerate() {
            if !lo.is_finite() || !hi.is_finite() || lo >= hi {
                return Err(ConfigError::BadBound { index, lo, hi });
            }
        }
        if self.iterations == 0 {
            return Err(ConfigError::NoIterations);
        }
        if self.initial_design_size == 0 {
            return Err(ConfigError::NoDesign);
        }
        if self.search.candidates == 0 {
            return Err(ConfigError::NoCandidates);
        }
        if self.search.refine_top == 0 {
            return Err(ConfigError::NoRefineTop);
        }
        Ok(())
    }
}

/// One observed evaluation in a run.
#[derive(Debug, Clone, PartialEq)]
pub struct TraceRecord {
    /// Global evaluation row, design points first.
    pub index: usize,
    pub x: Vec<f64>,
    pub y: f64,
    pub best_so_far: f64,
    /// Conditioning offset used to propose this point (0 for design rows).
    pub offset: f64,
    /// Acquisition jitter used to propose this point (0 for design rows).
    pub jitter: f64,
    /// Conditioned surrogate mean plus observed value; equals `y` for design
    /// rows, where no surrogate exists yet.
    pub combined_value: f64,
}

/// Complete record of one optimization run.
#[derive(Debug, Clone, PartialEq)]
pub struct RunTrace {
    pub records: Vec<TraceRecord>,
    pub best_x: Vec<f64>,
    pub best_y: f64,
    /// Objective evaluations spent (component evaluations in decoupled mode).
    pub evaluations: usize,
}

impl RunTrace {
    pub fn observed_values(&self) -> Vec<f64> {
        self.records.iter().map(|r| r.y).collect()
    }

    pub fn best_so_far_series(&self) -> Vec<f64> {
        self.records.iter().map(|r| r.best_so_far).collect()
    }
}

/// Uniform random design of `n` points inside the box.
pub fn initial_design(bounds: &[(f64, f64)], n: usize, rng: &mut SeededRng) -> Vec<Vec<f64>> {
    (0..n)
        .map(|_| bounds.iter().map(|&(lo, hi)| rng.uniform_in(lo, hi)).collect())
        .collect()
}

/// Retries `fit` with the diagonal jitter escalated tenfold on positive
/// definiteness failures, up to 1e-4, then gives up.
fn fit_with_escalation(
    data: &Dataset,
    kernel: &KernelParams,
    mean_constant: f64,
) -> Result<FittedGp, GpError> {
    let mut params = *kernel;
    loop {
        match fit(data, &params, mean_constant) {
            Ok(model) => return Ok(model),
            Err(err @ GpError::NotPositiveDefinite { .. }) => {
                let current = params.diag_jitter();
                let next = if current == 0.0 { 1e-10 } else { current * 10.0 };
                if next > MAX_ESCALATED_JITTER {
                    return Err(err);
                }
                params = params.with_diag_jitter(next)?;
            }
            Err(err) => return Err(err),
        }
    }
}

/// Runs the sequential loop on a scalar objective.
///
/// The objective receives the candidate point and a per-evaluation seed
/// derived from the run seed; deterministic objectives are free to ignore
/// the seed. Modes `Single` and `CombinedMulti` both evaluate one scalar per
/// iteration; `DecoupledMulti` is rejected here.
pub fn run<F>(config: &OptimizationConfig, mut objective: F) -> Result<RunTrace, RunError>
where
    F: FnMut(&[f64], u64) -> f64,
{
    config.validate()?;
    if config.mode == Mode::DecoupledMulti {
        return Err(RunError::WrongMode(config.mode));
    }

    let mut rng = SeededRng::new(config.seed);
    let mut state = LoopState::new(config.initial_design_size + config.iterations);

    for x in initial_design(&config.bounds, config.initial_design_size, &mut rng) {
        let seed = derive_seed(config.seed, state.eval_index as u64);
        let y = objective(&x, seed);
        state.observe(x, y, 0.0, 0.0, None)?;
    }

    for iteration in 0..config.iterations {
        let data = Dataset::new(state.points.clone(), state.values.clone())
            .map_err(|source| RunError::Gp { iteration, source })?;
        let model = fit_with_escalation(&data, &config.kernel, 0.0)
            .map_err(|source| RunError::Gp { iteration, source })?;
        let (offset, jitter) = variant_controls(config.variant, &config.schedule, iteration);
        let proposal = propose_next(
            &model,
            &config.bounds,
            iteration,
            config.variant,
            &config.schedule,
            state.best_y,
            &mut rng,
            &config.search,
        )
        .map_err(|source| RunError::Gp { iteration, source })?;
        let (mu, _) = model
            .posterior(&proposal)
            .map_err(|source| RunError::Gp { iteration, source })?;
        let seed = derive_seed(config.seed, state.eval_index as u64);
        let y = objective(&proposal, seed);
        state.observe(proposal, y, offset, jitter, Some(mu))?;
    }

    Ok(state.into_trace())
}

/// Mutable bookkeeping shared by the design phase and the main loop.
struct LoopState {
    points: Vec<Vec<f64>>,
    values: Vec<f64>,
    records: Vec<TraceRecord>,
    best_x: Vec<f64>,
    best_y: f64,
    eval_index: usize,
}

impl LoopState {
    fn new(capacity: usize) -> Self {
        Self {
            points: Vec::with_capacity(capacity),
            values: Vec::with_capacity(capacity),
            records: Vec::with_capacity(capacity),
            best_x: Vec::new(),
            best_y: f64::INFINITY,
            eval_index: 0,
        }
    }

    fn observe(
        &mut self,
        x: Vec<f64>,
        y: f64,
        offset: f64,
        jitter: f64,
        surrogate_mean: Option<f64>,
    ) -> Result<(), RunError> {
        if !y.is_finite() {
            return Err(RunError::NonFiniteObservation {
                index: self.eval_index,
                value: y,
            });
        }
        self.eval_index += 1;
        if y < self.best_y {
            self.best_y = y;
            self.best_x = x.clone();
        }
        let combined = match surrogate_mean {
            Some(mu) => combined_value(condition_mean(mu, offset), y),
            None => y,
        };
        self.records.push(TraceRecord {
            index: self.records.len(),
            x: x.clone(),
            y,
            best_so_far: self.best_y,
            offset,
            jitter,
            combined_value: combined,
        });
        self.points.push(x);
        self.values.push(y);
        Ok(())
    }

    fn into_trace(self) -> RunTrace {
        RunTrace {
            records: self.records,
            best_x: self.best_x,
            best_y: self.best_y,
            evaluations: self.eval_index,
        }
    }
}

/// Runs the decoupled loop: one surrogate per objective component, scalarized
/// acquisition, and per-iteration evaluation of whichever component is more
/// uncertain (weighted by the scalarization) at the proposal.
///
/// Design points evaluate both components from one shared demand draw so
/// both surrogates start fitted. The incumbent is tracked on the scalarized
/// posterior mean over visited points, folded through a running minimum so
/// the reported best never regresses. The demand objective takes a scalar
/// input; only the first coordinate of each point is evaluated.
pub fn run_decoupled(config: &OptimizationConfig, spec: &ObjectiveSpec) -> Result<RunTrace, RunError> {
    config.validate()?;
    if config.mode != Mode::DecoupledMulti {
        return Err(RunError::WrongMode(config.mode));
    }

    let weight = spec.penalty_weight;
    let mut rng = SeededRng::new(config.seed);
    let design = initial_design(&config.bounds, config.initial_design_size, &mut rng);

    let mut visited: Vec<Vec<f64>> = Vec::new();
    let mut overage_data: (Vec<Vec<f64>>, Vec<f64>) = (Vec::new(), Vec::new());
    let mut underage_data: (Vec<Vec<f64>>, Vec<f64>) = (Vec::new(), Vec::new());
    let mut records = Vec::with_capacity(config.initial_design_size + config.iterations);
    let mut best_y = f64::INFINITY;
    let mut best_x: Vec<f64> = Vec::new();
    let mut seed_index = 0u64;
    let mut evaluations = 0usize;

    for x in design {
        let mut eval_rng = SeededRng::new(derive_seed(config.seed, seed_index));
        seed_index += 1;
        let (over, under) = multiobjective_components(x[0], spec, &mut eval_rng);
        evaluations += 2;
        let scalar = over + weight * under;
        if scalar < best_y {
            best_y = scalar;
            best_x = x.clone();
        }
        overage_data.0.push(x.clone());
        overage_data.1.push(over);
        underage_data.0.push(x.clone());
        underage_data.1.push(under);
        records.push(TraceRecord {
            index: records.len(),
            x: x.clone(),
            y: scalar,
            best_so_far: best_y,
            offset: 0.0,
            jitter: 0.0,
            combined_value: scalar,
        });
        visited.push(x);
    }

    // Component values live on their own scale (the underage mean reaches
    // threshold - lo at the left edge), so each surrogate's prior mean is
    // anchored at the mean of its observations; a zero prior would make
    // unexplored regions look spuriously cheap to the scalarized incumbent.
    let fit_component = |data: &(Vec<Vec<f64>>, Vec<f64>),
                         kernel: &KernelParams,
                         iteration: usize|
     -> Result<FittedGp, RunError> {
        let dataset = Dataset::new(data.0.clone(), data.1.clone())
            .map_err(|source| RunError::Gp { iteration, source })?;
        let mean = data.1.iter().sum::<f64>() / data.1.len() as f64;
        fit_with_escalation(&dataset, kernel, mean)
            .map_err(|source| RunError::Gp { iteration, source })
    };

    for iteration in 0..config.iterations {
        let over_gp = fit_component(&overage_data, &config.kernel, iteration)?;
        let under_gp = fit_component(&underage_data, &config.kernel, iteration)?;

        let scalar_posterior = |x: &[f64]| {
            let (m1, s1) = over_gp.posterior(x).expect("dimensions fixed by config");
            let (m2, s2) = under_gp.posterior(x).expect("dimensions fixed by config");
            (m1 + weight * m2, (s1 * s1 + weight * weight * s2 * s2).sqrt())
        };

        // Live incumbent: smallest scalarized posterior mean over everything
        // visited, under the current pair of surrogates.
        let mut live_min = f64::INFINITY;
        let mut live_arg = 0usize;
        for (i, v) in visited.iter().enumerate() {
            let (m, _) = scalar_posterior(v);
            if m < live_min {
                live_min = m;
                live_arg = i;
            }
        }
        if live_min < best_y {
            best_y = live_min;
            best_x = visited[live_arg].clone();
        }

        let (offset, jitter) = variant_controls(config.variant, &config.schedule, iteration);
        let proposal = propose_from_posterior(
            scalar_posterior,
            &config.bounds,
            offset,
            jitter,
            live_min,
            &mut rng,
            &config.search,
        );

        let (scalar_mu, _) = scalar_posterior(&proposal);
        let (_, over_sigma) = over_gp
            .posterior(&proposal)
            .map_err(|source| RunError::Gp { iteration, source })?;
        let (_, under_sigma) = under_gp
            .posterior(&proposal)
            .map_err(|source| RunError::Gp { iteration, source })?;

        let mut eval_rng = SeededRng::new(derive_seed(config.seed, seed_index));
        seed_index += 1;
        let (over, under) = multiobjective_components(proposal[0], spec, &mut eval_rng);
        evaluations += 1;
        // Evaluate the component whose weighted uncertainty dominates.
        let observed = if over_sigma >= weight * under_sigma {
            overage_data.0.push(proposal.clone());
            overage_data.1.push(over);
            over
        } else {
            underage_data.0.push(proposal.clone());
            underage_data.1.push(under);
            under
        };
        if !observed.is_finite() {
            return Err(RunError::NonFiniteObservation {
                index: seed_index as usize - 1,
                value: observed,
            });
        }

        records.push(TraceRecord {
            index: records.len(),
            x: proposal.clone(),
            y: observed,
            best_so_far: best_y,
            offset,
            jitter,
            combined_value: combined_value(condition_mean(scalar_mu, offset), observed),
        });
        visited.push(proposal);
    }

    // Fold the final observations into the incumbent.
    let over_gp = fit_component(&overage_data, &config.kernel, config.iterations)?;
    let under_gp = fit_component(&underage_data, &config.kernel, config.iterations)?;
    for v in &visited {
        let (m1, _) = over_gp.posterior(v).expect("dimensions fixed by config");
        let (m2, _) = under_gp.posterior(v).expect("dimensions fixed by config");
        let m = m1 + weight * m2;
        if m < best_y {
            best_y = m;
            best_x = v.clone();
        }
    }

    Ok(RunTrace {
        records,
        best_x,
        best_y,
        evaluations,
    })
}

/// A benchmark objective in the form the batch runner understands.
pub enum ObjectiveKind<'a> {
    /// Scalar objective of `(point, evaluation seed)`.
    Scalar(&'a (dyn Fn(&[f64], u64) -> f64 + Sync)),
    /// Demand objective evaluated component-wise by the decoupled loop.
    DecoupledDemand(&'a ObjectiveSpec),
}

impl ObjectiveKind<'_> {
    pub fn run_one(&self, config: &OptimizationConfig) -> Result<RunTrace, RunError> {
        match self {
            ObjectiveKind::Scalar(f) => run(config, |x, seed| f(x, seed)),
            ObjectiveKind::DecoupledDemand(spec) => run_decoupled(config, spec),
        }
    }
}

/// Runs `n_runs` independent optimizations with seeds `base + run_index`.
///
/// Runs execute in parallel under the ambient rayon pool; per-run results are
/// collected in run order, so output is identical however runs are scheduled.
/// Individual failures are reported per run without aborting the batch.
pub fn run_batch(
    config: &OptimizationConfig,
    objective: &ObjectiveKind<'_>,
    n_runs: usize,
) -> Vec<Result<RunTrace, RunError>> {
    (0..n_runs)
        .into_par_iter()
        .map(|k| {
            let mut cfg = config.clone();
            cfg.seed = config.seed.wrapping_add(k as u64);
            objective.run_one(&cfg)
        })
        .collect()
}

/// Result of kernel hyperparameter meta-tuning.
#[derive(Debug, Clone, Copy, PartialEq, serde::Serialize)]
pub struct TunedKernel {
    pub variance: f64,
    pub lengthscale: f64,
    pub score: f64,
}

/// Tunes `(variance, lengthscale)` over the box `[0.01, 10]^2` by running the
/// original-variant optimizer on the robust objective for every candidate
/// pair and scoring it by the run's best value.
///
/// The meta-search itself is this module's [`run`] loop; each candidate pair
/// gets an inner run seeded deterministically from the meta-loop's evaluation
/// seed. Failed inner runs count as a worst-case score instead of aborting.
pub fn tune_kernel_hyperparameters(
    outer_iterations: usize,
    inner_config: &OptimizationConfig,
    spec: &ObjectiveSpec,
) -> Result<TunedKernel, RunError> {
    inner_config.validate()?;
    let meta_config = OptimizationConfig {
        bounds: vec![(0.01, 10.0), (0.01, 10.0)],
        iterations: outer_iterations,
        initial_design_size: 1,
        variant: Variant::Original,
        mode: Mode::Single,
        kernel: KernelParams::new(1.0, 2.0, 1e-4, 1e-10).expect("static parameters"),
        schedule: inner_config.schedule,
        seed: derive_seed(inner_config.seed, TUNE_STREAM),
        search: inner_config.search,
    };

    let score_pair = |params: &[f64], inner_seed: u64| -> f64 {
        let kernel = match KernelParams::new(
            params[0],
            params[1],
            inner_config.kernel.noise_variance(),
            inner_config.kernel.diag_jitter(),
        ) {
            Ok(kernel) => kernel,
            Err(_) => return WORST_TUNE_SCORE,
        };
        let mut cfg = inner_config.clone();
        cfg.kernel = kernel;
        cfg.variant = Variant::Original;
        cfg.mode = Mode::Single;
        cfg.seed = inner_seed;
        let objective =
            |x: &[f64], seed: u64| -robust_objective(x[0], spec, &mut SeededRng::new(seed));
        match run(&cfg, objective) {
            Ok(trace) => trace.best_y,
            Err(_) => WORST_TUNE_SCORE,
        }
    };

    let trace = run(&meta_config, score_pair)?;
    Ok(TunedKernel {
        variance: trace.best_x[0],
        lengthscale: trace.best_x[1],
        score: trace.best_y,
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    fn robust_scalar(spec: &ObjectiveSpec) -> impl Fn(&[f64], u64) -> f64 + Sync + '_ {
        move |x: &[f64], seed: u64| -robust_objective(x[0], spec, &mut SeededRng::new(seed))
    }

    fn quick_config() -> OptimizationConfig {
        OptimizationConfig {
            iterations: 3,
            initial_design_size: 2,
            search: SearchSettings {
                candidates: 128,
                refine_top: 3,
                refine_iters: 8,
            },
            ..OptimizationConfig::default()
        }
    }

    #[test]
    fn design_is_deterministic_and_uniform() {
        let bounds = [(-5.0, 5.0)];
        let a = initial_design(&bounds, 5, &mut SeededRng::new(1));
        let b = initial_design(&bounds, 5, &mut SeededRng::new(1));
        assert_eq!(a, b);

        let big = initial_design(&bounds, 1000, &mut SeededRng::new(2));
        let mean = big.iter().map(|p| p[0]).sum::<f64>() / 1000.0;
        assert!(mean.abs() < 0.3, "mean {mean}");
        assert!(big.iter().all(|p| (-5.0..5.0).contains(&p[0])));
    }

    #[test]
    fn config_validation() {
        let check = |cfg: OptimizationConfig| cfg.validate();
        assert!(matches!(
            check(OptimizationConfig {
                bounds: vec![(0.0, 0.0)],
                ..OptimizationConfig::default()
            }),
            Err(ConfigError::BadBound { .. })
        ));
        assert!(matches!(
            check(OptimizationConfig {
                bounds: vec![],
                ..OptimizationConfig::default()
            }),
            Err(ConfigError::NoBounds)
        ));
        assert!(matches!(
            check(OptimizationConfig {
                iterations: 0,
                ..OptimizationConfig::default()
            }),
            Err(ConfigError::NoIterations)
        ));
        assert!(matches!(
            check(OptimizationConfig {
                initial_design_size: 0,
                ..OptimizationConfig::default()
            }),
            Err(ConfigError::NoDesign)
        ));
        assert!(OptimizationConfig::default().validate().is_ok());
    }

    #[test]
    fn trace_bookkeeping() {
        let spec = ObjectiveSpec::default();
        let mut cfg = quick_config();
        cfg.iterations = 1;
        cfg.initial_design_size = 3;
        let trace = run(&cfg, robust_scalar(&spec)).unwrap();
        assert_eq!(trace.records.len(), 4);
        assert_eq!(trace.evaluations, 4);
        for (i, r) in trace.records.iter().enumerate() {
            assert_eq!(r.index, i);
        }
        let best: Vec<f64> = trace.best_so_far_series();
        assert!(best.windows(2).all(|w| w[1] <= w[0]));
        assert_eq!(trace.best_y, *best.last().unwrap());
    }

    #[test]
    fn runs_are_reproducible() {
        let spec = ObjectiveSpec::default();
        let cfg = quick_config();
        let a = run(&cfg, robust_scalar(&spec)).unwrap();
        let b = run(&cfg, robust_scalar(&spec)).unwrap();
        assert_eq!(a, b);
    }

    #[test]
    fn adaptive_with_zero_schedule_degenerates_to_original() {
        let spec = ObjectiveSpec::default();
        let mut adaptive_cfg = quick_config();
        adaptive_cfg.iterations = 6;
        adaptive_cfg.variant = Variant::Adaptive;
        adaptive_cfg.schedule = AdaptiveSchedule::new(0.0, 0.1, 0.01, 0.0).unwrap();
        let mut original_cfg = adaptive_cfg.clone();
        original_cfg.variant = Variant::Original;

        let a = run(&adaptive_cfg, robust_scalar(&spec)).unwrap();
        let b = run(&original_cfg, robust_scalar(&spec)).unwrap();
        assert_eq!(a, b);
    }

    #[test]
    fn decoupled_mode_is_rejected_by_scalar_run() {
        let mut cfg = quick_config();
        cfg.mode = Mode::DecoupledMulti;
        let spec = ObjectiveSpec::default();
        assert!(matches!(
            run(&cfg, robust_scalar(&spec)),
            Err(RunError::WrongMode(Mode::DecoupledMulti))
        ));
    }

    #[test]
    fn non_finite_observation_is_reported() {
        let cfg = quick_config();
        let result = run(&cfg, |_x, _seed| f64::NAN);
        assert!(matches!(
            result,
            Err(RunError::NonFiniteObservation { index: 0, .. })
        ));
    }

    #[test]
    fn quadratic_convergence_sanity() {
        // Noise-free quadratic: most seeds must come within 1e-2 of zero.
        let mut hits = 0;
        for seed in 0..20 {
            let cfg = OptimizationConfig {
                seed,
                variant: Variant::Original,
                kernel: KernelParams::new(25.0, 1.0, 1e-8, 1e-10).unwrap(),
                ..OptimizationConfig::default()
            };
            let trace = run(&cfg, |x, _| (x[0] - 1.0) * (x[0] - 1.0)).unwrap();
            if trace.best_y <= 1e-2 {
                hits += 1;
            }
        }
        assert!(hits >= 18, "only {hits}/20 seeds converged");
    }

    #[test]
    fn jitter_escalation_recovers_singular_gram_matrices() {
        // Conflicting duplicate inputs make the raw Gram matrix singular;
        // the retry policy must rescue the fit with a small ridge.
        let data = Dataset::new(vec![vec![1.0], vec![1.0]], vec![0.0, 1.0]).unwrap();
        let kernel = KernelParams::new(1.0, 1.0, 0.0, 0.0).unwrap();
        assert!(fit(&data, &kernel, 0.0).is_err());
        let model = fit_with_escalation(&data, &kernel, 0.0).unwrap();
        // The rescued posterior averages the conflicting targets.
        let (mu, _) = model.posterior(&[1.0]).unwrap();
        assert!((mu - 0.5).abs() < 1e-3, "mu {mu}");
    }

    #[test]
    fn decoupled_budget_and_bookkeeping() {
        let spec = ObjectiveSpec::default();
        let mut cfg = quick_config();
        cfg.mode = Mode::DecoupledMulti;
        cfg.iterations = 4;
        cfg.initial_design_size = 3;
        let trace = run_decoupled(&cfg, &spec).unwrap();
        assert_eq!(trace.records.len(), 7);
        assert_eq!(trace.evaluations, 3 * 2 + 4);
        let best = trace.best_so_far_series();
        assert!(best.windows(2).all(|w| w[1] <= w[0]));
    }

    #[test]
    fn decoupled_requires_decoupled_mode() {
        let spec = ObjectiveSpec::default();
        let cfg = quick_config();
        assert!(matches!(
            run_decoupled(&cfg, &spec),
            Err(RunError::WrongMode(Mode::Single))
        ));
    }

    #[test]
    fn component_evaluation_updates_only_one_surrogate() {
        // Fit both component surrogates on a shared design, then add an
        // overage observation: its variance at that point must drop while
        // the underage surrogate is untouched.
        let spec = ObjectiveSpec::default();
        let kernel = KernelParams::default();
        let design: Vec<Vec<f64>> = vec![vec![-3.0], vec![0.0], vec![3.0]];
        let mut rng = SeededRng::new(5);
        let both: Vec<(f64, f64)> = design
            .iter()
            .map(|x| multiobjective_components(x[0], &spec, &mut rng))
            .collect();
        let overs: Vec<f64> = both.iter().map(|b| b.0).collect();
        let unders: Vec<f64> = both.iter().map(|b| b.1).collect();

        let g1 = fit(&Dataset::new(design.clone(), overs.clone()).unwrap(), &kernel, 0.0).unwrap();
        let g2 = fit(&Dataset::new(design.clone(), unders.clone()).unwrap(), &kernel, 0.0).unwrap();

        let x_new = vec![1.5];
        let (_, s1_before) = g1.posterior(&x_new).unwrap();
        let (_, s2_before) = g2.posterior(&x_new).unwrap();

        let (over_new, _) = multiobjective_components(1.5, &spec, &mut rng);
        let mut pts = design.clone();
        pts.push(x_new.clone());
        let mut over_vals = overs;
        over_vals.push(over_new);
        let g1_after = fit(&Dataset::new(pts, over_vals).unwrap(), &kernel, 0.0).unwrap();

        let (_, s1_after) = g1_after.posterior(&x_new).unwrap();
        let (_, s2_after) = g2.posterior(&x_new).unwrap();
        assert!(s1_after < s1_before);
        assert_eq!(s2_after, s2_before);
    }

    #[test]
    fn decoupled_scalarized_best_converges_to_optimum_region() {
        use crate::objectives::analytic_optimum;
        let spec = ObjectiveSpec::default();
        let (x_star, _) = analytic_optimum(&spec);
        let cfg = OptimizationConfig {
            mode: Mode::DecoupledMulti,
            ..OptimizationConfig::default()
        };
        let mut distances: Vec<f64> = run_batch(&cfg, &ObjectiveKind::DecoupledDemand(&spec), 20)
            .into_iter()
            .map(|t| (t.unwrap().best_x[0] - x_star).abs())
            .collect();
        distances.sort_by(f64::total_cmp);
        let median = distances[distances.len() / 2];
        assert!(median <= 0.6, "median |best_x - x*| = {median}");
    }

    #[test]
    fn tuner_beats_random_search_baseline() {
        let spec = ObjectiveSpec::default();
        let inner = OptimizationConfig {
            variant: Variant::Original,
            ..OptimizationConfig::default()
        };
        let tuned = tune_kernel_hyperparameters(30, &inner, &spec).unwrap();

        // Random-search baseline: 10 uniform pairs from the same box, each
        // scored by the same inner protocol.
        let mut rng = SeededRng::new(4242);
        let mut baseline: Vec<f64> = (0..10u64)
            .map(|k| {
                let variance = rng.uniform_in(0.01, 10.0);
                let lengthscale = rng.uniform_in(0.01, 10.0);
                let mut cfg = inner.clone();
                cfg.kernel = KernelParams::new(
                    variance,
                    lengthscale,
                    cfg.kernel.noise_variance(),
                    cfg.kernel.diag_jitter(),
                )
                .unwrap();
                cfg.seed = derive_seed(inner.seed, 777 + k);
                run(&cfg, |x, s| {
                    -robust_objective(x[0], &spec, &mut SeededRng::new(s))
                })
                .unwrap()
                .best_y
            })
            .collect();
        baseline.sort_by(f64::total_cmp);
        let median = 0.5 * (baseline[4] + baseline[5]);
        assert!(
            tuned.score <= median,
            "tuned score {} vs random-search median {median}",
            tuned.score
        );
    }

    #[test]
    fn batch_of_one_equals_single_run() {
        let spec = ObjectiveSpec::default();
        let cfg = quick_config();
        let scalar = robust_scalar(&spec);
        let batch = run_batch(&cfg, &ObjectiveKind::Scalar(&scalar), 1);
        let single = run(&cfg, robust_scalar(&spec)).unwrap();
        assert_eq!(batch.len(), 1);
        assert_eq!(*batch[0].as_ref().unwrap(), single);
    }

    #[test]
    fn batch_runs_are_distinct_and_order_independent() {
        let spec = ObjectiveSpec::default();
        let cfg = quick_config();
        let scalar = robust_scalar(&spec);
        let objective = ObjectiveKind::Scalar(&scalar);
        let serial_pool = rayon::ThreadPoolBuilder::new().num_threads(1).build().unwrap();
        let parallel_pool = rayon::ThreadPoolBuilder::new().num_threads(4).build().unwrap();
        let serial = serial_pool.install(|| run_batch(&cfg, &objective, 6));
        let parallel = parallel_pool.install(|| run_batch(&cfg, &objective, 6));

        let serial: Vec<RunTrace> = serial.into_iter().map(Result::unwrap).collect();
        let parallel: Vec<RunTrace> = parallel.into_iter().map(Result::unwrap).collect();
        assert_eq!(serial, parallel);
        for i in 0..serial.len() {
            for j in (i + 1)..serial.len() {
                assert_ne!(serial[i].records, serial[j].records);
            }
        }
    }

    #[test]
    fn tuner_score_matches_minimum_and_stays_in_box() {
        let spec = ObjectiveSpec::default();
        let inner = OptimizationConfig {
            iterations: 2,
            initial_design_size: 2,
            search: SearchSettings {
                candidates: 64,
                refine_top: 2,
                refine_iters: 4,
            },
            ..OptimizationConfig::default()
        };
        let tuned = tune_kernel_hyperparameters(2, &inner, &spec).unwrap();
        assert!((0.01..=10.0).contains(&tuned.variance));
        assert!((0.01..=10.0).contains(&tuned.lengthscale));
        let again = tune_kernel_hyperparameters(2, &inner, &spec).unwrap();
        assert_eq!(tuned, again);
    }
}

//! Python module exposing the main abopt types and operations: the Matern
//! 5/2 kernel, GP posterior inference, the robust demand objective and its
//! analytic expectation, expected improvement, the optimization loop, and
//! the run-population comparison statistics.
//!
//! Build `libabopt_py.so` and rename it to `abopt.so` on the Python path
//! (python/smoke_test.py does this automatically).

use pyo3::exceptions::PyValueError;
use pyo3::prelude::*;
use pyo3::types::PyDict;

use abopt::acquisition::{expected_improvement as ei, AcquisitionQuery, SearchSettings};
use abopt::adaptive::AdaptiveSchedule;
use abopt::bench::Problem;
use abopt::gp;
use abopt::objectives;
use abopt::optimizer::{self, OptimizationConfig, RunTrace};
use abopt::stats;
use abopt::{Dataset, KernelParams, ObjectiveSpec, SeededRng, Variant};

fn value_error(err: impl std::fmt::Display) -> PyErr {
    PyValueError::new_err(err.to_string())
}

/// Matern 5/2 covariance at pairwise distance `r`.
#[pyfunction(signature = (r, variance = 1.0, lengthscale = 1.0))]
fn matern52(r: f64, variance: f64, lengthscale: f64) -> PyResult<f64> {
    let params = KernelParams::new(variance, lengthscale, 0.0, 0.0).map_err(value_error)?;
    gp::matern52(r, &params).map_err(value_error)
}

/// Closed-form expected improvement for a minimization problem.
#[pyfunction(signature = (mu, sigma, f_min, jitter = 0.0))]
fn expected_improvement(mu: f64, sigma: f64, f_min: f64, jitter: f64) -> PyResult<f64> {
    ei(&AcquisitionQuery {
        mu,
        sigma,
        f_min,
        jitter,
    })
    .map_err(value_error)
}

/// Conditioning offset at an iteration: `constant_value / (1 + decay * i)`.
#[pyfunction(signature = (iteration, constant_value = 0.1, decay = 0.1))]
fn conditioning_offset(iteration: usize, constant_value: f64, decay: f64) -> PyResult<f64> {
    let schedule = AdaptiveSchedule::new(constant_value, decay, 0.01, 0.1).map_err(value_error)?;
    Ok(schedule.conditioning_offset(iteration))
}

/// Acquisition jitter at an iteration: `base / (1 + decay * i)`.
#[pyfunction(signature = (iteration, base = 0.01, decay = 0.1))]
fn acquisition_jitter(iteration: usize, base: f64, decay: f64) -> PyResult<f64> {
    let schedule = AdaptiveSchedule::new(0.1, 0.1, base, decay).map_err(value_error)?;
    Ok(schedule.acquisition_jitter(iteration))
}

fn spec_from(
    threshold: f64,
    penalty_weight: f64,
    sample_count: usize,
    demand_sd: f64,
) -> PyResult<ObjectiveSpec> {
    let spec = ObjectiveSpec {
        threshold,
        penalty_weight,
        sample_count,
        demand_sd,
        ..ObjectiveSpec::default()
    };
    spec.validate().map_err(value_error)?;
    Ok(spec)
}

/// One seeded evaluation of the robust penalized demand objective.
#[pyfunction(signature = (x, seed, threshold = 2.0, penalty_weight = 0.1, sample_count = 1000, demand_sd = 1.0))]
fn robust_objective(
    x: f64,
    seed: u64,
    threshold: f64,
    penalty_weight: f64,
    sample_count: usize,
    demand_sd: f64,
) -> PyResult<f64> {
    let spec = spec_from(threshold, penalty_weight, sample_count, demand_sd)?;
    Ok(objectives::robust_objective(
        x,
        &spec,
        &mut SeededRng::new(seed),
    ))
}

/// Exact expectation of the robust objective at `x`.
#[pyfunction(signature = (x, threshold = 2.0, penalty_weight = 0.1, demand_sd = 1.0))]
fn analytic_expected_robust(
    x: f64,
    threshold: f64,
    penalty_weight: f64,
    demand_sd: f64,
) -> PyResult<f64> {
    let spec = spec_from(threshold, penalty_weight, 1, demand_sd)?;
    Ok(objectives::analytic_expected_robust(x, &spec))
}

/// Running minimum of a series of observed values.
#[pyfunction]
fn best_so_far(values: Vec<f64>) -> PyResult<Vec<f64>> {
    stats::best_so_far(&values).map_err(value_error)
}

/// First differences of a best-value series.
#[pyfunction]
fn improvement_rate(best: Vec<f64>) -> PyResult<Vec<f64>> {
    stats::improvement_rate(&best).map_err(value_error)
}

/// Welch t, p-value, Cohen's d, Hedges' g, and Cliff's delta for two samples.
#[pyfunction]
fn compare<'py>(py: Python<'py>, a: Vec<f64>, b: Vec<f64>) -> PyResult<Bound<'py, PyDict>> {
    let report = stats::compare(&a, &b, "a", "b").map_err(value_error)?;
    let dict = PyDict::new(py);
    dict.set_item("t_stat", report.t_stat)?;
    dict.set_item("p_value", report.p_value)?;
    dict.set_item("cohens_d", report.cohens_d)?;
    dict.set_item("hedges_g", report.hedges_g)?;
    dict.set_item("cliffs_delta", report.cliffs_delta)?;
    dict.set_item("n_a", report.n_a)?;
    dict.set_item("n_b", report.n_b)?;
    Ok(dict)
}

/// Gaussian process surrogate fitted at construction time.
#[pyclass]
struct GaussianProcess {
    model: gp::FittedGp,
}

#[pymethods]
impl GaussianProcess {
    #[new]
    #[pyo3(signature = (points, targets, variance = 1.0, lengthscale = 1.0, noise_variance = 1e-2, diag_jitter = 1e-10, mean_constant = 0.0))]
    #[allow(clippy::too_many_arguments)]
    fn new(
        points: Vec<Vec<f64>>,
        targets: Vec<f64>,
        variance: f64,
        lengthscale: f64,
        noise_variance: f64,
        diag_jitter: f64,
        mean_constant: f64,
    ) -> PyResult<Self> {
        let data = Dataset::new(points, targets).map_err(value_error)?;
        let params = KernelParams::new(variance, lengthscale, noise_variance, diag_jitter)
            .map_err(value_error)?;
        let model = gp::fit(&data, &params, mean_constant).map_err(value_error)?;
        Ok(Self { model })
    }

    /// Posterior mean and standard deviation of the latent function at `x`.
    fn posterior(&self, x: Vec<f64>) -> PyResult<(f64, f64)> {
        self.model.posterior(&x).map_err(value_error)
    }

    fn __len__(&self) -> usize {
        self.model.dataset().len()
    }
}

/// Result of one optimization run, in columnar form.
#[pyclass]
struct RunResult {
    #[pyo3(get)]
    best_x: Vec<f64>,
    #[pyo3(get)]
    best_y: f64,
    #[pyo3(get)]
    evaluations: usize,
    #[pyo3(get)]
    x: Vec<Vec<f64>>,
    #[pyo3(get)]
    y: Vec<f64>,
    #[pyo3(get)]
    best_so_far: Vec<f64>,
    #[pyo3(get)]
    offset: Vec<f64>,
    #[pyo3(get)]
    jitter: Vec<f64>,
    #[pyo3(get)]
    combined_value: Vec<f64>,
}

impl From<RunTrace> for RunResult {
    fn from(trace: RunTrace) -> Self {
        Self {
            best_x: trace.best_x.clone(),
            best_y: trace.best_y,
            evaluations: trace.evaluations,
            x: trace.records.iter().map(|r| r.x.clone()).collect(),
            y: trace.records.iter().map(|r| r.y).collect(),
            best_so_far: trace.records.iter().map(|r| r.best_so_far).collect(),
            offset: trace.records.iter().map(|r| r.offset).collect(),
            jitter: trace.records.iter().map(|r| r.jitter).collect(),
            combined_value: trace.records.iter().map(|r| r.combined_value).collect(),
        }
    }
}

/// Runs one seeded optimization on a named benchmark problem.
#[pyfunction(signature = (
    problem = "robust_1d",
    variant = "adaptive",
    iterations = 30,
    initial_design_size = 5,
    seed = 42,
    bounds = (-5.0, 5.0),
    sample_count = 1000,
))]
fn run_optimization(
    problem: &str,
    variant: &str,
    iterations: usize,
    initial_design_size: usize,
    seed: u64,
    bounds: (f64, f64),
    sample_count: usize,
) -> PyResult<RunResult> {
    let problem: Problem = problem.parse().map_err(value_error)?;
    let variant: Variant = variant.parse().map_err(value_error)?;
    let spec = ObjectiveSpec {
        sample_count,
        bounds: vec![bounds],
        ..ObjectiveSpec::default()
    };
    spec.validate().map_err(value_error)?;
    let noise = match problem {
        Problem::QuadraticTest => 1e-8,
        _ => 1e-2,
    };
    let config = OptimizationConfig {
        bounds: vec![bounds],
        iterations,
        initial_design_size,
        variant,
        mode: problem.mode(),
        kernel: KernelParams::new(1.0, 1.0, noise, 1e-10).map_err(value_error)?,
        schedule: AdaptiveSchedule::default(),
        seed,
        search: SearchSettings::default(),
    };

    let trace = match problem {
        Problem::Robust1d => optimizer::run(&config, |x, eval_seed| {
            -objectives::robust_objective(x[0], &spec, &mut SeededRng::new(eval_seed))
        }),
        Problem::MultiCombined => optimizer::run(&config, |x, eval_seed| {
            let (over, under) =
                objectives::multiobjective_components(x[0], &spec, &mut SeededRng::new(eval_seed));
            over + spec.penalty_weight * under
        }),
        Problem::QuadraticTest => optimizer::run(&config, |x, _| (x[0] - 1.0) * (x[0] - 1.0)),
        Problem::MultiDecoupled => optimizer::run_decoupled(&config, &spec),
    }
    .map_err(value_error)?;
    Ok(trace.into())
}

#[pymodule(name = "abopt")]
fn abopt_py(m: &Bound<'_, PyModule>) -> PyResult<()> {
    m.add_function(wrap_pyfunction!(matern52, m)?)?;
    m.add_function(wrap_pyfunction!(expected_improvement, m)?)?;
    m.add_function(wrap_pyfunction!(conditioning_offset, m)?)?;
    m.add_function(wrap_pyfunction!(acquisition_jitter, m)?)?;
    m.add_function(wrap_pyfunction!(robust_objective, m)?)?;
    m.add_function(wrap_pyfunction!(analytic_expected_robust, m)?)?;
    m.add_function(wrap_pyfunction!(best_so_far, m)?)?;
    m.add_function(wrap_pyfunction!(improvement_rate, m)?)?;
    m.add_function(wrap_pyfunction!(compare, m)?)?;
    m.add_class::<GaussianProcess>()?;
    m.add_class::<RunResult>()?;
    m.add_function(wrap_pyfunction!(run_optimization, m)?)?;
    Ok(())
}

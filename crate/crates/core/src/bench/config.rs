//! Experiment configuration: a flat `key = value` text format.
//!
//! Unknown and duplicate keys are hard errors with line diagnostics, so a
//! misspelled setting can never silently fall back to a default. Parsing
//! then re-serializing is idempotent: the canonical form is a fixed point.

use std::fmt;
use std::path::PathBuf;
use std::str::FromStr;

use thiserror::Error;

use crate::acquisition::SearchSettings;
use crate::adaptive::{AdaptiveSchedule, Variant};
use crate::gp::KernelParams;
use crate::objectives::ObjectiveSpec;
use crate::optimizer::{Mode, OptimizationConfig};

#[derive(Debug, Error)]
pub enum ConfigError {
    #[error("line {line}: expected `key = value`, got `{text}`")]
    Syntax { line: usize, text: String },
    #[error("line {line}: unknown key `{key}`")]
    UnknownKey { line: usize, key: String },
    #[error("line {line}: duplicate key `{key}`")]
    DuplicateKey { line: usize, key: String },
    #[error("line {line}: invalid value for `{key}`: {message}")]
    BadValue {
        line: usize,
        key: String,
        message: String,
    },
    #[error("invalid configuration: {0}")]
    Semantic(String),
}

/// Benchmark problems the harness knows how to run.
#[derive(Debug, Clone, Copy, PartialEq, Eq, serde::Serialize)]
#[serde(rename_all = "snake_case")]
pub enum Problem {
    /// Minimize the negated robust demand objective as one scalar.
    Robust1d,
    /// Minimize the scalarized (overage, underage) pair, evaluated jointly.
    MultiCombined,
    /// Decoupled surrogates, one component evaluated per iteration.
    MultiDecoupled,
    /// Deterministic quadratic `(x - 1)^2`, for sanity checks.
    QuadraticTest,
}

impl Problem {
    pub fn mode(self) -> Mode {
        match self {
            Problem::Robust1d | Problem::QuadraticTest => Mode::Single,
            Problem::MultiCombined => Mode::CombinedMulti,
            Problem::MultiDecoupled => Mode::DecoupledMulti,
        }
    }
}

impl fmt::Display for Problem {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        let name = match self {
            Problem::Robust1d => "robust_1d",
            Problem::MultiCombined => "multi_combined",
            Problem::MultiDecoupled => "multi_decoupled",
            Problem::QuadraticTest => "quadratic_test",
        };
        write!(f, "{name}")
    }
}

impl FromStr for Problem {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        match s {
            "robust_1d" => Ok(Problem::Robust1d),
            "multi_combined" => Ok(Problem::MultiCombined),
            "multi_decoupled" => Ok(Problem::MultiDecoupled),
            "quadratic_test" => Ok(Problem::QuadraticTest),
            other => Err(format!(
                "unknown problem `{other}` (expected robust_1d|multi_combined|multi_decoupled|quadratic_test)"
            )),
        }
    }
}

/// Everything a benchmark invocation needs, with standard defaults.
#[derive(Debug, Clone, PartialEq)]
pub struct ExperimentConfig {
    pub problem: Problem,
    pub variants: Vec<Variant>,
    pub iterations: usize,
    pub initial_design_size: usize,
    pub runs: usize,
    pub base_seed: u64,
    pub bounds_lo: f64,
    pub bounds_hi: f64,
    pub kernel_variance: f64,
    pub kernel_lengthscale: f64,
    /// Observation noise; defaults to 1e-2 for the stochastic problems and
    /// 1e-8 for the deterministic quadratic when not set explicitly.
    pub kernel_noise_variance: Option<f64>,
    pub kernel_diag_jitter: f64,
    pub constant_value: f64,
    pub conditioning_decay: f64,
    pub jitter_base: f64,
    pub jitter_decay: f64,
    pub threshold: f64,
    pub penalty_weight: f64,
    pub sample_count: usize,
    pub demand_sd: f64,
    pub candidates: usize,
    pub refine_top: usize,
    pub refine_iters: usize,
    pub run_counts: Vec<usize>,
    pub tune_outer_iterations: usize,
    pub out_dir: PathBuf,
    pub jobs: Option<usize>,
}

impl Default for ExperimentConfig {
    fn default() -> Self {
        let spec = ObjectiveSpec::default();
        let search = SearchSettings::default();
        let schedule = AdaptiveSchedule::default();
        Self {
            problem: Problem::Robust1d,
            variants: vec![Variant::Adaptive, Variant::Original],
            iterations: 30,
            initial_design_size: 5,
            runs: 30,
            base_seed: 42,
            bounds_lo: spec.bounds[0].0,
            bounds_hi: spec.bounds[0].1,
            kernel_variance: 1.0,
            kernel_lengthscale: 1.0,
            kernel_noise_variance: None,
            kernel_diag_jitter: 1e-10,
            constant_value: schedule.constant_value(),
            conditioning_decay: schedule.conditioning_decay(),
            jitter_base: schedule.jitter_base(),
            jitter_decay: schedule.jitter_decay(),
            threshold: spec.threshold,
            penalty_weight: spec.penalty_weight,
            sample_count: spec.sample_count,
            demand_sd: spec.demand_sd,
            candidates: search.candidates,
            refine_top: search.refine_top,
            refine_iters: search.refine_iters,
            run_counts: vec![10, 30, 50, 100],
            tune_outer_iterations: 30,
            out_dir: PathBuf::from("out"),
            jobs: None,
        }
    }
}

impl ExperimentConfig {
    /// Parses the flat key=value format. `#` starts a comment line.
    pub fn parse(text: &str) -> Result<Self, ConfigError> {
        let mut cfg = Self::default();
        let mut seen: Vec<String> = Vec::new();
        for (idx, raw) in text.lines().enumerate() {
            let line = idx + 1;
            let trimmed = raw.trim();
            if trimmed.is_empty() || trimmed.starts_with('#') {
                continue;
            }
            let Some((key, value)) = trimmed.split_once('=') else {
                return Err(ConfigError::Syntax {
                    line,
                    text: trimmed.to_string(),
                });
            };
            let key = key.trim();
            let value = value.trim();
            if seen.iter().any(|k| k == key) {
                return Err(ConfigError::DuplicateKey {
                    line,
                    key: key.to_string(),
                });
            }
            seen.push(key.to_string());
            cfg.apply(line, key, value)?;
        }
        cfg.check_semantics()?;
        Ok(cfg)
    }

    fn apply(&mut self, line: usize, key: &str, value: &str) -> Result<(), ConfigError> {
        fn parse_as<T: FromStr>(line: usize, key: &str, value: &str) -> Result<T, ConfigError>
        where
            T::Err: fmt::Display,
        {
            value.parse().map_err(|e: T::Err| ConfigError::BadValue {
                line,
                key: key.to_string(),
                message: e.to_string(),
            })
        }

        match key {
            "problem" => self.problem = parse_as(line, key, value)?,
            "variants" => {
                let mut variants = Vec::new();
                for item in value.split(',') {
                    variants.push(parse_as::<Variant>(line, key, item.trim())?);
                }
                self.variants = variants;
            }
            "iterations" => self.iterations = parse_as(line, key, value)?,
            "initial_design_size" => self.initial_design_size = parse_as(line, key, value)?,
            "runs" => self.runs = parse_as(line, key, value)?,
            "base_seed" => self.base_seed = parse_as(line, key, value)?,
            "bounds_lo" => self.bounds_lo = parse_as(line, key, value)?,
            "bounds_hi" => self.bounds_hi = parse_as(line, key, value)?,
            "kernel_variance" => self.kernel_variance = parse_as(line, key, value)?,
            "kernel_lengthscale" => self.kernel_lengthscale = parse_as(line, key, value)?,
            "kernel_noise_variance" => {
                self.kernel_noise_variance = Some(parse_as(line, key, value)?)
            }
            "kernel_diag_jitter" => self.kernel_diag_jitter = parse_as(line, key, value)?,
            "constant_value" => self.constant_value = parse_as(line, key, value)?,
            "conditioning_decay" => self.conditioning_decay = parse_as(line, key, value)?,
            "jitter_base" => self.jitter_base = parse_as(line, key, value)?,
            "jitter_decay" => self.jitter_decay = parse_as(line, key, value)?,
            "threshold" => self.threshold = parse_as(line, key, value)?,
            "penalty_weight" => self.penalty_weight = parse_as(line, key, value)?,
            "sample_count" => self.sample_count = parse_as(line, key, value)?,
            "demand_sd" => self.demand_sd = parse_as(line, key, value)?,
            "candidates" => self.candidates = parse_as(line, key, value)?,
            "refine_top" => self.refine_top = parse_as(line, key, value)?,
            "refine_iters" => self.refine_iters = parse_as(line, key, value)?,
            "run_counts" => {
                let mut counts = Vec::new();
                for item in value.split(',') {
                    counts.push(parse_as::<usize>(line, key, item.trim())?);
                }
                self.run_counts = counts;
            }
            "tune_outer_iterations" => self.tune_outer_iterations = parse_as(line, key, value)?,
            "out_dir" => self.out_dir = PathBuf::from(value),
            "jobs" => self.jobs = Some(parse_as(line, key, value)?),
            _ => {
                return Err(ConfigError::UnknownKey {
                    line,
                    key: key.to_string(),
                })
            }
        }
        Ok(())
    }

    /// Canonical serialization; `parse(to_key_values(..))` is a fixed point.
    pub fn to_key_values(&self) -> String {
        let variants: Vec<String> = self.variants.iter().map(Variant::to_string).collect();
        let run_counts: Vec<String> = self.run_counts.iter().map(usize::to_string).collect();
        let mut out = String::new();
        let mut push = |key: &str, value: String| {
            out.push_str(key);
            out.push_str(" = ");
            out.push_str(&value);
            out.push('\n');
        };
        push("problem", self.problem.to_string());
        push("variants", variants.join(","));
        push("iterations", self.iterations.to_string());
        push("initial_design_size", self.initial_design_size.to_string());
        push("runs", self.runs.to_string());
        push("base_seed", self.base_seed.to_string());
        push("bounds_lo", self.bounds_lo.to_string());
        push("bounds_hi", self.bounds_hi.to_string());
        push("kernel_variance", self.kernel_variance.to_string());
        push("kernel_lengthscale", self.kernel_lengthscale.to_string());
        push("kernel_noise_variance", self.resolved_noise().to_string());
        push("kernel_diag_jitter", self.kernel_diag_jitter.to_string());
        push("constant_value", self.constant_value.to_string());
        push("conditioning_decay", self.conditioning_decay.to_string());
        push("jitter_base", self.jitter_base.to_string());
        push("jitter_decay", self.jitter_decay.to_string());
        push("threshold", self.threshold.to_string());
        push("penalty_weight", self.penalty_weight.to_string());
        push("sample_count", self.sample_count.to_string());
        push("demand_sd", self.demand_sd.to_string());
        push("candidates", self.candidates.to_string());
        push("refine_top", self.refine_top.to_string());
        push("refine_iters", self.refine_iters.to_string());
        push("run_counts", run_counts.join(","));
        push("tune_outer_iterations", self.tune_outer_iterations.to_string());
        push("out_dir", self.out_dir.display().to_string());
        if let Some(jobs) = self.jobs {
            push("jobs", jobs.to_string());
        }
        out
    }

    /// Observation noise with the per-problem default applied.
    pub fn resolved_noise(&self) -> f64 {
        self.kernel_noise_variance.unwrap_or(match self.problem {
            Problem::QuadraticTest => 1e-8,
            _ => 1e-2,
        })
    }

    pub fn objective_spec(&self) -> ObjectiveSpec {
        ObjectiveSpec {
            threshold: self.threshold,
            penalty_weight: self.penalty_weight,
            sample_count: self.sample_count,
            demand_sd: self.demand_sd,
            bounds: vec![(self.bounds_lo, self.bounds_hi)],
        }
    }

    /// Builds the optimizer configuration for one variant, surfacing any
    /// numeric-invariant violation as a semantic config error.
    pub fn optimization_config(&self, variant: Variant) -> Result<OptimizationConfig, ConfigError> {
        let semantic = |e: &dyn fmt::Display| ConfigError::Semantic(e.to_string());
        let kernel = KernelParams::new(
            self.kernel_variance,
            self.kernel_lengthscale,
            self.resolved_noise(),
            self.kernel_diag_jitter,
        )
        .map_err(|e| semantic(&e))?;
        let schedule = AdaptiveSchedule::new(
            self.constant_value,
            self.conditioning_decay,
            self.jitter_base,
            self.jitter_decay,
        )
        .map_err(|e| semantic(&e))?;
        let config = OptimizationConfig {
            bounds: vec![(self.bounds_lo, self.bounds_hi)],
            iterations: self.iterations,
            initial_design_size: self.initial_design_size,
            variant,
            mode: self.problem.mode(),
            kernel,
            schedule,
            seed: self.base_seed,
            search: SearchSettings {
                candidates: self.candidates,
                refine_top: self.refine_top,
                refine_iters: self.refine_iters,
            },
        };
        config.validate().map_err(|e| semantic(&e))?;
        Ok(config)
    }

    fn check_semantics(&self) -> Result<(), ConfigError> {
        if self.variants.is_empty() {
            return Err(ConfigError::Semantic(
                "at least one variant must be selected".into(),
            ));
        }
        if self.runs == 0 {
            return Err(ConfigError::Semantic("runs must be at least 1".into()));
        }
        if self.tune_outer_iterations == 0 {
            return Err(ConfigError::Semantic(
                "tune_outer_iterations must be at least 1".into(),
            ));
        }
        self.objective_spec()
            .validate()
            .map_err(|e| ConfigError::Semantic(e.to_string()))?;
        // Exercise every numeric invariant once up front.
        self.optimization_config(self.variants[0])?;
        Ok(())
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn defaults_parse_from_empty_text() {
        let cfg = ExperimentConfig::parse("").unwrap();
        assert_eq!(cfg, ExperimentConfig::default());
    }

    #[test]
    fn parses_overrides_and_comments() {
        let text = "\n# benchmark setup\nproblem = multi_combined\nvariants = original\n\
                    iterations = 10\nbase_seed = 7\npenalty_weight = 0.2\nrun_counts = 4, 6\n";
        let cfg = ExperimentConfig::parse(text).unwrap();
        assert_eq!(cfg.problem, Problem::MultiCombined);
        assert_eq!(cfg.variants, vec![Variant::Original]);
        assert_eq!(cfg.iterations, 10);
        assert_eq!(cfg.base_seed, 7);
        assert_eq!(cfg.penalty_weight, 0.2);
        assert_eq!(cfg.run_counts, vec![4, 6]);
    }

    #[test]
    fn unknown_key_is_a_hard_error_with_line() {
        let err = ExperimentConfig::parse("iterations = 5\nitserations = 6\n").unwrap_err();
        match err {
            ConfigError::UnknownKey { line, key } => {
                assert_eq!(line, 2);
                assert_eq!(key, "itserations");
            }
            other => panic!("unexpected error {other}"),
        }
    }

    #[test]
    fn duplicate_and_malformed_lines_error() {
        assert!(matches!(
            ExperimentConfig::parse("runs = 3\nruns = 4\n"),
            Err(ConfigError::DuplicateKey { line: 2, .. })
        ));
        assert!(matches!(
            ExperimentConfig::parse("just a line\n"),
            Err(ConfigError::Syntax { line: 1, .. })
        ));
        assert!(matches!(
            ExperimentConfig::parse("iterations = soon\n"),
            Err(ConfigError::BadValue { line: 1, .. })
        ));
    }

    #[test]
    fn semantic_validation_catches_degenerate_bounds() {
        let err = ExperimentConfig::parse("bounds_lo = 2\nbounds_hi = 2\n").unwrap_err();
        assert!(matches!(err, ConfigError::Semantic(_)));
        let err = ExperimentConfig::parse("variants = adaptive\nruns = 0\n").unwrap_err();
        assert!(matches!(err, ConfigError::Semantic(_)));
    }

    #[test]
    fn serialization_is_a_fixed_point() {
        for text in [
            "",
            "problem = quadratic_test\njobs = 2\n",
            "kernel_noise_variance = 0.5\nvariants = adaptive\n",
        ] {
            let once = ExperimentConfig::parse(text).unwrap().to_key_values();
            let twice = ExperimentConfig::parse(&once).unwrap().to_key_values();
            assert_eq!(once, twice);
        }
    }

    #[test]
    fn problem_noise_defaults() {
        let stochastic = ExperimentConfig::parse("problem = robust_1d\n").unwrap();
        assert_eq!(stochastic.resolved_noise(), 1e-2);
        let quadratic = ExperimentConfig::parse("problem = quadratic_test\n").unwrap();
        assert_eq!(quadratic.resolved_noise(), 1e-8);
        let explicit =
            ExperimentConfig::parse("problem = quadratic_test\nkernel_noise_variance = 0.3\n")
                .unwrap();
        assert_eq!(explicit.resolved_noise(), 0.3);
    }

    #[test]
    fn optimization_config_carries_variant_and_mode() {
        let cfg = ExperimentConfig::parse("problem = multi_decoupled\n").unwrap();
        let opt = cfg.optimization_config(Variant::Original).unwrap();
        assert_eq!(opt.variant, Variant::Original);
        assert_eq!(opt.mode, Mode::DecoupledMulti);
        assert_eq!(opt.bounds, vec![(-5.0, 5.0)]);
    }
}

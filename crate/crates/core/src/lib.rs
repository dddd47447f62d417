//! Adaptive Bayesian optimization over stochastic objectives.
//!
//! The library couples a Gaussian process surrogate (Matern 5/2 kernel,
//! exact inference via Cholesky factorization) with an expected-improvement
//! acquisition whose mean conditioning and jitter decay over iterations.
//! A robust penalized demand objective serves as the stochastic benchmark,
//! and the [`stats`] module provides the effect-size machinery (Welch's t,
//! Cohen's d, Hedges' g, Cliff's delta) used to compare optimizer variants.
//!
//! The `abopt` binary drives batch experiments and writes plot-ready CSV
//! traces plus JSON comparison reports; see the `bench` module.

pub mod acquisition;
pub mod adaptive;
pub mod bench;
pub mod gp;
pub mod objectives;
pub mod optimizer;
pub mod rng;
pub mod special;
pub mod stats;

pub use adaptive::{AdaptiveSchedule, Variant};
pub use gp::{Dataset, FittedGp, KernelParams};
pub use objectives::ObjectiveSpec;
pub use optimizer::{Mode, OptimizationConfig, RunTrace};
pub use rng::SeededRng;

//! Iteration-decayed mean conditioning and acquisition jitter.
//!
//! The adaptive optimizer variant shifts the surrogate's posterior mean by a
//! conditioning offset and biases expected improvement by a jitter term, both
//! decaying hyperbolically as `base / (1 + decay * iteration)`. The original
//! variant keeps the jitter fixed at its base value and applies no offset.

use std::fmt;
use std::str::FromStr;

use thiserror::Error;

#[derive(Debug, Error)]
pub enum ScheduleError {
    #[error("invalid schedule parameter {name}: {value}")]
    InvalidParameter { name: &'static str, value: f64 },
}

/// Which acquisition behavior an optimization run uses.
#[derive(Debug, Clone, Copy, PartialEq, Eq, serde::Serialize)]
#[serde(rename_all = "lowercase")]
pub enum Variant {
    /// Fixed jitter, no mean conditioning.
    Original,
    /// Decaying conditioning offset and decaying jitter.
    Adaptive,
}

impl fmt::Display for Variant {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Variant::Original => write!(f, "original"),
            Variant::Adaptive => write!(f, "adaptive"),
        }
    }
}

impl FromStr for Variant {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        match s {
            "original" => Ok(Variant::Original),
            "adaptive" => Ok(Variant::Adaptive),
            other => Err(format!("unknown variant `{other}` (expected original|adaptive)")),
        }
    }
}

/// Decay schedule for the conditioning offset and the acquisition jitter.
///
/// A decay of zero freezes the corresponding quantity at its base value,
/// which is how the adaptive variant degenerates to the original one.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct AdaptiveSchedule {
    constant_value: f64,
    conditioning_decay: f64,
    jitter_base: f64,
    jitter_decay: f64,
}

impl AdaptiveSchedule {
    pub fn new(
        constant_value: f64,
        conditioning_decay: f64,
        jitter_base: f64,
        jitter_decay: f64,
    ) -> Result<Self, ScheduleError> {
        let check = |name: &'static str, value: f64, strict: bool| {
            if !value.is_finite() || value < 0.0 || (strict && value == 0.0) {
                Err(ScheduleError::InvalidParameter { name, value })
            } else {
                Ok(())
            }
        };
        check("constant_value", constant_value, false)?;
        check("conditioning_decay", conditioning_decay, false)?;
        check("jitter_base", jitter_base, true)?;
        check("jitter_decay", jitter_decay, false)?;
        Ok(Self {
            constant_value,
            conditioning_decay,
            jitter_base,
            jitter_decay,
        })
    }

    pub fn constant_value(&self) -> f64 {
        self.constant_value
    }

    pub fn conditioning_decay(&self) -> f64 {
        self.conditioning_decay
    }

    pub fn jitter_base(&self) -> f64 {
        self.jitter_base
    }

    pub fn jitter_decay(&self) -> f64 {
        self.jitter_decay
    }

    /// Mean-conditioning offset at the given iteration:
    /// `constant_value / (1 + conditioning_decay * iteration)`.
    pub fn conditioning_offset(&self, iteration: usize) -> f64 {
        self.constant_value / (1.0 + self.conditioning_decay * iteration as f64)
    }

    /// Acquisition jitter at the given iteration:
    /// `jitter_base / (1 + jitter_decay * iteration)`.
    pub fn acquisition_jitter(&self, iteration: usize) -> f64 {
        self.jitter_base / (1.0 + self.jitter_decay * iteration as f64)
    }
}

impl Default for AdaptiveSchedule {
    fn default() -> Self {
        Self {
            constant_value: 0.1,
            conditioning_decay: 0.1,
            jitter_base: 0.01,
            jitter_decay: 0.1,
        }
    }
}

/// Conditioning offset and acquisition jitter in effect at an iteration.
///
/// The original variant applies no offset and keeps the jitter pinned at the
/// schedule's base value; the adaptive variant decays both.
pub fn variant_controls(
    variant: Variant,
    schedule: &AdaptiveSchedule,
    iteration: usize,
) -> (f64, f64) {
    match variant {
        Variant::Original => (0.0, schedule.jitter_base()),
        Variant::Adaptive => (
            schedule.conditioning_offset(iteration),
            schedule.acquisition_jitter(iteration),
        ),
    }
}

/// Shifts a posterior mean by the conditioning offset.
pub fn condition_mean(mu: f64, offset: f64) -> f64 {
    mu + offset
}

/// Combined objective value reported in traces: conditioned mean plus the
/// observed objective value at the same point.
pub fn combined_value(conditioned_mean: f64, observed: f64) -> f64 {
    conditioned_mean + observed
}

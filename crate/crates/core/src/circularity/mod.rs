//! Instantaneous circularity of a material network.
//!
//! `λ(N; t) = -(m_fb(t) + Δ·ṁ_fc(t))`, where `m_fb` is the net finite-time
//! sustainable mass moved in batches up to `t` and `ṁ_fc` the net
//! finite-time sustainable continuous flow at `t`. `λ = 0` is maximal
//! circularity.
//!
//! Three routes are provided: a generic ledger replay ([`CircularityLedger`]),
//! the closed-form solid-waste scenario ([`SolidScenario`]) and the net-zero
//! emitter/remover balance ([`lambda_netzero`]).

mod io;
mod ledger;
mod solid;
mod sum;

pub use io::{
    parse_event_log, parse_flow_file, parse_trajectory_flow, write_event_log, write_flow_file,
    write_lambda_csv, FormatError,
};
pub use ledger::{endpoint_multiplicity, lambda_from_ledger, CircularityLedger};
pub use solid::{lambda_solid_scenario, mass_split, EventTimes, SolidScenario};
pub use sum::ExactSum;

use thiserror::Error;

/// A batch of mass moved between two compartments (identified by `k`).
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct FlowEvent {
    /// Seconds.
    pub time: f64,
    /// Kilograms, strictly positive.
    pub mass: f64,
    pub from: u32,
    pub to: u32,
}

impl FlowEvent {
    pub fn new(time: f64, mass: f64, from: u32, to: u32) -> Result<Self, CircularityError> {
        let event = Self { time, mass, from, to };
        event.check()?;
        Ok(event)
    }

    fn check(&self) -> Result<(), CircularityError> {
        if !(self.mass.is_finite() && self.mass > 0.0) {
            return Err(CircularityError::InvalidEvent(format!(
                "mass must be finite and > 0 (got {})",
                self.mass
            )));
        }
        if !(self.time.is_finite() && self.time >= 0.0) {
            return Err(CircularityError::InvalidEvent(format!(
                "time must be finite and >= 0 (got {})",
                self.time
            )));
        }
        Ok(())
    }
}

/// A continuous flow sampled as `(time s, rate kg/s)` pairs.
///
/// Between samples the rate is interpolated linearly; outside the sampled
/// span it is zero.
#[derive(Debug, Clone, PartialEq)]
pub struct ContinuousFlow {
    pub from: u32,
    pub to: u32,
    samples: Vec<(f64, f64)>,
}

impl ContinuousFlow {
    pub fn new(from: u32, to: u32, samples: Vec<(f64, f64)>) -> Result<Self, CircularityError> {
        if samples.is_empty() {
            return Err(CircularityError::InvalidFlow("series is empty".into()));
        }
        for (n, &(t, r)) in samples.iter().enumerate() {
            if !t.is_finite() || !r.is_finite() {
                return Err(CircularityError::InvalidFlow(format!(
                    "sample {n} is not finite ({t}, {r})"
                )));
            }
            if n > 0 && t <= samples[n - 1].0 {
                return Err(CircularityError::InvalidFlow(format!(
                    "sample times must be strictly increasing (sample {n} at {t})"
                )));
            }
        }
        Ok(Self { from, to, samples })
    }

    /// A flow that is `rate` everywhere on `[start, end]`.
    pub fn constant(from: u32, to: u32, rate: f64, start: f64, end: f64) -> Result<Self, CircularityError> {
        Self::new(from, to, vec![(start, rate), (end, rate)])
    }

    pub fn samples(&self) -> &[(f64, f64)] {
        &self.samples
    }

    pub fn rate_at(&self, t: f64) -> f64 {
        let s = &self.samples;
        let (first, last) = (s[0], s[s.len() - 1]);
        if t < first.0 || t > last.0 {
            return 0.0;
        }
        // first index with time > t
        let upper = s.partition_point(|&(ts, _)| ts <= t);
        let (t0, r0) = s[upper - 1];
        if t == t0 || upper == s.len() {
            return r0;
        }
        let (t1, r1) = s[upper];
        let w = (t - t0) / (t1 - t0);
        r0 + w * (r1 - r0)
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct CircularityConfig {
    /// Seconds; converts continuous flow into mass. Keep it fixed across any
    /// set of values being compared.
    pub delta: f64,
}

impl CircularityConfig {
    pub fn new(delta: f64) -> Result<Self, CircularityError> {
        if !(delta.is_finite() && delta > 0.0) {
            return Err(CircularityError::InvalidDelta(delta));
        }
        Ok(Self { delta })
    }
}

impl Default for CircularityConfig {
    fn default() -> Self {
        Self { delta: 1.0 }
    }
}

#[derive(Debug, Error, PartialEq)]
pub enum CircularityError {
    #[error("invalid network: {0}")]
    InvalidNetwork(String),
    #[error("unknown compartment k={0}")]
    UnknownCompartment(u32),
    #[error("invalid flow event: {0}")]
    InvalidEvent(String),
    #[error("invalid continuous flow: {0}")]
    InvalidFlow(String),
    #[error("delta must be finite and > 0 (got {0})")]
    InvalidDelta(f64),
    #[error("invalid scenario: {0}")]
    InvalidScenario(String),
    #[error("time must be finite and >= 0 (got {0})")]
    InvalidTime(f64),
}

/// `λ = -Δ·(ṁ_12(t) - ṁ_23(t))` for one emitter and one remover. Zero when
/// emission and removal balance. The value is signed and not clamped: removal
/// exceeding emission gives `λ > 0`.
pub fn lambda_netzero(
    emitter: &ContinuousFlow,
    remover: &ContinuousFlow,
    t: f64,
    cfg: &CircularityConfig,
) -> f64 {
    -cfg.delta * (emitter.rate_at(t) - remover.rate_at(t)) + 0.0
}

//! The environment contract, fixed-step integration, step-size verification
//! and the compartment environments built on them.
//!
//! Every environment is an [`OdeEnv`] over a [`Plant`]: the plant supplies the
//! vector field, reward, reset distribution and spaces; `OdeEnv` owns the
//! episode bookkeeping, action clipping and integration.

pub mod algae;
mod config;
pub mod incinerator;
mod integrate;
mod reference;
mod rollout;
pub mod truck;
mod verify;

pub use config::{EnvConfig, EnvInfo, VerifyEnvError, ENV_INFOS};
pub use integrate::{
    integrate_step, DynamicsError, FnSystem, IntegrationError, Integrator, IntegratorConfig, Method,
    OdeSystem,
};
pub use reference::{Dopri5, ReferenceError};
pub use verify::{verify_step_size, StateDeviation, VerificationError, VerificationReport};
pub use rollout::{run_episode, write_trajectory_csv, EpisodeEnd, Trajectory};

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::Serialize;
use std::collections::BTreeMap;
use thiserror::Error;

/// An axis-aligned box `low ≤ v ≤ high`. Bounds may be infinite.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct BoxSpace {
    low: Vec<f64>,
    high: Vec<f64>,
}

impl BoxSpace {
    pub fn new(low: Vec<f64>, high: Vec<f64>) -> Result<Self, EnvError> {
        if low.is_empty() || low.len() != high.len() {
            return Err(EnvError::InvalidParams(format!(
                "box bounds must be non-empty and of equal length ({} vs {})",
                low.len(),
                high.len()
            )));
        }
        for (i, (l, h)) in low.iter().zip(&high).enumerate() {
            if l.is_nan() || h.is_nan() || l > h {
                return Err(EnvError::InvalidParams(format!("box dimension {i}: low {l} > high {h}")));
            }
        }
        Ok(Self { low, high })
    }

    pub fn unbounded(dim: usize) -> Self {
        Self { low: vec![f64::NEG_INFINITY; dim], high: vec![f64::INFINITY; dim] }
    }

    pub fn dim(&self) -> usize {
        self.low.len()
    }

    pub fn low(&self) -> &[f64] {
        &self.low
    }

    pub fn high(&self) -> &[f64] {
        &self.high
    }

    pub fn contains(&self, v: &[f64]) -> bool {
        v.len() == self.dim() && v.iter().zip(&self.low).zip(&self.high).all(|((x, l), h)| l <= x && x <= h)
    }

    /// Clips `v` in place; returns whether any component moved.
    pub fn clip(&self, v: &mut [f64]) -> bool {
        let mut moved = false;
        for ((x, l), h) in v.iter_mut().zip(&self.low).zip(&self.high) {
            let c = x.clamp(*l, *h);
            moved |= c != *x;
            *x = c;
        }
        moved
    }

    /// Midpoint of each bounded dimension, 0 where a bound is infinite.
    pub fn center(&self) -> Vec<f64> {
        self.low
            .iter()
            .zip(&self.high)
            .map(|(l, h)| if l.is_finite() && h.is_finite() { 0.5 * (l + h) } else { 0.0 })
            .collect()
    }

    /// Half-width of each bounded dimension, 1 where a bound is infinite.
    pub fn half_range(&self) -> Vec<f64> {
        self.low
            .iter()
            .zip(&self.high)
            .map(|(l, h)| if l.is_finite() && h.is_finite() { 0.5 * (h - l) } else { 1.0 })
            .collect()
    }
}

#[derive(Debug, Clone, PartialEq, Default)]
pub struct StepInfo {
    /// Raw post-step state.
    pub state: Vec<f64>,
    /// Action actually applied, after clipping.
    pub action: Vec<f64>,
    pub action_clipped: bool,
    /// Environment-specific values such as `m_dot_23` or `dynamics_error`.
    pub extras: BTreeMap<String, f64>,
}

#[derive(Debug, Clone, PartialEq)]
pub struct StepResult {
    pub observation: Vec<f64>,
    pub reward: f64,
    pub terminated: bool,
    pub truncated: bool,
    pub info: StepInfo,
}

#[derive(Debug, Clone, PartialEq, Error)]
pub enum EnvError {
    #[error("step called before reset")]
    NotReset,
    #[error("step called after the episode ended; call reset first")]
    EpisodeOver,
    #[error("action has dimension {got}, expected {expected}")]
    ActionDimension { expected: usize, got: usize },
    #[error("action contains a non-finite value")]
    NonFiniteAction,
    #[error("invalid parameters: {0}")]
    InvalidParams(String),
}

/// Names used for trajectory export and reporting.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct Columns {
    pub state: &'static [&'static str],
    pub action: &'static [&'static str],
    pub reward: &'static str,
    /// `info.extras` keys exported after the reward.
    pub extras: &'static [&'static str],
}

/// Gym-style episodic environment.
pub trait Environment: Send {
    fn name(&self) -> &'static str;

    fn reset(&mut self, seed: Option<u64>) -> Vec<f64>;

    fn step(&mut self, action: &[f64]) -> Result<StepResult, EnvError>;

    fn observation_space(&self) -> &BoxSpace;

    fn action_space(&self) -> &BoxSpace;

    fn max_episode_steps(&self) -> usize;

    fn columns(&self) -> Columns;

    /// Seconds per control step, used for trajectory time stamps.
    fn step_seconds(&self) -> f64;
}

/// The physics of one environment.
pub trait Plant: OdeSystem + Send + Sync {
    const NAME: &'static str;

    fn integrator(&self) -> IntegratorConfig;

    fn horizon(&self) -> usize;

    fn action_space(&self) -> BoxSpace;

    fn observation_space(&self) -> BoxSpace {
        BoxSpace::unbounded(self.dim())
    }

    fn columns(&self) -> Columns;

    fn initial_state(&self, rng: &mut ChaCha8Rng) -> Vec<f64>;

    /// Reward for applying `u` from the pre-step state `x`. Plants may record
    /// step quantities in `extras`.
    fn reward(&self, x: &[f64], u: &[f64], extras: &mut BTreeMap<String, f64>) -> f64;

    /// Adjusts the post-step state in place (projections and the like).
    fn post_step(&self, _x: &mut [f64], _extras: &mut BTreeMap<String, f64>) {}

    /// Seconds per unit of the plant's time variable.
    fn time_unit_seconds(&self) -> f64 {
        1.0
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
enum Phase {
    Fresh,
    Running,
    Done,
}

/// Episodic wrapper turning a [`Plant`] into an [`Environment`].
#[derive(Debug, Clone)]
pub struct OdeEnv<P: Plant> {
    plant: P,
    integrator: Integrator,
    action_space: BoxSpace,
    observation_space: BoxSpace,
    state: Vec<f64>,
    t: f64,
    steps: usize,
    phase: Phase,
}

impl<P: Plant> OdeEnv<P> {
    pub fn new(plant: P) -> Self {
        let integrator = Integrator::new(plant.integrator(), plant.dim());
        Self {
            action_space: plant.action_space(),
            observation_space: plant.observation_space(),
            state: vec![0.0; plant.dim()],
            integrator,
            plant,
            t: 0.0,
            steps: 0,
            phase: Phase::Fresh,
        }
    }

    pub fn plant(&self) -> &P {
        &self.plant
    }

    pub fn state(&self) -> &[f64] {
        &self.state
    }

    /// Starts an episode from a given state instead of the reset distribution.
    pub fn reset_to(&mut self, state: &[f64]) -> Vec<f64> {
        assert_eq!(state.len(), self.plant.dim(), "state dimension");
        self.state.copy_from_slice(state);
        self.t = 0.0;
        self.steps = 0;
        self.phase = Phase::Running;
        self.observe()
    }

    fn observe(&self) -> Vec<f64> {
        let mut obs = self.state.clone();
        self.observation_space.clip(&mut obs);
        obs
    }
}

impl<P: Plant> Environment for OdeEnv<P> {
    fn name(&self) -> &'static str {
        P::NAME
    }

    fn reset(&mut self, seed: Option<u64>) -> Vec<f64> {
        let mut rng = match seed {
            Some(s) => ChaCha8Rng::seed_from_u64(s),
            None => ChaCha8Rng::seed_from_u64(rand::random()),
        };
        let x0 = self.plant.initial_state(&mut rng);
        self.reset_to(&x0)
    }

    fn step(&mut self, action: &[f64]) -> Result<StepResult, EnvError> {
        match self.phase {
            Phase::Fresh => return Err(EnvError::NotReset),
            Phase::Done => return Err(EnvError::EpisodeOver),
            Phase::Running => {}
        }
        let dim = self.action_space.dim();
        if action.len() != dim {
            return Err(EnvError::ActionDimension { expected: dim, got: action.len() });
        }
        if action.iter().any(|a| !a.is_finite()) {
            return Err(EnvError::NonFiniteAction);
        }
        let mut u = action.to_vec();
        let action_clipped = self.action_space.clip(&mut u);

        let mut extras = BTreeMap::new();
        let reward = self.plant.reward(&self.state, &u, &mut extras);

        let mut next = self.state.clone();
        let mut terminated = false;
        match self.integrator.advance(&self.plant, &mut next, &u, self.t) {
            Ok(()) => {
                self.plant.post_step(&mut next, &mut extras);
                self.state = next;
            }
            Err(IntegrationError::Dynamics(_)) => {
                extras.insert("dynamics_error".into(), 1.0);
                terminated = true;
            }
            Err(_) => {
                extras.insert("divergence".into(), 1.0);
                terminated = true;
            }
        }
        self.steps += 1;
        self.t = self.steps as f64 * self.integrator.config().dt;
        let truncated = !terminated && self.steps >= self.plant.horizon();
        if terminated || truncated {
            self.phase = Phase::Done;
        }
        Ok(StepResult {
            observation: self.observe(),
            reward,
            terminated,
            truncated,
            info: StepInfo { state: self.state.clone(), action: u, action_clipped, extras },
        })
    }

    fn observation_space(&self) -> &BoxSpace {
        &self.observation_space
    }

    fn action_space(&self) -> &BoxSpace {
        &self.action_space
    }

    fn max_episode_steps(&self) -> usize {
        self.plant.horizon()
    }

    fn columns(&self) -> Columns {
        self.plant.columns()
    }

    fn step_seconds(&self) -> f64 {
        self.integrator.config().dt * self.plant.time_unit_seconds()
    }
}

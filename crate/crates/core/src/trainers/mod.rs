//! Derivative-free training of linear policies and the start/end evaluation
//! protocol.
//!
//! All trainers share one skeleton: the initial policy is evaluated (`r_s`),
//! each iteration runs a batch of independent rollouts in parallel against a
//! frozen copy of the observation normalizer, the statistics gathered by
//! those rollouts are merged back in rollout order, and the final policy is
//! evaluated on the same episode seeds (`r_e`). Seeds are derived per
//! iteration and per rollout, so the history does not depend on the number
//! of worker threads.

mod ars;
mod cem;
mod eval;
mod policy;
mod random;
pub mod seed;

pub use ars::{ars_train, ars_weight_update, ArsConfig};
pub use cem::{cem_train, CemConfig};
pub use eval::{
    episode_return, eval_episode_seed, evaluate, evaluate_returns, evaluate_trajectories, zeta, EvalReport,
};
pub use policy::{linear, load_policy, save_policy, ActionMap, LinearPolicy, Normalizer, PolicyError, PolicyRecord, Whitener, MIN_STD};
pub use random::{random_train, RandomConfig};

use crate::env::{EnvConfig, EnvError};
use rayon::prelude::*;
use serde::{Deserialize, Serialize};
use std::fmt::Write as _;
use std::time::Instant;
use thiserror::Error;

#[derive(Debug, Clone, PartialEq, Error)]
pub enum TrainError {
    #[error(transparent)]
    Env(#[from] EnvError),
    #[error("invalid trainer configuration: {0}")]
    InvalidConfig(String),
    #[error("policy weights became non-finite at iteration {iteration}")]
    Divergence { iteration: usize, history: Vec<HistoryRow> },
    #[error("cannot start worker pool: {0}")]
    Pool(String),
}

/// Trainer selection plus hyperparameters, tagged by `algorithm`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "algorithm", rename_all = "kebab-case")]
pub enum TrainerConfig {
    Ars(ArsConfig),
    Cem(CemConfig),
    Random(RandomConfig),
}

impl TrainerConfig {
    pub fn algorithm(&self) -> &'static str {
        match self {
            Self::Ars(_) => "ars",
            Self::Cem(_) => "cem",
            Self::Random(_) => "random",
        }
    }

    pub fn iterations(&self) -> usize {
        match self {
            Self::Ars(c) => c.iterations,
            Self::Cem(c) => c.iterations,
            Self::Random(c) => c.iterations,
        }
    }

    pub fn eval_episodes(&self) -> usize {
        match self {
            Self::Ars(c) => c.eval_episodes,
            Self::Cem(c) => c.eval_episodes,
            Self::Random(c) => c.eval_episodes,
        }
    }
}

/// Execution settings that do not affect results.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct TrainOptions {
    pub workers: usize,
    /// Fill the history `wall_time` column. Off by default so that histories
    /// of identical runs compare byte for byte.
    pub log_wall_time: bool,
}

impl Default for TrainOptions {
    fn default() -> Self {
        Self { workers: 1, log_wall_time: false }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct HistoryRow {
    /// 1-based iteration number.
    pub iteration: usize,
    /// Mean return of the iteration's training rollouts.
    pub mean_return: f64,
    /// Mean evaluation return, on evaluation iterations.
    pub eval_return: Option<f64>,
    /// Seconds since the start of training, when logged.
    pub wall_time: Option<f64>,
}

#[derive(Debug, Clone, PartialEq)]
pub struct TrainRun {
    pub env: EnvConfig,
    pub trainer: TrainerConfig,
    pub seed: u64,
    pub history: Vec<HistoryRow>,
    pub policy: LinearPolicy,
    pub report: EvalReport,
}

/// Runs the configured trainer from master seed `seed`.
pub fn train(env: &EnvConfig, trainer: &TrainerConfig, seed: u64, opts: &TrainOptions) -> Result<TrainRun, TrainError> {
    match trainer {
        TrainerConfig::Ars(c) => ars_train(env, c, seed, opts),
        TrainerConfig::Cem(c) => cem_train(env, c, seed, opts),
        TrainerConfig::Random(c) => random_train(env, c, seed, opts),
    }
}

/// `iteration,mean_return,eval_return,wall_time` with empty cells for
/// missing values, preceded by `# ` comment lines.
pub fn write_history_csv(rows: &[HistoryRow], comments: &[String]) -> String {
    let mut out = String::new();
    for c in comments {
        for l in c.lines() {
            let _ = writeln!(out, "# {l}");
        }
    }
    out.push_str("iteration,mean_return,eval_return,wall_time\n");
    let opt = |v: Option<f64>| v.map(|x| x.to_string()).unwrap_or_default();
    for r in rows {
        let _ = writeln!(out, "{},{},{},{}", r.iteration, r.mean_return, opt(r.eval_return), opt(r.wall_time));
    }
    out
}

/// One rollout request: weights and the reset seed.
pub(crate) struct Job {
    pub weights: Vec<f64>,
    pub seed: u64,
}

/// Shared machinery of the trainers.
pub(crate) struct Runner<'a> {
    env: &'a EnvConfig,
    pool: rayon::ThreadPool,
    pub map: ActionMap,
    pub action_dim: usize,
    pub obs_dim: usize,
    eval_seed: u64,
    eval_episodes: usize,
    start: Instant,
    log_wall_time: bool,
}

impl<'a> Runner<'a> {
    pub fn new(env: &'a EnvConfig, eval_episodes: usize, seed: u64, opts: &TrainOptions) -> Result<Self, TrainError> {
        if opts.workers == 0 {
            return Err(TrainError::InvalidConfig("workers must be >= 1".into()));
        }
        if eval_episodes == 0 {
            return Err(TrainError::InvalidConfig("eval_episodes must be >= 1".into()));
        }
        let probe = env.build()?;
        let pool = rayon::ThreadPoolBuilder::new()
            .num_threads(opts.workers)
            .build()
            .map_err(|e| TrainError::Pool(e.to_string()))?;
        Ok(Self {
            env,
            pool,
            map: ActionMap::new(probe.action_space()),
            action_dim: probe.action_space().dim(),
            obs_dim: probe.observation_space().dim(),
            eval_seed: seed::derive_seed(seed, seed::stream::EVALUATION, 0),
            eval_episodes,
            start: Instant::now(),
            log_wall_time: opts.log_wall_time,
        })
    }

    /// Runs every job against the frozen `whitener`; returns per-job returns
    /// and the observation statistics each job gathered, in job order.
    pub fn rollouts(&self, jobs: &[Job], whitener: &Whitener) -> Result<Vec<(f64, Normalizer)>, TrainError> {
        self.pool.install(|| {
            jobs.par_iter()
                .map(|job| {
                    let mut env = self.env.build()?;
                    let mut stats = Normalizer::new(self.obs_dim);
                    let r = episode_return(env.as_mut(), &job.weights, whitener, &self.map, job.seed, Some(&mut stats))?;
                    Ok((r, stats))
                })
                .collect()
        })
    }

    /// Mean return over the fixed evaluation episodes.
    pub fn evaluate(&self, policy: &LinearPolicy) -> Result<f64, TrainError> {
        let whitener = policy.normalizer.whitener();
        let returns: Vec<f64> = self.pool.install(|| {
            (0..self.eval_episodes)
                .into_par_iter()
                .map(|k| {
                    let mut env = self.env.build()?;
                    let seed = eval_episode_seed(self.eval_seed, k);
                    Ok(episode_return(env.as_mut(), policy.weights(), &whitener, &self.map, seed, None)?)
                })
                .collect::<Result<_, TrainError>>()
        })?;
        Ok(returns.iter().sum::<f64>() / self.eval_episodes as f64)
    }

    pub fn row(&self, iteration: usize, mean_return: f64, eval_return: Option<f64>) -> HistoryRow {
        HistoryRow {
            iteration,
            mean_return,
            eval_return,
            wall_time: self.log_wall_time.then(|| self.start.elapsed().as_secs_f64()),
        }
    }

    pub fn elapsed(&self) -> f64 {
        self.start.elapsed().as_secs_f64()
    }
}

pub(crate) fn mean(values: &[f64]) -> f64 {
    values.iter().sum::<f64>() / values.len() as f64
}

/// Population standard deviation, two-pass.
pub(crate) fn population_std(values: &[f64]) -> f64 {
    let m = mean(values);
    (values.iter().map(|v| (v - m) * (v - m)).sum::<f64>() / values.len() as f64).sqrt()
}

pub(crate) fn is_eval_iteration(iteration: usize, eval_every: usize, iterations: usize) -> bool {
    iteration.is_multiple_of(eval_every) || iteration == iterations
}

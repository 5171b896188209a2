//! Pure random search: independent Gaussian weight samples, keeping the best.

use super::eval::EvalReport;
use super::seed::{derive_seed, stream};
use super::{is_eval_iteration, mean, Job, LinearPolicy, Runner, TrainError, TrainOptions, TrainRun, TrainerConfig};
use crate::env::EnvConfig;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, StandardNormal};
use serde::{Deserialize, Serialize};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct RandomConfig {
    /// Candidates drawn per iteration.
    pub samples: usize,
    pub init_std: f64,
    pub iterations: usize,
    pub eval_every: usize,
    pub eval_episodes: usize,
}

impl Default for RandomConfig {
    fn default() -> Self {
        Self { samples: 16, init_std: 0.5, iterations: 50, eval_every: 10, eval_episodes: 100 }
    }
}

impl RandomConfig {
    pub fn validate(&self) -> Result<(), TrainError> {
        let bad = |m: &str| Err(TrainError::InvalidConfig(m.into()));
        if self.samples == 0 {
            return bad("samples must be >= 1");
        }
        if !(self.init_std.is_finite() && self.init_std >= 0.0) {
            return bad("init_std must be finite and >= 0");
        }
        if self.eval_every == 0 || self.eval_episodes == 0 {
            return bad("eval_every and eval_episodes must be >= 1");
        }
        Ok(())
    }
}

pub fn random_train(env: &EnvConfig, cfg: &RandomConfig, seed: u64, opts: &TrainOptions) -> Result<TrainRun, TrainError> {
    cfg.validate()?;
    let runner = Runner::new(env, cfg.eval_episodes, seed, opts)?;
    let mut policy = LinearPolicy::zeros(runner.action_dim, runner.obs_dim);
    let r_s = runner.evaluate(&policy)?;
    let dim = policy.weights().len();
    let mut best: Option<(f64, LinearPolicy)> = None;
    let mut history = Vec::with_capacity(cfg.iterations);

    for it in 0..cfg.iterations {
        let it_seed = derive_seed(seed, stream::ITERATION, it as u64);
        let reset = derive_seed(it_seed, stream::RESET, 0);
        let jobs: Vec<Job> = (0..cfg.samples)
            .map(|k| {
                let mut rng = ChaCha8Rng::seed_from_u64(derive_seed(it_seed, stream::SAMPLE, k as u64));
                let weights = (0..dim)
                    .map(|_| {
                        let e: f64 = StandardNormal.sample(&mut rng);
                        cfg.init_std * e
                    })
                    .collect();
                Job { weights, seed: reset }
            })
            .collect();
        let snapshot = policy.normalizer.clone();
        let results = runner.rollouts(&jobs, &snapshot.whitener())?;
        let returns: Vec<f64> = results.iter().map(|(r, _)| *r).collect();
        for (job, r) in jobs.iter().zip(&returns) {
            if best.as_ref().is_none_or(|(b, _)| *r > *b) {
                if let Ok(p) = LinearPolicy::from_parts(runner.action_dim, runner.obs_dim, job.weights.clone(), snapshot.clone()) {
                    best = Some((*r, p));
                }
            }
        }
        for (_, stats) in &results {
            policy.normalizer.merge(stats);
        }

        let iteration = it + 1;
        let eval = if is_eval_iteration(iteration, cfg.eval_every, cfg.iterations) {
            Some(runner.evaluate(best.as_ref().map_or(&policy, |(_, p)| p))?)
        } else {
            None
        };
        history.push(runner.row(iteration, mean(&returns), eval));
    }

    let (policy, r_e) = match best {
        Some((_, p)) => (p, history.last().and_then(|row| row.eval_return).expect("last iteration is always evaluated")),
        None => (policy, r_s),
    };
    Ok(TrainRun {
        env: env.clone(),
        trainer: TrainerConfig::Random(cfg.clone()),
        seed,
        history,
        policy,
        report: EvalReport::new(r_s, r_e, cfg.eval_episodes, runner.elapsed()),
    })
}

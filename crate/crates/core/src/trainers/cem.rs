//! Cross-entropy method over linear policy weights with a diagonal Gaussian
//! search distribution.

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
pub struct CemConfig {
    pub population: usize,
    /// Fraction of the population refit to, in (0, 1].
    pub elite_frac: f64,
    pub init_std: f64,
    /// Added to every refit standard deviation.
    pub extra_std: f64,
    pub iterations: usize,
    pub eval_every: usize,
    pub eval_episodes: usize,
}

impl Default for CemConfig {
    fn default() -> Self {
        Self {
            population: 32,
            elite_frac: 0.25,
            init_std: 0.5,
            extra_std: 0.0,
            iterations: 100,
            eval_every: 10,
            eval_episodes: 100,
        }
    }
}

impl CemConfig {
    pub fn n_elite(&self) -> usize {
        ((self.elite_frac * self.population as f64).round() as usize).clamp(1, self.population.max(1))
    }

    pub fn validate(&self) -> Result<(), TrainError> {
        let bad = |m: &str| Err(TrainError::InvalidConfig(m.into()));
        if self.population == 0 {
            return bad("population must be >= 1");
        }
        if !(self.elite_frac > 0.0 && self.elite_frac <= 1.0) {
            return bad("elite_frac must lie in (0, 1]");
        }
        if !(self.init_std.is_finite() && self.init_std >= 0.0) || !(self.extra_std.is_finite() && self.extra_std >= 0.0) {
            return bad("init_std and extra_std must be finite and >= 0");
        }
        if self.eval_every == 0 || self.eval_episodes == 0 {
            return bad("eval_every and eval_episodes must be >= 1");
        }
        Ok(())
    }
}

/// Mean and population standard deviation of the elite samples, per weight.
pub(crate) fn refit(samples: &[Vec<f64>], returns: &[f64], n_elite: usize) -> (Vec<f64>, Vec<f64>) {
    let mut order: Vec<usize> = (0..samples.len()).collect();
    order.sort_by(|&a, &b| returns[b].total_cmp(&returns[a]));
    let elites = &order[..n_elite];
    let dim = samples[0].len();
    let n = n_elite as f64;
    let mu: Vec<f64> = (0..dim).map(|j| elites.iter().map(|&k| samples[k][j]).sum::<f64>() / n).collect();
    let sd = (0..dim)
        .map(|j| (elites.iter().map(|&k| (samples[k][j] - mu[j]).powi(2)).sum::<f64>() / n).sqrt())
        .collect();
    (mu, sd)
}

pub fn cem_train(env: &EnvConfig, cfg: &CemConfig, seed: u64, opts: &TrainOptions) -> Result<TrainRun, TrainError> {
    cfg.validate()?;
    let runner = Runner::new(env, cfg.eval_episodes, seed, opts)?;
    let mut policy = LinearPolicy::zeros(runner.action_dim, runner.obs_dim);
    let r_s = runner.evaluate(&policy)?;
    let dim = policy.weights().len();
    let mut mu = vec![0.0; dim];
    let mut sd = vec![cfg.init_std; dim];
    let mut best: Option<(f64, LinearPolicy)> = None;
    let mut history = Vec::with_capacity(cfg.iterations);

    for it in 0..cfg.iterations {
        let it_seed = derive_seed(seed, stream::ITERATION, it as u64);
        // one reset seed per iteration so candidates are ranked on the same start
        let reset = derive_seed(it_seed, stream::RESET, 0);
        let samples: Vec<Vec<f64>> = (0..cfg.population)
            .map(|k| {
                let mut rng = ChaCha8Rng::seed_from_u64(derive_seed(it_seed, stream::SAMPLE, k as u64));
                (0..dim)
                    .map(|j| {
                        let e: f64 = StandardNormal.sample(&mut rng);
                        mu[j] + sd[j] * e
                    })
                    .collect()
            })
            .collect();
        let jobs: Vec<Job> = samples.iter().map(|w| Job { weights: w.clone(), seed: reset }).collect();
        let snapshot = policy.normalizer.clone();
        let results = runner.rollouts(&jobs, &snapshot.whitener())?;
        let returns: Vec<f64> = results.iter().map(|(r, _)| *r).collect();

        for (k, r) in returns.iter().enumerate() {
            if best.as_ref().is_none_or(|(b, _)| *r > *b) {
                let candidate = LinearPolicy::from_parts(runner.action_dim, runner.obs_dim, samples[k].clone(), snapshot.clone());
                if let Ok(p) = candidate {
                    best = Some((*r, p));
                }
            }
        }
        for (_, stats) in &results {
            policy.normalizer.merge(stats);
        }
        let (m, s) = refit(&samples, &returns, cfg.n_elite());
        mu = m;
        sd = s.into_iter().map(|v| v + cfg.extra_std).collect();

        let iteration = it + 1;
        let row_mean = mean(&returns);
        if mu.iter().chain(&sd).any(|v| !v.is_finite()) {
            history.push(runner.row(iteration, row_mean, None));
            return Err(TrainError::Divergence { iteration, history });
        }
        let eval = if is_eval_iteration(iteration, cfg.eval_every, cfg.iterations) {
            let current = best.as_ref().map_or(&policy, |(_, p)| p);
            Some(runner.evaluate(current)?)
        } else {
            None
        };
        history.push(runner.row(iteration, row_mean, eval));
    }

    let (policy, r_e) = match best {
        Some((_, p)) => {
            let r_e = history.last().and_then(|row| row.eval_return).expect("last iteration is always evaluated");
            (p, r_e)
        }
        None => (policy, r_s),
    };
    Ok(TrainRun {
        env: env.clone(),
        trainer: TrainerConfig::Cem(cfg.clone()),
        seed,
        history,
        policy,
        report: EvalReport::new(r_s, r_e, cfg.eval_episodes, runner.elapsed()),
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::env::truck::TruckParams;

    #[test]
    fn full_elite_refit_is_the_population_mean() {
        let samples = vec![vec![1.0, 0.0], vec![3.0, 2.0], vec![5.0, 4.0]];
        let (mu, sd) = refit(&samples, &[0.0, 2.0, 1.0], 3);
        assert_eq!(mu, vec![3.0, 2.0]);
        assert!((sd[0] - (8.0f64 / 3.0).sqrt()).abs() < 1e-15);
    }

    #[test]
    fn elites_are_the_best_returns() {
        let samples = vec![vec![1.0], vec![3.0], vec![5.0], vec![7.0]];
        let (mu, sd) = refit(&samples, &[0.0, 9.0, 1.0, 8.0], 2);
        assert_eq!(mu, vec![5.0]);
        assert_eq!(sd, vec![2.0]);
    }

    #[test]
    fn elite_count_rounds_and_floors_at_one() {
        let c = CemConfig { population: 32, elite_frac: 0.25, ..CemConfig::default() };
        assert_eq!(c.n_elite(), 8);
        let c = CemConfig { population: 3, elite_frac: 0.01, ..CemConfig::default() };
        assert_eq!(c.n_elite(), 1);
    }

    #[test]
    fn zero_spread_gives_a_flat_history() {
        let env = EnvConfig::TransportTruck(TruckParams { horizon: 40, x0_min: 1.0, x0_max: 1.0, ..TruckParams::default() });
        let cfg = CemConfig { init_std: 0.0, population: 4, iterations: 5, eval_episodes: 2, ..CemConfig::default() };
        let run = cem_train(&env, &cfg, 3, &TrainOptions::default()).unwrap();
        let first = run.history[0].mean_return;
        assert!(run.history.iter().all(|r| r.mean_return == first));
        assert!(run.policy.weights().iter().all(|w| *w == 0.0));
    }

    #[test]
    fn worker_count_does_not_change_results() {
        let env = EnvConfig::TransportTruck(TruckParams { horizon: 60, ..TruckParams::default() });
        let cfg = CemConfig { population: 8, iterations: 4, eval_every: 2, eval_episodes: 2, ..CemConfig::default() };
        let a = cem_train(&env, &cfg, 9, &TrainOptions { workers: 1, log_wall_time: false }).unwrap();
        let b = cem_train(&env, &cfg, 9, &TrainOptions { workers: 3, log_wall_time: false }).unwrap();
        assert_eq!(a.history, b.history);
        assert_eq!(a.policy, b.policy);
    }
}

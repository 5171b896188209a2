//! Augmented random search, V2-t: antithetic perturbations of a linear policy
//! over whitened observations, keeping the best `b` of `N` directions.

use super::eval::EvalReport;
use super::seed::{derive_seed, stream};
use super::{is_eval_iteration, mean, population_std, Job, LinearPolicy, Runner, TrainError, TrainOptions, TrainRun, TrainerConfig};
use crate::env::EnvConfig;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, StandardNormal};
use serde::{Deserialize, Serialize};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct ArsConfig {
    /// α.
    pub step_size: f64,
    /// N.
    pub n_directions: usize,
    /// b, at most N.
    pub top_directions: usize,
    /// ν.
    pub noise_std: f64,
    pub iterations: usize,
    pub eval_every: usize,
    pub eval_episodes: usize,
}

impl Default for ArsConfig {
    fn default() -> Self {
        Self {
            step_size: 0.02,
            n_directions: 8,
            top_directions: 4,
            noise_std: 0.03,
            iterations: 300,
            eval_every: 10,
            eval_episodes: 100,
        }
    }
}

impl ArsConfig {
    pub fn validate(&self) -> Result<(), TrainError> {
        let bad = |m: &str| Err(TrainError::InvalidConfig(m.into()));
        if !(self.step_size.is_finite() && self.step_size > 0.0) {
            return bad("step_size must be finite and > 0");
        }
        if !(self.noise_std.is_finite() && self.noise_std > 0.0) {
            return bad("noise_std must be finite and > 0");
        }
        if self.n_directions == 0 || self.top_directions == 0 || self.top_directions > self.n_directions {
            return bad("need 1 <= top_directions <= n_directions");
        }
        if self.eval_every == 0 || self.eval_episodes == 0 {
            return bad("eval_every and eval_episodes must be >= 1");
        }
        Ok(())
    }
}

/// Applies one update `W ← W + α/(b·σ_R)·Σ_top (r⁺ - r⁻)·δ` in place.
///
/// Directions are ranked by `max(r⁺, r⁻)` (ties keep the lower index); `σ_R`
/// is the population standard deviation of the `2b` selected returns, with 1
/// substituted below 1e-8. Returns the `σ_R` used.
pub fn ars_weight_update(
    weights: &mut [f64],
    deltas: &[Vec<f64>],
    r_plus: &[f64],
    r_minus: &[f64],
    top: usize,
    step_size: f64,
) -> f64 {
    let n = deltas.len();
    assert!(r_plus.len() == n && r_minus.len() == n && (1..=n).contains(&top));
    let mut order: Vec<usize> = (0..n).collect();
    order.sort_by(|&a, &b| r_plus[b].max(r_minus[b]).total_cmp(&r_plus[a].max(r_minus[a])));
    let selected = &order[..top];

    let returns: Vec<f64> = selected.iter().flat_map(|&k| [r_plus[k], r_minus[k]]).collect();
    let sigma = population_std(&returns);
    let sigma = if sigma >= 1e-8 { sigma } else { 1.0 };

    let scale = step_size / (top as f64 * sigma);
    let mut step = vec![0.0; weights.len()];
    for &k in selected {
        let diff = r_plus[k] - r_minus[k];
        for (s, d) in step.iter_mut().zip(&deltas[k]) {
            *s += diff * d;
        }
    }
    for (w, s) in weights.iter_mut().zip(&step) {
        *w += scale * s;
    }
    sigma
}

fn direction(seed: u64, len: usize) -> Vec<f64> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    (0..len).map(|_| StandardNormal.sample(&mut rng)).collect()
}

pub fn ars_train(env: &EnvConfig, cfg: &ArsConfig, seed: u64, opts: &TrainOptions) -> Result<TrainRun, TrainError> {
    cfg.validate()?;
    let runner = Runner::new(env, cfg.eval_episodes, seed, opts)?;
    let mut policy = LinearPolicy::zeros(runner.action_dim, runner.obs_dim);
    let r_s = runner.evaluate(&policy)?;
    let mut history = Vec::with_capacity(cfg.iterations);

    for it in 0..cfg.iterations {
        let it_seed = derive_seed(seed, stream::ITERATION, it as u64);
        let deltas: Vec<Vec<f64>> = (0..cfg.n_directions)
            .map(|k| direction(derive_seed(it_seed, stream::DIRECTION, k as u64), policy.weights().len()))
            .collect();
        let mut jobs = Vec::with_capacity(2 * cfg.n_directions);
        for (k, d) in deltas.iter().enumerate() {
            let reset = derive_seed(it_seed, stream::RESET, k as u64);
            for sign in [1.0, -1.0] {
                let weights = policy.weights().iter().zip(d).map(|(w, d)| w + sign * cfg.noise_std * d).collect();
                jobs.push(Job { weights, seed: reset });
            }
        }

        let whitener = policy.normalizer.whitener();
        let results = runner.rollouts(&jobs, &whitener)?;
        for (_, stats) in &results {
            policy.normalizer.merge(stats);
        }
        let returns: Vec<f64> = results.iter().map(|(r, _)| *r).collect();
        let r_plus: Vec<f64> = returns.iter().step_by(2).copied().collect();
        let r_minus: Vec<f64> = returns.iter().skip(1).step_by(2).copied().collect();
        ars_weight_update(policy.weights_mut(), &deltas, &r_plus, &r_minus, cfg.top_directions, cfg.step_size);

        let iteration = it + 1;
        if !policy.is_finite() {
            history.push(runner.row(iteration, mean(&returns), None));
            return Err(TrainError::Divergence { iteration, history });
        }
        let eval = if is_eval_iteration(iteration, cfg.eval_every, cfg.iterations) {
            Some(runner.evaluate(&policy)?)
        } else {
            None
        };
        history.push(runner.row(iteration, mean(&returns), eval));
    }

    let r_e = match history.last() {
        Some(row) => row.eval_return.expect("last iteration is always evaluated"),
        None => r_s,
    };
    Ok(TrainRun {
        env: env.clone(),
        trainer: TrainerConfig::Ars(cfg.clone()),
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
    use proptest::prelude::*;

    #[test]
    fn equal_returns_leave_weights_unchanged() {
        let mut w = vec![0.5, -1.25, 3.0];
        let before = w.clone();
        let deltas = vec![vec![1.0, 2.0, 3.0], vec![-0.5, 0.1, 9.0]];
        let sigma = ars_weight_update(&mut w, &deltas, &[7.0, 7.0], &[7.0, 7.0], 2, 0.1);
        assert_eq!(sigma, 1.0);
        assert_eq!(w, before);
    }

    #[test]
    fn single_direction_moves_along_delta() {
        let mut w = vec![0.0, 0.0];
        let delta = vec![vec![0.6, -0.8]];
        let sigma = ars_weight_update(&mut w, &delta, &[3.0], &[1.0], 1, 0.5);
        assert_eq!(sigma, 1.0);
        let expected = 0.5 * 2.0 / sigma;
        assert!((w[0] - expected * 0.6).abs() < 1e-15);
        assert!((w[1] + expected * 0.8).abs() < 1e-15);
    }

    #[test]
    fn top_directions_are_selected_by_best_return() {
        let mut w = vec![0.0];
        // direction 1 has the best max(r+, r-) and is the only one used
        let deltas = vec![vec![1.0], vec![10.0], vec![100.0]];
        ars_weight_update(&mut w, &deltas, &[1.0, 5.0, 0.0], &[0.0, 9.0, 2.0], 1, 1.0);
        // σ_R of {5, 9} is 2; update = 1/(1·2)·(5-9)·10
        assert_eq!(w[0], -20.0);
    }

    #[test]
    fn zero_iterations_give_zero_zeta() {
        let env = EnvConfig::default_for("transport-truck").unwrap();
        let cfg = ArsConfig { iterations: 0, eval_episodes: 3, ..ArsConfig::default() };
        let run = ars_train(&env, &cfg, 5, &TrainOptions::default()).unwrap();
        assert_eq!(run.report.r_s, run.report.r_e);
        assert_eq!(run.report.zeta, 0.0);
        assert!(run.history.is_empty());
    }

    #[test]
    fn history_is_independent_of_worker_count() {
        let env = EnvConfig::TransportTruck(TruckParams { horizon: 60, ..TruckParams::default() });
        let cfg = ArsConfig { iterations: 6, eval_every: 2, eval_episodes: 3, ..ArsConfig::default() };
        let one = ars_train(&env, &cfg, 42, &TrainOptions { workers: 1, log_wall_time: false }).unwrap();
        let four = ars_train(&env, &cfg, 42, &TrainOptions { workers: 4, log_wall_time: false }).unwrap();
        assert_eq!(one.history, four.history);
        assert_eq!(one.policy, four.policy);
        assert_eq!(one.history.len(), 6);
        assert!(one.history[0].eval_return.is_none());
        assert!(one.history[1].eval_return.is_some());
    }

    #[test]
    fn invalid_configs_are_rejected() {
        let env = EnvConfig::default_for("transport-truck").unwrap();
        let bad = ArsConfig { top_directions: 9, ..ArsConfig::default() };
        assert!(matches!(ars_train(&env, &bad, 0, &TrainOptions::default()), Err(TrainError::InvalidConfig(_))));
        let workers = TrainOptions { workers: 0, log_wall_time: false };
        assert!(ars_train(&env, &ArsConfig::default(), 0, &workers).is_err());
    }

    proptest! {
        #[test]
        fn update_is_shift_invariant(
            rp in prop::collection::vec(-1e3f64..1e3, 4),
            rm in prop::collection::vec(-1e3f64..1e3, 4),
            shift in -1e3f64..1e3,
            top in 1usize..=4,
        ) {
            let deltas: Vec<Vec<f64>> = (0..4).map(|k| vec![k as f64 - 1.5, 0.25 * k as f64]).collect();
            let mut a = vec![0.1, -0.2];
            let mut b = a.clone();
            ars_weight_update(&mut a, &deltas, &rp, &rm, top, 0.02);
            let sp: Vec<f64> = rp.iter().map(|r| r + shift).collect();
            let sm: Vec<f64> = rm.iter().map(|r| r + shift).collect();
            ars_weight_update(&mut b, &deltas, &sp, &sm, top, 0.02);
            for (x, y) in a.iter().zip(&b) {
                prop_assert!((x - y).abs() <= 1e-9 * (1.0 + x.abs()));
            }
        }
    }
}

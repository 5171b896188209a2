use super::policy::{linear, ActionMap, LinearPolicy, Normalizer, Whitener};
use super::seed::{derive_seed, stream};
use super::TrainError;
use crate::env::{run_episode, EnvConfig, EnvError, Environment, Trajectory};
use serde::{Deserialize, Serialize};

/// Start/end evaluation of one training run.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EvalReport {
    /// Mean evaluation return of the initial policy.
    pub r_s: f64,
    /// Mean evaluation return of the final policy.
    pub r_e: f64,
    pub zeta: f64,
    pub n_eval_episodes: usize,
    /// Seconds spent in the whole run.
    pub wall_time: f64,
}

impl EvalReport {
    pub fn new(r_s: f64, r_e: f64, n_eval_episodes: usize, wall_time: f64) -> Self {
        Self { r_s, r_e, zeta: zeta(r_s, r_e), n_eval_episodes, wall_time }
    }
}

/// Improvement of the mean return over training, `r_e - r_s`.
pub fn zeta(r_s: f64, r_e: f64) -> f64 {
    r_e - r_s
}

/// Runs one episode with weights `weights` over observations whitened by
/// `whitener`, returning the undiscounted return. Visited observations
/// (including the initial one) are added to `record` when given.
pub fn episode_return(
    env: &mut dyn Environment,
    weights: &[f64],
    whitener: &Whitener,
    map: &ActionMap,
    seed: u64,
    mut record: Option<&mut Normalizer>,
) -> Result<f64, EnvError> {
    let action_dim = env.action_space().dim();
    let mut obs = env.reset(Some(seed));
    let mut z = vec![0.0; obs.len()];
    let mut total = 0.0;
    loop {
        if let Some(n) = record.as_deref_mut() {
            n.observe(&obs);
        }
        whitener.apply(&obs, &mut z);
        let action = map.apply(&linear(weights, action_dim, &z));
        let step = env.step(&action)?;
        total += step.reward;
        if step.terminated || step.truncated {
            return Ok(total);
        }
        obs = step.observation;
    }
}

/// Seed of the `k`-th evaluation episode.
pub fn eval_episode_seed(seed: u64, k: usize) -> u64 {
    derive_seed(seed, stream::EVALUATION, k as u64)
}

fn check_dims(policy: &LinearPolicy, env: &dyn Environment) -> Result<(), TrainError> {
    let (a, o) = (env.action_space().dim(), env.observation_space().dim());
    if policy.action_dim() != a || policy.obs_dim() != o {
        return Err(TrainError::InvalidConfig(format!(
            "policy is {}x{} but {} needs {a}x{o}",
            policy.action_dim(),
            policy.obs_dim(),
            env.name()
        )));
    }
    Ok(())
}

/// Returns of `n_episodes` deterministic episodes with a frozen normalizer.
pub fn evaluate_returns(
    policy: &LinearPolicy,
    env_cfg: &EnvConfig,
    n_episodes: usize,
    seed: u64,
) -> Result<Vec<f64>, TrainError> {
    let mut env = env_cfg.build()?;
    check_dims(policy, env.as_ref())?;
    let whitener = policy.normalizer.whitener();
    let map = ActionMap::new(env.action_space());
    (0..n_episodes)
        .map(|k| Ok(episode_return(env.as_mut(), policy.weights(), &whitener, &map, eval_episode_seed(seed, k), None)?))
        .collect()
}

/// Arithmetic mean return over `n_episodes` evaluation episodes.
pub fn evaluate(policy: &LinearPolicy, env_cfg: &EnvConfig, n_episodes: usize, seed: u64) -> Result<f64, TrainError> {
    if n_episodes == 0 {
        return Err(TrainError::InvalidConfig("n_episodes must be >= 1".into()));
    }
    let returns = evaluate_returns(policy, env_cfg, n_episodes, seed)?;
    Ok(returns.iter().sum::<f64>() / n_episodes as f64)
}

/// Full trajectories of the evaluation episodes.
pub fn evaluate_trajectories(
    policy: &LinearPolicy,
    env_cfg: &EnvConfig,
    n_episodes: usize,
    seed: u64,
) -> Result<Vec<Trajectory>, TrainError> {
    let mut env = env_cfg.build()?;
    check_dims(policy, env.as_ref())?;
    let map = ActionMap::new(env.action_space());
    (0..n_episodes)
        .map(|k| Ok(run_episode(env.as_mut(), eval_episode_seed(seed, k), |obs| policy.act(obs, &map))?))
        .collect()
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::env::truck::{truck_reward, TruckParams};

    #[test]
    fn table_rows() {
        assert_eq!(zeta(-50.25, -12.67), 37.58);
        assert_eq!(zeta(-63.4, -16.6), 46.8);
        assert_eq!(zeta(3.5, 3.5), 0.0);
        let rep = EvalReport::new(-10.0, -4.0, 5, 0.0);
        assert_eq!(rep.zeta, rep.r_e - rep.r_s);
    }

    #[test]
    fn zero_policy_on_a_resting_truck() {
        let params = TruckParams { horizon: 50, x0_min: 4.0, x0_max: 4.0, ..TruckParams::default() };
        let cfg = EnvConfig::TransportTruck(params.clone());
        let policy = LinearPolicy::zeros(1, 2);
        let mean = evaluate(&policy, &cfg, 3, 11).unwrap();
        // zero force keeps the truck at rest: every step costs the same
        let per_step = truck_reward(&[4.0, 0.0], 0.0, &params);
        let expected: f64 = (0..50).map(|_| per_step).sum();
        assert_eq!(mean, expected);
    }

    #[test]
    fn single_episode_mean_is_that_episode() {
        let cfg = EnvConfig::default_for("co2-microalgae-monod").unwrap();
        let policy = LinearPolicy::zeros(1, 2);
        let r = evaluate_returns(&policy, &cfg, 1, 3).unwrap();
        assert_eq!(evaluate(&policy, &cfg, 1, 3).unwrap(), r[0]);
    }

    #[test]
    fn evaluation_is_repeatable_and_pure() {
        let cfg = EnvConfig::default_for("transport-truck").unwrap();
        let mut policy = LinearPolicy::zeros(1, 2);
        policy.weights_mut().copy_from_slice(&[1e-3, -2e-2]);
        policy.normalizer.observe(&[0.0, 0.0]);
        policy.normalizer.observe(&[500.0, 10.0]);
        let before = policy.clone();
        let a = evaluate(&policy, &cfg, 4, 9).unwrap();
        let b = evaluate(&policy, &cfg, 4, 9).unwrap();
        assert_eq!(a, b);
        assert_eq!(policy, before);
        let tr = evaluate_trajectories(&policy, &cfg, 4, 9).unwrap();
        let mean = tr.iter().map(|t| t.episode_return).sum::<f64>() / 4.0;
        assert_eq!(mean, a);
    }

    #[test]
    fn mismatched_policy_is_rejected() {
        let cfg = EnvConfig::default_for("incinerator").unwrap();
        assert!(evaluate(&LinearPolicy::zeros(1, 2), &cfg, 1, 0).is_err());
    }
}

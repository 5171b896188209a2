use circulate::env::{run_episode, EnvConfig};

fn all_envs() -> Vec<EnvConfig> {
    EnvConfig::names().into_iter().map(|n| EnvConfig::default_for(n).unwrap()).collect()
}

fn short(cfg: EnvConfig, steps: usize) -> EnvConfig {
    match cfg {
        EnvConfig::TransportTruck(mut p) => {
            p.horizon = steps;
            EnvConfig::TransportTruck(p)
        }
        EnvConfig::Incinerator(mut p) => {
            p.horizon = steps;
            EnvConfig::Incinerator(p)
        }
        EnvConfig::Co2MicroalgaeMonod(mut p) => {
            p.horizon = steps;
            EnvConfig::Co2MicroalgaeMonod(p)
        }
        EnvConfig::Co2MicroalgaeDroop(mut p) => {
            p.horizon = steps;
            EnvConfig::Co2MicroalgaeDroop(p)
        }
    }
}

#[test]
fn defaults_are_valid_and_build() {
    for cfg in all_envs() {
        cfg.validate().unwrap();
        let env = cfg.build().unwrap();
        assert_eq!(env.name(), cfg.name());
        let info = cfg.info();
        assert_eq!(env.observation_space().dim(), info.state_dim);
        assert_eq!(env.action_space().dim(), info.action_dim);
        assert!(env.step_seconds() > 0.0);
    }
}

#[test]
fn episodes_run_to_the_horizon_with_finite_values() {
    for cfg in all_envs() {
        let mut env = short(cfg, 25).build().unwrap();
        let center = env.action_space().center();
        let tr = run_episode(env.as_mut(), 11, |_| center.clone()).unwrap();
        assert_eq!(tr.len(), 25, "{}", tr.columns.state.join(","));
        assert!(tr.rewards.iter().all(|r| r.is_finite()));
        assert!(tr.states.iter().flatten().all(|x| x.is_finite()));
        assert_eq!(tr.rewards.iter().sum::<f64>(), tr.episode_return);
    }
}

#[test]
fn same_seed_same_trajectory() {
    for cfg in all_envs() {
        let cfg = short(cfg, 30);
        let run = |seed| {
            let mut env = cfg.build().unwrap();
            let high = env.action_space().high().to_vec();
            run_episode(env.as_mut(), seed, |_| high.clone()).unwrap()
        };
        let (a, b) = (run(5), run(5));
        assert_eq!(a.states, b.states);
        assert_eq!(a.rewards, b.rewards);
    }
}

#[test]
fn reset_reproduces_initial_state() {
    for cfg in all_envs() {
        let mut env = cfg.build().unwrap();
        let first = env.reset(Some(42));
        env.step(&env.action_space().center()).unwrap();
        assert_eq!(env.reset(Some(42)), first);
    }
}

#[test]
fn actions_of_wrong_length_are_rejected() {
    for cfg in all_envs() {
        let mut env = cfg.build().unwrap();
        env.reset(Some(0));
        let dim = env.action_space().dim();
        assert!(env.step(&vec![0.0; dim + 1]).is_err());
    }
}

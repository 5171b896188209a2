use super::{Columns, EnvError, Environment};
use serde::Serialize;
use std::fmt::Write as _;

#[derive(Debug, Clone, PartialEq, Eq, Serialize)]
#[serde(rename_all = "snake_case")]
pub enum EpisodeEnd {
    Truncated,
    /// The environment terminated early; the cause is the `info.extras` flag.
    Terminated { cause: String },
}

/// One recorded episode: a row per step holding the pre-step state, the
/// applied action, the reward and the exported extras.
#[derive(Debug, Clone, PartialEq)]
pub struct Trajectory {
    pub columns: Columns,
    /// Seconds since reset at the start of each step.
    pub times: Vec<f64>,
    pub states: Vec<Vec<f64>>,
    pub actions: Vec<Vec<f64>>,
    pub rewards: Vec<f64>,
    pub extras: Vec<Vec<f64>>,
    pub final_state: Vec<f64>,
    pub episode_return: f64,
    pub end: EpisodeEnd,
}

impl Trajectory {
    pub fn len(&self) -> usize {
        self.rewards.len()
    }

    pub fn is_empty(&self) -> bool {
        self.rewards.is_empty()
    }

    /// Values of one extras column, e.g. `m_dot_23`.
    pub fn extra(&self, name: &str) -> Option<Vec<f64>> {
        let i = self.columns.extras.iter().position(|c| *c == name)?;
        Some(self.extras.iter().map(|row| row[i]).collect())
    }
}

/// Runs one episode from `reset(seed)` with actions from `policy(observation)`.
pub fn run_episode<E, F>(env: &mut E, seed: u64, mut policy: F) -> Result<Trajectory, EnvError>
where
    E: Environment + ?Sized,
    F: FnMut(&[f64]) -> Vec<f64>,
{
    let columns = env.columns();
    let step_seconds = env.step_seconds();
    let mut obs = env.reset(Some(seed));
    let mut state = obs.clone();
    let mut tr = Trajectory {
        columns,
        times: Vec::new(),
        states: Vec::new(),
        actions: Vec::new(),
        rewards: Vec::new(),
        extras: Vec::new(),
        final_state: Vec::new(),
        episode_return: 0.0,
        end: EpisodeEnd::Truncated,
    };
    loop {
        let action = policy(&obs);
        let step = env.step(&action)?;
        tr.times.push(tr.rewards.len() as f64 * step_seconds);
        tr.states.push(state);
        tr.actions.push(step.info.action.clone());
        tr.rewards.push(step.reward);
        tr.extras
            .push(columns.extras.iter().map(|k| step.info.extras.get(*k).copied().unwrap_or(0.0)).collect());
        tr.episode_return += step.reward;
        state = step.info.state;
        obs = step.observation;
        if step.terminated {
            let cause = step
                .info
                .extras
                .iter()
                .find(|(k, v)| **v != 0.0 && !columns.extras.contains(&k.as_str()))
                .map(|(k, _)| k.clone())
                .unwrap_or_else(|| "terminated".into());
            tr.end = EpisodeEnd::Terminated { cause };
            break;
        }
        if step.truncated {
            break;
        }
    }
    tr.final_state = state;
    Ok(tr)
}

/// CSV with `# ` comment lines, a header `t,<state>,<action>,<reward>,<extras>`
/// and a row per step.
pub fn write_trajectory_csv(tr: &Trajectory, comments: &[String]) -> String {
    let mut out = String::new();
    for c in comments {
        for l in c.lines() {
            let _ = writeln!(out, "# {l}");
        }
    }
    let c = &tr.columns;
    let header: Vec<&str> = std::iter::once("t")
        .chain(c.state.iter().copied())
        .chain(c.action.iter().copied())
        .chain(std::iter::once(c.reward))
        .chain(c.extras.iter().copied())
        .collect();
    out.push_str(&header.join(","));
    out.push('\n');
    for k in 0..tr.len() {
        let row: Vec<String> = std::iter::once(tr.times[k])
            .chain(tr.states[k].iter().copied())
            .chain(tr.actions[k].iter().copied())
            .chain(std::iter::once(tr.rewards[k]))
            .chain(tr.extras[k].iter().copied())
            .map(|v| v.to_string())
            .collect();
        out.push_str(&row.join(","));
        out.push('\n');
    }
    out
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::env::truck::{TruckParams, TruckPlant};
    use crate::env::OdeEnv;

    #[test]
    fn zero_force_episode() {
        let params = TruckParams { horizon: 4, x0_min: 0.0, x0_max: 0.0, ..TruckParams::default() };
        let mut env = OdeEnv::new(TruckPlant::new(params).unwrap());
        let tr = run_episode(&mut env, 1, |_| vec![0.0]).unwrap();
        assert_eq!(tr.len(), 4);
        assert_eq!(tr.end, EpisodeEnd::Truncated);
        assert_eq!(tr.episode_return, -4e6);
        assert_eq!(tr.times, vec![0.0, 0.5, 1.0, 1.5]);
        let csv = write_trajectory_csv(&tr, &["seed=1".into()]);
        let lines: Vec<&str> = csv.lines().collect();
        assert_eq!(lines[0], "# seed=1");
        assert_eq!(lines[1], "t,x1,x2,F,r");
        assert_eq!(lines[2], "0,0,0,0,-1000000");
        assert_eq!(lines.len(), 6);
    }
}

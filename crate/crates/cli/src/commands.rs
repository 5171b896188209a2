use crate::config::{FlowSource, RunConfig};
use crate::{CircularityCommand, Cli, Command, Failure, GlobalArgs};
use anyhow::{anyhow, bail, Context, Result};
use circulate::circularity::{
    lambda_netzero, lambda_solid_scenario, parse_event_log, parse_flow_file, parse_trajectory_flow, write_lambda_csv,
    CircularityConfig, CircularityLedger, ContinuousFlow,
};
use circulate::env::{run_episode, write_trajectory_csv, EnvConfig, EpisodeEnd, ENV_INFOS};
use circulate::network::Tmn;
use circulate::trainers::seed::{derive_seed, stream};
use circulate::trainers::{
    evaluate_returns, load_policy, save_policy, train, write_history_csv, ActionMap, LinearPolicy, TrainError,
    TrainOptions, TrainerConfig,
};
use serde_json::json;
use std::fmt::Write as _;
use std::fs;
use std::path::{Path, PathBuf};

pub const DEFAULT_OUT: &str = "out";

pub fn dispatch(cli: Cli) -> Result<(), Failure> {
    if let Command::ListEnvs = cli.command {
        print!("{}", list_envs());
        return Ok(());
    }
    let ctx = Invocation::new(&cli.global)?;
    match cli.command {
        Command::ListEnvs => unreachable!(),
        Command::Simulate { policy } => simulate(&ctx, policy),
        Command::Train { workers, log_wall_time } => train_cmd(&ctx, TrainOptions { workers, log_wall_time }),
        Command::Evaluate { policy, episodes } => evaluate_cmd(&ctx, policy, episodes),
        Command::Circularity(c) => match c {
            CircularityCommand::Ledger => ledger(&ctx),
            CircularityCommand::SolidScenario => solid(&ctx),
            CircularityCommand::Netzero => netzero(&ctx),
        },
        Command::VerifyIntegrator => verify(&ctx),
    }
}

/// The environment table: name, state and action dimensions, compartment.
pub fn list_envs() -> String {
    let mut out = String::new();
    let _ = writeln!(out, "{:<22} {:>5} {:>6}  {:<11} description", "name", "state", "action", "compartment");
    for i in ENV_INFOS {
        let _ = writeln!(out, "{:<22} {:>5} {:>6}  {:<11} {}", i.name, i.state_dim, i.action_dim, i.compartment, i.description);
    }
    out
}

/// Effective configuration of one invocation.
struct Invocation {
    cfg: RunConfig,
    seed: u64,
    out: PathBuf,
}

impl Invocation {
    fn new(args: &GlobalArgs) -> Result<Self> {
        let mut cfg = match &args.config {
            Some(path) => RunConfig::load(path)?,
            None => RunConfig::default(),
        };
        let seed = args.seed.or(cfg.seed).unwrap_or(0);
        let out = args.out.clone().or_else(|| cfg.out.clone()).unwrap_or_else(|| PathBuf::from(DEFAULT_OUT));
        cfg.seed = Some(seed);
        // where results go is not part of what produced them
        cfg.out = None;
        if let Some(env) = &cfg.env {
            env.validate()?;
            for w in env.warnings() {
                eprintln!("warning: {w}");
            }
        }
        Ok(Self { cfg, seed, out })
    }

    fn comments(&self, command: &str) -> Vec<String> {
        vec![format!("circulate {command}"), format!("seed = {}", self.seed), "config:".into(), self.cfg.echo()]
    }

    fn config_json(&self) -> serde_json::Value {
        serde_json::to_value(&self.cfg).unwrap_or(serde_json::Value::Null)
    }

    fn write(&self, name: &str, contents: &str) -> Result<PathBuf> {
        fs::create_dir_all(&self.out).with_context(|| format!("cannot create {}", self.out.display()))?;
        let path = self.out.join(name);
        fs::write(&path, contents).with_context(|| format!("cannot write {}", path.display()))?;
        Ok(path)
    }

    fn write_json(&self, name: &str, value: &serde_json::Value) -> Result<PathBuf> {
        let mut text = serde_json::to_string_pretty(value)?;
        text.push('\n');
        self.write(name, &text)
    }
}

fn commented(comments: &[String], body: &str) -> String {
    let mut out = String::new();
    for c in comments {
        for l in c.lines() {
            let _ = writeln!(out, "# {l}");
        }
    }
    out.push_str(body);
    out
}

fn read(path: &Path) -> Result<String> {
    fs::read_to_string(path).with_context(|| format!("cannot read {}", path.display()))
}

fn load_policy_for(path: &Path, env: &EnvConfig) -> Result<LinearPolicy> {
    let record = load_policy(&read(path)?).with_context(|| format!("invalid policy {}", path.display()))?;
    if record.env != env.name() {
        bail!("policy {} was trained on {} but the config selects {}", path.display(), record.env, env.name());
    }
    Ok(record.policy)
}

fn simulate(ctx: &Invocation, policy_flag: Option<PathBuf>) -> Result<(), Failure> {
    let env_cfg = ctx.cfg.env()?;
    let block = ctx.cfg.simulate.clone().unwrap_or_default();
    let mut env = env_cfg.build().map_err(anyhow::Error::from)?;
    let map = ActionMap::new(env.action_space());
    let dim = env.action_space().dim();

    let policy = match policy_flag.or(block.policy) {
        Some(path) => {
            if block.action.is_some() {
                return Err(anyhow!("give either a policy or a constant action, not both").into());
            }
            Some(load_policy_for(&path, env_cfg)?)
        }
        None => None,
    };
    if let Some(a) = &block.action {
        if a.len() != dim {
            return Err(anyhow!("constant action has {} entries but {} needs {dim}", a.len(), env_cfg.name()).into());
        }
    }
    let zero = LinearPolicy::zeros(dim, env.observation_space().dim());
    let tr = run_episode(env.as_mut(), ctx.seed, |obs| match (&policy, &block.action) {
        (Some(p), _) => p.act(obs, &map),
        (None, Some(a)) => a.clone(),
        (None, None) => zero.act(obs, &map),
    })
    .map_err(anyhow::Error::from)?;

    let comments = ctx.comments("simulate");
    ctx.write("trajectory.csv", &write_trajectory_csv(&tr, &comments))?;
    ctx.write_json(
        "summary.json",
        &json!({
            "env": env_cfg.name(),
            "seed": ctx.seed,
            "steps": tr.len(),
            "episode_return": tr.episode_return,
            "end": tr.end,
            "final_state": tr.final_state,
            "config": ctx.config_json(),
        }),
    )?;
    println!("{}: {} steps, return {}", env_cfg.name(), tr.len(), tr.episode_return);
    match &tr.end {
        EpisodeEnd::Truncated => Ok(()),
        EpisodeEnd::Terminated { cause } => {
            Err(Failure::Numerical(anyhow!("episode terminated after {} steps: {cause}", tr.len())))
        }
    }
}

/// Upper bound on environment steps spent by training, initial and final
/// evaluations included.
pub fn step_budget(trainer: &TrainerConfig, episode_steps: usize) -> usize {
    let (per_iteration, evals) = match trainer {
        TrainerConfig::Ars(c) => (2 * c.n_directions, c.iterations.div_ceil(c.eval_every)),
        TrainerConfig::Cem(c) => (c.population, c.iterations.div_ceil(c.eval_every)),
        TrainerConfig::Random(c) => (c.samples, c.iterations.div_ceil(c.eval_every)),
    };
    episode_steps * (trainer.iterations() * per_iteration + (evals + 1) * trainer.eval_episodes())
}

fn train_cmd(ctx: &Invocation, opts: TrainOptions) -> Result<(), Failure> {
    let env_cfg = ctx.cfg.env()?;
    let trainer = ctx.cfg.trainer()?;
    let episode_steps = env_cfg.build().map_err(anyhow::Error::from)?.max_episode_steps();
    let comments = ctx.comments("train");
    let run = match train(env_cfg, trainer, ctx.seed, &opts) {
        Ok(run) => run,
        Err(TrainError::Divergence { iteration, history }) => {
            ctx.write("history.csv", &write_history_csv(&history, &comments))?;
            return Err(Failure::Numerical(anyhow!(
                "policy weights became non-finite at iteration {iteration}; partial history written"
            )));
        }
        Err(e) => return Err(anyhow::Error::from(e).into()),
    };

    ctx.write("history.csv", &write_history_csv(&run.history, &comments))?;
    ctx.write("policy.txt", &commented(&comments, &save_policy(&run.policy, env_cfg.name())))?;
    let r = &run.report;
    ctx.write_json(
        "report.json",
        &json!({
            "env": env_cfg.name(),
            "algorithm": trainer.algorithm(),
            "seed": ctx.seed,
            "r_s": r.r_s,
            "r_e": r.r_e,
            "zeta": r.zeta,
            "n_eval_episodes": r.n_eval_episodes,
            "wall_time": r.wall_time,
            "iterations": trainer.iterations(),
            "env_step_budget": step_budget(trainer, episode_steps),
            "config": ctx.config_json(),
        }),
    )?;
    println!("{} / {}: r_s {} r_e {} zeta {}", env_cfg.name(), trainer.algorithm(), r.r_s, r.r_e, r.zeta);
    Ok(())
}

fn evaluate_cmd(ctx: &Invocation, policy_flag: Option<PathBuf>, episodes: Option<usize>) -> Result<(), Failure> {
    let env_cfg = ctx.cfg.env()?;
    let block = ctx.cfg.evaluate.clone().unwrap_or_default();
    let path = policy_flag.or(block.policy).context("no policy given (--policy or [evaluate] policy)")?;
    let episodes = episodes.unwrap_or(block.episodes);
    if episodes == 0 {
        return Err(anyhow!("episodes must be >= 1").into());
    }
    let policy = load_policy_for(&path, env_cfg)?;
    // same episode seeds as the evaluations of a training run with this seed
    let eval_seed = derive_seed(ctx.seed, stream::EVALUATION, 0);
    let returns = evaluate_returns(&policy, env_cfg, episodes, eval_seed).map_err(anyhow::Error::from)?;
    let mean = returns.iter().sum::<f64>() / episodes as f64;
    ctx.write_json(
        "evaluation.json",
        &json!({
            "env": env_cfg.name(),
            "seed": ctx.seed,
            "policy": path,
            "episodes": episodes,
            "mean_return": mean,
            "returns": returns,
            "config": ctx.config_json(),
        }),
    )?;
    println!("{}: mean return {mean} over {episodes} episodes", env_cfg.name());
    Ok(())
}

fn lambda_rows(times: &[f64], f: impl Fn(f64) -> Result<f64>) -> Result<Vec<(f64, f64)>> {
    times.iter().map(|&t| Ok((t, f(t)?))).collect()
}

fn ledger(ctx: &Invocation) -> Result<(), Failure> {
    let b = ctx.cfg.ledger.as_ref().context("config has no [ledger] block")?;
    let tmn = Tmn::from_toml(&read(&b.network)?).with_context(|| format!("invalid network {}", b.network.display()))?;
    let events = match &b.events {
        Some(p) => parse_event_log(&read(p)?).with_context(|| format!("invalid event log {}", p.display()))?,
        None => Vec::new(),
    };
    let flows = match &b.flows {
        Some(p) => parse_flow_file(&read(p)?).with_context(|| format!("invalid flow file {}", p.display()))?,
        None => Vec::new(),
    };
    let ledger = CircularityLedger::new(&tmn, &events, &flows).map_err(anyhow::Error::from)?;
    let cfg = CircularityConfig::new(b.delta).map_err(anyhow::Error::from)?;
    let rows = lambda_rows(&b.grid.times()?, |t| Ok(ledger.lambda(t, &cfg)?))?;
    ctx.write("lambda.csv", &write_lambda_csv(&ctx.comments("circularity ledger"), &rows))?;
    println!("lambda at {} sample times written", rows.len());
    Ok(())
}

fn solid(ctx: &Invocation) -> Result<(), Failure> {
    let b = ctx.cfg.solid_scenario.as_ref().context("config has no [solid_scenario] block")?;
    b.scenario.validate().map_err(anyhow::Error::from)?;
    let events = b.scenario.event_times();
    let rows = lambda_rows(&b.grid.times()?, |t| Ok(lambda_solid_scenario(&b.scenario, t)?))?;
    let mut comments = ctx.comments("circularity solid-scenario");
    comments.push(format!("t_2_out = {}", events.sorter_out));
    comments.push(format!("t_3_in_6 = {}", events.incinerator_in_unsorted));
    comments.push(format!("t_3_in_5 = {}", events.incinerator_in_recycled));
    ctx.write("lambda.csv", &write_lambda_csv(&comments, &rows))?;
    ctx.write_json(
        "event_times.json",
        &json!({ "seed": ctx.seed, "event_times": events, "config": ctx.config_json() }),
    )?;
    println!(
        "t_2_out {} t_3_in_6 {} t_3_in_5 {}",
        events.sorter_out, events.incinerator_in_unsorted, events.incinerator_in_recycled
    );
    Ok(())
}

fn flow_from(source: &FlowSource, from: u32, to: u32, role: &str) -> Result<ContinuousFlow> {
    match (&source.file, source.rate) {
        (Some(path), None) => parse_trajectory_flow(&read(path)?, &source.time_column, &source.column, from, to)
            .with_context(|| format!("{role}: invalid trajectory {}", path.display())),
        (None, Some(rate)) => {
            let end = source.end.with_context(|| format!("{role}: a constant rate needs `end`"))?;
            Ok(ContinuousFlow::constant(from, to, rate, 0.0, end)?)
        }
        _ => bail!("{role}: give exactly one of `file` or `rate`"),
    }
}

fn netzero(ctx: &Invocation) -> Result<(), Failure> {
    let b = ctx.cfg.netzero.as_ref().context("config has no [netzero] block")?;
    let emitter = flow_from(&b.emitter, 1, 2, "emitter")?;
    let remover = flow_from(&b.remover, 2, 3, "remover")?;
    let cfg = CircularityConfig::new(b.delta).map_err(anyhow::Error::from)?;
    let rows = lambda_rows(&b.grid.times()?, |t| Ok(lambda_netzero(&emitter, &remover, t, &cfg)))?;
    ctx.write("lambda.csv", &write_lambda_csv(&ctx.comments("circularity netzero"), &rows))?;
    let worst = rows.iter().map(|(_, l)| l.abs()).fold(0.0, f64::max);
    println!("max |lambda| = {worst}");
    Ok(())
}

fn verify(ctx: &Invocation) -> Result<(), Failure> {
    let env_cfg = ctx.cfg.env()?;
    let block = ctx.cfg.verify.clone().unwrap_or_default();
    let env = env_cfg.build().map_err(anyhow::Error::from)?;
    let action = block.action.unwrap_or_else(|| vec![0.0; env.action_space().dim()]);
    let horizon = block.horizon.unwrap_or(env.max_episode_steps() as f64 * env.step_seconds());
    let report = env_cfg.verify(ctx.seed, &action, horizon, block.rel_tol).map_err(anyhow::Error::from)?;

    let columns = env.columns();
    ctx.write_json(
        "verification.json",
        &json!({
            "env": env_cfg.name(),
            "seed": ctx.seed,
            "action": action,
            "horizon_seconds": horizon,
            "states": columns.state,
            "report": report,
            "config": ctx.config_json(),
        }),
    )?;
    let c = report.config;
    println!(
        "{} (dt {}, {} {:?} substeps): {}",
        env_cfg.name(),
        c.dt,
        c.substeps,
        c.method,
        if report.passed { "PASS" } else { "FAIL" }
    );
    for d in &report.deviations {
        println!(
            "  {:<6} max_abs_error {:.3e} relative {:.3e} {}",
            columns.state[d.index],
            d.max_abs_error,
            d.relative,
            if d.passed { "ok" } else { "exceeds tolerance" }
        );
    }
    if let Some(f) = &report.fixed_step_failure {
        println!("  fixed-step run failed: {f}");
    }
    if report.passed {
        Ok(())
    } else {
        Err(Failure::Numerical(anyhow!(
            "step size fails verification (max relative deviation {:e}, tolerance {:e})",
            report.max_relative(),
            block.rel_tol
        )))
    }
}

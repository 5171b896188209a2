use crate::env::BoxSpace;
use std::fmt::Write as _;
use thiserror::Error;

/// Components with a smaller standard deviation are not rescaled.
pub const MIN_STD: f64 = 1e-8;

/// Streaming per-component mean and variance (Welford), mergeable with
/// Chan's pairwise update.
#[derive(Debug, Clone, PartialEq)]
pub struct Normalizer {
    count: u64,
    mean: Vec<f64>,
    m2: Vec<f64>,
}

impl Normalizer {
    pub fn new(dim: usize) -> Self {
        Self { count: 0, mean: vec![0.0; dim], m2: vec![0.0; dim] }
    }

    pub fn from_parts(count: u64, mean: Vec<f64>, m2: Vec<f64>) -> Result<Self, PolicyError> {
        if mean.len() != m2.len() {
            return Err(PolicyError::Malformed("mean and m2 lengths differ".into()));
        }
        if mean.iter().chain(&m2).any(|v| !v.is_finite()) || m2.iter().any(|v| *v < 0.0) {
            return Err(PolicyError::Malformed("normalizer statistics must be finite with m2 >= 0".into()));
        }
        Ok(Self { count, mean, m2 })
    }

    pub fn dim(&self) -> usize {
        self.mean.len()
    }

    pub fn count(&self) -> u64 {
        self.count
    }

    pub fn mean(&self) -> &[f64] {
        &self.mean
    }

    pub fn m2(&self) -> &[f64] {
        &self.m2
    }

    /// Population variance `m2 / count` (zero before any observation).
    pub fn variance(&self) -> Vec<f64> {
        if self.count == 0 {
            return vec![0.0; self.dim()];
        }
        self.m2.iter().map(|m| m / self.count as f64).collect()
    }

    pub fn observe(&mut self, x: &[f64]) {
        self.count += 1;
        let n = self.count as f64;
        for ((m, s), v) in self.mean.iter_mut().zip(&mut self.m2).zip(x) {
            let d = v - *m;
            *m += d / n;
            *s += d * (v - *m);
        }
    }

    pub fn merge(&mut self, other: &Normalizer) {
        if other.count == 0 {
            return;
        }
        if self.count == 0 {
            *self = other.clone();
            return;
        }
        let (na, nb) = (self.count as f64, other.count as f64);
        let n = na + nb;
        for i in 0..self.dim() {
            let delta = other.mean[i] - self.mean[i];
            self.mean[i] += delta * nb / n;
            self.m2[i] += other.m2[i] + delta * delta * na * nb / n;
        }
        self.count += other.count;
    }

    /// Standard deviation used for whitening: 1 until two observations have
    /// been seen and wherever the spread is below [`MIN_STD`].
    pub fn whitening_std(&self) -> Vec<f64> {
        self.variance()
            .into_iter()
            .map(|v| {
                let s = v.sqrt();
                if self.count < 2 || !(s >= MIN_STD) {
                    1.0
                } else {
                    s
                }
            })
            .collect()
    }

    /// Frozen view used to whiten observations.
    pub fn whitener(&self) -> Whitener {
        Whitener { mean: self.mean.clone(), std: self.whitening_std() }
    }
}

/// `z = (x - mean) / std` with fixed statistics.
#[derive(Debug, Clone, PartialEq)]
pub struct Whitener {
    mean: Vec<f64>,
    std: Vec<f64>,
}

impl Whitener {
    pub fn apply(&self, x: &[f64], z: &mut [f64]) {
        for i in 0..z.len() {
            z[i] = (x[i] - self.mean[i]) / self.std[i];
        }
    }
}

/// Maps the policy output `y = W z` into the action box as
/// `center + half_range ⊙ y`, then clips.
#[derive(Debug, Clone, PartialEq)]
pub struct ActionMap {
    space: BoxSpace,
    center: Vec<f64>,
    half_range: Vec<f64>,
}

impl ActionMap {
    pub fn new(space: &BoxSpace) -> Self {
        Self { center: space.center(), half_range: space.half_range(), space: space.clone() }
    }

    pub fn apply(&self, y: &[f64]) -> Vec<f64> {
        let mut a: Vec<f64> = y.iter().zip(&self.center).zip(&self.half_range).map(|((y, c), h)| c + h * y).collect();
        // NaN from a diverged policy is left for the environment to reject
        self.space.clip(&mut a);
        a
    }
}

/// Deterministic linear policy over whitened observations.
#[derive(Debug, Clone, PartialEq)]
pub struct LinearPolicy {
    action_dim: usize,
    obs_dim: usize,
    /// Row-major `action_dim × obs_dim`.
    weights: Vec<f64>,
    pub normalizer: Normalizer,
}

impl LinearPolicy {
    pub fn zeros(action_dim: usize, obs_dim: usize) -> Self {
        Self {
            action_dim,
            obs_dim,
            weights: vec![0.0; action_dim * obs_dim],
            normalizer: Normalizer::new(obs_dim),
        }
    }

    pub fn from_parts(
        action_dim: usize,
        obs_dim: usize,
        weights: Vec<f64>,
        normalizer: Normalizer,
    ) -> Result<Self, PolicyError> {
        if action_dim == 0 || obs_dim == 0 {
            return Err(PolicyError::Malformed("dimensions must be positive".into()));
        }
        if weights.len() != action_dim * obs_dim {
            return Err(PolicyError::Malformed(format!(
                "expected {} weights, found {}",
                action_dim * obs_dim,
                weights.len()
            )));
        }
        if normalizer.dim() != obs_dim {
            return Err(PolicyError::Malformed("normalizer dimension differs from obs_dim".into()));
        }
        if weights.iter().any(|w| !w.is_finite()) {
            return Err(PolicyError::Malformed("weights must be finite".into()));
        }
        Ok(Self { action_dim, obs_dim, weights, normalizer })
    }

    pub fn action_dim(&self) -> usize {
        self.action_dim
    }

    pub fn obs_dim(&self) -> usize {
        self.obs_dim
    }

    pub fn weights(&self) -> &[f64] {
        &self.weights
    }

    pub fn weights_mut(&mut self) -> &mut [f64] {
        &mut self.weights
    }

    pub fn is_finite(&self) -> bool {
        self.weights.iter().all(|w| w.is_finite())
    }

    /// Action for an observation using the current normalizer statistics.
    pub fn act(&self, obs: &[f64], map: &ActionMap) -> Vec<f64> {
        let mut z = vec![0.0; self.obs_dim];
        self.normalizer.whitener().apply(obs, &mut z);
        map.apply(&linear(&self.weights, self.action_dim, &z))
    }
}

/// `W z` for row-major `W`.
pub fn linear(weights: &[f64], action_dim: usize, z: &[f64]) -> Vec<f64> {
    let obs_dim = z.len();
    (0..action_dim)
        .map(|a| weights[a * obs_dim..(a + 1) * obs_dim].iter().zip(z).map(|(w, x)| w * x).sum())
        .collect()
}

#[derive(Debug, Clone, PartialEq, Error)]
pub enum PolicyError {
    #[error("malformed policy record: {0}")]
    Malformed(String),
    #[error("policy record line {line}: {message}")]
    Parse { line: usize, message: String },
}

const MAGIC: &str = "circulate-linear-policy 1";

/// A policy together with the environment it was trained on.
#[derive(Debug, Clone, PartialEq)]
pub struct PolicyRecord {
    pub env: String,
    pub policy: LinearPolicy,
}

fn push_values(out: &mut String, key: &str, values: &[f64]) {
    out.push_str(key);
    for v in values {
        let _ = write!(out, " {v:.16e}");
    }
    out.push('\n');
}

/// Plain-text record; every number is written with 17 significant digits so
/// loading restores it exactly.
pub fn save_policy(policy: &LinearPolicy, env: &str) -> String {
    let mut out = String::new();
    let _ = writeln!(out, "{MAGIC}");
    let _ = writeln!(out, "env {env}");
    let _ = writeln!(out, "action_dim {}", policy.action_dim);
    let _ = writeln!(out, "obs_dim {}", policy.obs_dim);
    for a in 0..policy.action_dim {
        push_values(&mut out, "weights", &policy.weights[a * policy.obs_dim..(a + 1) * policy.obs_dim]);
    }
    let _ = writeln!(out, "count {}", policy.normalizer.count);
    push_values(&mut out, "mean", &policy.normalizer.mean);
    push_values(&mut out, "m2", &policy.normalizer.m2);
    out
}

pub fn load_policy(text: &str) -> Result<PolicyRecord, PolicyError> {
    let mut lines = text
        .lines()
        .enumerate()
        .map(|(n, l)| (n + 1, l.trim()))
        .filter(|(_, l)| !l.is_empty() && !l.starts_with('#'));
    let parse_err = |line: usize, message: String| PolicyError::Parse { line, message };
    let mut next = |key: &str| -> Result<(usize, Vec<String>), PolicyError> {
        let (line, raw) = lines.next().ok_or_else(|| PolicyError::Malformed(format!("missing '{key}' line")))?;
        let mut parts = raw.split_whitespace();
        if parts.next() != Some(key) {
            return Err(parse_err(line, format!("expected '{key}'")));
        }
        Ok((line, parts.map(str::to_owned).collect()))
    };
    let floats = |line: usize, fields: &[String], expected: usize| -> Result<Vec<f64>, PolicyError> {
        if fields.len() != expected {
            return Err(parse_err(line, format!("expected {expected} values, found {}", fields.len())));
        }
        fields
            .iter()
            .map(|f| match f.parse::<f64>() {
                Ok(v) if v.is_finite() => Ok(v),
                Ok(v) => Err(parse_err(line, format!("non-finite value {v}"))),
                Err(_) => Err(parse_err(line, format!("cannot parse '{f}'"))),
            })
            .collect()
    };
    let integer = |line: usize, fields: &[String]| -> Result<u64, PolicyError> {
        match fields {
            [f] => f.parse::<u64>().map_err(|_| parse_err(line, format!("cannot parse '{f}' as an integer"))),
            _ => Err(parse_err(line, "expected one integer".into())),
        }
    };

    let (line, version) = next("circulate-linear-policy")?;
    if version != ["1"] {
        return Err(parse_err(line, "unsupported record version".into()));
    }
    let (line, env) = next("env")?;
    let [env] = <[String; 1]>::try_from(env).map_err(|_| parse_err(line, "expected one environment name".into()))?;
    let (line, f) = next("action_dim")?;
    let action_dim = integer(line, &f)? as usize;
    let (line, f) = next("obs_dim")?;
    let obs_dim = integer(line, &f)? as usize;
    if action_dim == 0 || obs_dim == 0 || action_dim > 1 << 16 || obs_dim > 1 << 16 {
        return Err(parse_err(line, "dimensions must be in 1..=65536".into()));
    }
    let mut weights = Vec::with_capacity(action_dim * obs_dim);
    for _ in 0..action_dim {
        let (line, f) = next("weights")?;
        weights.extend(floats(line, &f, obs_dim)?);
    }
    let (line, f) = next("count")?;
    let count = integer(line, &f)?;
    let (line, f) = next("mean")?;
    let mean = floats(line, &f, obs_dim)?;
    let (line, f) = next("m2")?;
    let m2 = floats(line, &f, obs_dim)?;
    if let Some((line, _)) = lines.next() {
        return Err(parse_err(line, "unexpected trailing content".into()));
    }
    let normalizer = Normalizer::from_parts(count, mean, m2)?;
    Ok(PolicyRecord { env, policy: LinearPolicy::from_parts(action_dim, obs_dim, weights, normalizer)? })
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    fn two_pass(xs: &[Vec<f64>], i: usize) -> (f64, f64) {
        let n = xs.len() as f64;
        let mean = xs.iter().map(|x| x[i]).sum::<f64>() / n;
        let var = xs.iter().map(|x| (x[i] - mean).powi(2)).sum::<f64>() / n;
        (mean, var)
    }

    fn close(a: f64, b: f64, rel: f64) -> bool {
        (a - b).abs() <= rel * a.abs().max(b.abs()) + 1e-300
    }

    #[test]
    fn whitening_defaults_to_identity() {
        let mut n = Normalizer::new(2);
        assert_eq!(n.whitening_std(), vec![1.0, 1.0]);
        n.observe(&[5.0, 1.0]);
        assert_eq!(n.whitening_std(), vec![1.0, 1.0]);
        n.observe(&[7.0, 1.0]);
        // second component has zero spread
        assert_eq!(n.whitening_std(), vec![1.0, 1.0]);
        n.observe(&[9.0, 1.0]);
        let s = n.whitening_std();
        assert!((s[0] - (8.0f64 / 3.0).sqrt()).abs() < 1e-15);
        assert_eq!(s[1], 1.0);
    }

    #[test]
    fn action_map_scales_and_clips() {
        let space = BoxSpace::new(vec![0.0], vec![10.0]).unwrap();
        let map = ActionMap::new(&space);
        assert_eq!(map.apply(&[0.0]), vec![5.0]);
        assert_eq!(map.apply(&[0.5]), vec![7.5]);
        assert_eq!(map.apply(&[3.0]), vec![10.0]);
        assert_eq!(map.apply(&[-3.0]), vec![0.0]);
    }

    #[test]
    fn zero_policy_outputs_the_box_center() {
        let p = LinearPolicy::zeros(1, 3);
        let map = ActionMap::new(&BoxSpace::new(vec![-2.0], vec![6.0]).unwrap());
        assert_eq!(p.act(&[1.0, 2.0, 3.0], &map), vec![2.0]);
    }

    #[test]
    fn record_round_trip_is_byte_identical() {
        let mut p = LinearPolicy::zeros(2, 3);
        p.weights_mut().copy_from_slice(&[0.1, -1.0 / 3.0, 2e-300, 1e300, -0.0, std::f64::consts::PI]);
        for x in [[1.0, 2.0, 3.0], [0.3, -7.0, 1e-5], [2.5, 2.5, 2.5]] {
            p.normalizer.observe(&x);
        }
        let text = save_policy(&p, "transport-truck");
        let rec = load_policy(&text).unwrap();
        assert_eq!(rec.env, "transport-truck");
        assert_eq!(rec.policy, p);
        assert_eq!(save_policy(&rec.policy, &rec.env), text);
    }

    #[test]
    fn malformed_records_are_rejected() {
        let p = LinearPolicy::zeros(1, 2);
        let good = save_policy(&p, "incinerator");
        assert!(load_policy(&good).is_ok());
        let nan = good.replacen("weights 0.0000000000000000e0", "weights NaN", 1);
        assert_ne!(nan, good);
        assert!(load_policy(&nan).is_err());
        assert!(load_policy(&good.replace("obs_dim 2", "obs_dim 3")).is_err());
        assert!(load_policy("").is_err());
        assert!(load_policy(&format!("{good}extra 1\n")).is_err());
        assert!(load_policy(&good.replace("m2 0.0000000000000000e0", "m2 -1.0000000000000000e0")).is_err());
    }

    proptest! {
        #[test]
        fn streaming_moments_match_two_pass(xs in prop::collection::vec(prop::collection::vec(-1e3f64..1e3, 3), 2..200)) {
            let mut n = Normalizer::new(3);
            for x in &xs {
                n.observe(x);
            }
            let var = n.variance();
            for i in 0..3 {
                let (m, v) = two_pass(&xs, i);
                prop_assert!(close(n.mean()[i], m, 1e-12) || (n.mean()[i] - m).abs() < 1e-12);
                prop_assert!(close(var[i], v, 1e-12) || (var[i] - v).abs() < 1e-9);
            }
        }

        #[test]
        fn merging_matches_sequential(
            a in prop::collection::vec(prop::collection::vec(-1e3f64..1e3, 2), 0..50),
            b in prop::collection::vec(prop::collection::vec(-1e3f64..1e3, 2), 0..50),
        ) {
            let mut left = Normalizer::new(2);
            let mut right = Normalizer::new(2);
            let mut all = Normalizer::new(2);
            for x in &a { left.observe(x); all.observe(x); }
            for x in &b { right.observe(x); all.observe(x); }
            left.merge(&right);
            prop_assert_eq!(left.count(), all.count());
            for i in 0..2 {
                prop_assert!((left.mean()[i] - all.mean()[i]).abs() <= 1e-9);
                prop_assert!((left.m2()[i] - all.m2()[i]).abs() <= 1e-9 * (1.0 + all.m2()[i]));
            }
        }

        #[test]
        fn record_round_trip(ws in prop::collection::vec(any::<f64>().prop_filter("finite", |v| v.is_finite()), 4)) {
            let p = LinearPolicy::from_parts(2, 2, ws, Normalizer::new(2)).unwrap();
            let text = save_policy(&p, "x");
            prop_assert_eq!(load_policy(&text).unwrap().policy, p);
        }
    }
}

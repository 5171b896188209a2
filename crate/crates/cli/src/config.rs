//! Run configuration files.
//!
//! A config is a TOML document with optional top-level `seed` and `out` keys
//! and one block per concern. Unknown keys anywhere are errors. Relative paths
//! inside a config resolve against the config file's directory.
//!
//! ```toml
//! seed = 7
//!
//! [env]
//! name = "transport-truck"
//! horizon = 1000
//!
//! [trainer]
//! algorithm = "ars"
//! iterations = 300
//! ```

use anyhow::{bail, Context, Result};
use circulate::circularity::SolidScenario;
use circulate::env::EnvConfig;
use circulate::trainers::TrainerConfig;
use serde::{Deserialize, Serialize};
use std::path::{Path, PathBuf};

#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct RunConfig {
    pub seed: Option<u64>,
    pub out: Option<PathBuf>,
    pub env: Option<EnvConfig>,
    pub trainer: Option<TrainerConfig>,
    pub simulate: Option<SimulateBlock>,
    pub evaluate: Option<EvaluateBlock>,
    pub verify: Option<VerifyBlock>,
    pub ledger: Option<LedgerBlock>,
    pub solid_scenario: Option<SolidBlock>,
    pub netzero: Option<NetzeroBlock>,
}

#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct SimulateBlock {
    /// Policy record to act with.
    pub policy: Option<PathBuf>,
    /// Constant action, used when no policy is given.
    pub action: Option<Vec<f64>>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct EvaluateBlock {
    pub policy: Option<PathBuf>,
    pub episodes: usize,
}

impl Default for EvaluateBlock {
    fn default() -> Self {
        Self { policy: None, episodes: 100 }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct VerifyBlock {
    /// Constant action; zeros when omitted.
    pub action: Option<Vec<f64>>,
    /// Seconds; one full episode when omitted.
    pub horizon: Option<f64>,
    pub rel_tol: f64,
}

impl Default for VerifyBlock {
    fn default() -> Self {
        Self { action: None, horizon: None, rel_tol: 1e-6 }
    }
}

/// Inclusive, evenly spaced sample times.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct Grid {
    pub start: f64,
    pub end: f64,
    pub points: usize,
}

impl Grid {
    pub fn times(&self) -> Result<Vec<f64>> {
        if !(self.start.is_finite() && self.end.is_finite() && self.start >= 0.0 && self.end >= self.start) {
            bail!("grid needs finite 0 <= start <= end (got {} .. {})", self.start, self.end);
        }
        match self.points {
            0 => bail!("grid needs at least one point"),
            1 => Ok(vec![self.start]),
            n => {
                let step = (self.end - self.start) / (n - 1) as f64;
                Ok((0..n).map(|k| if k == n - 1 { self.end } else { self.start + step * k as f64 }).collect())
            }
        }
    }
}

fn default_delta() -> f64 {
    1.0
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct LedgerBlock {
    /// Network TOML.
    pub network: PathBuf,
    /// Batch event log (`time,mass,from,to`).
    pub events: Option<PathBuf>,
    /// Continuous flow file.
    pub flows: Option<PathBuf>,
    #[serde(default = "default_delta")]
    pub delta: f64,
    pub grid: Grid,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SolidBlock {
    pub scenario: SolidScenario,
    pub grid: Grid,
}

/// One side of a net-zero balance: a column of a trajectory CSV or a constant
/// rate over `[0, end]`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct FlowSource {
    pub file: Option<PathBuf>,
    #[serde(default = "default_rate_column")]
    pub column: String,
    #[serde(default = "default_time_column")]
    pub time_column: String,
    pub rate: Option<f64>,
    pub end: Option<f64>,
}

fn default_rate_column() -> String {
    "m_dot_23".into()
}

fn default_time_column() -> String {
    "t".into()
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct NetzeroBlock {
    pub emitter: FlowSource,
    pub remover: FlowSource,
    #[serde(default = "default_delta")]
    pub delta: f64,
    pub grid: Grid,
}

impl RunConfig {
    pub fn parse(text: &str) -> Result<Self> {
        Ok(toml::from_str(text)?)
    }

    /// Reads `path` and resolves every relative path in it against the
    /// file's directory.
    pub fn load(path: &Path) -> Result<Self> {
        let text = std::fs::read_to_string(path).with_context(|| format!("cannot read config {}", path.display()))?;
        let mut cfg = Self::parse(&text).with_context(|| format!("invalid config {}", path.display()))?;
        let base = path.parent().unwrap_or(Path::new("."));
        cfg.resolve(base);
        Ok(cfg)
    }

    fn resolve(&mut self, base: &Path) {
        let fix = |p: &mut PathBuf| {
            if p.is_relative() {
                *p = base.join(&*p);
            }
        };
        if let Some(s) = &mut self.simulate {
            s.policy.as_mut().map(fix);
        }
        if let Some(e) = &mut self.evaluate {
            e.policy.as_mut().map(fix);
        }
        if let Some(l) = &mut self.ledger {
            fix(&mut l.network);
            l.events.as_mut().map(fix);
            l.flows.as_mut().map(fix);
        }
        if let Some(n) = &mut self.netzero {
            n.emitter.file.as_mut().map(fix);
            n.remover.file.as_mut().map(fix);
        }
    }

    pub fn env(&self) -> Result<&EnvConfig> {
        self.env.as_ref().context("config has no [env] block")
    }

    pub fn trainer(&self) -> Result<&TrainerConfig> {
        self.trainer.as_ref().context("config has no [trainer] block")
    }

    /// The config as TOML, for echoing into outputs.
    pub fn echo(&self) -> String {
        toml::to_string(self).unwrap_or_default()
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn unknown_keys_are_rejected() {
        assert!(RunConfig::parse("sed = 3\n").is_err());
        assert!(RunConfig::parse("[env]\nname = \"transport-truck\"\nhorizn = 3\n").is_err());
        assert!(RunConfig::parse("[trainer]\nalgorithm = \"ars\"\nalpha = 1\n").is_err());
    }

    #[test]
    fn invalid_env_names_list_the_valid_ones() {
        let e = RunConfig::parse("[env]\nname = \"rocket\"\n").unwrap_err().to_string();
        for name in EnvConfig::names() {
            assert!(e.contains(name), "{e}");
        }
    }

    #[test]
    fn parse_errors_report_the_line() {
        let e = RunConfig::parse("seed = 1\n\n[verify]\nhorizon = 10.0\nrel_tol = \"x\"\n").unwrap_err().to_string();
        assert!(e.contains("line 5"), "{e}");
        let e = RunConfig::parse("seed = 1\n\n[env]\nname = \"incinerator\"\nf_in = \"x\"\n").unwrap_err().to_string();
        assert!(e.contains("line 3") && e.contains("\"x\""), "{e}");
    }

    #[test]
    fn grid_endpoints_are_exact() {
        let g = Grid { start: 0.1, end: 0.7, points: 7 };
        let t = g.times().unwrap();
        assert_eq!(t.len(), 7);
        assert_eq!(t[0], 0.1);
        assert_eq!(t[6], 0.7);
        assert!(Grid { start: 1.0, end: 0.0, points: 2 }.times().is_err());
        assert!(Grid { start: 0.0, end: 1.0, points: 0 }.times().is_err());
    }

    #[test]
    fn echo_round_trips() {
        let cfg = RunConfig::parse("seed = 4\n[env]\nname = \"co2-microalgae-droop\"\nd = 0.3\n").unwrap();
        assert_eq!(RunConfig::parse(&cfg.echo()).unwrap(), cfg);
    }
}

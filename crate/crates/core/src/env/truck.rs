//! Transport truck: a point mass pushed along a line towards the incinerator.
//!
//! State `[x₁ position m, x₂ speed m/s]`, action traction force `F` in N,
//! `ẋ₁ = x₂`, `ẋ₂ = F / (m_truck + m_u)`. The episode only ends by truncation.

use super::integrate::{DynamicsError, IntegratorConfig, Method, OdeSystem};
use super::{BoxSpace, Columns, EnvError, Plant};
use rand::Rng;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};
use std::collections::BTreeMap;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct TruckParams {
    /// Empty truck mass, kg.
    pub m_truck: f64,
    /// Payload mass, kg.
    pub m_u: f64,
    /// Incinerator position, m.
    pub x_inc: f64,
    /// Force bound, N; the action box is `[-f_max, f_max]`.
    pub f_max: f64,
    pub dt: f64,
    pub substeps: usize,
    pub method: Method,
    pub horizon: usize,
    pub x0_min: f64,
    pub x0_max: f64,
    pub v0_min: f64,
    pub v0_max: f64,
}

impl Default for TruckParams {
    fn default() -> Self {
        Self {
            m_truck: 10_000.0,
            m_u: 2_000.0,
            x_inc: 1_000.0,
            f_max: 5e4,
            dt: 0.5,
            substeps: 1,
            method: Method::Rk4,
            horizon: 1000,
            x0_min: -10.0,
            x0_max: 10.0,
            v0_min: 0.0,
            v0_max: 0.0,
        }
    }
}

impl TruckParams {
    pub fn m_tot(&self) -> f64 {
        self.m_truck + self.m_u
    }

    pub fn validate(&self) -> Result<(), EnvError> {
        let bad = |m: String| Err(EnvError::InvalidParams(m));
        if !(self.m_truck >= 0.0 && self.m_u >= 0.0 && self.m_tot() > 0.0 && self.m_tot().is_finite()) {
            return bad(format!("masses must be >= 0 with m_truck + m_u > 0 (got {} + {})", self.m_truck, self.m_u));
        }
        if !(self.f_max.is_finite() && self.f_max > 0.0) {
            return bad(format!("f_max must be finite and > 0 (got {})", self.f_max));
        }
        if !self.x_inc.is_finite() {
            return bad("x_inc must be finite".into());
        }
        if self.horizon == 0 {
            return bad("horizon must be >= 1".into());
        }
        for (name, lo, hi) in [("x0", self.x0_min, self.x0_max), ("v0", self.v0_min, self.v0_max)] {
            if !(lo.is_finite() && hi.is_finite() && lo <= hi) {
                return bad(format!("{name}_min <= {name}_max must hold with finite bounds (got {lo}, {hi})"));
            }
        }
        IntegratorConfig::new(self.dt, self.substeps, self.method)
            .map(|_| ())
            .map_err(|e| EnvError::InvalidParams(e.to_string()))
    }
}

pub fn truck_dynamics(x: &[f64; 2], force: f64, p: &TruckParams) -> [f64; 2] {
    [x[1], force / p.m_tot()]
}

/// `-[(x_inc - x₁)² + 0.1·x₂² + 0.001·F²]`, maximal (0) at rest on the target
/// with no force applied.
pub fn truck_reward(x: &[f64; 2], force: f64, p: &TruckParams) -> f64 {
    let e = p.x_inc - x[0];
    -(e * e + 0.1 * x[1] * x[1] + 0.001 * force * force)
}

#[derive(Debug, Clone)]
pub struct TruckPlant {
    params: TruckParams,
}

impl TruckPlant {
    pub fn new(params: TruckParams) -> Result<Self, EnvError> {
        params.validate()?;
        Ok(Self { params })
    }

    pub fn params(&self) -> &TruckParams {
        &self.params
    }
}

impl OdeSystem for TruckPlant {
    fn dim(&self) -> usize {
        2
    }

    fn derivative(&self, _t: f64, x: &[f64], u: &[f64], dx: &mut [f64]) -> Result<(), DynamicsError> {
        let d = truck_dynamics(&[x[0], x[1]], u[0], &self.params);
        dx.copy_from_slice(&d);
        Ok(())
    }
}

fn uniform(rng: &mut ChaCha8Rng, lo: f64, hi: f64) -> f64 {
    if lo == hi {
        lo
    } else {
        rng.random_range(lo..=hi)
    }
}

impl Plant for TruckPlant {
    const NAME: &'static str = "transport-truck";

    fn integrator(&self) -> IntegratorConfig {
        IntegratorConfig { dt: self.params.dt, substeps: self.params.substeps, method: self.params.method }
    }

    fn horizon(&self) -> usize {
        self.params.horizon
    }

    fn action_space(&self) -> BoxSpace {
        BoxSpace::new(vec![-self.params.f_max], vec![self.params.f_max]).expect("f_max validated")
    }

    fn columns(&self) -> Columns {
        Columns { state: &["x1", "x2"], action: &["F"], reward: "r", extras: &[] }
    }

    fn initial_state(&self, rng: &mut ChaCha8Rng) -> Vec<f64> {
        let p = &self.params;
        let x0 = uniform(rng, p.x0_min, p.x0_max);
        let v0 = uniform(rng, p.v0_min, p.v0_max);
        vec![x0, v0]
    }

    fn reward(&self, x: &[f64], u: &[f64], _extras: &mut BTreeMap<String, f64>) -> f64 {
        truck_reward(&[x[0], x[1]], u[0], &self.params)
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::env::{Environment, OdeEnv};
    use proptest::prelude::*;

    fn p() -> TruckParams {
        TruckParams::default()
    }

    #[test]
    fn dynamics_examples() {
        assert_eq!(truck_dynamics(&[0.0, 0.0], 0.0, &p()), [0.0, 0.0]);
        let five = TruckParams { m_truck: 3.0, m_u: 2.0, ..p() };
        assert_eq!(truck_dynamics(&[3.0, 2.0], 10.0, &five), [2.0, 2.0]);
    }

    #[test]
    fn reward_examples() {
        assert_eq!(truck_reward(&[1000.0, 0.0], 0.0, &p()), 0.0);
        let one = TruckParams { x_inc: 1.0, ..p() };
        assert_eq!(truck_reward(&[0.0, 0.0], 0.0, &one), -1.0);
        assert_eq!(truck_reward(&[1000.0, 1.0], 0.0, &p()), -0.1);
    }

    #[test]
    fn constant_force_rollout_matches_closed_form() {
        let params = TruckParams { dt: 0.01, horizon: 1000, x0_min: 3.0, x0_max: 3.0, v0_min: -1.0, v0_max: -1.0, ..p() };
        let mut env = OdeEnv::new(TruckPlant::new(params.clone()).unwrap());
        env.reset(Some(0));
        let f = 2.4e4;
        let mut last = None;
        for _ in 0..1000 {
            last = Some(env.step(&[f]).unwrap());
        }
        let x = last.unwrap().info.state;
        let a = f / params.m_tot();
        let exact = [3.0 - 10.0 + 0.5 * a * 100.0, -1.0 + a * 10.0];
        for i in 0..2 {
            assert!((x[i] - exact[i]).abs() <= 1e-6 * exact[i].abs(), "{x:?} vs {exact:?}");
        }
    }

    #[test]
    fn parameter_validation() {
        assert!(TruckPlant::new(TruckParams { f_max: 0.0, ..p() }).is_err());
        assert!(TruckPlant::new(TruckParams { m_truck: 0.0, m_u: 0.0, ..p() }).is_err());
        assert!(TruckPlant::new(TruckParams { x0_min: 1.0, x0_max: 0.0, ..p() }).is_err());
        assert!(TruckPlant::new(TruckParams { substeps: 0, ..p() }).is_err());
    }

    proptest! {
        #[test]
        fn reward_is_never_positive(x1 in -1e4f64..1e4, x2 in -100f64..100.0, f in -5e4f64..5e4) {
            let r = truck_reward(&[x1, x2], f, &p());
            prop_assert!(r <= 0.0);
            if r == 0.0 {
                prop_assert!(x1 == 1000.0 && x2 == 0.0 && f == 0.0);
            }
        }

        #[test]
        fn momentum_matches_impulse(forces in prop::collection::vec(-5e4f64..5e4, 1..60), x0 in -10f64..10.0) {
            let params = TruckParams { x0_min: x0, x0_max: x0, horizon: 100, ..p() };
            let mut env = OdeEnv::new(TruckPlant::new(params.clone()).unwrap());
            env.reset(Some(0));
            let mut v = 0.0;
            let mut impulse = 0.0;
            for f in &forces {
                v = env.step(&[*f]).unwrap().info.state[1];
                impulse += f * params.dt;
            }
            let expected = impulse / params.m_tot();
            prop_assert!((v - expected).abs() <= 1e-9 * (1.0 + expected.abs()));
        }

        #[test]
        fn mirroring_mirrors_the_trajectory(
            forces in prop::collection::vec(-5e4f64..5e4, 1..40),
            x0 in -10f64..10.0,
            c in -500f64..500.0,
        ) {
            let base = TruckParams { x0_min: x0, x0_max: x0, horizon: 100, ..p() };
            let mirrored = TruckParams {
                x_inc: 2.0 * c - base.x_inc,
                x0_min: 2.0 * c - x0,
                x0_max: 2.0 * c - x0,
                ..base.clone()
            };
            let mut a = OdeEnv::new(TruckPlant::new(base).unwrap());
            let mut b = OdeEnv::new(TruckPlant::new(mirrored).unwrap());
            a.reset(Some(0));
            b.reset(Some(0));
            for f in &forces {
                let ra = a.step(&[*f]).unwrap();
                let rb = b.step(&[-*f]).unwrap();
                let (sa, sb) = (&ra.info.state, &rb.info.state);
                prop_assert!((sa[0] - (2.0 * c - sb[0])).abs() <= 1e-9 * (1.0 + sa[0].abs() + c.abs()));
                prop_assert!((sa[1] + sb[1]).abs() <= 1e-9 * (1.0 + sa[1].abs()));
                prop_assert!((ra.reward - rb.reward).abs() <= 1e-9 * (1.0 + ra.reward.abs()));
            }
        }
    }
}

//! Microalgae photobioreactors in chemostat form, with light intensity as the
//! action and removed CO₂ mass as the reward.
//!
//! Monod state `[s_n, x_b]`:
//! `μ = μ_max·s/(K_s+s)·I/(K_I+I)`, `ρ = μ·x_b/Y`,
//! `ṡ_n = D(s_in - s_n) - ρ`, `ẋ_b = (μ - D)·x_b`.
//!
//! Droop state `[s_n, q, x_b]`:
//! `ρ = ρ_max·s/(K_s+s)`, `μ = μ̄·(1 - k_q/q)·I/(K_I+I)`,
//! `ṡ_n = D(s_in - s_n) - ρ·x_b`, `q̇ = ρ - μ·q`, `ẋ_b = (μ - D)·x_b`.
//!
//! Model time is in days; concentrations in g/L.

use super::integrate::{DynamicsError, IntegratorConfig, Method, OdeSystem};
use super::{BoxSpace, Columns, EnvError, Plant};
use rand::Rng;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};
use std::collections::BTreeMap;

pub const SECONDS_PER_DAY: f64 = 86_400.0;

/// Relative margin above `k_q` that the Droop quota is projected onto.
pub const QUOTA_MARGIN: f64 = 1e-12;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct AlgaeParams {
    /// Maximal growth rate, 1/day (the theoretical maximum `μ̄` for Droop).
    #[serde(alias = "mu_bar")]
    pub mu_max: f64,
    /// Substrate half-saturation, g/L.
    pub k_s: f64,
    /// Light half-saturation, µmol·m⁻²·s⁻¹.
    pub k_i: f64,
    /// Maximal uptake rate, g/(g·day). Droop only.
    pub rho_max: f64,
    /// Subsistence quota, g/g. Droop only.
    pub k_q: f64,
    /// Biomass yield on substrate, g/g. Monod only.
    pub y: f64,
    /// Dilution rate, 1/day.
    pub d: f64,
    /// Inflow substrate concentration, g/L.
    pub s_in: f64,
    /// Fraction of uptake that is CO₂, in (0, 1).
    pub k_co2: f64,
    pub i_max: f64,
    /// Culture volume, L.
    pub v: f64,
    /// Reward penalty per unit light per day.
    pub light_cost: f64,
    /// Days per control step.
    pub dt: f64,
    pub substeps: usize,
    pub method: Method,
    pub horizon: usize,
    pub s_n0: f64,
    pub x_b0: f64,
    pub q0: f64,
    /// Each initial component is scaled by `1 + U[-init_jitter, init_jitter]`.
    pub init_jitter: f64,
}

impl Default for AlgaeParams {
    fn default() -> Self {
        Self {
            mu_max: 2.0,
            k_s: 0.1,
            k_i: 100.0,
            rho_max: 0.073,
            k_q: 0.018,
            y: 0.5,
            d: 0.5,
            s_in: 0.5,
            k_co2: 0.5,
            i_max: 1000.0,
            v: 1000.0,
            light_cost: 0.0,
            dt: 0.01,
            substeps: 5,
            method: Method::Rk4,
            horizon: 1000,
            s_n0: 0.2,
            x_b0: 0.05,
            q0: 0.03,
            init_jitter: 0.0,
        }
    }
}

impl AlgaeParams {
    pub fn validate(&self, droop: bool) -> Result<(), EnvError> {
        let mut positive = vec![
            ("mu_max", self.mu_max),
            ("k_s", self.k_s),
            ("k_i", self.k_i),
            ("d", self.d),
            ("s_in", self.s_in),
            ("i_max", self.i_max),
            ("v", self.v),
        ];
        if droop {
            positive.extend([("rho_max", self.rho_max), ("k_q", self.k_q)]);
        } else {
            positive.push(("y", self.y));
        }
        for (name, v) in positive {
            if !(v.is_finite() && v > 0.0) {
                return Err(EnvError::InvalidParams(format!("{name} must be finite and > 0 (got {v})")));
            }
        }
        if !(self.k_co2 > 0.0 && self.k_co2 < 1.0) {
            return Err(EnvError::InvalidParams(format!("k_co2 must lie in (0, 1) (got {})", self.k_co2)));
        }
        if !(self.light_cost.is_finite() && self.light_cost >= 0.0) {
            return Err(EnvError::InvalidParams("light_cost must be finite and >= 0".into()));
        }
        if !(self.s_n0 >= 0.0 && self.x_b0 >= 0.0 && self.s_n0.is_finite() && self.x_b0.is_finite()) {
            return Err(EnvError::InvalidParams("s_n0 and x_b0 must be finite and >= 0".into()));
        }
        if droop && !(self.q0.is_finite() && self.q0 >= self.k_q) {
            return Err(EnvError::InvalidParams(format!("q0 must be >= k_q (got {} < {})", self.q0, self.k_q)));
        }
        if !(0.0..1.0).contains(&self.init_jitter) {
            return Err(EnvError::InvalidParams("init_jitter must lie in [0, 1)".into()));
        }
        if self.horizon == 0 {
            return Err(EnvError::InvalidParams("horizon must be >= 1".into()));
        }
        IntegratorConfig::new(self.dt, self.substeps, self.method)
            .map(|_| ())
            .map_err(|e| EnvError::InvalidParams(e.to_string()))
    }

    /// Non-fatal configuration warnings.
    pub fn warnings(&self) -> Vec<String> {
        let mut w = Vec::new();
        if self.d >= self.mu_max {
            w.push(format!(
                "dilution rate d = {} is not below mu_max = {}; the culture washes out",
                self.d, self.mu_max
            ));
        }
        w
    }

    pub fn light_factor(&self, i: f64) -> f64 {
        i / (self.k_i + i)
    }

    fn jittered(&self, rng: &mut ChaCha8Rng, v: f64) -> f64 {
        let j = self.init_jitter;
        if j > 0.0 {
            v * (1.0 + rng.random_range(-j..=j))
        } else {
            v
        }
    }
}

pub fn monod_growth(s_n: f64, i: f64, p: &AlgaeParams) -> f64 {
    p.mu_max * s_n / (p.k_s + s_n) * p.light_factor(i)
}

/// Derivative of `[s_n, x_b]` and the volumetric uptake `ρ` in g/(L·day).
pub fn monod_dynamics(x: &[f64; 2], i: f64, p: &AlgaeParams) -> ([f64; 2], f64) {
    let [s, xb] = *x;
    let mu = monod_growth(s, i, p);
    let rho = mu * xb / p.y;
    ([p.d * (p.s_in - s) - rho, (mu - p.d) * xb], rho)
}

pub fn droop_uptake(s_n: f64, p: &AlgaeParams) -> f64 {
    p.rho_max * s_n / (p.k_s + s_n)
}

pub fn droop_growth(q: f64, i: f64, p: &AlgaeParams) -> f64 {
    p.mu_max * (1.0 - p.k_q / q) * p.light_factor(i)
}

/// Derivative of `[s_n, q, x_b]` and the per-biomass uptake `ρ` in g/(g·day).
pub fn droop_dynamics(x: &[f64; 3], i: f64, p: &AlgaeParams) -> ([f64; 3], f64) {
    let [s, q, xb] = *x;
    let rho = droop_uptake(s, p);
    let mu = droop_growth(q, i, p);
    ([p.d * (p.s_in - s) - rho * xb, rho - mu * q, (mu - p.d) * xb], rho)
}

/// CO₂ removed during one step (g, the reward before any light cost) and the
/// matching removal rate in kg/s, from a total uptake in g/day.
pub fn algae_reward(rho_total: f64, p: &AlgaeParams) -> (f64, f64) {
    let rho_co2 = p.k_co2 * rho_total;
    (rho_co2 * p.dt, rho_co2 / 1000.0 / SECONDS_PER_DAY)
}

/// Monod fixed point `(s*, x*)` with `μ = D` under constant light, if one exists.
pub fn monod_equilibrium(i: f64, p: &AlgaeParams) -> Option<(f64, f64)> {
    let g = p.d / (p.mu_max * p.light_factor(i));
    if !(g < 1.0) {
        return None;
    }
    let s = p.k_s * g / (1.0 - g);
    (s < p.s_in).then_some((s, p.y * (p.s_in - s)))
}

/// Droop fixed point `(s*, q*, x*)` with `μ = D` under constant light, if one exists.
pub fn droop_equilibrium(i: f64, p: &AlgaeParams) -> Option<(f64, f64, f64)> {
    let g = p.d / (p.mu_max * p.light_factor(i));
    if !(g < 1.0) {
        return None;
    }
    let q = p.k_q / (1.0 - g);
    let uptake = p.d * q;
    if uptake >= p.rho_max {
        return None;
    }
    let s = p.k_s * uptake / (p.rho_max - uptake);
    (s < p.s_in).then(|| (s, q, (p.s_in - s) / q))
}

macro_rules! algae_plant {
    ($plant:ident, $name:literal, $dim:literal, $droop:literal) => {
        #[derive(Debug, Clone)]
        pub struct $plant {
            params: AlgaeParams,
        }

        impl $plant {
            pub fn new(params: AlgaeParams) -> Result<Self, EnvError> {
                params.validate($droop)?;
                Ok(Self { params })
            }

            pub fn params(&self) -> &AlgaeParams {
                &self.params
            }
        }

        impl Plant for $plant {
            const NAME: &'static str = $name;

            fn integrator(&self) -> IntegratorConfig {
                IntegratorConfig { dt: self.params.dt, substeps: self.params.substeps, method: self.params.method }
            }

            fn horizon(&self) -> usize {
                self.params.horizon
            }

            fn action_space(&self) -> BoxSpace {
                BoxSpace::new(vec![0.0], vec![self.params.i_max]).expect("i_max validated")
            }

            fn observation_space(&self) -> BoxSpace {
                BoxSpace::new(vec![0.0; $dim], vec![f64::INFINITY; $dim]).expect("static bounds")
            }

            fn columns(&self) -> Columns {
                Self::COLUMNS
            }

            fn initial_state(&self, rng: &mut ChaCha8Rng) -> Vec<f64> {
                self.initial(rng)
            }

            fn reward(&self, x: &[f64], u: &[f64], extras: &mut BTreeMap<String, f64>) -> f64 {
                let (removed, m_dot) = algae_reward(self.total_uptake(x, u[0]), &self.params);
                extras.insert("m_dot_23".into(), m_dot);
                removed - self.params.light_cost * u[0] * self.params.dt
            }

            fn post_step(&self, x: &mut [f64], extras: &mut BTreeMap<String, f64>) {
                self.project(x, extras);
            }

            fn time_unit_seconds(&self) -> f64 {
                SECONDS_PER_DAY
            }
        }
    };
}

algae_plant!(MonodPlant, "co2-microalgae-monod", 2, false);
algae_plant!(DroopPlant, "co2-microalgae-droop", 3, true);

impl MonodPlant {
    const COLUMNS: Columns = Columns { state: &["s_n", "x_b"], action: &["I"], reward: "r", extras: &["m_dot_23"] };

    fn initial(&self, rng: &mut ChaCha8Rng) -> Vec<f64> {
        let p = &self.params;
        vec![p.jittered(rng, p.s_n0), p.jittered(rng, p.x_b0)]
    }

    /// Total uptake in g/day.
    pub fn total_uptake(&self, x: &[f64], i: f64) -> f64 {
        monod_dynamics(&[x[0], x[1]], i, &self.params).1 * self.params.v
    }

    fn project(&self, _x: &mut [f64], _extras: &mut BTreeMap<String, f64>) {}
}

impl DroopPlant {
    const COLUMNS: Columns =
        Columns { state: &["s_n", "q", "x_b"], action: &["I"], reward: "r", extras: &["m_dot_23"] };

    fn initial(&self, rng: &mut ChaCha8Rng) -> Vec<f64> {
        let p = &self.params;
        let s = p.jittered(rng, p.s_n0);
        let q = p.jittered(rng, p.q0).max(p.k_q * (1.0 + QUOTA_MARGIN));
        vec![s, q, p.jittered(rng, p.x_b0)]
    }

    /// Total uptake in g/day.
    pub fn total_uptake(&self, x: &[f64], _i: f64) -> f64 {
        droop_uptake(x[0], &self.params) * x[2] * self.params.v
    }

    /// Keeps the quota at or above the subsistence floor.
    fn project(&self, x: &mut [f64], extras: &mut BTreeMap<String, f64>) {
        let floor = self.params.k_q * (1.0 + QUOTA_MARGIN);
        let projected = x[1] < floor;
        if projected {
            x[1] = floor;
        }
        extras.insert("quota_projected".into(), if projected { 1.0 } else { 0.0 });
    }
}

impl OdeSystem for MonodPlant {
    fn dim(&self) -> usize {
        2
    }

    fn derivative(&self, _t: f64, x: &[f64], u: &[f64], dx: &mut [f64]) -> Result<(), DynamicsError> {
        dx.copy_from_slice(&monod_dynamics(&[x[0], x[1]], u[0], &self.params).0);
        Ok(())
    }
}

impl OdeSystem for DroopPlant {
    fn dim(&self) -> usize {
        3
    }

    fn derivative(&self, _t: f64, x: &[f64], u: &[f64], dx: &mut [f64]) -> Result<(), DynamicsError> {
        dx.copy_from_slice(&droop_dynamics(&[x[0], x[1], x[2]], u[0], &self.params).0);
        Ok(())
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::env::{Environment, OdeEnv};
    use proptest::prelude::*;

    fn p() -> AlgaeParams {
        AlgaeParams::default()
    }

    #[test]
    fn dark_culture_washes_out() {
        let (d, rho) = monod_dynamics(&[0.2, 0.05], 0.0, &p());
        assert_eq!(rho, 0.0);
        assert_eq!(d[1], -0.5 * 0.05);
    }

    #[test]
    fn half_saturation_gives_a_quarter() {
        let params = p();
        assert_eq!(monod_growth(params.k_s, params.k_i, &params), params.mu_max / 4.0);
    }

    #[test]
    fn subsistence_quota_halts_growth() {
        let params = p();
        assert_eq!(droop_growth(params.k_q, 700.0, &params), 0.0);
        let (d, rho) = droop_dynamics(&[0.0, 0.03, 1.0], 500.0, &params);
        assert_eq!(rho, 0.0);
        assert!(d[1] <= 0.0);
    }

    #[test]
    fn reward_examples() {
        assert_eq!(algae_reward(0.0, &p()), (0.0, 0.0));
        let params = AlgaeParams { k_co2: 0.5, dt: 0.25, ..p() };
        let (r, m_dot) = algae_reward(2.0, &params);
        assert_eq!(r, 0.25);
        assert_eq!(m_dot, 1.0 / 1000.0 / SECONDS_PER_DAY);
    }

    #[test]
    fn analytic_fixed_points() {
        let (s, x) = monod_equilibrium(1000.0, &p()).unwrap();
        assert!((s - 0.0275 / 0.725).abs() < 1e-15);
        assert!((x - 0.5 * (0.5 - s)).abs() < 1e-15);
        let (_, q, _) = droop_equilibrium(1000.0, &p()).unwrap();
        assert!((q - 0.018 / 0.725).abs() < 1e-15);
        assert!(monod_equilibrium(1.0, &p()).is_none());
    }

    #[test]
    fn episode_return_is_the_sum_of_removed_mass() {
        let params = AlgaeParams { horizon: 200, ..p() };
        let plant = DroopPlant::new(params.clone()).unwrap();
        let mut env = OdeEnv::new(plant.clone());
        let mut x = env.reset(Some(0));
        let mut total = 0.0;
        let mut uptake = 0.0;
        loop {
            let i = 300.0 + 0.5 * x[2].min(1.0) * 1000.0;
            uptake += plant.total_uptake(&x, i) * params.dt;
            let r = env.step(&[i]).unwrap();
            total += r.reward;
            x = r.info.state;
            if r.truncated {
                break;
            }
        }
        assert!((total - params.k_co2 * uptake).abs() <= 1e-12 * total.abs());
    }

    #[test]
    fn washout_warning() {
        assert!(p().warnings().is_empty());
        assert_eq!(AlgaeParams { d: 3.0, ..p() }.warnings().len(), 1);
    }

    #[test]
    fn parameter_validation() {
        assert!(MonodPlant::new(AlgaeParams { k_co2: 1.0, ..p() }).is_err());
        assert!(DroopPlant::new(AlgaeParams { q0: 0.01, ..p() }).is_err());
        // q0 is irrelevant to the Monod model
        assert!(MonodPlant::new(AlgaeParams { q0: 0.01, ..p() }).is_ok());
    }

    #[test]
    fn quota_projection_is_recorded() {
        let params = AlgaeParams { s_n0: 0.0, s_in: 1e-9, q0: 0.018 * (1.0 + 2.0 * QUOTA_MARGIN), ..p() };
        let mut env = OdeEnv::new(DroopPlant::new(params.clone()).unwrap());
        env.reset(Some(0));
        for _ in 0..50 {
            let r = env.step(&[1000.0]).unwrap();
            assert!(r.info.state[1] >= params.k_q);
            assert!(r.info.extras.contains_key("quota_projected"));
        }
    }

    proptest! {
        #[test]
        fn monod_substrate_stays_bounded(
            s0 in 0.0f64..1.0,
            x0 in 0.001f64..2.0,
            lights in prop::collection::vec(0.0f64..1000.0, 1..100),
        ) {
            let params = AlgaeParams { s_n0: s0, x_b0: x0, horizon: 200, ..p() };
            let bound = s0.max(params.s_in);
            let mut env = OdeEnv::new(MonodPlant::new(params).unwrap());
            env.reset(Some(0));
            for i in lights {
                let s = env.step(&[i]).unwrap().info.state[0];
                prop_assert!(s >= -1e-12 && s <= bound + 1e-12);
            }
        }

        #[test]
        fn droop_quota_never_below_floor(
            s0 in 0.0f64..1.0,
            q0 in 0.018f64..0.1,
            x0 in 0.001f64..5.0,
            lights in prop::collection::vec(0.0f64..1000.0, 1..100),
        ) {
            let params = AlgaeParams { s_n0: s0, q0, x_b0: x0, horizon: 200, ..p() };
            let k_q = params.k_q;
            let mut env = OdeEnv::new(DroopPlant::new(params).unwrap());
            env.reset(Some(0));
            for i in lights {
                prop_assert!(env.step(&[i]).unwrap().info.state[1] >= k_q);
            }
        }

        #[test]
        fn growth_increases_with_light(q in 0.0181f64..0.1, i in 0.0f64..999.0, di in 0.001f64..1.0) {
            let params = p();
            prop_assert!(droop_growth(q, i + di, &params) > droop_growth(q, i, &params));
            prop_assert!(monod_growth(0.2, i + di, &params) > monod_growth(0.2, i, &params));
        }

        #[test]
        fn monod_step_reward_is_monotone_in_light(s in 0.001f64..1.0, x in 0.001f64..2.0, i in 0.0f64..999.0, di in 0.0f64..1.0) {
            let plant = MonodPlant::new(p()).unwrap();
            let mut e = BTreeMap::new();
            let lo = plant.reward(&[s, x], &[i], &mut e);
            let hi = plant.reward(&[s, x], &[i + di], &mut e);
            prop_assert!(hi >= lo);
        }

        #[test]
        fn droop_nutrient_balance(s in 0.0f64..1.0, q in 0.018f64..0.1, x in 0.0f64..10.0, i in 0.0f64..1000.0) {
            let params = p();
            let (d, _) = droop_dynamics(&[s, q, x], i, &params);
            let total = s + q * x;
            let lhs = d[0] + d[1] * x + q * d[2];
            let rhs = params.d * params.s_in - params.d * total;
            prop_assert!((lhs - rhs).abs() <= 1e-12 * (1.0 + rhs.abs() + total));
        }
    }
}

//! Incinerator: a six-state wastebed and freeboard model. The action is the
//! heat `Q_ext` extracted from the freeboard, used to hold the freeboard gas
//! temperature at the setpoint `T_gd`.
//!
//! State `x = [M, M_char, T_w, M_gw, M_gf, T_g]`. The constitutive terms are
//! first-order in the masses they drain, with yield fractions splitting waste
//! conversion into char and gas; every coefficient is configurable.

use super::integrate::{DynamicsError, IntegratorConfig, Method, OdeSystem};
use super::{BoxSpace, Columns, EnvError, Plant};
use rand::Rng;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};
use std::collections::BTreeMap;

/// Smallest admissible thermal-mass denominator, J/K.
pub const DENOMINATOR_EPS: f64 = 1e-6;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct IncineratorParams {
    /// Waste inflow, kg/s.
    pub f_in: f64,
    pub c_pw: f64,
    pub c_pg: f64,
    pub c_pchar: f64,
    pub c_pm: f64,
    pub m_grate: f64,
    pub m_fb: f64,
    pub f_ai: f64,
    pub t_ai: f64,
    pub f_aii: f64,
    pub t_aii: f64,
    pub t_gd: f64,
    pub q_ext_min: f64,
    pub q_ext_max: f64,
    pub k_w: f64,
    pub y_char: f64,
    pub k_char: f64,
    pub y_gas: f64,
    pub k_ash: f64,
    pub k_charout: f64,
    pub k_gout_w: f64,
    pub k_gout_f: f64,
    pub h_w: f64,
    pub h_g: f64,
    pub dt: f64,
    pub substeps: usize,
    pub method: Method,
    pub horizon: usize,
    /// Nominal initial state `[M, M_char, T_w, M_gw, M_gf, T_g]`.
    pub x0: [f64; 6],
    /// Each initial component is scaled by `1 + U[-init_jitter, init_jitter]`.
    pub init_jitter: f64,
}

impl Default for IncineratorParams {
    fn default() -> Self {
        Self {
            f_in: 5.0,
            c_pw: 1500.0,
            c_pg: 1100.0,
            c_pchar: 1000.0,
            c_pm: 500.0,
            m_grate: 10_000.0,
            m_fb: 5_000.0,
            f_ai: 8.0,
            t_ai: 400.0,
            f_aii: 4.0,
            t_aii: 300.0,
            t_gd: 1273.0,
            q_ext_min: 0.0,
            q_ext_max: 5e7,
            k_w: 0.004,
            y_char: 0.15,
            k_char: 0.002,
            y_gas: 0.7,
            k_ash: 0.001,
            k_charout: 0.001,
            k_gout_w: 0.05,
            k_gout_f: 0.05,
            h_w: 3e6,
            h_g: 2e6,
            dt: 1.0,
            substeps: 10,
            method: Method::Rk4,
            horizon: 600,
            x0: [2000.0, 100.0, 900.0, 50.0, 100.0, 1100.0],
            init_jitter: 0.05,
        }
    }
}

impl IncineratorParams {
    pub fn validate(&self) -> Result<(), EnvError> {
        let nonneg = [
            ("f_in", self.f_in),
            ("c_pw", self.c_pw),
            ("c_pg", self.c_pg),
            ("c_pchar", self.c_pchar),
            ("c_pm", self.c_pm),
            ("m_grate", self.m_grate),
            ("m_fb", self.m_fb),
            ("f_ai", self.f_ai),
            ("f_aii", self.f_aii),
            ("k_w", self.k_w),
            ("k_char", self.k_char),
            ("k_ash", self.k_ash),
            ("k_charout", self.k_charout),
            ("k_gout_w", self.k_gout_w),
            ("k_gout_f", self.k_gout_f),
            ("h_w", self.h_w),
            ("h_g", self.h_g),
            ("init_jitter", self.init_jitter),
        ];
        for (name, v) in nonneg {
            if !(v.is_finite() && v >= 0.0) {
                return Err(EnvError::InvalidParams(format!("{name} must be finite and >= 0 (got {v})")));
            }
        }
        for (name, v) in [("t_ai", self.t_ai), ("t_aii", self.t_aii), ("t_gd", self.t_gd)] {
            if !(v.is_finite() && v > 0.0) {
                return Err(EnvError::InvalidParams(format!("{name} must be a positive temperature (got {v})")));
            }
        }
        for (name, v) in [("y_char", self.y_char), ("y_gas", self.y_gas)] {
            if !(0.0..=1.0).contains(&v) {
                return Err(EnvError::InvalidParams(format!("{name} must lie in [0, 1] (got {v})")));
            }
        }
        if self.y_char + self.y_gas > 1.0 {
            return Err(EnvError::InvalidParams("y_char + y_gas must be <= 1".into()));
        }
        if !(self.q_ext_min.is_finite() && self.q_ext_max.is_finite() && self.q_ext_min <= self.q_ext_max) {
            return Err(EnvError::InvalidParams("q_ext_min <= q_ext_max must hold with finite bounds".into()));
        }
        if self.init_jitter >= 1.0 {
            return Err(EnvError::InvalidParams("init_jitter must be < 1".into()));
        }
        if self.x0.iter().any(|v| !(v.is_finite() && *v >= 0.0)) || self.x0[2] <= 0.0 || self.x0[5] <= 0.0 {
            return Err(EnvError::InvalidParams(
                "x0 masses must be >= 0 and temperatures > 0".into(),
            ));
        }
        if self.horizon == 0 {
            return Err(EnvError::InvalidParams("horizon must be >= 1".into()));
        }
        IntegratorConfig::new(self.dt, self.substeps, self.method)
            .map(|_| ())
            .map_err(|e| EnvError::InvalidParams(e.to_string()))
    }
}

/// Rates derived from the state, kg/s and W.
#[derive(Debug, Clone, Copy, PartialEq, Default)]
pub struct ConstitutiveTerms {
    pub r_w: f64,
    pub p_char: f64,
    pub r_char: f64,
    pub r_g: f64,
    pub f_out: f64,
    pub f_char_out: f64,
    pub f_gw_out: f64,
    pub f_g_out: f64,
    pub q: f64,
    pub q_g: f64,
}

pub fn incinerator_constitutive(x: &[f64; 6], p: &IncineratorParams) -> ConstitutiveTerms {
    let r_w = p.k_w * x[0];
    let r_char = p.k_char * x[1];
    let r_g = p.y_gas * r_w + r_char;
    ConstitutiveTerms {
        r_w,
        p_char: p.y_char * r_w,
        r_char,
        r_g,
        f_out: p.k_ash * x[0],
        f_char_out: p.k_charout * x[1],
        f_gw_out: p.k_gout_w * x[3],
        f_g_out: p.k_gout_f * x[4],
        q: p.h_w * r_w,
        q_g: p.h_g * r_g,
    }
}

/// Wastebed and freeboard thermal masses `(c_pw·M + c_pchar·M_char + c_pm·M_grate,
/// c_pg·M_gf + c_pm·M_fb)`.
pub fn thermal_masses(x: &[f64; 6], p: &IncineratorParams) -> (f64, f64) {
    (
        p.c_pw * x[0] + p.c_pchar * x[1] + p.c_pm * p.m_grate,
        p.c_pg * x[4] + p.c_pm * p.m_fb,
    )
}

pub fn incinerator_dynamics(x: &[f64; 6], q_ext: f64, p: &IncineratorParams) -> Result<[f64; 6], DynamicsError> {
    let c = incinerator_constitutive(x, p);
    let (den_w, den_g) = thermal_masses(x, p);
    for (equation, value) in [("wastebed temperature", den_w), ("freeboard temperature", den_g)] {
        if !(value >= DENOMINATOR_EPS) {
            return Err(DynamicsError::DenominatorUnderflow { equation, value, threshold: DENOMINATOR_EPS });
        }
    }
    Ok([
        p.f_in - c.f_out - c.r_w,
        -c.f_char_out + c.p_char - c.r_char,
        (p.f_in * p.c_pw * x[2] + p.f_ai * p.c_pg * (p.t_ai - x[2]) + c.q) / den_w,
        p.f_ai - c.f_gw_out + c.r_g,
        c.f_gw_out - c.f_g_out + p.f_aii,
        (c.f_gw_out * p.c_pg * (x[2] - x[5]) + p.f_aii * p.c_pg * (p.t_aii - x[5]) + c.q_g - q_ext) / den_g,
    ])
}

/// `-(T_gd - T_g)²`.
pub fn incinerator_reward(x: &[f64; 6], p: &IncineratorParams) -> f64 {
    let e = p.t_gd - x[5];
    -(e * e)
}

/// Waste mass at which inflow balances discharge and conversion.
pub fn steady_waste_mass(p: &IncineratorParams) -> f64 {
    p.f_in / (p.k_ash + p.k_w)
}

fn as_state(x: &[f64]) -> [f64; 6] {
    [x[0], x[1], x[2], x[3], x[4], x[5]]
}

#[derive(Debug, Clone)]
pub struct IncineratorPlant {
    params: IncineratorParams,
}

impl IncineratorPlant {
    pub fn new(params: IncineratorParams) -> Result<Self, EnvError> {
        params.validate()?;
        Ok(Self { params })
    }

    pub fn params(&self) -> &IncineratorParams {
        &self.params
    }
}

impl OdeSystem for IncineratorPlant {
    fn dim(&self) -> usize {
        6
    }

    fn derivative(&self, _t: f64, x: &[f64], u: &[f64], dx: &mut [f64]) -> Result<(), DynamicsError> {
        dx.copy_from_slice(&incinerator_dynamics(&as_state(x), u[0], &self.params)?);
        Ok(())
    }
}

impl Plant for IncineratorPlant {
    const NAME: &'static str = "incinerator";

    fn integrator(&self) -> IntegratorConfig {
        IntegratorConfig { dt: self.params.dt, substeps: self.params.substeps, method: self.params.method }
    }

    fn horizon(&self) -> usize {
        self.params.horizon
    }

    fn action_space(&self) -> BoxSpace {
        BoxSpace::new(vec![self.params.q_ext_min], vec![self.params.q_ext_max]).expect("bounds validated")
    }

    fn columns(&self) -> Columns {
        Columns {
            state: &["x1", "x2", "x3", "x4", "x5", "x6"],
            action: &["Q_ext"],
            reward: "r_i",
            extras: &[],
        }
    }

    fn initial_state(&self, rng: &mut ChaCha8Rng) -> Vec<f64> {
        let j = self.params.init_jitter;
        self.params
            .x0
            .iter()
            .map(|v| if j > 0.0 { v * (1.0 + rng.random_range(-j..=j)) } else { *v })
            .collect()
    }

    fn reward(&self, x: &[f64], _u: &[f64], _extras: &mut BTreeMap<String, f64>) -> f64 {
        incinerator_reward(&as_state(x), &self.params)
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::env::{Environment, OdeEnv};
    use proptest::prelude::*;

    fn p() -> IncineratorParams {
        IncineratorParams::default()
    }

    fn quiet() -> IncineratorParams {
        IncineratorParams {
            f_in: 0.0,
            f_ai: 0.0,
            f_aii: 0.0,
            k_w: 0.0,
            k_char: 0.0,
            k_ash: 0.0,
            k_charout: 0.0,
            k_gout_w: 0.0,
            k_gout_f: 0.0,
            ..p()
        }
    }

    #[test]
    fn zero_masses_give_zero_terms() {
        let c = incinerator_constitutive(&[0.0, 0.0, 900.0, 0.0, 0.0, 1100.0], &p());
        assert_eq!(c, ConstitutiveTerms::default());
    }

    #[test]
    fn constitutive_substitution() {
        let params = IncineratorParams { k_w: 0.01, y_char: 0.2, ..p() };
        let c = incinerator_constitutive(&[100.0, 0.0, 900.0, 0.0, 0.0, 1100.0], &params);
        assert_eq!(c.r_w, 1.0);
        assert_eq!(c.p_char, 0.2);
    }

    #[test]
    fn no_sources_no_change() {
        let d = incinerator_dynamics(&[2000.0, 100.0, 900.0, 50.0, 100.0, 1100.0], 0.0, &quiet()).unwrap();
        assert_eq!(d, [0.0; 6]);
    }

    #[test]
    fn freeboard_balance_vanishes_term_by_term() {
        let params = p();
        let mut x = [2000.0, 100.0, params.t_aii, 50.0, 100.0, params.t_aii];
        x[2] = x[5];
        let q_g = incinerator_constitutive(&x, &params).q_g;
        let d = incinerator_dynamics(&x, q_g, &params).unwrap();
        assert_eq!(d[5], 0.0);
    }

    #[test]
    fn steady_waste_mass_is_a_fixed_point() {
        let params = p();
        let m = steady_waste_mass(&params);
        assert_eq!(m, 1000.0);
        let d = incinerator_dynamics(&[m, 100.0, 900.0, 50.0, 100.0, 1100.0], 0.0, &params).unwrap();
        assert!(d[0].abs() < 1e-12);
    }

    #[test]
    fn reward_examples() {
        let params = IncineratorParams { t_gd: 1200.0, ..p() };
        assert_eq!(incinerator_reward(&[0.0, 0.0, 0.0, 0.0, 0.0, 1200.0], &params), 0.0);
        assert_eq!(incinerator_reward(&[0.0, 0.0, 0.0, 0.0, 0.0, 1100.0], &params), -10_000.0);
    }

    #[test]
    fn denominator_guard_terminates_the_episode() {
        let params = IncineratorParams { m_grate: 0.0, m_fb: 0.0, init_jitter: 0.0, x0: [0.0, 0.0, 900.0, 0.0, 0.0, 1100.0], ..p() };
        assert!(incinerator_dynamics(&params.x0, 0.0, &params).is_err());
        let mut env = OdeEnv::new(IncineratorPlant::new(params).unwrap());
        env.reset(Some(1));
        let r = env.step(&[0.0]).unwrap();
        assert!(r.terminated);
        assert_eq!(r.info.extras.get("dynamics_error"), Some(&1.0));
        assert!(env.step(&[0.0]).is_err());
    }

    #[test]
    fn parameter_validation() {
        assert!(IncineratorPlant::new(IncineratorParams { y_char: 0.5, y_gas: 0.6, ..p() }).is_err());
        assert!(IncineratorPlant::new(IncineratorParams { k_w: -1.0, ..p() }).is_err());
        assert!(IncineratorPlant::new(IncineratorParams { q_ext_min: 1.0, q_ext_max: 0.0, ..p() }).is_err());
    }

    #[test]
    fn jittered_reset_stays_near_nominal() {
        let mut env = OdeEnv::new(IncineratorPlant::new(p()).unwrap());
        let x = env.reset(Some(3));
        for (v, nominal) in x.iter().zip(p().x0) {
            assert!((v / nominal - 1.0).abs() <= 0.05);
        }
    }

    #[test]
    fn masses_stay_nonnegative_along_rollouts() {
        let mut env = OdeEnv::new(IncineratorPlant::new(p()).unwrap());
        env.reset(Some(5));
        for n in 0..600 {
            let q = if n % 2 == 0 { 5e7 } else { 0.0 };
            let r = env.step(&[q]).unwrap();
            for i in [0, 1, 3, 4] {
                assert!(r.info.state[i] >= 0.0);
            }
        }
    }

    fn state() -> impl Strategy<Value = [f64; 6]> {
        (0.0f64..5000.0, 0.0f64..500.0, 300.0f64..2000.0, 0.0f64..500.0, 0.0f64..500.0, 300.0f64..2000.0)
            .prop_map(|(a, b, c, d, e, f)| [a, b, c, d, e, f])
    }

    proptest! {
        #[test]
        fn gas_mass_bookkeeping(x in state(), q in 0.0f64..5e7) {
            let params = p();
            let d = incinerator_dynamics(&x, q, &params).unwrap();
            let c = incinerator_constitutive(&x, &params);
            let expected = params.f_ai + params.f_aii + c.r_g - c.f_g_out;
            prop_assert!((d[3] + d[4] - expected).abs() <= 1e-12 * (1.0 + expected.abs() + c.f_gw_out));
        }

        #[test]
        fn extracting_heat_cools_the_freeboard(x in state(), q in 0.0f64..4e7) {
            let params = p();
            let dq = 1e6;
            let a = incinerator_dynamics(&x, q, &params).unwrap()[5];
            let b = incinerator_dynamics(&x, q + dq, &params).unwrap()[5];
            let (_, den_g) = thermal_masses(&x, &params);
            prop_assert!(b < a);
            prop_assert!(((b - a) / dq + 1.0 / den_g).abs() <= 1e-6 / den_g);
        }

        #[test]
        fn reward_depends_only_on_the_offset(x in state(), shift in -500.0f64..500.0) {
            let params = p();
            let r = incinerator_reward(&x, &params);
            prop_assert!(r <= 0.0);
            let mut y = x;
            y[5] += shift;
            let shifted = IncineratorParams { t_gd: params.t_gd + shift, ..params.clone() };
            prop_assert!((incinerator_reward(&y, &shifted) - r).abs() <= 1e-9 * (1.0 + r.abs()));
        }
    }
}

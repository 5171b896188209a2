use serde::{Deserialize, Serialize};
use std::fmt;
use thiserror::Error;

/// A controlled ODE `ẋ = f(t, x, u)`.
pub trait OdeSystem {
    fn dim(&self) -> usize;

    fn derivative(&self, t: f64, x: &[f64], u: &[f64], dx: &mut [f64]) -> Result<(), DynamicsError>;
}

impl<S: OdeSystem + ?Sized> OdeSystem for &S {
    fn dim(&self) -> usize {
        (**self).dim()
    }

    fn derivative(&self, t: f64, x: &[f64], u: &[f64], dx: &mut [f64]) -> Result<(), DynamicsError> {
        (**self).derivative(t, x, u, dx)
    }
}

/// Adapts a closure `(t, x, u, dx)` into an [`OdeSystem`].
pub struct FnSystem<F> {
    dim: usize,
    f: F,
}

impl<F> FnSystem<F>
where
    F: Fn(f64, &[f64], &[f64], &mut [f64]),
{
    pub fn new(dim: usize, f: F) -> Self {
        Self { dim, f }
    }
}

impl<F> OdeSystem for FnSystem<F>
where
    F: Fn(f64, &[f64], &[f64], &mut [f64]),
{
    fn dim(&self) -> usize {
        self.dim
    }

    fn derivative(&self, t: f64, x: &[f64], u: &[f64], dx: &mut [f64]) -> Result<(), DynamicsError> {
        (self.f)(t, x, u, dx);
        Ok(())
    }
}

#[derive(Debug, Clone, PartialEq, Error)]
pub enum DynamicsError {
    #[error("thermal-mass denominator of {equation} fell to {value:e} (< {threshold:e})")]
    DenominatorUnderflow {
        equation: &'static str,
        value: f64,
        threshold: f64,
    },
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize, Default)]
#[serde(rename_all = "lowercase")]
pub enum Method {
    Euler,
    #[default]
    Rk4,
}

impl fmt::Display for Method {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            Method::Euler => "euler",
            Method::Rk4 => "rk4",
        })
    }
}

/// Fixed-step settings: one control step of length `dt` is split into
/// `substeps` equal integration steps with the action held constant.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct IntegratorConfig {
    pub dt: f64,
    pub substeps: usize,
    pub method: Method,
}

impl IntegratorConfig {
    pub fn new(dt: f64, substeps: usize, method: Method) -> Result<Self, IntegrationError> {
        let cfg = Self { dt, substeps, method };
        cfg.validate()?;
        Ok(cfg)
    }

    pub fn validate(&self) -> Result<(), IntegrationError> {
        if !(self.dt.is_finite() && self.dt > 0.0) {
            return Err(IntegrationError::InvalidConfig(format!("dt must be finite and > 0 (got {})", self.dt)));
        }
        if self.substeps == 0 {
            return Err(IntegrationError::InvalidConfig("substeps must be >= 1".into()));
        }
        Ok(())
    }
}

#[derive(Debug, Clone, PartialEq, Error)]
pub enum IntegrationError {
    #[error("state has dimension {got}, expected {expected}")]
    Dimension { expected: usize, got: usize },
    #[error("non-finite input state or action")]
    NonFiniteInput,
    #[error("integration diverged at substep {substep} (state component {component} is not finite)")]
    Divergence { substep: usize, component: usize },
    #[error(transparent)]
    Dynamics(#[from] DynamicsError),
    #[error("invalid integrator configuration: {0}")]
    InvalidConfig(String),
}

/// Fixed-step integrator with reusable scratch buffers.
#[derive(Debug, Clone)]
pub struct Integrator {
    cfg: IntegratorConfig,
    k: [Vec<f64>; 4],
    stage: Vec<f64>,
}

impl Integrator {
    pub fn new(cfg: IntegratorConfig, dim: usize) -> Self {
        Self {
            cfg,
            k: std::array::from_fn(|_| vec![0.0; dim]),
            stage: vec![0.0; dim],
        }
    }

    pub fn config(&self) -> &IntegratorConfig {
        &self.cfg
    }

    /// Advances `x` in place by one control step `dt` starting at time `t`.
    /// On error `x` holds the last successfully computed substep.
    pub fn advance<S: OdeSystem + ?Sized>(
        &mut self,
        sys: &S,
        x: &mut [f64],
        u: &[f64],
        t: f64,
    ) -> Result<(), IntegrationError> {
        self.cfg.validate()?;
        let n = sys.dim();
        if x.len() != n {
            return Err(IntegrationError::Dimension { expected: n, got: x.len() });
        }
        if x.iter().chain(u).any(|v| !v.is_finite()) {
            return Err(IntegrationError::NonFiniteInput);
        }
        if self.stage.len() != n {
            *self = Self::new(self.cfg, n);
        }
        let h = self.cfg.dt / self.cfg.substeps as f64;
        for sub in 0..self.cfg.substeps {
            let ts = t + sub as f64 * h;
            match self.cfg.method {
                Method::Euler => {
                    sys.derivative(ts, x, u, &mut self.k[0])?;
                    for (xi, ki) in x.iter_mut().zip(&self.k[0]) {
                        *xi += h * ki;
                    }
                }
                Method::Rk4 => self.rk4_step(sys, x, u, ts, h)?,
            }
            if let Some(component) = x.iter().position(|v| !v.is_finite()) {
                return Err(IntegrationError::Divergence { substep: sub, component });
            }
        }
        Ok(())
    }

    fn rk4_step<S: OdeSystem + ?Sized>(
        &mut self,
        sys: &S,
        x: &mut [f64],
        u: &[f64],
        t: f64,
        h: f64,
    ) -> Result<(), DynamicsError> {
        let [k1, k2, k3, k4] = &mut self.k;
        let stage = &mut self.stage;

        sys.derivative(t, x, u, k1)?;
        for i in 0..x.len() {
            stage[i] = x[i] + 0.5 * h * k1[i];
        }
        sys.derivative(t + 0.5 * h, stage, u, k2)?;
        for i in 0..x.len() {
            stage[i] = x[i] + 0.5 * h * k2[i];
        }
        sys.derivative(t + 0.5 * h, stage, u, k3)?;
        for i in 0..x.len() {
            stage[i] = x[i] + h * k3[i];
        }
        sys.derivative(t + h, stage, u, k4)?;
        for i in 0..x.len() {
            x[i] += h / 6.0 * (k1[i] + 2.0 * k2[i] + 2.0 * k3[i] + k4[i]);
        }
        Ok(())
    }
}

/// One control step from `(t, x)` under the held action `u`.
pub fn integrate_step<S: OdeSystem + ?Sized>(
    sys: &S,
    cfg: &IntegratorConfig,
    x: &[f64],
    u: &[f64],
    t: f64,
) -> Result<Vec<f64>, IntegrationError> {
    let mut next = x.to_vec();
    Integrator::new(*cfg, sys.dim()).advance(sys, &mut next, u, t)?;
    Ok(next)
}

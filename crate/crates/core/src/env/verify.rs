use super::integrate::{IntegrationError, Integrator, IntegratorConfig, OdeSystem};
use super::reference::{Dopri5, ReferenceError};
use serde::Serialize;
use thiserror::Error;

#[derive(Debug, Clone, PartialEq, Error)]
pub enum VerificationError {
    #[error("horizon must be finite and > 0 (got {0})")]
    InvalidHorizon(f64),
    #[error("rel_tol must be > 0 (got {0})")]
    InvalidTolerance(f64),
    #[error("initial state has dimension {got}, expected {expected}")]
    Dimension { expected: usize, got: usize },
    #[error(transparent)]
    Config(IntegrationError),
    #[error("reference integration failed on control interval {interval}: {source}")]
    Reference { interval: usize, source: ReferenceError },
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct StateDeviation {
    pub index: usize,
    /// `max_k |x_k - ref_k|` over the control grid.
    pub max_abs_error: f64,
    /// `max_k |ref_k|`, the normalising scale.
    pub scale: f64,
    /// `max_abs_error / scale`; infinite when the fixed-step run failed.
    pub relative: f64,
    pub passed: bool,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct VerificationReport {
    pub passed: bool,
    pub rel_tol: f64,
    pub horizon: f64,
    pub control_steps: usize,
    pub config: IntegratorConfig,
    pub reference_steps: usize,
    pub deviations: Vec<StateDeviation>,
    /// Why the fixed-step run stopped early, if it did.
    pub fixed_step_failure: Option<String>,
}

impl VerificationReport {
    pub fn max_relative(&self) -> f64 {
        self.deviations.iter().map(|d| d.relative).fold(0.0, f64::max)
    }
}

/// Simulates `horizon` seconds twice, once with the configured fixed-step
/// integrator and once with an adaptive Dormand–Prince reference
/// (rtol 1e-9, atol 1e-12), holding `schedule(t_k)` over each control interval.
///
/// Deviation for state `i` is `max_k |x_i - ref_i| / max_k |ref_i|` over the
/// control grid. The check passes iff every deviation is ≤ `rel_tol`.
pub fn verify_step_size<S, F>(
    sys: &S,
    cfg: &IntegratorConfig,
    x0: &[f64],
    schedule: F,
    horizon: f64,
    rel_tol: f64,
) -> Result<VerificationReport, VerificationError>
where
    S: OdeSystem + ?Sized,
    F: Fn(f64) -> Vec<f64>,
{
    if !(horizon.is_finite() && horizon > 0.0) {
        return Err(VerificationError::InvalidHorizon(horizon));
    }
    if rel_tol.is_nan() || rel_tol <= 0.0 {
        return Err(VerificationError::InvalidTolerance(rel_tol));
    }
    cfg.validate().map_err(VerificationError::Config)?;
    let n = sys.dim();
    if x0.len() != n {
        return Err(VerificationError::Dimension { expected: n, got: x0.len() });
    }

    let steps = ((horizon / cfg.dt) * (1.0 - 1e-12)).ceil().max(1.0) as usize;
    let reference = Dopri5::default();
    let mut integrator = Integrator::new(*cfg, n);
    let mut x = x0.to_vec();
    let mut r = x0.to_vec();
    let mut max_err = vec![0.0f64; n];
    let mut scale: Vec<f64> = x0.iter().map(|v| v.abs()).collect();
    let mut failure = None;
    let mut reference_steps = 0;

    for k in 0..steps {
        let t = k as f64 * cfg.dt;
        let t_next = (k + 1) as f64 * cfg.dt;
        let u = schedule(t);
        reference_steps += reference
            .integrate(sys, t, t_next, &mut r, &u)
            .map_err(|source| VerificationError::Reference { interval: k, source })?;
        for (s, v) in scale.iter_mut().zip(&r) {
            *s = s.max(v.abs());
        }
        if failure.is_none() {
            match integrator.advance(sys, &mut x, &u, t) {
                Ok(()) => {
                    for i in 0..n {
                        max_err[i] = max_err[i].max((x[i] - r[i]).abs());
                    }
                }
                Err(e) => failure = Some(format!("control step {k}: {e}")),
            }
        }
    }

    let deviations: Vec<StateDeviation> = (0..n)
        .map(|i| {
            let relative = if failure.is_some() {
                f64::INFINITY
            } else {
                max_err[i] / scale[i].max(f64::MIN_POSITIVE)
            };
            StateDeviation {
                index: i,
                max_abs_error: if failure.is_some() { f64::INFINITY } else { max_err[i] },
                scale: scale[i],
                relative,
                passed: relative <= rel_tol,
            }
        })
        .collect();
    Ok(VerificationReport {
        passed: deviations.iter().all(|d| d.passed),
        rel_tol,
        horizon,
        control_steps: steps,
        config: *cfg,
        reference_steps,
        deviations,
        fixed_step_failure: failure,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::env::{FnSystem, Method};

    fn truck() -> FnSystem<impl Fn(f64, &[f64], &[f64], &mut [f64])> {
        FnSystem::new(2, |_, x: &[f64], u: &[f64], dx: &mut [f64]| {
            dx[0] = x[1];
            dx[1] = u[0] / 12000.0;
        })
    }

    #[test]
    fn fine_rk4_passes() {
        let cfg = IntegratorConfig::new(0.01, 1, Method::Rk4).unwrap();
        let rep = verify_step_size(&truck(), &cfg, &[0.0, 0.0], |_| vec![3e4], 10.0, 1e-6).unwrap();
        assert!(rep.passed, "{rep:?}");
        assert_eq!(rep.control_steps, 1000);
    }

    #[test]
    fn coarse_euler_fails() {
        let cfg = IntegratorConfig::new(5.0, 1, Method::Euler).unwrap();
        let rep = verify_step_size(&truck(), &cfg, &[0.0, 0.0], |_| vec![3e4], 10.0, 1e-6).unwrap();
        assert!(!rep.passed);
        // x(10) = ½·2.5·100 = 125; Euler gives 0 + 5·12.5 = 62.5
        assert!((rep.deviations[0].relative - 0.5).abs() < 1e-6);
    }

    #[test]
    fn zero_field_passes_at_any_dt() {
        let sys = FnSystem::new(2, |_, _: &[f64], _: &[f64], dx: &mut [f64]| dx.fill(0.0));
        for dt in [1e-3, 1.0, 100.0] {
            let cfg = IntegratorConfig::new(dt, 1, Method::Euler).unwrap();
            let rep = verify_step_size(&sys, &cfg, &[1.0, 0.0], |_| vec![], 50.0, 1e-12).unwrap();
            assert!(rep.passed);
            assert_eq!(rep.max_relative(), 0.0);
        }
    }

    #[test]
    fn infinite_tolerance_always_passes() {
        let sys = FnSystem::new(1, |_, x: &[f64], _: &[f64], dx: &mut [f64]| dx[0] = -50.0 * x[0]);
        let cfg = IntegratorConfig::new(1.0, 1, Method::Euler).unwrap();
        let rep = verify_step_size(&sys, &cfg, &[1.0], |_| vec![], 20.0, f64::INFINITY).unwrap();
        assert!(rep.passed);
    }

    #[test]
    fn fixed_step_divergence_fails_with_a_reason() {
        // Euler at dt=1 multiplies by -999 per step and overflows within 200 steps
        let sys = FnSystem::new(1, |_, x: &[f64], _: &[f64], dx: &mut [f64]| dx[0] = -1000.0 * x[0]);
        let cfg = IntegratorConfig::new(1.0, 1, Method::Euler).unwrap();
        let rep = verify_step_size(&sys, &cfg, &[1.0], |_| vec![], 200.0, 1e-3).unwrap();
        assert!(!rep.passed);
        assert!(rep.deviations[0].relative.is_infinite());
        assert!(rep.fixed_step_failure.unwrap().contains("diverged"));
    }

    #[test]
    fn argument_checks() {
        let cfg = IntegratorConfig::new(0.1, 1, Method::Rk4).unwrap();
        assert!(verify_step_size(&truck(), &cfg, &[0.0, 0.0], |_| vec![0.0], 0.0, 1e-6).is_err());
        assert!(verify_step_size(&truck(), &cfg, &[0.0, 0.0], |_| vec![0.0], 1.0, 0.0).is_err());
        assert!(verify_step_size(&truck(), &cfg, &[0.0], |_| vec![0.0], 1.0, 1e-6).is_err());
    }
}

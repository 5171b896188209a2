use super::integrate::{DynamicsError, OdeSystem};
use thiserror::Error;

#[derive(Debug, Clone, PartialEq, Error)]
pub enum ReferenceError {
    #[error("reference integrator exceeded {0} steps")]
    TooManySteps(usize),
    #[error("reference step size underflow at t = {t}")]
    StepUnderflow { t: f64 },
    #[error("reference integrator produced a non-finite state at t = {t}")]
    NonFinite { t: f64 },
    #[error("reference integrator: {0}")]
    Dynamics(#[from] DynamicsError),
}

// Dormand–Prince 5(4) tableau.
const C: [f64; 7] = [0.0, 1.0 / 5.0, 3.0 / 10.0, 4.0 / 5.0, 8.0 / 9.0, 1.0, 1.0];
const A: [[f64; 6]; 7] = [
    [0.0; 6],
    [1.0 / 5.0, 0.0, 0.0, 0.0, 0.0, 0.0],
    [3.0 / 40.0, 9.0 / 40.0, 0.0, 0.0, 0.0, 0.0],
    [44.0 / 45.0, -56.0 / 15.0, 32.0 / 9.0, 0.0, 0.0, 0.0],
    [19372.0 / 6561.0, -25360.0 / 2187.0, 64448.0 / 6561.0, -212.0 / 729.0, 0.0, 0.0],
    [9017.0 / 3168.0, -355.0 / 33.0, 46732.0 / 5247.0, 49.0 / 176.0, -5103.0 / 18656.0, 0.0],
    [35.0 / 384.0, 0.0, 500.0 / 1113.0, 125.0 / 192.0, -2187.0 / 6784.0, 11.0 / 84.0],
];
const B5: [f64; 7] = [35.0 / 384.0, 0.0, 500.0 / 1113.0, 125.0 / 192.0, -2187.0 / 6784.0, 11.0 / 84.0, 0.0];
const B4: [f64; 7] = [
    5179.0 / 57600.0,
    0.0,
    7571.0 / 16695.0,
    393.0 / 640.0,
    -92097.0 / 339200.0,
    187.0 / 2100.0,
    1.0 / 40.0,
];

/// Adaptive Dormand–Prince 5(4) integrator used as the accuracy reference.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Dopri5 {
    pub rtol: f64,
    pub atol: f64,
    pub max_steps: usize,
}

impl Default for Dopri5 {
    fn default() -> Self {
        Self { rtol: 1e-9, atol: 1e-12, max_steps: 10_000_000 }
    }
}

impl Dopri5 {
    /// Integrates `x` in place from `t0` to `t1` with the action `u` held
    /// constant. Returns the number of accepted steps.
    pub fn integrate<S: OdeSystem + ?Sized>(
        &self,
        sys: &S,
        t0: f64,
        t1: f64,
        x: &mut [f64],
        u: &[f64],
    ) -> Result<usize, ReferenceError> {
        let n = x.len();
        let span = t1 - t0;
        if span <= 0.0 {
            return Ok(0);
        }
        let mut k: [Vec<f64>; 7] = std::array::from_fn(|_| vec![0.0; n]);
        let mut stage = vec![0.0; n];
        let mut x5 = vec![0.0; n];

        let mut t = t0;
        sys.derivative(t, x, u, &mut k[0])?;
        let mut h = self.initial_step(x, &k[0], span);
        let mut accepted = 0;
        let mut attempts = 0;
        while t < t1 {
            attempts += 1;
            if attempts > self.max_steps {
                return Err(ReferenceError::TooManySteps(self.max_steps));
            }
            let last = t + h >= t1;
            if last {
                h = t1 - t;
            }
            for s in 1..7 {
                for i in 0..n {
                    let mut acc = 0.0;
                    for (j, kj) in k.iter().enumerate().take(s) {
                        acc += A[s][j] * kj[i];
                    }
                    stage[i] = x[i] + h * acc;
                }
                sys.derivative(t + C[s] * h, &stage, u, &mut k[s])?;
            }
            let mut err = 0.0f64;
            for i in 0..n {
                let mut hi = 0.0;
                let mut lo = 0.0;
                for s in 0..7 {
                    hi += B5[s] * k[s][i];
                    lo += B4[s] * k[s][i];
                }
                x5[i] = x[i] + h * hi;
                let scale = self.atol + self.rtol * x[i].abs().max(x5[i].abs());
                let e = h * (hi - lo) / scale;
                err = err.max(e.abs());
            }
            if !err.is_finite() {
                if x5.iter().any(|v| !v.is_finite()) && h <= f64::EPSILON * t.abs().max(1.0) {
                    return Err(ReferenceError::NonFinite { t });
                }
                h *= 0.1;
                continue;
            }
            if err <= 1.0 {
                t = if last { t1 } else { t + h };
                x.copy_from_slice(&x5);
                // first-same-as-last: the seventh stage is f at the new point
                k.swap(0, 6);
                accepted += 1;
            }
            let factor = if err == 0.0 { 5.0 } else { (0.9 * err.powf(-0.2)).clamp(0.2, 5.0) };
            h *= if err <= 1.0 { factor } else { factor.min(1.0) };
            if h <= f64::EPSILON * t.abs().max(1.0) && t < t1 {
                return Err(ReferenceError::StepUnderflow { t });
            }
        }
        Ok(accepted)
    }

    fn initial_step(&self, x: &[f64], f0: &[f64], span: f64) -> f64 {
        let mut d0 = 0.0f64;
        let mut d1 = 0.0f64;
        for (xi, fi) in x.iter().zip(f0) {
            let sc = self.atol + self.rtol * xi.abs();
            d0 = d0.max((xi / sc).abs());
            d1 = d1.max((fi / sc).abs());
        }
        let h = if d0 < 1e-5 || d1 < 1e-5 { 1e-6 } else { 0.01 * d0 / d1 };
        h.min(span).max(span * 1e-12)
    }
}

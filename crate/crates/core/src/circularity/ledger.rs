use super::{CircularityConfig, CircularityError, ContinuousFlow, ExactSum, FlowEvent};
use crate::network::{is_finite_time_sustainable, validate_tmn, Compartment, Direction, Role, Tmn};

/// Signed number of times a transfer from `from` to `to` counts towards the
/// finite-time sustainable total.
///
/// Leaving a nonrenewable reservoir counts once and entering a landfill,
/// incinerator or the natural environment counts once, so a transfer doing
/// both counts twice. Leaving the natural environment counts `-1`: removal of
/// a pollutant offsets emission, which is what makes the net-zero balance
/// expressible through the ledger.
pub fn endpoint_multiplicity(from: &Compartment, to: &Compartment) -> i32 {
    let mut n = 0;
    if is_finite_time_sustainable(from, Direction::Exiting) {
        n += 1;
    }
    if is_finite_time_sustainable(to, Direction::Entering) {
        n += 1;
    }
    if from.has_role(Role::NaturalEnvironment) {
        n -= 1;
    }
    n
}

/// Batch events and continuous flows classified against a network, ready to
/// be evaluated at any number of times.
#[derive(Debug, Clone)]
pub struct CircularityLedger {
    /// `(time, mass, multiplicity)` for every event with non-zero multiplicity.
    events: Vec<(f64, f64, i32)>,
    flows: Vec<(ContinuousFlow, i32)>,
}

impl CircularityLedger {
    pub fn new(
        tmn: &Tmn,
        events: &[FlowEvent],
        flows: &[ContinuousFlow],
    ) -> Result<Self, CircularityError> {
        let report = validate_tmn(tmn);
        if !report.is_ok() {
            return Err(CircularityError::InvalidNetwork(report.to_string()));
        }
        let lookup = |k: u32| tmn.get(k).ok_or(CircularityError::UnknownCompartment(k));

        let mut classified = Vec::with_capacity(events.len());
        for e in events {
            e.check()?;
            let mult = endpoint_multiplicity(lookup(e.from)?, lookup(e.to)?);
            if mult != 0 {
                classified.push((e.time, e.mass, mult));
            }
        }
        classified.sort_by(|a, b| a.0.total_cmp(&b.0));

        let mut kept = Vec::with_capacity(flows.len());
        for f in flows {
            let mult = endpoint_multiplicity(lookup(f.from)?, lookup(f.to)?);
            if mult != 0 {
                kept.push((f.clone(), mult));
            }
        }
        Ok(Self { events: classified, flows: kept })
    }

    /// Net finite-time sustainable batch mass moved up to and including `t`.
    pub fn batch_mass(&self, t: f64) -> f64 {
        let mut sum = ExactSum::new();
        for &(_, mass, mult) in self.events.iter().take_while(|e| e.0 <= t) {
            let signed = if mult < 0 { -mass } else { mass };
            for _ in 0..mult.unsigned_abs() {
                sum.add(signed);
            }
        }
        sum.value()
    }

    /// Net finite-time sustainable continuous flow at `t` (kg/s).
    pub fn continuous_rate(&self, t: f64) -> f64 {
        let mut sum = ExactSum::new();
        for (flow, mult) in &self.flows {
            let r = flow.rate_at(t);
            let signed = if *mult < 0 { -r } else { r };
            for _ in 0..mult.unsigned_abs() {
                sum.add(signed);
            }
        }
        sum.value()
    }

    pub fn lambda(&self, t: f64, cfg: &CircularityConfig) -> Result<f64, CircularityError> {
        if !(t.is_finite() && t >= 0.0) {
            return Err(CircularityError::InvalidTime(t));
        }
        // `+ 0.0` turns an empty ledger's -0.0 into 0.0.
        Ok(-(self.batch_mass(t) + cfg.delta * self.continuous_rate(t)) + 0.0)
    }
}

pub fn lambda_from_ledger(
    tmn: &Tmn,
    events: &[FlowEvent],
    flows: &[ContinuousFlow],
    t: f64,
    cfg: &CircularityConfig,
) -> Result<f64, CircularityError> {
    CircularityLedger::new(tmn, events, flows)?.lambda(t, cfg)
}

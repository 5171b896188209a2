use super::{CircularityError, FlowEvent};
use crate::network::Tmn;
use serde::{Deserialize, Serialize};

/// Splits `m` into recycled and unsorted mass for a sorting success of `s`
/// percent. Returns `(m_r, m_u)`.
///
/// `m_r ≈ m·s/100` and `m_u ≈ m·(1 - s/100)` to within one rounding, and the
/// pair always sums to `m` exactly: the larger share is computed first and
/// the smaller one is recovered by an exact subtraction.
pub fn mass_split(m: f64, s: f64) -> Result<(f64, f64), CircularityError> {
    if !(m.is_finite() && m >= 0.0) {
        return Err(CircularityError::InvalidScenario(format!(
            "mass must be finite and >= 0 (got {m})"
        )));
    }
    if !(0.0..=100.0).contains(&s) {
        return Err(CircularityError::InvalidScenario(format!(
            "sorting success must lie in [0, 100] (got {s})"
        )));
    }
    let recycled = m * s / 100.0;
    if recycled >= m / 2.0 {
        // m/2 <= recycled <= m, so m - recycled is exact
        Ok((recycled, m - recycled))
    } else {
        // m/2 <= unsorted <= m, so m - unsorted is exact
        let unsorted = m - recycled;
        Ok((m - unsorted, unsorted))
    }
}

/// Solid-waste life cycle through extraction, first use, robotic sorting and
/// incineration (either directly by truck, or after recycling and a second
/// use).
///
/// Times are seconds and masses kilograms. Sorted and unsorted batches leave
/// the sorter together.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SolidScenario {
    /// Total extracted mass `m`.
    pub m: f64,
    /// Sorting success in percent.
    pub s: f64,
    /// Sorting duration `T_s`.
    pub sorting_time: f64,
    #[serde(default)]
    pub t_extract_out: f64,
    pub first_use_duration: f64,
    /// Sorter to incinerator, unsorted batch (truck).
    pub tau_transport_unsorted: f64,
    /// Sorter to incinerator, recycled batch (second life plus transport).
    pub tau_second_life: f64,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct EventTimes {
    /// Material leaves the reservoir.
    pub extract_out: f64,
    /// Material reaches the sorter after first use.
    pub sorter_in: f64,
    /// Sorted and unsorted batches leave the sorter.
    pub sorter_out: f64,
    /// Unsorted batch enters the incinerator.
    pub incinerator_in_unsorted: f64,
    /// Recycled batch enters the incinerator.
    pub incinerator_in_recycled: f64,
    /// Life extension of the recycled mass, `ν`.
    pub life_extension: f64,
}

impl SolidScenario {
    pub fn validate(&self) -> Result<(), CircularityError> {
        mass_split(self.m, self.s)?;
        for (name, v) in [
            ("sorting_time", self.sorting_time),
            ("t_extract_out", self.t_extract_out),
            ("first_use_duration", self.first_use_duration),
            ("tau_transport_unsorted", self.tau_transport_unsorted),
            ("tau_second_life", self.tau_second_life),
        ] {
            if !(v.is_finite() && v >= 0.0) {
                return Err(CircularityError::InvalidScenario(format!(
                    "{name} must be finite and >= 0 (got {v})"
                )));
            }
        }
        if self.tau_second_life <= self.tau_transport_unsorted {
            return Err(CircularityError::InvalidScenario(format!(
                "tau_second_life ({}) must exceed tau_transport_unsorted ({})",
                self.tau_second_life, self.tau_transport_unsorted
            )));
        }
        Ok(())
    }

    pub fn event_times(&self) -> EventTimes {
        let sorter_in = self.t_extract_out + self.first_use_duration;
        let sorter_out = sorter_in + self.sorting_time;
        let unsorted = sorter_out + self.tau_transport_unsorted;
        let recycled = sorter_out + self.tau_second_life;
        EventTimes {
            extract_out: self.t_extract_out,
            sorter_in,
            sorter_out,
            incinerator_in_unsorted: unsorted,
            incinerator_in_recycled: recycled,
            life_extension: recycled - unsorted,
        }
    }

    /// `(m_r, m_u)`.
    pub fn split(&self) -> (f64, f64) {
        mass_split(self.m, self.s).expect("scenario validated")
    }

    /// Closed-form circularity.
    ///
    /// `-m` from extraction until the unsorted batch is incinerated, then
    /// `-(m + m_u)` until the recycled batch follows, then `-2m`. Before the
    /// extraction time nothing has moved and `λ = 0`; with the default
    /// extraction at `t = 0` that interval is empty.
    pub fn lambda(&self, t: f64) -> Result<f64, CircularityError> {
        self.validate()?;
        if !(t.is_finite() && t >= 0.0) {
            return Err(CircularityError::InvalidTime(t));
        }
        let times = self.event_times();
        let (_, unsorted) = self.split();
        let m = self.m;
        let value = if t < times.extract_out {
            0.0
        } else if t < times.incinerator_in_unsorted {
            -m
        } else if t < times.incinerator_in_recycled {
            -(m + unsorted)
        } else {
            -(2.0 * m)
        };
        Ok(value + 0.0)
    }

    /// The scenario as a batch ledger on [`Tmn::solid_waste`]: extraction,
    /// arrival at the sorter, both departures, both incinerator arrivals.
    /// Zero-mass batches are omitted.
    pub fn replay_events(&self) -> Result<Vec<FlowEvent>, CircularityError> {
        self.validate()?;
        let times = self.event_times();
        let (recycled, unsorted) = self.split();
        let m = self.m;
        let candidates = [
            (times.extract_out, m, 1, 4),
            (times.sorter_in, m, 4, 2),
            (times.sorter_out, unsorted, 2, 6),
            (times.sorter_out, recycled, 2, 5),
            (times.incinerator_in_unsorted, unsorted, 6, 3),
            (times.incinerator_in_recycled, recycled, 5, 3),
        ];
        candidates
            .into_iter()
            .filter(|c| c.1 > 0.0)
            .map(|(t, mass, from, to)| FlowEvent::new(t, mass, from, to))
            .collect()
    }

    pub fn network() -> Tmn {
        Tmn::solid_waste()
    }
}

pub fn lambda_solid_scenario(scenario: &SolidScenario, t: f64) -> Result<f64, CircularityError> {
    scenario.lambda(t)
}

use super::algae::{AlgaeParams, DroopPlant, MonodPlant};
use super::incinerator::{IncineratorParams, IncineratorPlant};
use super::truck::{TruckParams, TruckPlant};
use super::verify::{verify_step_size, VerificationError, VerificationReport};
use super::{EnvError, Environment, OdeEnv, Plant};
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

/// Static description of an available environment.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
pub struct EnvInfo {
    pub name: &'static str,
    pub state_dim: usize,
    pub action_dim: usize,
    /// The network compartment the environment models.
    pub compartment: &'static str,
    pub description: &'static str,
}

pub const ENV_INFOS: [EnvInfo; 4] = [
    EnvInfo {
        name: TruckPlant::NAME,
        state_dim: 2,
        action_dim: 1,
        compartment: "c^6_{2,3}",
        description: "waste truck driving unsorted waste to the incinerator",
    },
    EnvInfo {
        name: IncineratorPlant::NAME,
        state_dim: 6,
        action_dim: 1,
        compartment: "c^3_{3,3}",
        description: "wastebed and freeboard temperature regulation",
    },
    EnvInfo {
        name: MonodPlant::NAME,
        state_dim: 2,
        action_dim: 1,
        compartment: "c^3_{3,3}",
        description: "Monod microalgae CO2 capture under controlled light",
    },
    EnvInfo {
        name: DroopPlant::NAME,
        state_dim: 3,
        action_dim: 1,
        compartment: "c^3_{3,3}",
        description: "Droop microalgae CO2 capture under controlled light",
    },
];

/// Environment selection plus parameters, tagged by `name`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "name", rename_all = "kebab-case")]
pub enum EnvConfig {
    TransportTruck(TruckParams),
    Incinerator(IncineratorParams),
    Co2MicroalgaeMonod(AlgaeParams),
    Co2MicroalgaeDroop(AlgaeParams),
}

impl EnvConfig {
    pub fn names() -> Vec<&'static str> {
        ENV_INFOS.iter().map(|i| i.name).collect()
    }

    /// Default parameters for a named environment.
    pub fn default_for(name: &str) -> Option<Self> {
        Some(match name {
            TruckPlant::NAME => Self::TransportTruck(TruckParams::default()),
            IncineratorPlant::NAME => Self::Incinerator(IncineratorParams::default()),
            MonodPlant::NAME => Self::Co2MicroalgaeMonod(AlgaeParams::default()),
            DroopPlant::NAME => Self::Co2MicroalgaeDroop(AlgaeParams::default()),
            _ => return None,
        })
    }

    pub fn name(&self) -> &'static str {
        match self {
            Self::TransportTruck(_) => TruckPlant::NAME,
            Self::Incinerator(_) => IncineratorPlant::NAME,
            Self::Co2MicroalgaeMonod(_) => MonodPlant::NAME,
            Self::Co2MicroalgaeDroop(_) => DroopPlant::NAME,
        }
    }

    pub fn info(&self) -> EnvInfo {
        *ENV_INFOS.iter().find(|i| i.name == self.name()).expect("every variant is listed")
    }

    pub fn validate(&self) -> Result<(), EnvError> {
        match self {
            Self::TransportTruck(p) => p.validate(),
            Self::Incinerator(p) => p.validate(),
            Self::Co2MicroalgaeMonod(p) => p.validate(false),
            Self::Co2MicroalgaeDroop(p) => p.validate(true),
        }
    }

    /// Non-fatal configuration warnings.
    pub fn warnings(&self) -> Vec<String> {
        match self {
            Self::Co2MicroalgaeMonod(p) | Self::Co2MicroalgaeDroop(p) => p.warnings(),
            _ => Vec::new(),
        }
    }

    pub fn build(&self) -> Result<Box<dyn Environment>, EnvError> {
        Ok(match self {
            Self::TransportTruck(p) => Box::new(OdeEnv::new(TruckPlant::new(p.clone())?)),
            Self::Incinerator(p) => Box::new(OdeEnv::new(IncineratorPlant::new(p.clone())?)),
            Self::Co2MicroalgaeMonod(p) => Box::new(OdeEnv::new(MonodPlant::new(p.clone())?)),
            Self::Co2MicroalgaeDroop(p) => Box::new(OdeEnv::new(DroopPlant::new(p.clone())?)),
        })
    }

    /// Step-size verification from the seeded initial state with a constant
    /// action (clipped into the action box) over `horizon` seconds.
    pub fn verify(
        &self,
        seed: u64,
        action: &[f64],
        horizon: f64,
        rel_tol: f64,
    ) -> Result<VerificationReport, VerifyEnvError> {
        fn run<P: Plant>(
            plant: P,
            seed: u64,
            action: &[f64],
            horizon: f64,
            rel_tol: f64,
        ) -> Result<VerificationReport, VerifyEnvError> {
            let space = plant.action_space();
            if action.len() != space.dim() {
                return Err(VerifyEnvError::Env(EnvError::ActionDimension { expected: space.dim(), got: action.len() }));
            }
            let mut u = action.to_vec();
            space.clip(&mut u);
            let x0 = plant.initial_state(&mut ChaCha8Rng::seed_from_u64(seed));
            let cfg = plant.integrator();
            // the plant's time variable may be in days
            let scale = plant.time_unit_seconds();
            debug_assert_eq!(x0.len(), plant.dim());
            Ok(verify_step_size(&plant, &cfg, &x0, |_| u.clone(), horizon / scale, rel_tol)?)
        }
        match self {
            Self::TransportTruck(p) => run(TruckPlant::new(p.clone())?, seed, action, horizon, rel_tol),
            Self::Incinerator(p) => run(IncineratorPlant::new(p.clone())?, seed, action, horizon, rel_tol),
            Self::Co2MicroalgaeMonod(p) => run(MonodPlant::new(p.clone())?, seed, action, horizon, rel_tol),
            Self::Co2MicroalgaeDroop(p) => run(DroopPlant::new(p.clone())?, seed, action, horizon, rel_tol),
        }
    }
}

#[derive(Debug, Clone, PartialEq, thiserror::Error)]
pub enum VerifyEnvError {
    #[error(transparent)]
    Env(#[from] EnvError),
    #[error(transparent)]
    Verification(#[from] VerificationError),
}

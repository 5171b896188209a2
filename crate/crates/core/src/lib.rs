//! Circularity accounting for thermodynamical material networks, state-space
//! compartment environments, and derivative-free policy trainers.
//!
//! The crate is organised around four layers:
//!
//! * [`network`]: compartments, material networks and their digraphs.
//! * [`circularity`]: the instantaneous circularity measure computed from
//!   mass ledgers, the piecewise solid-waste scenario and the net-zero form.
//! * [`env`]: the environment contract, fixed-step integration, step-size
//!   verification and the four compartment environments.
//! * [`trainers`]: linear policies with running observation whitening,
//!   augmented random search, cross-entropy and random-search baselines, and
//!   the start/end evaluation protocol.

pub mod circularity;
pub mod env;
pub mod network;
pub mod trainers;

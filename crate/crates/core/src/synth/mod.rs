//! Synthetic flights with known anomaly, attitude, and interference.
//!
//! Every component is generated from a seed, so each flight comes with exact ground
//! truth: the anomaly signal, the Tolles-Lawson coefficients of each inner
//! magnetometer, and the nonlinear electrical term. The interference is computed here
//! from the emitted vector-magnetometer channels, independently of [`crate::tolles_lawson`].
//!
//! The vector magnetometer also sees a small field proportional to `CUR_ACLo` that the
//! scalar sensors do not. Without it the summed induced-diagonal columns equal the total
//! field seen by the scalar sensor, and the fit cannot tell them apart.

mod config;
mod generate;

pub use config::{AnomalyModel, Bump, ManeuverModel, Sinusoid, SynthConfig, DEFAULT_TL_BETA, MAG_QUANTUM_NT};
pub use generate::{gen_anomaly, gen_flight, gen_flights, gen_maneuvers, Maneuvers, SynthFlight, TruthFile};

use thiserror::Error;

#[derive(Debug, Error)]
pub enum SynthError {
    #[error("invalid synthetic config: {0}")]
    InvalidConfig(String),
    #[error(transparent)]
    Frame(#[from] crate::flightdata::FlightDataError),
    #[error(transparent)]
    Io(#[from] std::io::Error),
    #[error(transparent)]
    Json(#[from] serde_json::Error),
}

pub type Result<T, E = SynthError> = std::result::Result<T, E>;

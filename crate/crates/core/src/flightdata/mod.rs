//! Flight records: loading, validation, line slicing, and feature-matrix assembly.
//!
//! A [`FlightFrame`] is a columnar, uniformly sampled multi-channel record. Time
//! resets are allowed only at line (segment) boundaries, so uniformity is checked
//! between consecutive samples that share a line id.

mod features;
mod frame;
mod io;
mod schema;

pub use features::{to_feature_matrix, FeatureMatrix, CANONICAL_FEATURES};
pub use frame::{repair_gaps, validate_frame, FlightFrame, LineId, ValidationReport, TIME_TOLERANCE_S};
pub use io::{load_flight, load_flight_with, write_flight, LoadOptions};
pub use schema::{ChannelRole, ChannelSchema, ChannelSpec};

use thiserror::Error;

/// Errors raised while ingesting or reshaping flight data.
#[derive(Debug, Error)]
pub enum FlightDataError {
    #[error("missing channel `{0}`")]
    MissingChannel(String),
    #[error("non-uniform time step at sample {index}: dt = {dt} s, expected {expected} s")]
    NonUniformTime { index: usize, dt: f64, expected: f64 },
    #[error("non-finite sample in `{channel}` at index {index}")]
    NonFiniteSample { channel: String, index: usize },
    #[error("unknown line {0}")]
    UnknownLine(LineId),
    #[error("line selection is empty")]
    EmptySelection,
    #[error("channel `{channel}` has {len} samples, expected {expected}")]
    LengthMismatch { channel: String, len: usize, expected: usize },
    #[error("target channel `{0}` cannot also be a feature")]
    TargetAsFeature(String),
    #[error("a frame needs at least 2 samples, got {0}")]
    TooFewSamples(usize),
    #[error("duplicate channel `{0}`")]
    DuplicateChannel(String),
    #[error("row {row}, column `{column}`: cannot parse `{value}` as a number")]
    Parse { row: usize, column: String, value: String },
    #[error("invalid schema: {0}")]
    Schema(String),
    #[error(transparent)]
    Io(#[from] std::io::Error),
    #[error(transparent)]
    Csv(#[from] csv::Error),
}

pub type Result<T, E = FlightDataError> = std::result::Result<T, E>;

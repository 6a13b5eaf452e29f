//! Tolles-Lawson aeromagnetic compensation.
//!
//! The aircraft field seen by a scalar magnetometer is modeled as a linear combination
//! of 18 attitude terms built from the direction cosines of the Earth field in the body
//! frame: 3 permanent, 6 induced, and 9 eddy-current terms. Coefficients are fit by
//! ridge least squares on bandpass-filtered columns and target.

mod coeffs;
mod design;
mod fit;

pub use coeffs::{TlCoefficients, COEFF_FORMAT_VERSION};
pub use design::{direction_cosines, tl_design_matrix, DirectionCosines, TlDesignMatrix, TL_COLUMN_NAMES, TL_TERMS};
pub use fit::{tl_compensate, tl_fit, tl_fit_segments, tl_interference};

use thiserror::Error;

use crate::dsp::DspError;

#[derive(Debug, Error)]
pub enum TlError {
    #[error("field magnitude at sample {0} is at or below 1 nT")]
    ZeroFieldSample(usize),
    #[error("need at least {need} samples, got {got}")]
    TooFewSamples { got: usize, need: usize },
    #[error("length mismatch: {left} vs {right}")]
    LengthMismatch { left: usize, right: usize },
    #[error("filtered design is singular near column {column} (`{name}`); fit with a ridge penalty λ > 0")]
    SingularSystem { column: usize, name: &'static str },
    #[error("ridge penalty must be finite and non-negative, got {0}")]
    InvalidLambda(f64),
    #[error("coefficient file: {0}")]
    Format(String),
    #[error(transparent)]
    Dsp(#[from] DspError),
    #[error(transparent)]
    Io(#[from] std::io::Error),
}

pub type Result<T, E = TlError> = std::result::Result<T, E>;

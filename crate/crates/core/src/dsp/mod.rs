//! Signal conditioning: zero-phase Butterworth bandpass, z-score normalization,
//! residualization against a reference magnetometer, and core-field removal.

mod butterworth;
mod correct;
mod filtfilt;
mod zscore;

pub use butterworth::{design_bandpass, BandpassSpec, Biquad};
pub use correct::{remove_core_field, residualize};
pub use filtfilt::{filtfilt, sosfilt};
pub use zscore::{zscore_apply, zscore_fit, zscore_invert, ZScoreStats};

use thiserror::Error;

#[derive(Debug, Error, PartialEq)]
pub enum DspError {
    #[error("invalid band: {0}")]
    InvalidBand(String),
    #[error("signal of {len} samples is too short; need more than {min}")]
    SignalTooShort { len: usize, min: usize },
    #[error("signal is constant or has fewer than 2 samples")]
    DegenerateSignal,
    #[error("length mismatch: {left} vs {right}")]
    LengthMismatch { left: usize, right: usize },
}

pub type Result<T, E = DspError> = std::result::Result<T, E>;

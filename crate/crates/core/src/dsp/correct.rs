use super::{DspError, Result};
use crate::Real;

/// `inner[i] - reference[i]`: an inner magnetometer relative to the reference sensor.
pub fn residualize<T: Real>(inner: &[T], reference: &[T]) -> Result<Vec<T>> {
    if inner.len() != reference.len() {
        return Err(DspError::LengthMismatch { left: inner.len(), right: reference.len() });
    }
    Ok(inner.iter().zip(reference).map(|(&a, &b)| a - b).collect())
}

/// `scalar[i] - igrf[i] - diurnal[i]`, evaluated left to right.
pub fn remove_core_field<T: Real>(scalar: &[T], igrf: &[T], diurnal: &[T]) -> Result<Vec<T>> {
    if scalar.len() != igrf.len() {
        return Err(DspError::LengthMismatch { left: scalar.len(), right: igrf.len() });
    }
    if scalar.len() != diurnal.len() {
        return Err(DspError::LengthMismatch { left: scalar.len(), right: diurnal.len() });
    }
    Ok(scalar.iter().zip(igrf).zip(diurnal).map(|((&s, &g), &d)| s - g - d).collect())
}

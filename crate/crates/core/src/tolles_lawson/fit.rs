use rayon::prelude::*;

use super::coeffs::TlCoefficients;
use super::design::{TlDesignMatrix, TL_COLUMN_NAMES, TL_TERMS};
use super::{Result, TlError};
use crate::dsp::{filtfilt, BandpassSpec};
use crate::linalg::{dot, solve_spd};
use crate::Real;

/// Fits coefficients on one segment. See [`tl_fit_segments`].
pub fn tl_fit<T: Real>(
    a: &TlDesignMatrix<T>,
    target: &[T],
    spec: &BandpassSpec<T>,
    lambda: T,
) -> Result<TlCoefficients<T>> {
    tl_fit_segments(&[(a, target)], spec, lambda)
}

/// Solves `(AᶠᵀAᶠ + λI) β = Aᶠᵀbᶠ`, where `ᶠ` is column-wise zero-phase bandpass
/// filtering applied to each segment independently, so no filter runs across a
/// segment boundary.
pub fn tl_fit_segments<T: Real>(
    segments: &[(&TlDesignMatrix<T>, &[T])],
    spec: &BandpassSpec<T>,
    lambda: T,
) -> Result<TlCoefficients<T>> {
    if !(lambda >= T::zero()) || !lambda.is_finite() {
        return Err(TlError::InvalidLambda(lambda.as_f64()));
    }
    let total: usize = segments.iter().map(|(a, _)| a.n_rows()).sum();
    if total < TL_TERMS {
        return Err(TlError::TooFewSamples { got: total, need: TL_TERMS });
    }
    let mut gram = vec![T::zero(); TL_TERMS * TL_TERMS];
    let mut rhs = vec![T::zero(); TL_TERMS];
    for (a, target) in segments {
        if a.n_rows() != target.len() {
            return Err(TlError::LengthMismatch { left: a.n_rows(), right: target.len() });
        }
        let filtered: Vec<Vec<T>> =
            a.columns().par_iter().map(|c| filtfilt(c, spec)).collect::<Result<_, _>>()?;
        let b = filtfilt(target, spec)?;
        for i in 0..TL_TERMS {
            for j in i..TL_TERMS {
                gram[i * TL_TERMS + j] = gram[i * TL_TERMS + j] + dot(&filtered[i], &filtered[j]);
            }
            rhs[i] = rhs[i] + dot(&filtered[i], &b);
        }
    }
    for i in 0..TL_TERMS {
        for j in 0..i {
            gram[i * TL_TERMS + j] = gram[j * TL_TERMS + i];
        }
        gram[i * TL_TERMS + i] = gram[i * TL_TERMS + i] + lambda;
    }
    let beta = solve_spd(&gram, &rhs, TL_TERMS)
        .map_err(|s| TlError::SingularSystem { column: s.column, name: TL_COLUMN_NAMES[s.column] })?;
    Ok(TlCoefficients::new(beta, (spec.low_hz, spec.high_hz), spec.order, lambda))
}

/// Predicted interference `A β`.
pub fn tl_interference<T: Real>(a: &TlDesignMatrix<T>, beta: &TlCoefficients<T>) -> Vec<T> {
    a.apply(beta.beta())
}

/// `scalar - Aβ + mean(Aβ)`: removes the predicted interference while keeping the
/// overall level of the signal, which the bandpassed fit cannot observe.
pub fn tl_compensate<T: Real>(scalar: &[T], a: &TlDesignMatrix<T>, beta: &TlCoefficients<T>) -> Result<Vec<T>> {
    if scalar.len() != a.n_rows() {
        return Err(TlError::LengthMismatch { left: scalar.len(), right: a.n_rows() });
    }
    let interference = tl_interference(a, beta);
    let mean = interference.iter().copied().sum::<T>() / T::from_usize_lossy(interference.len().max(1));
    Ok(scalar.iter().zip(&interference).map(|(&s, &f)| s - f + mean).collect())
}

use serde::{Deserialize, Serialize};

use super::{DspError, Result};
use crate::Real;

/// Per-channel mean and population standard deviation.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ZScoreStats<T> {
    pub mean: T,
    pub std: T,
}

impl<T: Real> ZScoreStats<T> {
    pub fn identity() -> Self {
        Self { mean: T::zero(), std: T::one() }
    }

    #[inline]
    pub fn apply(&self, v: T) -> T {
        (v - self.mean) / self.std
    }

    #[inline]
    pub fn invert(&self, z: T) -> T {
        z * self.std + self.mean
    }
}

pub fn zscore_fit<T: Real>(x: &[T]) -> Result<ZScoreStats<T>> {
    if x.len() < 2 {
        return Err(DspError::DegenerateSignal);
    }
    let n = T::from_usize_lossy(x.len());
    let mean = x.iter().copied().sum::<T>() / n;
    let var = x.iter().map(|&v| (v - mean) * (v - mean)).sum::<T>() / n;
    let std = var.sqrt();
    if !(std > T::epsilon() * mean.abs()) || !std.is_finite() {
        return Err(DspError::DegenerateSignal);
    }
    Ok(ZScoreStats { mean, std })
}

pub fn zscore_apply<T: Real>(x: &[T], stats: &ZScoreStats<T>) -> Vec<T> {
    x.iter().map(|&v| stats.apply(v)).collect()
}

pub fn zscore_invert<T: Real>(z: &[T], stats: &ZScoreStats<T>) -> Vec<T> {
    z.iter().map(|&v| stats.invert(v)).collect()
}

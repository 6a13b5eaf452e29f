use super::{EvalError, Result};
use crate::Real;

fn check<T>(y: &[T], yhat: &[T]) -> Result<()> {
    if y.len() != yhat.len() {
        return Err(EvalError::LengthMismatch { left: y.len(), right: yhat.len() });
    }
    if y.is_empty() {
        return Err(EvalError::EmptyInput);
    }
    Ok(())
}

/// Root mean square of `y − ŷ`.
pub fn rmse<T: Real>(y: &[T], yhat: &[T]) -> Result<T> {
    check(y, yhat)?;
    let ss: T = y.iter().zip(yhat).map(|(&a, &b)| (a - b) * (a - b)).sum();
    Ok((ss / T::from_usize_lossy(y.len())).sqrt())
}

/// RMSE after removing the mean error, i.e. the standard deviation of `y − ŷ`.
pub fn rmse_demeaned<T: Real>(y: &[T], yhat: &[T]) -> Result<T> {
    check(y, yhat)?;
    let n = T::from_usize_lossy(y.len());
    let mean = y.iter().zip(yhat).map(|(&a, &b)| a - b).sum::<T>() / n;
    let ss: T = y.iter().zip(yhat).map(|(&a, &b)| (a - b - mean) * (a - b - mean)).sum();
    Ok((ss / n).sqrt())
}

use super::params::ParamSet;
use super::{LiquidError, Result};
use crate::Real;

/// One Adam update on a flat tensor, with bias correction for step `t` (1-based).
#[allow(clippy::too_many_arguments)]
pub fn adam_step<T: Real>(
    params: &mut [T],
    grads: &[T],
    m: &mut [T],
    v: &mut [T],
    lr: T,
    beta1: T,
    beta2: T,
    eps: T,
    t: u64,
) -> Result<()> {
    let n = params.len();
    for len in [grads.len(), m.len(), v.len()] {
        if len != n {
            return Err(LiquidError::ShapeMismatch { expected: n, got: len });
        }
    }
    if t == 0 {
        return Err(LiquidError::InvalidConfig("adam step counter starts at 1".into()));
    }
    let one = T::one();
    let exp = i32::try_from(t).unwrap_or(i32::MAX);
    let c1 = one - beta1.powi(exp);
    let c2 = one - beta2.powi(exp);
    for k in 0..n {
        let g = grads[k];
        m[k] = beta1 * m[k] + (one - beta1) * g;
        v[k] = beta2 * v[k] + (one - beta2) * g * g;
        let m_hat = m[k] / c1;
        let v_hat = v[k] / c2;
        params[k] = params[k] - lr * m_hat / (v_hat.sqrt() + eps);
    }
    Ok(())
}

/// Adam optimizer state for a whole [`ParamSet`].
#[derive(Debug, Clone, PartialEq)]
pub struct Adam<T> {
    pub lr: T,
    pub beta1: T,
    pub beta2: T,
    pub eps: T,
    t: u64,
    m: Vec<Vec<T>>,
    v: Vec<Vec<T>>,
}

impl<T: Real> Adam<T> {
    pub fn new(lr: T, params: &ParamSet<T>) -> Self {
        let zeros: Vec<Vec<T>> = params.params().iter().map(|p| vec![T::zero(); p.len()]).collect();
        Self { lr, beta1: T::lit(0.9), beta2: T::lit(0.999), eps: T::lit(1e-8), t: 0, m: zeros.clone(), v: zeros }
    }

    pub fn steps(&self) -> u64 {
        self.t
    }

    /// Applies one update. Masked entries are re-zeroed so wiring survives any step count.
    pub fn step(&mut self, params: &mut ParamSet<T>, grads: &[Vec<T>]) -> Result<()> {
        if grads.len() != params.len() {
            return Err(LiquidError::ShapeMismatch { expected: params.len(), got: grads.len() });
        }
        self.t += 1;
        for (i, g) in grads.iter().enumerate() {
            let p = params.get_mut(i);
            adam_step(&mut p.data, g, &mut self.m[i], &mut self.v[i], self.lr, self.beta1, self.beta2, self.eps, self.t)?;
            if let Some(mask) = &p.mask {
                for (x, &k) in p.data.iter_mut().zip(mask) {
                    if k == T::zero() {
                        *x = T::zero();
                    }
                }
            }
        }
        Ok(())
    }
}

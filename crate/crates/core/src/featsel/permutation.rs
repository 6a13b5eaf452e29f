use rand::seq::SliceRandom;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;

use super::{FeatselError, Result};
use crate::eval::rmse;
use crate::flightdata::FeatureMatrix;
use crate::liquid::LiquidModel;
use crate::seed::{child_seed, indexed_seed};
use crate::Real;

/// Anything that maps a feature matrix to one prediction per row.
pub trait Regressor<T> {
    fn predict(&self, x: &FeatureMatrix<T>) -> Result<Vec<T>>;
}

impl<T, F: Fn(&FeatureMatrix<T>) -> Vec<T>> Regressor<T> for F {
    fn predict(&self, x: &FeatureMatrix<T>) -> Result<Vec<T>> {
        Ok(self(x))
    }
}

/// A trained sequence model evaluated at a fixed sample interval.
pub struct SequenceRegressor<'a, T> {
    pub model: &'a LiquidModel<T>,
    pub dt: T,
}

impl<T: Real> Regressor<T> for SequenceRegressor<'_, T> {
    fn predict(&self, x: &FeatureMatrix<T>) -> Result<Vec<T>> {
        self.model.forward_sequence(x, self.dt).map_err(|e| FeatselError::Model(e.to_string()))
    }
}

fn score<T: Real>(model: &(impl Regressor<T> + ?Sized), x: &FeatureMatrix<T>, y: &[T]) -> Result<T> {
    let pred = model.predict(x)?;
    rmse(y, &pred).map_err(|e| FeatselError::Model(e.to_string()))
}

/// Mean increase in RMSE when one column is shuffled, per feature. Shuffles for feature
/// `j`, repeat `r` are seeded from `(seed, j, r)`, so scores do not depend on scheduling.
pub fn permutation_importance<T: Real>(
    model: &(impl Regressor<T> + Sync + ?Sized),
    x: &FeatureMatrix<T>,
    y: &[T],
    seed: u64,
    repeats: usize,
) -> Result<Vec<T>> {
    if y.len() != x.n_rows() {
        return Err(FeatselError::LengthMismatch { left: x.n_rows(), right: y.len() });
    }
    if repeats == 0 {
        return Err(FeatselError::TooShort { got: 0, min: 1 });
    }
    let base = score(model, x, y)?;
    let root = child_seed(seed, "permutation");
    (0..x.n_features())
        .into_par_iter()
        .map(|j| {
            let column = x.column(j);
            let mut total = T::zero();
            for r in 0..repeats {
                let mut shuffled = column.clone();
                shuffled.shuffle(&mut ChaCha8Rng::seed_from_u64(indexed_seed(root, &[j as u64, r as u64])));
                total = total + (score(model, &x.with_column(j, &shuffled), y)? - base);
            }
            Ok(total / T::from_usize_lossy(repeats))
        })
        .collect()
}

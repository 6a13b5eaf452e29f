use rand::seq::SliceRandom;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

use super::{EvalError, Result};
use crate::seed::child_seed;

/// One split of flights into disjoint train and test sets.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Fold {
    pub train: Vec<String>,
    pub test: Vec<String>,
}

/// Seeded partition of flights into `k` test folds whose sizes differ by at most one.
/// Each returned list keeps the input order of the flights.
pub fn kfold_by_flight(flights: &[String], k: usize, seed: u64) -> Result<Vec<Fold>> {
    let n = flights.len();
    if k < 2 || k > n {
        return Err(EvalError::InvalidK { k, n });
    }
    let mut unique = flights.to_vec();
    unique.sort();
    unique.dedup();
    if unique.len() != n {
        return Err(EvalError::InvalidConfig("flight ids must be unique".into()));
    }
    let mut order: Vec<usize> = (0..n).collect();
    order.shuffle(&mut ChaCha8Rng::seed_from_u64(child_seed(seed, "kfold")));
    let mut fold_of = vec![0; n];
    for (pos, &i) in order.iter().enumerate() {
        fold_of[i] = pos % k;
    }
    Ok((0..k)
        .map(|f| {
            let pick = |want: bool| flights.iter().zip(&fold_of).filter(|(_, &g)| (g == f) == want).map(|(s, _)| s.clone()).collect();
            Fold { train: pick(false), test: pick(true) }
        })
        .collect())
}

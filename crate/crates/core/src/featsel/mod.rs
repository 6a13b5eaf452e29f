//! Feature ranking: Spearman correlation, LASSO by coordinate descent, and
//! permutation importance, with mean-rank aggregation across methods.

mod lasso;
mod permutation;
mod ranking;
mod spearman;

pub use lasso::{lasso_cd, standardize, LassoFit};
pub use permutation::{permutation_importance, Regressor, SequenceRegressor};
pub use ranking::{rank_lasso, rank_permutation, rank_spearman, ranking_report, select_features, FeatureRanking, Method};
pub use spearman::{fractional_ranks, spearman};

use thiserror::Error;

#[derive(Debug, Error)]
pub enum FeatselError {
    #[error("length mismatch: {left} vs {right}")]
    LengthMismatch { left: usize, right: usize },
    #[error("need at least {min} samples, got {got}")]
    TooShort { got: usize, min: usize },
    #[error("constant signal has no ranks to correlate")]
    DegenerateSignal,
    #[error("column `{column}` is not standardized (mean {mean}, std {std})")]
    NotStandardized { column: String, mean: f64, std: f64 },
    #[error("invalid k = {k} for {n} features")]
    InvalidK { k: usize, n: usize },
    #[error("invalid lambda {0}")]
    InvalidLambda(f64),
    #[error("coordinate descent did not converge in {0} sweeps")]
    NotConverged(usize),
    #[error("rankings disagree on the feature set")]
    FeatureSetMismatch,
    #[error("model evaluation failed: {0}")]
    Model(String),
}

pub type Result<T, E = FeatselError> = std::result::Result<T, E>;

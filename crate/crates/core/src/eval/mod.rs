//! Flight-wise cross-validation, RMSE scoring, and comparison against the
//! Tolles-Lawson baseline.

mod folds;
mod metrics;
mod pipeline;
mod report;

pub use folds::{kfold_by_flight, Fold};
pub use metrics::{rmse, rmse_demeaned};
pub use pipeline::{
    cross_validate, evaluate_fold, fit_tl, learning_matrix, prepare_flight, run_model, tl_output, truth_anomaly,
    report_name, FeatureScaler, FoldOutput, ModelRun, PipelineConfig, TargetMode,
};
pub use report::{compare_report, parse_rows, EvalReport, Reduction, ReportScalar, ResultRow, TL_MODEL};

use thiserror::Error;

#[derive(Debug, Error)]
pub enum EvalError {
    #[error("length mismatch: {left} vs {right}")]
    LengthMismatch { left: usize, right: usize },
    #[error("empty input")]
    EmptyInput,
    #[error("invalid k = {k} for {n} flights (need 2 ≤ k ≤ n)")]
    InvalidK { k: usize, n: usize },
    #[error("no T-L baseline row for flight `{0}`")]
    MissingBaseline(String),
    #[error("duplicate result row for model `{model}` on flight `{flight}`")]
    DuplicateRow { model: String, flight: String },
    #[error("invalid configuration: {0}")]
    InvalidConfig(String),
    #[error(transparent)]
    Data(#[from] crate::flightdata::FlightDataError),
    #[error(transparent)]
    Dsp(#[from] crate::dsp::DspError),
    #[error(transparent)]
    Tl(#[from] crate::tolles_lawson::TlError),
    #[error(transparent)]
    Model(#[from] crate::liquid::LiquidError),
}

pub type Result<T, E = EvalError> = std::result::Result<T, E>;

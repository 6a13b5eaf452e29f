pub mod cli;
pub mod dsp;
pub mod eval;
pub mod featsel;
pub mod flightdata;
pub mod linalg;
pub mod liquid;
pub mod scalar;
pub mod seed;
pub mod synth;
pub mod tolles_lawson;

pub use scalar::Real;

/// Double-precision aliases for the generic core types.
pub type FlightFrame64 = flightdata::FlightFrame<f64>;
pub type FeatureMatrix64 = flightdata::FeatureMatrix<f64>;
pub type TlCoefficients64 = tolles_lawson::TlCoefficients<f64>;
pub type LiquidModel64 = liquid::LiquidModel<f64>;
pub type EvalReport64 = eval::EvalReport<f64>;

/// Single-precision aliases.
pub type FlightFrame32 = flightdata::FlightFrame<f32>;
pub type FeatureMatrix32 = flightdata::FeatureMatrix<f32>;
pub type TlCoefficients32 = tolles_lawson::TlCoefficients<f32>;
pub type LiquidModel32 = liquid::LiquidModel<f32>;

/// Exact-rational report, for reduction arithmetic without rounding drift.
pub type ExactReport = eval::EvalReport<num_rational::Ratio<i64>>;

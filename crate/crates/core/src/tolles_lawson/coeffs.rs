use std::path::Path;

use serde::{Deserialize, Serialize};

use super::design::{TL_COLUMN_NAMES, TL_TERMS};
use super::{Result, TlError};
use crate::Real;

pub const COEFF_FORMAT_VERSION: u32 = 1;

/// Fitted Tolles-Lawson coefficients (permanent in nT, induced unitless, eddy in s)
/// together with the fit settings that produced them.
#[derive(Debug, Clone, PartialEq)]
pub struct TlCoefficients<T> {
    beta: Vec<T>,
    fit_passband: (T, T),
    filter_order: usize,
    ridge_lambda: T,
}

#[derive(Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
struct CoeffFile {
    format_version: u32,
    coefficients: Vec<NamedValue>,
    passband_hz: [f64; 2],
    filter_order: usize,
    ridge_lambda: f64,
}

#[derive(Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
struct NamedValue {
    name: String,
    value: f64,
}

impl<T: Real> TlCoefficients<T> {
    pub fn new(beta: Vec<T>, fit_passband: (T, T), filter_order: usize, ridge_lambda: T) -> Self {
        assert_eq!(beta.len(), TL_TERMS, "Tolles-Lawson needs {TL_TERMS} coefficients");
        Self { beta, fit_passband, filter_order, ridge_lambda }
    }

    pub fn beta(&self) -> &[T] {
        &self.beta
    }

    pub fn fit_passband(&self) -> (T, T) {
        self.fit_passband
    }

    pub fn filter_order(&self) -> usize {
        self.filter_order
    }

    pub fn ridge_lambda(&self) -> T {
        self.ridge_lambda
    }

    pub fn to_json(&self) -> String {
        let file = CoeffFile {
            format_version: COEFF_FORMAT_VERSION,
            coefficients: TL_COLUMN_NAMES
                .iter()
                .zip(&self.beta)
                .map(|(n, v)| NamedValue { name: n.to_string(), value: v.as_f64() })
                .collect(),
            passband_hz: [self.fit_passband.0.as_f64(), self.fit_passband.1.as_f64()],
            filter_order: self.filter_order,
            ridge_lambda: self.ridge_lambda.as_f64(),
        };
        let mut s = serde_json::to_string_pretty(&file).expect("coefficients serialize");
        s.push('\n');
        s
    }

    pub fn from_json(text: &str) -> Result<Self> {
        let file: CoeffFile = serde_json::from_str(text).map_err(|e| TlError::Format(e.to_string()))?;
        if file.format_version != COEFF_FORMAT_VERSION {
            return Err(TlError::Format(format!("unsupported format version {}", file.format_version)));
        }
        if file.coefficients.len() != TL_TERMS {
            return Err(TlError::Format(format!("expected {TL_TERMS} coefficients, found {}", file.coefficients.len())));
        }
        for (nv, expect) in file.coefficients.iter().zip(TL_COLUMN_NAMES) {
            if nv.name != expect {
                return Err(TlError::Format(format!("expected coefficient `{expect}`, found `{}`", nv.name)));
            }
        }
        let cast = |v: f64| T::from_f64(v).filter(|x| x.is_finite()).ok_or_else(|| TlError::Format(format!("bad value {v}")));
        Ok(Self {
            beta: file.coefficients.iter().map(|nv| cast(nv.value)).collect::<Result<_>>()?,
            fit_passband: (cast(file.passband_hz[0])?, cast(file.passband_hz[1])?),
            filter_order: file.filter_order,
            ridge_lambda: cast(file.ridge_lambda)?,
        })
    }

    pub fn save(&self, path: impl AsRef<Path>) -> Result<()> {
        std::fs::write(path, self.to_json())?;
        Ok(())
    }

    pub fn load(path: impl AsRef<Path>) -> Result<Self> {
        Self::from_json(&std::fs::read_to_string(path)?)
    }
}

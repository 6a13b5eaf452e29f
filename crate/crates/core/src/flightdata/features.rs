use super::frame::FlightFrame;
use super::{FlightDataError, Result};
use crate::Real;

/// Default model inputs: residualized inner magnetometers 4 and 5, position and
/// orientation, horizontal INS velocities, altitude, and six electrical channels.
pub const CANONICAL_FEATURES: [&str; 16] = [
    "mag_4_res",
    "mag_5_res",
    "lat",
    "lon",
    "ins_roll",
    "ins_pitch",
    "ins_yaw",
    "ins_vn",
    "ins_ve",
    "baro",
    "V_BAT1",
    "V_BAT2",
    "CUR_ACLo",
    "CUR_FLAP",
    "CUR_TANK",
    "CUR_IHTR",
];

/// Row-major `N x m` design matrix with an aligned target vector.
#[derive(Debug, Clone, PartialEq)]
pub struct FeatureMatrix<T> {
    x: Vec<T>,
    y: Vec<T>,
    feature_names: Vec<String>,
}

impl<T: Real> FeatureMatrix<T> {
    /// Builds from row-major data. `x.len()` must equal `y.len() * feature_names.len()`.
    pub fn new(x: Vec<T>, y: Vec<T>, feature_names: Vec<String>) -> Result<Self> {
        let expected = y.len() * feature_names.len();
        if x.len() != expected {
            return Err(FlightDataError::LengthMismatch { channel: "X".into(), len: x.len(), expected });
        }
        Ok(Self { x, y, feature_names })
    }

    /// Builds from column vectors.
    pub fn from_columns(columns: &[Vec<T>], y: Vec<T>, feature_names: Vec<String>) -> Result<Self> {
        let n = y.len();
        if columns.len() != feature_names.len() {
            return Err(FlightDataError::LengthMismatch {
                channel: "feature_names".into(),
                len: feature_names.len(),
                expected: columns.len(),
            });
        }
        for (c, name) in columns.iter().zip(&feature_names) {
            if c.len() != n {
                return Err(FlightDataError::LengthMismatch { channel: name.clone(), len: c.len(), expected: n });
            }
        }
        let m = columns.len();
        let mut x = Vec::with_capacity(n * m);
        for i in 0..n {
            x.extend(columns.iter().map(|c| c[i]));
        }
        Ok(Self { x, y, feature_names })
    }

    pub fn n_rows(&self) -> usize {
        self.y.len()
    }

    pub fn n_features(&self) -> usize {
        self.feature_names.len()
    }

    pub fn feature_names(&self) -> &[String] {
        &self.feature_names
    }

    pub fn row(&self, i: usize) -> &[T] {
        let m = self.n_features();
        &self.x[i * m..(i + 1) * m]
    }

    pub fn column(&self, j: usize) -> Vec<T> {
        (0..self.n_rows()).map(|i| self.x[i * self.n_features() + j]).collect()
    }

    pub fn x(&self) -> &[T] {
        &self.x
    }

    pub fn y(&self) -> &[T] {
        &self.y
    }

    /// Copy with column `j` replaced.
    pub fn with_column(&self, j: usize, values: &[T]) -> Self {
        let m = self.n_features();
        let mut out = self.clone();
        for (i, v) in values.iter().enumerate().take(self.n_rows()) {
            out.x[i * m + j] = *v;
        }
        out
    }

    /// Copy with a different target vector of the same length.
    pub fn with_target(&self, y: Vec<T>) -> Result<Self> {
        if y.len() != self.n_rows() {
            return Err(FlightDataError::LengthMismatch { channel: "y".into(), len: y.len(), expected: self.n_rows() });
        }
        Ok(Self { x: self.x.clone(), y, feature_names: self.feature_names.clone() })
    }

    /// Applies `f(column_index, value)` to every entry of `X`.
    pub fn map_columns(&self, f: impl Fn(usize, T) -> T) -> Self {
        let m = self.n_features();
        let x = self.x.iter().enumerate().map(|(k, &v)| f(k % m, v)).collect();
        Self { x, y: self.y.clone(), feature_names: self.feature_names.clone() }
    }

    /// Row range as a new matrix.
    pub fn rows(&self, range: std::ops::Range<usize>) -> Self {
        let m = self.n_features();
        Self {
            x: self.x[range.start * m..range.end * m].to_vec(),
            y: self.y[range].to_vec(),
            feature_names: self.feature_names.clone(),
        }
    }
}

/// Projects `frame` onto `features` (in the requested order) with `target` as `y`.
pub fn to_feature_matrix<T: Real>(
    frame: &FlightFrame<T>,
    features: &[&str],
    target: &str,
) -> Result<FeatureMatrix<T>> {
    if features.contains(&target) {
        return Err(FlightDataError::TargetAsFeature(target.to_string()));
    }
    let y = frame.channel(target)?.to_vec();
    let columns = features.iter().map(|f| frame.channel(f).map(<[T]>::to_vec)).collect::<Result<Vec<_>>>()?;
    FeatureMatrix::from_columns(&columns, y, features.iter().map(|s| s.to_string()).collect())
}

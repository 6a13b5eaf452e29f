use super::{Result, TlError};
use crate::Real;

/// Number of Tolles-Lawson terms.
pub const TL_TERMS: usize = 18;

/// Column names in design-matrix order.
pub const TL_COLUMN_NAMES: [&str; TL_TERMS] = [
    "perm_1", "perm_2", "perm_3", "ind_11", "ind_12", "ind_13", "ind_22", "ind_23", "ind_33", "eddy_11", "eddy_12",
    "eddy_13", "eddy_21", "eddy_22", "eddy_23", "eddy_31", "eddy_32", "eddy_33",
];

/// Unit direction of the Earth field in the body frame, per sample.
#[derive(Debug, Clone, PartialEq)]
pub struct DirectionCosines<T> {
    pub c1: Vec<T>,
    pub c2: Vec<T>,
    pub c3: Vec<T>,
}

impl<T: Real> DirectionCosines<T> {
    pub fn len(&self) -> usize {
        self.c1.len()
    }

    pub fn is_empty(&self) -> bool {
        self.c1.is_empty()
    }
}

/// Splits vector-magnetometer components into direction cosines and field magnitude.
pub fn direction_cosines<T: Real>(
    flux_x: &[T],
    flux_y: &[T],
    flux_z: &[T],
) -> Result<(DirectionCosines<T>, Vec<T>)> {
    let n = flux_x.len();
    for other in [flux_y.len(), flux_z.len()] {
        if other != n {
            return Err(TlError::LengthMismatch { left: n, right: other });
        }
    }
    let mut cos = DirectionCosines { c1: Vec::with_capacity(n), c2: Vec::with_capacity(n), c3: Vec::with_capacity(n) };
    let mut mag = Vec::with_capacity(n);
    for i in 0..n {
        let (x, y, z) = (flux_x[i], flux_y[i], flux_z[i]);
        let m = (x * x + y * y + z * z).sqrt();
        if !(m > T::one()) {
            return Err(TlError::ZeroFieldSample(i));
        }
        cos.c1.push(x / m);
        cos.c2.push(y / m);
        cos.c3.push(z / m);
        mag.push(m);
    }
    Ok((cos, mag))
}

/// `N x 18` Tolles-Lawson design matrix, stored column-major.
#[derive(Debug, Clone, PartialEq)]
pub struct TlDesignMatrix<T> {
    columns: Vec<Vec<T>>,
}

impl<T: Real> TlDesignMatrix<T> {
    pub fn from_columns(columns: Vec<Vec<T>>) -> Result<Self> {
        if columns.len() != TL_TERMS {
            return Err(TlError::LengthMismatch { left: columns.len(), right: TL_TERMS });
        }
        let n = columns[0].len();
        if let Some(c) = columns.iter().find(|c| c.len() != n) {
            return Err(TlError::LengthMismatch { left: c.len(), right: n });
        }
        Ok(Self { columns })
    }

    pub fn n_rows(&self) -> usize {
        self.columns[0].len()
    }

    pub fn columns(&self) -> &[Vec<T>] {
        &self.columns
    }

    pub fn column(&self, j: usize) -> &[T] {
        &self.columns[j]
    }

    pub fn row(&self, i: usize) -> [T; TL_TERMS] {
        std::array::from_fn(|j| self.columns[j][i])
    }

    /// `A β` per row.
    pub fn apply(&self, beta: &[T]) -> Vec<T> {
        (0..self.n_rows()).map(|i| self.columns.iter().zip(beta).map(|(c, &b)| c[i] * b).sum()).collect()
    }

    pub fn rows(&self, range: std::ops::Range<usize>) -> Self {
        Self { columns: self.columns.iter().map(|c| c[range.clone()].to_vec()).collect() }
    }
}

/// Central differences scaled by `fs`; one-sided at the two endpoints.
fn derivative<T: Real>(c: &[T], fs: T) -> Vec<T> {
    let n = c.len();
    let half = fs / T::lit(2.0);
    (0..n)
        .map(|i| match i {
            0 => (c[1] - c[0]) * fs,
            i if i == n - 1 => (c[n - 1] - c[n - 2]) * fs,
            i => (c[i + 1] - c[i - 1]) * half,
        })
        .collect()
}

/// Builds the design matrix with columns
/// `[c1, c2, c3]`, `|B|·[c1c1, c1c2, c1c3, c2c2, c2c3, c3c3]`, and
/// `|B|·[c1ċ1, c1ċ2, c1ċ3, c2ċ1, c2ċ2, c2ċ3, c3ċ1, c3ċ2, c3ċ3]`.
pub fn tl_design_matrix<T: Real>(cos: &DirectionCosines<T>, mag: &[T], fs: T) -> Result<TlDesignMatrix<T>> {
    let n = cos.len();
    if n < 3 {
        return Err(TlError::TooFewSamples { got: n, need: 3 });
    }
    for other in [cos.c2.len(), cos.c3.len(), mag.len()] {
        if other != n {
            return Err(TlError::LengthMismatch { left: n, right: other });
        }
    }
    let c = [&cos.c1, &cos.c2, &cos.c3];
    let dc = [derivative(&cos.c1, fs), derivative(&cos.c2, fs), derivative(&cos.c3, fs)];
    let mut columns: Vec<Vec<T>> = Vec::with_capacity(TL_TERMS);
    for ci in c {
        columns.push(ci.clone());
    }
    for (a, b) in [(0, 0), (0, 1), (0, 2), (1, 1), (1, 2), (2, 2)] {
        columns.push((0..n).map(|i| mag[i] * c[a][i] * c[b][i]).collect());
    }
    for a in 0..3 {
        for b in 0..3 {
            columns.push((0..n).map(|i| mag[i] * c[a][i] * dc[b][i]).collect());
        }
    }
    Ok(TlDesignMatrix { columns })
}

//! Small dense solvers used by the regression paths.

use crate::Real;

/// Returned when a symmetric system is numerically singular.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct Singular {
    /// Column at which elimination broke down.
    pub column: usize,
}

/// Solves `A x = b` for symmetric positive-definite `A` (row-major `n x n`).
///
/// The matrix is equilibrated to unit diagonal before the Cholesky factorization; a
/// zero diagonal or a scaled pivot below `1e4 * eps` is reported as [`Singular`].
pub fn solve_spd<T: Real>(a: &[T], b: &[T], n: usize) -> Result<Vec<T>, Singular> {
    assert_eq!(a.len(), n * n);
    assert_eq!(b.len(), n);
    let mut scale = vec![T::zero(); n];
    for i in 0..n {
        let d = a[i * n + i];
        if !(d > T::zero()) || !d.is_finite() {
            return Err(Singular { column: i });
        }
        scale[i] = d.sqrt().recip();
    }
    let tol = T::epsilon() * T::lit(1e4);
    let mut l = vec![T::zero(); n * n];
    for j in 0..n {
        let mut pivot = a[j * n + j] * scale[j] * scale[j];
        for k in 0..j {
            pivot = pivot - l[j * n + k] * l[j * n + k];
        }
        if !(pivot > tol) {
            return Err(Singular { column: j });
        }
        let ljj = pivot.sqrt();
        l[j * n + j] = ljj;
        for i in j + 1..n {
            let mut s = a[i * n + j] * scale[i] * scale[j];
            for k in 0..j {
                s = s - l[i * n + k] * l[j * n + k];
            }
            l[i * n + j] = s / ljj;
        }
    }
    let mut y: Vec<T> = (0..n).map(|i| b[i] * scale[i]).collect();
    for i in 0..n {
        for k in 0..i {
            y[i] = y[i] - l[i * n + k] * y[k];
        }
        y[i] = y[i] / l[i * n + i];
    }
    for i in (0..n).rev() {
        for k in i + 1..n {
            y[i] = y[i] - l[k * n + i] * y[k];
        }
        y[i] = y[i] / l[i * n + i];
    }
    Ok(y.iter().zip(&scale).map(|(&v, &s)| v * s).collect())
}

/// Ridge normal equations `(XᵀX + λI) β = Xᵀy` for column-major `columns`.
pub fn ridge_normal_equations<T: Real>(columns: &[Vec<T>], y: &[T], lambda: T) -> Result<Vec<T>, Singular> {
    let p = columns.len();
    let mut gram = vec![T::zero(); p * p];
    let mut rhs = vec![T::zero(); p];
    for i in 0..p {
        for j in i..p {
            let v = dot(&columns[i], &columns[j]);
            gram[i * p + j] = v;
            gram[j * p + i] = v;
        }
        gram[i * p + i] = gram[i * p + i] + lambda;
        rhs[i] = dot(&columns[i], y);
    }
    solve_spd(&gram, &rhs, p)
}

pub fn dot<T: Real>(a: &[T], b: &[T]) -> T {
    a.iter().zip(b).map(|(&x, &y)| x * y).sum()
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn solves_badly_scaled_spd() {
        // diag(1e12, 1) coupled; exact solution (1, 2)
        let a = [1e12, 1e5, 1e5, 1.0 + 1e-2];
        let x = [1.0, 2.0];
        let b = [a[0] * x[0] + a[1] * x[1], a[2] * x[0] + a[3] * x[1]];
        let got: Vec<f64> = solve_spd(&a, &b, 2).unwrap();
        assert!((got[0] - 1.0).abs() < 1e-9 && (got[1] - 2.0).abs() < 1e-6);
    }

    #[test]
    fn detects_singular() {
        assert_eq!(solve_spd(&[1.0, 1.0, 1.0, 1.0], &[1.0, 1.0], 2), Err(Singular { column: 1 }));
        assert_eq!(solve_spd(&[0.0, 0.0, 0.0, 1.0], &[0.0, 1.0], 2), Err(Singular { column: 0 }));
    }
}

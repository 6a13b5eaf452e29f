use super::{FeatselError, Result};
use crate::dsp::zscore_fit;
use crate::Real;

const MAX_SWEEPS: usize = 100_000;
const STD_TOL: f64 = 1e-6;

#[derive(Debug, Clone, PartialEq)]
pub struct LassoFit<T> {
    pub beta: Vec<T>,
    pub sweeps: usize,
}

/// Z-scores every column (population std). Constant columns become all zero.
pub fn standardize<T: Real>(columns: &[Vec<T>]) -> Vec<Vec<T>> {
    columns
        .iter()
        .map(|c| match zscore_fit(c) {
            Ok(s) => c.iter().map(|&v| s.apply(v)).collect(),
            Err(_) => vec![T::zero(); c.len()],
        })
        .collect()
}

fn soft_threshold<T: Real>(z: T, lambda: T) -> T {
    if z > lambda {
        z - lambda
    } else if z < -lambda {
        z + lambda
    } else {
        T::zero()
    }
}

/// Minimizes `(1/2N)‖y − Xβ‖² + λ‖β‖₁` by cyclic coordinate descent, stopping when no
/// coordinate moves by more than 1e-8. Columns must be z-scored.
pub fn lasso_cd<T: Real>(columns: &[Vec<T>], names: &[String], y: &[T], lambda: T) -> Result<LassoFit<T>> {
    if !(lambda >= T::zero()) || !lambda.is_finite() {
        return Err(FeatselError::InvalidLambda(lambda.as_f64()));
    }
    let n = y.len();
    if n == 0 {
        return Err(FeatselError::TooShort { got: 0, min: 1 });
    }
    let nt = T::from_usize_lossy(n);
    let mut sq = Vec::with_capacity(columns.len());
    for (j, c) in columns.iter().enumerate() {
        if c.len() != n {
            return Err(FeatselError::LengthMismatch { left: c.len(), right: n });
        }
        let mean = c.iter().copied().sum::<T>() / nt;
        let ss = c.iter().map(|&v| v * v).sum::<T>() / nt;
        let std = (ss - mean * mean).max(T::zero()).sqrt();
        if (std.as_f64() - 1.0).abs() > STD_TOL || mean.as_f64().abs() > STD_TOL {
            let column = names.get(j).cloned().unwrap_or_else(|| format!("#{j}"));
            return Err(FeatselError::NotStandardized { column, mean: mean.as_f64(), std: std.as_f64() });
        }
        sq.push(ss);
    }
    let mut beta = vec![T::zero(); columns.len()];
    let mut resid = y.to_vec();
    let tol = T::lit(1e-8);
    for sweep in 1..=MAX_SWEEPS {
        let mut max_step = T::zero();
        for (j, c) in columns.iter().enumerate() {
            let rho = c.iter().zip(&resid).map(|(&x, &r)| x * r).sum::<T>() / nt + sq[j] * beta[j];
            let new = soft_threshold(rho, lambda) / sq[j];
            let step = new - beta[j];
            if step != T::zero() {
                for (r, &x) in resid.iter_mut().zip(c) {
                    *r = *r - step * x;
                }
                beta[j] = new;
                max_step = max_step.max(step.abs());
            }
        }
        if max_step < tol {
            return Ok(LassoFit { beta, sweeps: sweep });
        }
    }
    Err(FeatselError::NotConverged(MAX_SWEEPS))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::linalg::ridge_normal_equations;
    use proptest::prelude::*;
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;

    fn names(p: usize) -> Vec<String> {
        (0..p).map(|j| format!("x{j}")).collect()
    }

    fn random_problem(n: usize, p: usize, seed: u64) -> (Vec<Vec<f64>>, Vec<f64>) {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let raw: Vec<Vec<f64>> = (0..p).map(|_| (0..n).map(|_| rng.gen_range(-1.0..1.0)).collect()).collect();
        let cols = standardize(&raw);
        let mut y: Vec<f64> = (0..n).map(|i| 1.5 * cols[0][i] - 0.7 * cols[1 % p][i] + 0.3 * rng.gen_range(-1.0..1.0)).collect();
        let m = y.iter().sum::<f64>() / n as f64;
        y.iter_mut().for_each(|v| *v -= m);
        (cols, y)
    }

    #[test]
    fn orthonormal_design_soft_thresholds() {
        // Columns with X'X/N = I; y = 2·x0 + 0.5·x1 gives OLS (2, 0.5).
        let x0 = vec![1.0, -1.0, 1.0, -1.0];
        let x1 = vec![1.0, 1.0, -1.0, -1.0];
        let y: Vec<f64> = (0..4).map(|i| 2.0 * x0[i] + 0.5 * x1[i]).collect();
        let fit = lasso_cd(&[x0, x1], &names(2), &y, 1.0).unwrap();
        assert_eq!(fit.beta, vec![1.0, 0.0]);
    }

    #[test]
    fn zero_lambda_is_least_squares() {
        let (cols, y) = random_problem(200, 4, 3);
        let fit = lasso_cd(&cols, &names(4), &y, 0.0).unwrap();
        let ols = ridge_normal_equations(&cols, &y, 0.0).unwrap();
        for (a, b) in fit.beta.iter().zip(&ols) {
            assert!((a - b).abs() < 1e-6, "{a} vs {b}");
        }
    }

    #[test]
    fn large_lambda_zeroes_everything() {
        let (cols, y) = random_problem(100, 3, 5);
        let n = y.len() as f64;
        let lmax = cols.iter().map(|c| c.iter().zip(&y).map(|(a, b)| a * b).sum::<f64>().abs() / n).fold(0.0, f64::max);
        let fit = lasso_cd(&cols, &names(3), &y, lmax).unwrap();
        assert!(fit.beta.iter().all(|&b| b == 0.0));
    }

    #[test]
    fn rejects_unstandardized_columns() {
        let err = lasso_cd(&[vec![1.0, 2.0, 3.0]], &names(1), &[0.0, 1.0, 2.0], 0.1).unwrap_err();
        assert!(matches!(err, FeatselError::NotStandardized { .. }));
        assert!(lasso_cd::<f64>(&[], &[], &[1.0], -1.0).is_err());
    }

    proptest! {
        #![proptest_config(ProptestConfig::with_cases(32))]
        #[test]
        fn solution_satisfies_kkt(seed in any::<u64>(), lambda in 0.0f64..0.8) {
            let (cols, y) = random_problem(80, 5, seed);
            let fit = lasso_cd(&cols, &names(5), &y, lambda).unwrap();
            let n = y.len() as f64;
            let resid: Vec<f64> = (0..y.len())
                .map(|i| y[i] - cols.iter().zip(&fit.beta).map(|(c, b)| c[i] * b).sum::<f64>())
                .collect();
            for (c, &b) in cols.iter().zip(&fit.beta) {
                let g = c.iter().zip(&resid).map(|(x, r)| x * r).sum::<f64>() / n;
                if b == 0.0 {
                    prop_assert!(g.abs() <= lambda + 1e-6);
                } else {
                    prop_assert!((g - b.signum() * lambda).abs() <= 1e-6);
                }
            }
        }
    }
}

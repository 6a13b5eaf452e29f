use std::collections::BTreeMap;
use std::fmt::Write as _;

use serde::{Deserialize, Serialize};

use super::lasso::{lasso_cd, standardize};
use super::permutation::{permutation_importance, Regressor};
use super::spearman::spearman;
use super::{FeatselError, Result};
use crate::flightdata::FeatureMatrix;
use crate::Real;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Method {
    Spearman,
    Lasso,
    Permutation,
}

impl Method {
    pub fn name(self) -> &'static str {
        match self {
            Method::Spearman => "spearman",
            Method::Lasso => "lasso",
            Method::Permutation => "permutation",
        }
    }
}

/// Scores per feature (in input order) and all features ordered best first.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct FeatureRanking {
    pub method: Method,
    pub scores: Vec<(String, f64)>,
    pub selected: Vec<String>,
}

impl FeatureRanking {
    /// Orders by descending score, ties by name.
    pub fn from_scores(method: Method, scores: Vec<(String, f64)>) -> Self {
        let mut order: Vec<&(String, f64)> = scores.iter().collect();
        order.sort_by(|a, b| b.1.total_cmp(&a.1).then_with(|| a.0.cmp(&b.0)));
        let selected = order.into_iter().map(|(n, _)| n.clone()).collect();
        Self { method, scores, selected }
    }

    /// 1-based position of `feature` in `selected`.
    pub fn rank_of(&self, feature: &str) -> Option<usize> {
        self.selected.iter().position(|f| f == feature).map(|p| p + 1)
    }
}

/// |Spearman ρ| of each feature against the target; constant features score 0.
pub fn rank_spearman<T: Real>(m: &FeatureMatrix<T>) -> Result<FeatureRanking> {
    let scores = m
        .feature_names()
        .iter()
        .enumerate()
        .map(|(j, name)| match spearman(&m.column(j), m.y()) {
            Ok(r) => Ok((name.clone(), r.as_f64().abs())),
            Err(FeatselError::DegenerateSignal) => Ok((name.clone(), 0.0)),
            Err(e) => Err(e),
        })
        .collect::<Result<_>>()?;
    Ok(FeatureRanking::from_scores(Method::Spearman, scores))
}

/// |β| of a LASSO fit on z-scored features and the centered target.
pub fn rank_lasso<T: Real>(m: &FeatureMatrix<T>, lambda: T) -> Result<FeatureRanking> {
    let cols = standardize(&(0..m.n_features()).map(|j| m.column(j)).collect::<Vec<_>>());
    let mean = m.y().iter().copied().sum::<T>() / T::from_usize_lossy(m.n_rows().max(1));
    let y: Vec<T> = m.y().iter().map(|&v| v - mean).collect();
    // Constant columns were zeroed by standardization; they take no part in the fit.
    let live: Vec<usize> = (0..cols.len()).filter(|&j| cols[j].iter().any(|&v| v != T::zero())).collect();
    let names: Vec<String> = live.iter().map(|&j| m.feature_names()[j].clone()).collect();
    let fit = lasso_cd(&live.iter().map(|&j| cols[j].clone()).collect::<Vec<_>>(), &names, &y, lambda)?;
    let mut beta = vec![0.0; cols.len()];
    for (&j, b) in live.iter().zip(&fit.beta) {
        beta[j] = b.as_f64().abs();
    }
    Ok(FeatureRanking::from_scores(Method::Lasso, m.feature_names().iter().cloned().zip(beta).collect()))
}

pub fn rank_permutation<T: Real>(
    model: &(impl Regressor<T> + Sync + ?Sized),
    m: &FeatureMatrix<T>,
    seed: u64,
    repeats: usize,
) -> Result<FeatureRanking> {
    let s = permutation_importance(model, m, m.y(), seed, repeats)?;
    Ok(FeatureRanking::from_scores(
        Method::Permutation,
        m.feature_names().iter().cloned().zip(s.iter().map(|v| v.as_f64())).collect(),
    ))
}

/// Top `k` features by mean rank across rankings, ties broken by name.
pub fn select_features(rankings: &[FeatureRanking], k: usize) -> Result<Vec<String>> {
    let first = rankings.first().ok_or(FeatselError::InvalidK { k, n: 0 })?;
    let n = first.selected.len();
    if k == 0 || k > n {
        return Err(FeatselError::InvalidK { k, n });
    }
    let mut total: BTreeMap<&str, usize> = first.selected.iter().map(|f| (f.as_str(), 0)).collect();
    for r in rankings {
        if r.selected.len() != n {
            return Err(FeatselError::FeatureSetMismatch);
        }
        for (pos, f) in r.selected.iter().enumerate() {
            *total.get_mut(f.as_str()).ok_or(FeatselError::FeatureSetMismatch)? += pos + 1;
        }
    }
    // Equal counts per feature, so comparing rank sums compares mean ranks exactly.
    let mut order: Vec<(&str, usize)> = total.into_iter().collect();
    order.sort_by(|a, b| a.1.cmp(&b.1).then_with(|| a.0.cmp(b.0)));
    Ok(order.into_iter().take(k).map(|(f, _)| f.to_string()).collect())
}

/// Delimited report `method,feature,score,rank`, best first within each method.
pub fn ranking_report(rankings: &[FeatureRanking]) -> String {
    let mut s = String::from("method,feature,score,rank\n");
    for r in rankings {
        for (pos, f) in r.selected.iter().enumerate() {
            let score = r.scores.iter().find(|(n, _)| n == f).map_or(f64::NAN, |(_, v)| *v);
            writeln!(s, "{},{f},{score:.9e},{}", r.method.name(), pos + 1).expect("write to string");
        }
    }
    s
}

#[cfg(test)]
mod tests {
    use super::*;

    fn ranking(method: Method, order: &[&str]) -> FeatureRanking {
        let n = order.len();
        FeatureRanking::from_scores(method, order.iter().enumerate().map(|(i, f)| (f.to_string(), (n - i) as f64)).collect())
    }

    #[test]
    fn one_ranking_gives_its_top_k() {
        let r = ranking(Method::Spearman, &["c", "a", "b"]);
        assert_eq!(select_features(&[r.clone()], 2).unwrap(), vec!["c", "a"]);
        assert_eq!(select_features(&[r.clone(), r], 2).unwrap(), vec!["c", "a"]);
    }

    #[test]
    fn matches_brute_force_mean_rank() {
        let rs = [
            ranking(Method::Spearman, &["e", "a", "c", "b", "d"]),
            ranking(Method::Lasso, &["a", "e", "b", "d", "c"]),
            ranking(Method::Permutation, &["c", "b", "a", "e", "d"]),
        ];
        // Mean ranks by hand: a (2+1+3)/3 = 2, e (1+2+4)/3 = 7/3, c (3+5+1)/3 = 3,
        // b (4+3+2)/3 = 3, d (5+4+5)/3 = 14/3; c and b tie, b wins on name.
        let mut brute: Vec<(f64, &str)> = ["a", "b", "c", "d", "e"]
            .iter()
            .map(|f| (rs.iter().map(|r| r.rank_of(f).unwrap() as f64).sum::<f64>() / 3.0, *f))
            .collect();
        brute.sort_by(|x, y| x.0.total_cmp(&y.0).then(x.1.cmp(y.1)));
        let expect: Vec<&str> = brute.iter().map(|b| b.1).collect();
        assert_eq!(expect, vec!["a", "e", "b", "c", "d"]);
        for k in 1..=5 {
            assert_eq!(select_features(&rs, k).unwrap(), expect[..k].to_vec());
        }
    }

    #[test]
    fn invalid_k_and_mismatch() {
        let r = ranking(Method::Lasso, &["a", "b"]);
        assert!(matches!(select_features(&[r.clone()], 3), Err(FeatselError::InvalidK { k: 3, n: 2 })));
        assert!(select_features(&[r.clone()], 0).is_err());
        assert!(select_features(&[], 1).is_err());
        let other = ranking(Method::Spearman, &["a", "z"]);
        assert!(matches!(select_features(&[r, other], 1), Err(FeatselError::FeatureSetMismatch)));
    }

    #[test]
    fn rankers_find_the_informative_feature() {
        let x: Vec<f64> = (0..200)
            .flat_map(|i| {
                let t = i as f64 * 0.05;
                [t.sin(), (3.1 * t).cos(), 1.0]
            })
            .collect();
        let y: Vec<f64> = x.chunks(3).map(|r| 2.0 * r[1] + 0.1 * r[0]).collect();
        let m = FeatureMatrix::new(x, y, vec!["slow".into(), "fast".into(), "flat".into()]).unwrap();
        let s = rank_spearman(&m).unwrap();
        assert_eq!(s.selected[0], "fast");
        assert_eq!(s.scores[2].1, 0.0);
        let l = rank_lasso(&m, 0.01).unwrap();
        assert_eq!(l.selected, vec!["fast", "slow", "flat"]);
        let model = |x: &FeatureMatrix<f64>| (0..x.n_rows()).map(|i| 2.0 * x.row(i)[1] + 0.1 * x.row(i)[0]).collect();
        let p = rank_permutation(&model, &m, 3, 3).unwrap();
        assert_eq!(p.selected, vec!["fast", "slow", "flat"]);
        let report = ranking_report(&[s, l, p]);
        assert_eq!(report.lines().count(), 10);
        assert!(report.lines().nth(1).unwrap().starts_with("spearman,fast,"));
    }
}

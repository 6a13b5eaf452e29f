use std::fmt::{Debug, Display, Write as _};

use num_traits::{FromPrimitive, Num, ToPrimitive};
use serde::{Deserialize, Serialize};

use super::{EvalError, Result};

/// Model name of the baseline every other row is compared against.
pub const TL_MODEL: &str = "T-L";

/// Scalars the report arithmetic runs on: floats, or exact rationals such as `Ratio<i64>`.
pub trait ReportScalar: Clone + Num + PartialOrd + FromPrimitive + ToPrimitive + Display + Debug {}

impl<S: Clone + Num + PartialOrd + FromPrimitive + ToPrimitive + Display + Debug> ReportScalar for S {}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ResultRow<S> {
    pub model: String,
    pub flight: String,
    pub rmse: S,
}

impl<S> ResultRow<S> {
    pub fn new(model: impl Into<String>, flight: impl Into<String>, rmse: S) -> Self {
        Self { model: model.into(), flight: flight.into(), rmse }
    }
}

/// Percent reduction of one model's RMSE relative to T-L on one flight.
#[derive(Debug, Clone, PartialEq)]
pub struct Reduction<S> {
    pub model: String,
    pub flight: String,
    pub percent: S,
}

#[derive(Debug, Clone, PartialEq)]
pub struct EvalReport<S> {
    pub rows: Vec<ResultRow<S>>,
    pub flights: Vec<String>,
    pub models: Vec<String>,
    pub reductions: Vec<Reduction<S>>,
    /// Unweighted mean of each model's per-flight reductions.
    pub averages: Vec<(String, S)>,
    /// Reduction of the model's mean RMSE against the T-L mean RMSE over the same flights.
    pub pooled: Vec<(String, S)>,
}

fn percent<S: ReportScalar>(tl: &S, model: &S) -> S {
    let hundred = S::from_u8(100).expect("100 is representable");
    hundred * (tl.clone() - model.clone()) / tl.clone()
}

fn push_unique(list: &mut Vec<String>, s: &str) {
    if !list.iter().any(|x| x == s) {
        list.push(s.to_string());
    }
}

/// Builds per-flight reductions against the T-L rows and their across-flight averages.
pub fn compare_report<S: ReportScalar>(rows: &[ResultRow<S>]) -> Result<EvalReport<S>> {
    if rows.is_empty() {
        return Err(EvalError::EmptyInput);
    }
    let (mut flights, mut models) = (Vec::new(), vec![TL_MODEL.to_string()]);
    for (i, r) in rows.iter().enumerate() {
        if !(r.rmse >= S::zero()) {
            return Err(EvalError::InvalidConfig(format!("negative rmse for {} on {}", r.model, r.flight)));
        }
        if rows[..i].iter().any(|o| o.model == r.model && o.flight == r.flight) {
            return Err(EvalError::DuplicateRow { model: r.model.clone(), flight: r.flight.clone() });
        }
        push_unique(&mut flights, &r.flight);
        push_unique(&mut models, &r.model);
    }
    let baseline = |flight: &str| rows.iter().find(|r| r.model == TL_MODEL && r.flight == flight);
    for f in &flights {
        let tl = baseline(f).ok_or_else(|| EvalError::MissingBaseline(f.clone()))?;
        if tl.rmse.is_zero() {
            return Err(EvalError::InvalidConfig(format!("T-L rmse is zero on {f}")));
        }
    }
    let reductions: Vec<Reduction<S>> = rows
        .iter()
        .filter(|r| r.model != TL_MODEL)
        .map(|r| {
            let tl = baseline(&r.flight).expect("checked above");
            Reduction { model: r.model.clone(), flight: r.flight.clone(), percent: percent(&tl.rmse, &r.rmse) }
        })
        .collect();
    let averages = models
        .iter()
        .filter(|m| *m != TL_MODEL)
        .map(|m| {
            let mine: Vec<&Reduction<S>> = reductions.iter().filter(|r| &r.model == m).collect();
            let n = S::from_usize(mine.len()).expect("count is representable");
            let sum = mine.iter().fold(S::zero(), |acc, r| acc + r.percent.clone());
            (m.clone(), sum / n)
        })
        .collect();
    let pooled = models
        .iter()
        .filter(|m| *m != TL_MODEL)
        .map(|m| {
            let (tl, own) = rows.iter().filter(|r| &r.model == m).fold((S::zero(), S::zero()), |(a, b), r| {
                (a + baseline(&r.flight).expect("checked above").rmse.clone(), b + r.rmse.clone())
            });
            (m.clone(), percent(&tl, &own))
        })
        .collect();
    Ok(EvalReport { rows: rows.to_vec(), flights, models, reductions, averages, pooled })
}

impl<S: ReportScalar> EvalReport<S> {
    pub fn rmse(&self, model: &str, flight: &str) -> Option<&S> {
        self.rows.iter().find(|r| r.model == model && r.flight == flight).map(|r| &r.rmse)
    }

    pub fn average(&self, model: &str) -> Option<&S> {
        self.averages.iter().find(|(m, _)| m == model).map(|(_, v)| v)
    }

    /// Average reduction rounded to a whole percent.
    pub fn rounded_average(&self, model: &str) -> Option<i64> {
        self.average(model).and_then(|v| v.to_f64()).map(|v| v.round() as i64)
    }

    pub fn pooled(&self, model: &str) -> Option<&S> {
        self.pooled.iter().find(|(m, _)| m == model).map(|(_, v)| v)
    }

    pub fn rounded_pooled(&self, model: &str) -> Option<i64> {
        self.pooled(model).and_then(|v| v.to_f64()).map(|v| v.round() as i64)
    }

    /// Recomputes every reduction from the stored rows.
    pub fn is_consistent(&self) -> bool {
        compare_report(&self.rows)
            .is_ok_and(|r| r.reductions == self.reductions && r.averages == self.averages && r.pooled == self.pooled)
    }

    /// One line per model, e.g. `LTC: 57% average reduction vs T-L (58% on mean RMSE)`.
    pub fn summary(&self) -> String {
        let mut s = String::new();
        for (m, _) in &self.averages {
            let pct = self.rounded_average(m).unwrap_or_default();
            let pooled = self.rounded_pooled(m).unwrap_or_default();
            writeln!(s, "{m}: {pct}% average reduction vs {TL_MODEL} ({pooled}% on mean RMSE)").expect("write to string");
        }
        s
    }

    /// Delimited rows: `model,flight,rmse_nt,reduction_pct`, the T-L rows with an empty reduction.
    pub fn to_delimited(&self) -> String {
        let mut s = String::from("model,flight,rmse_nt,reduction_pct\n");
        for r in &self.rows {
            let red = self
                .reductions
                .iter()
                .find(|x| x.model == r.model && x.flight == r.flight)
                .and_then(|x| x.percent.to_f64())
                .map(|p| format!("{p:.4}"))
                .unwrap_or_default();
            let rmse = r.rmse.to_f64().unwrap_or(f64::NAN);
            writeln!(s, "{},{},{rmse:.6},{red}", r.model, r.flight).expect("write to string");
        }
        s
    }

    /// Aligned table with one row per model and one RMSE column per flight.
    pub fn to_table(&self) -> String {
        let header: Vec<String> = std::iter::once("Model".to_string())
            .chain(self.flights.iter().map(|f| format!("{f} [nT]")))
            .chain(std::iter::once("Avg. reduction".to_string()))
            .collect();
        let mut body: Vec<Vec<String>> = Vec::new();
        for m in &self.models {
            let mut line = vec![m.clone()];
            for f in &self.flights {
                line.push(self.rmse(m, f).and_then(|v| v.to_f64()).map(|v| format!("{v:.2}")).unwrap_or_else(|| "-".into()));
            }
            line.push(self.rounded_average(m).map(|p| format!("{p}%")).unwrap_or_else(|| "-".into()));
            body.push(line);
        }
        let widths: Vec<usize> = (0..header.len())
            .map(|c| std::iter::once(&header).chain(&body).map(|l| l[c].chars().count()).max().unwrap_or(0))
            .collect();
        let fmt = |l: &[String]| {
            l.iter()
                .zip(&widths)
                .enumerate()
                .map(|(c, (v, &w))| if c == 0 { format!("{v:<w$}") } else { format!("{v:>w$}") })
                .collect::<Vec<_>>()
                .join("  ")
        };
        let rule = "-".repeat(widths.iter().sum::<usize>() + 2 * (widths.len() - 1));
        let mut s = format!("{}\n{rule}\n", fmt(&header));
        for l in &body {
            s.push_str(&fmt(l));
            s.push('\n');
        }
        s
    }
}

/// Parses `model,flight,rmse_nt[,...]` rows as written by [`EvalReport::to_delimited`].
pub fn parse_rows(text: &str) -> Result<Vec<ResultRow<f64>>> {
    let mut rows = Vec::new();
    for (i, line) in text.lines().enumerate() {
        let line = line.trim();
        if line.is_empty() || (i == 0 && line.starts_with("model")) {
            continue;
        }
        let cols: Vec<&str> = line.split(',').collect();
        let rmse = cols
            .get(2)
            .and_then(|v| v.trim().parse::<f64>().ok())
            .ok_or_else(|| EvalError::InvalidConfig(format!("line {}: expected model,flight,rmse", i + 1)))?;
        rows.push(ResultRow::new(cols[0].trim(), cols[1].trim(), rmse));
    }
    Ok(rows)
}

#[cfg(test)]
mod tests {
    use super::*;
    use num_rational::Ratio;

    fn q(hundredths: i64) -> Ratio<i64> {
        Ratio::new(hundredths, 100)
    }

    fn table(rows: &[(&str, i64, i64)]) -> Vec<ResultRow<Ratio<i64>>> {
        rows.iter()
            .flat_map(|&(m, a, b)| [ResultRow::new(m, "1003", q(a)), ResultRow::new(m, "1007", q(b))])
            .collect()
    }

    #[test]
    fn exact_reductions() {
        let rows = table(&[("T-L", 5885, 4513), ("LTC-CfC", 1820, 1914)]);
        let r = compare_report(&rows).unwrap();
        // 100·(5885 − 1820)/5885 and 100·(4513 − 1914)/4513, by hand.
        assert_eq!(r.reductions[0].percent, Ratio::new(406_500, 5885));
        assert_eq!(r.reductions[1].percent, Ratio::new(259_900, 4513));
        assert_eq!(r.rounded_average("LTC-CfC"), Some(63));
        // 100·(10398 − 3734)/10398 on summed RMSE.
        assert_eq!(r.pooled("LTC-CfC"), Some(&Ratio::new(666_400, 10398)));
        assert_eq!(r.rounded_pooled("LTC-CfC"), Some(64));
        assert!(r.is_consistent());
    }

    #[test]
    fn equal_rmse_is_zero_reduction() {
        let rows = vec![ResultRow::new("T-L", "a", 3.0), ResultRow::new("M", "a", 3.0)];
        assert_eq!(compare_report(&rows).unwrap().average("M"), Some(&0.0));
    }

    #[test]
    fn missing_baseline() {
        let rows = vec![ResultRow::new("T-L", "a", 3.0), ResultRow::new("M", "b", 2.0)];
        assert!(matches!(compare_report(&rows), Err(EvalError::MissingBaseline(f)) if f == "b"));
    }

    #[test]
    fn rejects_duplicates_and_negatives() {
        let dup = vec![ResultRow::new("T-L", "a", 3.0), ResultRow::new("T-L", "a", 2.0)];
        assert!(matches!(compare_report(&dup), Err(EvalError::DuplicateRow { .. })));
        let neg = vec![ResultRow::new("T-L", "a", -3.0)];
        assert!(compare_report(&neg).is_err());
        assert!(compare_report::<f64>(&[]).is_err());
    }

    #[test]
    fn renders_and_parses() {
        let rows = vec![
            ResultRow::new("T-L", "1003", 58.85),
            ResultRow::new("LTC", "1003", 20.31),
            ResultRow::new("T-L", "1007", 45.13),
            ResultRow::new("LTC", "1007", 22.89),
        ];
        let r = compare_report(&rows).unwrap();
        let text = r.to_delimited();
        assert!(text.starts_with("model,flight,rmse_nt,reduction_pct\nT-L,1003,58.850000,\n"));
        assert_eq!(parse_rows(&text).unwrap(), rows);
        let t = r.to_table();
        assert!(t.lines().nth(2).unwrap().starts_with("T-L"));
        assert!(t.contains("57%"));
        assert_eq!(r.summary(), "LTC: 57% average reduction vs T-L (58% on mean RMSE)\n");
    }
}

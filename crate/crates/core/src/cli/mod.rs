//! Batch command-line front end: `synth`, `tl-fit`, `tl-compensate`, `feature-rank`,
//! `train`, `evaluate`, and `report`.
//!
//! Exit codes: 0 success, 1 usage error, 2 data or validation error, 3 numerical failure.

mod commands;
mod config;
mod plot;

pub use config::RunConfig;
pub use plot::line_chart;

use std::path::PathBuf;

use clap::{Args, Parser, Subcommand};

use crate::eval::EvalError;
use crate::featsel::FeatselError;
use crate::flightdata::FlightDataError;
use crate::liquid::{LiquidError, ModelKind};
use crate::synth::SynthError;
use crate::tolles_lawson::TlError;

#[derive(Debug, thiserror::Error)]
pub enum CliError {
    #[error("{0}")]
    Usage(String),
    #[error("{0}")]
    Data(String),
    #[error("{0}")]
    Numerical(String),
}

impl CliError {
    pub fn exit_code(&self) -> i32 {
        match self {
            CliError::Usage(_) => 1,
            CliError::Data(_) => 2,
            CliError::Numerical(_) => 3,
        }
    }
}

impl From<FlightDataError> for CliError {
    fn from(e: FlightDataError) -> Self {
        CliError::Data(e.to_string())
    }
}

impl From<TlError> for CliError {
    fn from(e: TlError) -> Self {
        match e {
            TlError::SingularSystem { .. } | TlError::ZeroFieldSample(_) => CliError::Numerical(e.to_string()),
            _ => CliError::Data(e.to_string()),
        }
    }
}

impl From<LiquidError> for CliError {
    fn from(e: LiquidError) -> Self {
        match e {
            LiquidError::Diverged { .. } | LiquidError::NonFiniteState => CliError::Numerical(e.to_string()),
            _ => CliError::Data(e.to_string()),
        }
    }
}

impl From<EvalError> for CliError {
    fn from(e: EvalError) -> Self {
        match e {
            EvalError::Tl(t) => t.into(),
            EvalError::Model(m) => m.into(),
            other => CliError::Data(other.to_string()),
        }
    }
}

impl From<FeatselError> for CliError {
    fn from(e: FeatselError) -> Self {
        match e {
            FeatselError::NotConverged(_) => CliError::Numerical(e.to_string()),
            _ => CliError::Data(e.to_string()),
        }
    }
}

impl From<SynthError> for CliError {
    fn from(e: SynthError) -> Self {
        CliError::Data(e.to_string())
    }
}

impl From<std::io::Error> for CliError {
    fn from(e: std::io::Error) -> Self {
        CliError::Data(e.to_string())
    }
}

#[derive(Debug, Parser)]
#[command(name = "aeromag", version, about = "Tolles-Lawson and liquid-network aeromagnetic compensation")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Debug, Args)]
struct Common {
    /// Run configuration (TOML).
    #[arg(long)]
    config: Option<PathBuf>,
    /// Root seed; overrides the config file.
    #[arg(long)]
    seed: Option<u64>,
    /// Flight file (repeatable); overrides the config file's list.
    #[arg(long = "flight")]
    flights: Vec<PathBuf>,
}

#[derive(Debug, Subcommand)]
enum Command {
    /// Generate synthetic flights with known anomaly and coefficients.
    Synth {
        #[command(flatten)]
        common: Common,
        /// Output directory for flight and truth files.
        #[arg(long)]
        out: PathBuf,
        /// Number of flights.
        #[arg(long)]
        count: Option<usize>,
    },
    /// Fit Tolles-Lawson coefficients.
    TlFit {
        #[command(flatten)]
        common: Common,
        /// Coefficient file to write.
        #[arg(long)]
        out: PathBuf,
    },
    /// Apply Tolles-Lawson coefficients to one flight.
    TlCompensate {
        #[command(flatten)]
        common: Common,
        #[arg(long)]
        coeffs: PathBuf,
        /// Output series (delimited text).
        #[arg(long)]
        out: PathBuf,
    },
    /// Rank features by Spearman, LASSO, and permutation importance.
    FeatureRank {
        #[command(flatten)]
        common: Common,
        #[arg(long)]
        out: PathBuf,
        /// Number of features to select.
        #[arg(long, default_value_t = 10)]
        k: usize,
        /// LASSO penalty on z-scored features.
        #[arg(long, default_value_t = 0.01)]
        lambda: f64,
    },
    /// Train one model on the given flights and write a checkpoint.
    Train {
        #[command(flatten)]
        common: Common,
        #[arg(long)]
        out: PathBuf,
        /// Model kind; defaults to the first model in the config.
        #[arg(long)]
        model: Option<ModelKind>,
        /// Existing T-L coefficients; fitted on the training flights when absent.
        #[arg(long)]
        coeffs: Option<PathBuf>,
        #[arg(long)]
        epochs: Option<usize>,
    },
    /// Cross-validate T-L and the configured models, or summarize existing result rows.
    Evaluate {
        #[command(flatten)]
        common: Common,
        /// Output directory (cross-validation) or report file (with --results).
        #[arg(long)]
        out: Option<PathBuf>,
        /// Existing `model,flight,rmse_nt` rows to summarize instead of running folds.
        #[arg(long)]
        results: Option<PathBuf>,
    },
    /// Emit aligned time, truth, T-L, and model series for plotting.
    Report {
        #[command(flatten)]
        common: Common,
        #[arg(long)]
        checkpoint: PathBuf,
        #[arg(long)]
        coeffs: PathBuf,
        #[arg(long)]
        out: PathBuf,
        /// Optional SVG line chart.
        #[arg(long)]
        svg: Option<PathBuf>,
    },
}

/// Runs the command line `argv` (program name first) and returns the process exit code.
pub fn dispatch<I, S>(argv: I) -> i32
where
    I: IntoIterator<Item = S>,
    S: Into<std::ffi::OsString> + Clone,
{
    let cli = match Cli::try_parse_from(argv) {
        Ok(c) => c,
        Err(e) => {
            use clap::error::ErrorKind;
            let code = match e.kind() {
                ErrorKind::DisplayHelp | ErrorKind::DisplayVersion => 0,
                _ => 1,
            };
            let _ = e.print();
            return code;
        }
    };
    match commands::run(cli.command) {
        Ok(()) => 0,
        Err(e) => {
            eprintln!("error: {e}");
            e.exit_code()
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn run(args: &[&str]) -> i32 {
        dispatch(std::iter::once("aeromag").chain(args.iter().copied()))
    }

    fn s(p: &std::path::Path) -> &str {
        p.to_str().unwrap()
    }

    #[test]
    fn usage_errors_exit_one() {
        assert_eq!(run(&[]), 1);
        assert_eq!(run(&["no-such-command"]), 1);
        assert_eq!(run(&["tl-fit", "--out", "x.json"]), 1);
        assert_eq!(run(&["train", "--out", "m.json", "--model", "gru"]), 1);
        assert_eq!(run(&["--help"]), 0);
        assert_eq!(run(&["--version"]), 0);
    }

    #[test]
    fn missing_files_exit_two() {
        let dir = tempfile::tempdir().unwrap();
        let missing = dir.path().join("absent.csv");
        assert_eq!(run(&["tl-fit", "--flight", s(&missing), "--out", s(&dir.path().join("b.json"))]), 2);
        assert_eq!(run(&["evaluate", "--results", s(&missing)]), 2);
        assert_eq!(run(&["tl-fit", "--config", s(&dir.path().join("absent.toml")), "--out", "b.json"]), 2);
    }

    #[test]
    fn results_without_baseline_exit_two() {
        let dir = tempfile::tempdir().unwrap();
        let rows = dir.path().join("rows.csv");
        std::fs::write(&rows, "model,flight,rmse_nt\nLTC,a,10\n").unwrap();
        assert_eq!(run(&["evaluate", "--results", s(&rows)]), 2);
        std::fs::write(&rows, "model,flight,rmse_nt\nT-L,a,20\nLTC,a,10\n").unwrap();
        let out = dir.path().join("report.txt");
        assert_eq!(run(&["evaluate", "--results", s(&rows), "--out", s(&out)]), 0);
        assert!(std::fs::read_to_string(&out).unwrap().contains("LTC: 50% average reduction"));
    }

    #[test]
    fn numerical_errors_exit_three() {
        assert_eq!(CliError::from(TlError::SingularSystem { column: 3, name: "x" }).exit_code(), 3);
        assert_eq!(CliError::from(LiquidError::Diverged { epoch: 2 }).exit_code(), 3);
        assert_eq!(CliError::from(EvalError::Model(LiquidError::NonFiniteState)).exit_code(), 3);
        assert_eq!(CliError::from(FeatselError::NotConverged(10)).exit_code(), 3);
        assert_eq!(CliError::from(TlError::InvalidLambda(-1.0)).exit_code(), 2);
    }

    #[test]
    fn short_pipeline() {
        let dir = tempfile::tempdir().unwrap();
        let p = dir.path();
        std::fs::write(
            p.join("run.toml"),
            "seed = 5\nflights = [\"d/synth_00.csv\", \"d/synth_01.csv\"]\nmodels = [\"mlp\"]\n\
             [synth]\nduration_s = 300.0\n[train]\nepochs = 2\nbatch = 8\n",
        )
        .unwrap();
        let cfg = p.join("run.toml");
        assert_eq!(run(&["synth", "--config", s(&cfg), "--out", s(&p.join("d")), "--count", "2"]), 0);
        assert!(p.join("d/synth_01.truth.json").exists());
        assert_eq!(run(&["tl-fit", "--config", s(&cfg), "--out", s(&p.join("beta.json"))]), 0);
        let model = p.join("m/model.json");
        assert_eq!(run(&["train", "--config", s(&cfg), "--out", s(&model)]), 0);
        assert!(p.join("m/model.tl.json").exists());
        let series = p.join("series.csv");
        let flight = p.join("d/synth_01.csv");
        assert_eq!(
            run(&[
                "report", "--config", s(&cfg), "--flight", s(&flight), "--checkpoint", s(&model),
                "--coeffs", s(&p.join("beta.json")), "--out", s(&series), "--svg", s(&p.join("s.svg")),
            ]),
            0
        );
        let text = std::fs::read_to_string(&series).unwrap();
        assert_eq!(text.lines().count(), 3001);
        assert!(std::fs::read_to_string(p.join("s.svg")).unwrap().starts_with("<svg"));
        assert_eq!(run(&["evaluate", "--config", s(&cfg), "--out", s(&p.join("ev"))]), 0);
        let report = std::fs::read_to_string(p.join("ev/report.csv")).unwrap();
        assert!(report.starts_with("model,flight,rmse_nt,reduction_pct"));
        assert_eq!(run(&["feature-rank", "--config", s(&cfg), "--out", s(&p.join("rank.csv")), "--k", "3"]), 0);
    }
}

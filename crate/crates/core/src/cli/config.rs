use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};

use super::CliError;
use crate::eval::PipelineConfig;
use crate::liquid::{ArchConfig, ModelKind, TrainConfig};
use crate::synth::SynthConfig;

/// Run configuration file (TOML). Every key is optional; unknown keys are rejected.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct RunConfig {
    /// Root seed; every component derives its own seed from it by label.
    pub seed: u64,
    /// Flight files, relative to the config file.
    pub flights: Vec<PathBuf>,
    /// Channel schema file; the canonical channel set when absent.
    pub schema: Option<PathBuf>,
    pub output_dir: PathBuf,
    /// Longest run of missing samples repaired by interpolation on load (0 = strict).
    pub repair_max_run: usize,
    pub models: Vec<ModelKind>,
    /// Folds for cross-validation; 0 means leave one flight out.
    pub folds: usize,
    /// Flights written by `synth`.
    pub synth_flights: usize,
    pub pipeline: PipelineConfig,
    pub arch: ArchConfig,
    pub train: TrainConfig,
    pub synth: SynthConfig,
}

impl Default for RunConfig {
    fn default() -> Self {
        Self {
            seed: 0,
            flights: Vec::new(),
            schema: None,
            output_dir: PathBuf::from("out"),
            repair_max_run: 5,
            models: vec![ModelKind::Cfc],
            folds: 0,
            synth_flights: 4,
            pipeline: PipelineConfig::default(),
            arch: ArchConfig::default(),
            train: TrainConfig::default(),
            synth: SynthConfig::default(),
        }
    }
}

impl RunConfig {
    pub fn from_toml_str(text: &str) -> Result<Self, CliError> {
        toml::from_str(text).map_err(|e| CliError::Data(format!("config: {}", e.message())))
    }

    /// Loads a config file, resolving its relative paths against the file's directory.
    pub fn load(path: &Path) -> Result<Self, CliError> {
        let text = std::fs::read_to_string(path).map_err(|e| CliError::Data(format!("{}: {e}", path.display())))?;
        let mut cfg = Self::from_toml_str(&text)?;
        let base = path.parent().unwrap_or(Path::new(""));
        let resolve = |p: &mut PathBuf| {
            if p.is_relative() {
                *p = base.join(&*p);
            }
        };
        cfg.flights.iter_mut().for_each(resolve);
        if let Some(s) = cfg.schema.as_mut() {
            resolve(s);
        }
        resolve(&mut cfg.output_dir);
        Ok(cfg)
    }

    pub fn to_toml_string(&self) -> String {
        toml::to_string(self).expect("config serializes")
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn defaults_round_trip() {
        let cfg = RunConfig::default();
        assert_eq!(RunConfig::from_toml_str(&cfg.to_toml_string()).unwrap(), cfg);
        assert_eq!(RunConfig::from_toml_str("").unwrap(), cfg);
    }

    #[test]
    fn unknown_keys_are_rejected() {
        assert!(RunConfig::from_toml_str("sed = 3").is_err());
        assert!(RunConfig::from_toml_str("[train]\nlearning_rate = 0.1").is_err());
    }

    #[test]
    fn partial_sections_keep_defaults() {
        let cfg = RunConfig::from_toml_str("seed = 9\nmodels = [\"ltc\", \"mlp\"]\n[train]\nepochs = 5").unwrap();
        assert_eq!(cfg.seed, 9);
        assert_eq!(cfg.models, vec![ModelKind::Ltc, ModelKind::Mlp]);
        assert_eq!(cfg.train.epochs, 5);
        assert_eq!(cfg.train.lr, 1e-3);
    }

    #[test]
    fn relative_paths_follow_the_file() {
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("run.toml");
        std::fs::write(&path, "flights = [\"a.csv\", \"/abs/b.csv\"]\noutput_dir = \"res\"").unwrap();
        let cfg = RunConfig::load(&path).unwrap();
        assert_eq!(cfg.flights, vec![dir.path().join("a.csv"), PathBuf::from("/abs/b.csv")]);
        assert_eq!(cfg.output_dir, dir.path().join("res"));
    }
}

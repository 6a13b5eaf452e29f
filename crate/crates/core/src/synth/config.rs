use serde::{Deserialize, Serialize};

use super::{Result, SynthError};
use crate::tolles_lawson::TL_TERMS;

/// Magnetic channels are quantized to 2⁻²⁰ nT so sums with the core field are exact.
pub const MAG_QUANTUM_NT: f64 = 1.0 / 1_048_576.0;

/// Coefficients of the primary inner magnetometer (`mag_4_uc`): permanent in nT,
/// induced unitless, eddy in seconds.
pub const DEFAULT_TL_BETA: [f64; TL_TERMS] = [
    480.0, -340.0, 840.0, //
    0.0248, -0.0084, 0.0172, 0.014, -0.0072, -0.0188, //
    0.0124, -0.0048, 0.0032, 0.006, -0.0104, 0.0044, -0.0036, 0.0068, 0.0088,
];

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct Bump {
    pub center_s: f64,
    pub width_s: f64,
    pub amplitude_nt: f64,
}

/// Sum of Gaussian bumps along track: explicit ones plus `random_bumps` drawn from the seed.
/// The random defaults resemble a high-altitude calibration line: long wavelengths, tens of nT.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct AnomalyModel {
    pub bumps: Vec<Bump>,
    pub random_bumps: usize,
    pub width_range_s: (f64, f64),
    pub amplitude_range_nt: (f64, f64),
}

impl Default for AnomalyModel {
    fn default() -> Self {
        Self { bumps: Vec::new(), random_bumps: 12, width_range_s: (30.0, 120.0), amplitude_range_nt: (5.0, 50.0) }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct Sinusoid {
    pub amplitude_rad: f64,
    pub freq_hz: f64,
}

/// Attitude as sums of sinusoids (random phases from the seed) on top of a heading
/// schedule: the flight is split into equal legs, one per entry of `headings_rad`,
/// joined by smooth turns lasting `turn_s`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct ManeuverModel {
    pub roll: Vec<Sinusoid>,
    pub pitch: Vec<Sinusoid>,
    pub yaw: Vec<Sinusoid>,
    pub headings_rad: Vec<f64>,
    pub turn_s: f64,
}

impl ManeuverModel {
    pub fn level() -> Self {
        Self::level_at(0.0)
    }

    pub fn level_at(heading_rad: f64) -> Self {
        Self { roll: Vec::new(), pitch: Vec::new(), yaw: Vec::new(), headings_rad: vec![heading_rad], turn_s: 0.0 }
    }
}

impl Default for ManeuverModel {
    fn default() -> Self {
        let s = |amplitude_rad, freq_hz| Sinusoid { amplitude_rad, freq_hz };
        Self {
            roll: vec![s(0.15, 0.23), s(0.05, 0.61)],
            pitch: vec![s(0.08, 0.17), s(0.03, 0.47)],
            yaw: vec![s(0.12, 0.11), s(0.04, 0.37)],
            headings_rad: [0.0, 0.5, 1.0, 1.5].iter().map(|k| 0.6 + k * std::f64::consts::PI).collect(),
            turn_s: 30.0,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct SynthConfig {
    pub seed: u64,
    pub flight_id: String,
    pub duration_s: f64,
    pub fs: f64,
    /// Number of survey lines the flight is split into (equal lengths, continuous time).
    pub lines: usize,
    pub first_line: f64,
    pub anomaly: AnomalyModel,
    pub maneuvers: ManeuverModel,
    pub core_field_nt: f64,
    pub inclination_rad: f64,
    pub declination_rad: f64,
    /// Body-frame field per ampere of `CUR_ACLo` seen by the vector magnetometer only, nT/A.
    pub flux_coupling_nt_per_a: [f64; 3],
    pub tl_beta: Vec<f64>,
    /// Gain of the `tanh(CUR_IHTR)` interference term, nT.
    pub gamma_nt: f64,
    pub noise_std_nt: f64,
}

impl Default for SynthConfig {
    fn default() -> Self {
        Self {
            seed: 0,
            flight_id: "synth".into(),
            duration_s: 300.0,
            fs: 10.0,
            lines: 1,
            first_line: 1001.01,
            anomaly: AnomalyModel::default(),
            maneuvers: ManeuverModel::default(),
            core_field_nt: 50_000.0,
            inclination_rad: 70f64.to_radians(),
            declination_rad: (-12f64).to_radians(),
            flux_coupling_nt_per_a: [12.0, -8.0, 10.0],
            tl_beta: DEFAULT_TL_BETA.to_vec(),
            gamma_nt: 30.0,
            noise_std_nt: 0.0,
        }
    }
}

impl SynthConfig {
    pub fn n_samples(&self) -> usize {
        (self.duration_s * self.fs).round() as usize
    }

    pub fn validate(&self) -> Result<()> {
        let bad = |m: String| Err(SynthError::InvalidConfig(m));
        if !(self.fs > 0.0) {
            return bad(format!("fs must be positive, got {}", self.fs));
        }
        if self.n_samples() < 1000 {
            return bad(format!("duration·fs must be at least 1000, got {}", self.n_samples()));
        }
        if self.lines == 0 || self.lines > self.n_samples() / 2 {
            return bad(format!("line count {} out of range", self.lines));
        }
        if self.tl_beta.len() != TL_TERMS {
            return bad(format!("tl_beta needs {TL_TERMS} values, got {}", self.tl_beta.len()));
        }
        if self.maneuvers.headings_rad.is_empty() || !(self.maneuvers.turn_s >= 0.0) {
            return bad("maneuvers need at least one heading and a non-negative turn time".into());
        }
        if self.anomaly.bumps.iter().any(|b| !(b.width_s > 0.0)) {
            return bad("bump widths must be positive".into());
        }
        let (wlo, whi) = self.anomaly.width_range_s;
        if self.anomaly.random_bumps > 0 && !(wlo > 0.0 && whi >= wlo) {
            return bad("random bump width range must be positive and ordered".into());
        }
        if !(self.core_field_nt > 1000.0) {
            return bad("core field must exceed 1000 nT".into());
        }
        if !(self.noise_std_nt >= 0.0) {
            return bad("noise std must be non-negative".into());
        }
        Ok(())
    }
}

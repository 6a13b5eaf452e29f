use std::collections::{BTreeMap, BTreeSet};
use std::path::Path;

use serde::{Deserialize, Serialize};

use super::{FlightDataError, Result};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum ChannelRole {
    Target,
    VectorMag,
    ScalarMag,
    Attitude,
    Position,
    Velocity,
    Electrical,
    Correction,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct ChannelSpec {
    pub name: String,
    pub unit: String,
    pub role: ChannelRole,
}

/// Required channels of a flight file. Names are unique and exactly one is the target.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct ChannelSchema {
    channels: Vec<ChannelSpec>,
}

#[derive(Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
struct SchemaFile {
    channels: BTreeMap<String, SchemaEntry>,
}

#[derive(Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
struct SchemaEntry {
    unit: String,
    role: ChannelRole,
}

impl ChannelSchema {
    pub fn new(channels: Vec<ChannelSpec>) -> Result<Self> {
        let mut names = BTreeSet::new();
        for c in &channels {
            if !names.insert(c.name.as_str()) {
                return Err(FlightDataError::Schema(format!("channel `{}` listed twice", c.name)));
            }
        }
        let targets = channels.iter().filter(|c| c.role == ChannelRole::Target).count();
        if targets != 1 {
            return Err(FlightDataError::Schema(format!("expected exactly one target channel, found {targets}")));
        }
        Ok(Self { channels })
    }

    /// Parses the TOML schema format:
    ///
    /// ```toml
    /// [channels.mag_1_c]
    /// unit = "nT"
    /// role = "target"
    /// ```
    pub fn from_toml_str(text: &str) -> Result<Self> {
        let file: SchemaFile = toml::from_str(text).map_err(|e| FlightDataError::Schema(e.to_string()))?;
        Self::new(
            file.channels
                .into_iter()
                .map(|(name, e)| ChannelSpec { name, unit: e.unit, role: e.role })
                .collect(),
        )
    }

    pub fn load(path: impl AsRef<Path>) -> Result<Self> {
        Self::from_toml_str(&std::fs::read_to_string(path)?)
    }

    pub fn to_toml_string(&self) -> String {
        let file = SchemaFile {
            channels: self
                .channels
                .iter()
                .map(|c| (c.name.clone(), SchemaEntry { unit: c.unit.clone(), role: c.role }))
                .collect(),
        };
        toml::to_string(&file).expect("schema serializes")
    }

    pub fn channels(&self) -> &[ChannelSpec] {
        &self.channels
    }

    pub fn target(&self) -> &ChannelSpec {
        self.channels.iter().find(|c| c.role == ChannelRole::Target).expect("validated on construction")
    }

    pub fn names(&self) -> impl Iterator<Item = &str> {
        self.channels.iter().map(|c| c.name.as_str())
    }

    /// Only the target channel is required.
    pub fn target_only(name: &str, unit: &str) -> Self {
        Self { channels: vec![ChannelSpec { name: name.into(), unit: unit.into(), role: ChannelRole::Target }] }
    }

    /// Channel set used by the public challenge data and by the synthetic generator.
    pub fn canonical() -> Self {
        use ChannelRole::*;
        let spec = |name: &str, unit: &str, role| ChannelSpec { name: name.into(), unit: unit.into(), role };
        let mut channels = vec![
            spec("mag_1_c", "nT", Target),
            spec("mag_1_uc", "nT", ScalarMag),
            spec("mag_3_uc", "nT", ScalarMag),
            spec("mag_4_uc", "nT", ScalarMag),
            spec("mag_5_uc", "nT", ScalarMag),
            spec("flux_b_x", "nT", VectorMag),
            spec("flux_b_y", "nT", VectorMag),
            spec("flux_b_z", "nT", VectorMag),
            spec("ins_roll", "rad", Attitude),
            spec("ins_pitch", "rad", Attitude),
            spec("ins_yaw", "rad", Attitude),
            spec("ins_vn", "m/s", Velocity),
            spec("ins_ve", "m/s", Velocity),
            spec("ins_vd", "m/s", Velocity),
            spec("lat", "rad", Position),
            spec("lon", "rad", Position),
            spec("baro", "m", Position),
            spec("igrf", "nT", Correction),
            spec("diurnal", "nT", Correction),
        ];
        for name in ["V_BAT1", "V_BAT2"] {
            channels.push(spec(name, "V", Electrical));
        }
        for name in ["CUR_ACLo", "CUR_FLAP", "CUR_TANK", "CUR_IHTR"] {
            channels.push(spec(name, "A", Electrical));
        }
        Self { channels }
    }
}

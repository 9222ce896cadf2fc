//! Named degradation presets for route runs and ablations.

use std::path::{Path, PathBuf};

use drivestack::agent::{AgentConfig, ModuleSwitches};
use drivestack::sim::DegradationConfig;
use drivestack::{Error, Result};
use serde::{Deserialize, Serialize};

pub const PRESETS_VERSION: &str = "presets-v1";
pub const DEFAULT_PRESETS_PATH: &str = "config/presets.json";

/// Copy of the bundled preset file, used when no file is found on disk.
pub const BUNDLED: &str = include_str!("../../../config/presets.json");

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Preset {
    pub name: String,
    #[serde(default)]
    pub description: String,
    #[serde(default)]
    pub switches: ModuleSwitches,
    #[serde(default)]
    pub degradation: DegradationConfig,
    /// Replaces the tracker association gate.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub tracker_gate: Option<f64>,
}

impl Preset {
    /// Agent configuration with this preset's switches and gate applied.
    pub fn configure(&self, base: &AgentConfig) -> AgentConfig {
        let mut cfg = base.clone();
        cfg.switches = self.switches;
        if let Some(g) = self.tracker_gate {
            cfg.tracker.gate = g;
        }
        cfg
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PresetFile {
    pub version: String,
    pub presets: Vec<Preset>,
}

impl PresetFile {
    pub fn from_json_str(text: &str, origin: &str) -> Result<Self> {
        let file: Self = serde_json::from_str(text).map_err(|e| Error::parse(origin, e))?;
        if file.version != PRESETS_VERSION {
            return Err(Error::Version {
                found: file.version,
                expected: PRESETS_VERSION.into(),
            });
        }
        if file.presets.is_empty() {
            return Err(Error::Empty(format!("{origin}: no presets")));
        }
        for (i, p) in file.presets.iter().enumerate() {
            if file.presets[..i].iter().any(|q| q.name == p.name) {
                return Err(Error::invalid(format!("presets[{i}]"), format!("duplicate name {:?}", p.name)));
            }
            p.degradation
                .validate()
                .map_err(|e| Error::invalid(format!("presets[{}]", p.name), e.to_string()))?;
            if let Some(r) = p.switches.detection_range {
                if !(r > 0.0) {
                    return Err(Error::invalid(format!("presets[{}].detection_range", p.name), "must be > 0"));
                }
            }
            if let Some(g) = p.tracker_gate {
                if !(g > 0.0) {
                    return Err(Error::invalid(format!("presets[{}].tracker_gate", p.name), "must be > 0"));
                }
            }
        }
        Ok(file)
    }

    /// Reads `path`, or `config/presets.json` when present, or the bundled
    /// copy.
    pub fn load(path: Option<&Path>) -> Result<Self> {
        let path: Option<PathBuf> = match path {
            Some(p) => Some(p.to_path_buf()),
            None => Some(PathBuf::from(DEFAULT_PRESETS_PATH)).filter(|p| p.is_file()),
        };
        match path {
            Some(p) => {
                let text = std::fs::read_to_string(&p).map_err(|e| Error::io(&p, e))?;
                Self::from_json_str(&text, &p.display().to_string())
            }
            None => Self::from_json_str(BUNDLED, "bundled presets"),
        }
    }

    pub fn get(&self, name: &str) -> Option<&Preset> {
        self.presets.iter().find(|p| p.name == name)
    }

    pub fn names(&self) -> Vec<&str> {
        self.presets.iter().map(|p| p.name.as_str()).collect()
    }
}

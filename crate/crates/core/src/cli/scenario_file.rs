use std::path::Path;

use serde::Deserialize;
use thiserror::Error;

use crate::netsim::{RateSchedule, ScenarioConfig};

#[derive(Debug, Error)]
pub enum ScenarioFileError {
    #[error("cannot read {path}: {source}")]
    Read { path: String, source: std::io::Error },
    #[error("{path}: {source}")]
    Parse { path: String, source: toml::de::Error },
}

/// Experiment parameters loaded from a TOML file; every field is optional
/// and command-line flags take precedence.
#[derive(Debug, Clone, Default, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct ScenarioFile {
    pub network: Option<ScenarioConfig>,
    pub bench: BenchSection,
    pub mirror: MirrorSection,
    pub sadr: SadrSection,
    pub pilot: PilotSection,
}

#[derive(Debug, Clone, Default, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct BenchSection {
    pub sizes: Option<Vec<usize>>,
    pub samples: Option<usize>,
    pub warmup: Option<usize>,
    pub primers: Option<usize>,
    pub qos: Option<u8>,
}

#[derive(Debug, Clone, Default, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct MirrorSection {
    pub duration_s: Option<f64>,
    pub changes: Option<usize>,
    /// Explicit (t_seconds, packets/s) change points; overrides `changes`.
    pub schedule: Option<RateSchedule>,
    pub wall_tick_ms: Option<f64>,
}

#[derive(Debug, Clone, Default, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct SadrSection {
    pub reps: Option<usize>,
    pub dwell_ticks: Option<usize>,
    pub risk_threshold: Option<f64>,
    pub app_requirements: Option<f64>,
    pub safe_setup: Option<Vec<f64>>,
    pub horizon_ticks: Option<usize>,
    pub instances: Option<Vec<Vec<usize>>>,
}

#[derive(Debug, Clone, Default, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct PilotSection {
    pub scenarios: Option<Vec<String>>,
    pub n_train: Option<usize>,
    pub n_test: Option<usize>,
    pub learning_rate: Option<f64>,
    pub iterations: Option<usize>,
    pub clean_frames: Option<usize>,
    pub jammed_frames: Option<usize>,
}

impl ScenarioFile {
    pub fn load(path: &Path) -> Result<Self, ScenarioFileError> {
        let text = std::fs::read_to_string(path).map_err(|source| ScenarioFileError::Read {
            path: path.display().to_string(),
            source,
        })?;
        Self::parse(&text).map_err(|source| ScenarioFileError::Parse {
            path: path.display().to_string(),
            source,
        })
    }

    pub fn parse(text: &str) -> Result<Self, toml::de::Error> {
        toml::from_str(text)
    }
}

//! Experiment configuration, loadable from TOML.

use std::path::{Path, PathBuf};

use ghostcarve_core::detector::{ResponseModel, SIGMA_RATIO};
use ghostcarve_core::reconstruct::MAX_CONDITION;
use ghostcarve_core::Method;
use serde::{Deserialize, Serialize};
use thiserror::Error;

/// Shortest dwell the spectral read-out accepts, seconds.
pub const MIN_SSVEP_DWELL: f64 = 2.0;

#[derive(Debug, Error)]
pub enum ConfigError {
    #[error("{path}: {source}")]
    Io { path: PathBuf, source: std::io::Error },
    #[error("{path}: {source}")]
    Toml { path: PathBuf, source: toml::de::Error },
    #[error("invalid configuration: {0}")]
    Invalid(String),
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum DetectorKind {
    /// Simulated SSVEP detector.
    Sim,
    /// A person answering through the session service.
    Human,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct ExperimentConfig {
    pub scene_path: Option<PathBuf>,
    /// Flicker frequency, Hz.
    pub frequency: f64,
    /// Seconds per pattern at the reference stripe size.
    pub dwell: f64,
    /// Seconds between patterns.
    pub pause: f64,
    pub detector: DetectorKind,
    pub noise: bool,
    pub sigma_ratio: f64,
    pub seed: u64,
    pub methods: Vec<Method>,
    pub max_condition: f64,
    /// Seconds to wait for a human response.
    pub response_timeout: f64,
    pub model: ResponseModel,
}

impl Default for ExperimentConfig {
    fn default() -> Self {
        Self {
            scene_path: None,
            frequency: 6.0,
            dwell: 2.0,
            pause: 0.5,
            detector: DetectorKind::Sim,
            noise: true,
            sigma_ratio: SIGMA_RATIO,
            seed: 0,
            methods: Method::ALL.to_vec(),
            max_condition: MAX_CONDITION,
            response_timeout: 30.0,
            model: ResponseModel::default(),
        }
    }
}

impl ExperimentConfig {
    pub fn load(path: &Path) -> Result<Self, ConfigError> {
        let text = std::fs::read_to_string(path).map_err(|source| ConfigError::Io { path: path.into(), source })?;
        let cfg: Self = toml::from_str(&text).map_err(|source| ConfigError::Toml { path: path.into(), source })?;
        cfg.validate()?;
        Ok(cfg)
    }

    /// Noise-free simulation is the ideal detector and accepts any dwell.
    pub fn validate(&self) -> Result<(), ConfigError> {
        let bad = |m: String| Err(ConfigError::Invalid(m));
        if !(self.frequency > 0.0) {
            return bad(format!("frequency {} Hz", self.frequency));
        }
        if !(self.dwell > 0.0) || !(self.pause >= 0.0) {
            return bad(format!("dwell {} s / pause {} s", self.dwell, self.pause));
        }
        if self.detector == DetectorKind::Sim && self.noise && self.dwell < MIN_SSVEP_DWELL {
            return bad(format!("simulated SSVEP needs a dwell of at least {MIN_SSVEP_DWELL} s, got {}", self.dwell));
        }
        if !(self.sigma_ratio >= 0.0) {
            return bad(format!("sigma ratio {}", self.sigma_ratio));
        }
        if self.methods.is_empty() {
            return bad("no reconstruction method selected".into());
        }
        if !(self.response_timeout > 0.0) {
            return bad(format!("response timeout {} s", self.response_timeout));
        }
        self.model.validate().map_err(|e| ConfigError::Invalid(e.to_string()))
    }

    pub fn wants(&self, method: Method) -> bool {
        self.methods.contains(&method)
    }
}

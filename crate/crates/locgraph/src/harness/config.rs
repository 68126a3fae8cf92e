use std::path::Path;

use serde::{Deserialize, Serialize};

use crate::evaluation::EvalConfig;
use crate::localizer::LocalizerConfig;
use crate::maintainer::MaintainerConfig;
use crate::placerec::Encoder;
use crate::scanmatch::{MatcherConfig, ProjectionConfig};

use super::sensors::{NoiseModel, SensorConfig};
use super::worldgen::WorldParams;

/// The one layered configuration file: every module's knobs in one place,
/// all sections optional, unknown keys rejected.
#[derive(Clone, Debug, Default, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct RunConfig {
    pub projection: ProjectionConfig,
    pub matcher: MatcherConfig,
    pub localizer: LocalizerConfig,
    pub maintainer: MaintainerConfig,
    pub eval: EvalConfig,
    pub noise: NoiseModel,
    pub world: WorldParams,
    pub sensor: SensorConfig,
    /// Descriptor encoder tag: `polar-hist` or `external`.
    pub encoder: String,
}

#[derive(Debug)]
pub enum ConfigError {
    Io(std::io::Error),
    Parse(serde_json::Error),
    Invalid(String),
}

impl std::fmt::Display for ConfigError {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        match self {
            ConfigError::Io(e) => write!(f, "config i/o: {e}"),
            ConfigError::Parse(e) => write!(f, "config parse: {e}"),
            ConfigError::Invalid(m) => write!(f, "config: {m}"),
        }
    }
}

impl std::error::Error for ConfigError {}

impl RunConfig {
    pub fn load(path: &Path) -> Result<Self, ConfigError> {
        let text = std::fs::read_to_string(path).map_err(ConfigError::Io)?;
        let cfg: RunConfig = serde_json::from_str(&text).map_err(ConfigError::Parse)?;
        cfg.validate()?;
        Ok(cfg)
    }

    pub fn validate(&self) -> Result<(), ConfigError> {
        self.projection.validate().map_err(ConfigError::Invalid)?;
        self.matcher.validate().map_err(ConfigError::Invalid)?;
        self.localizer.validate().map_err(ConfigError::Invalid)?;
        self.maintainer.validate().map_err(ConfigError::Invalid)?;
        self.noise.validate().map_err(ConfigError::Invalid)?;
        if !self.encoder.is_empty() {
            Encoder::from_tag(&self.encoder).map_err(|e| ConfigError::Invalid(e.to_string()))?;
        }
        Ok(())
    }

    pub fn encoder_tag(&self) -> &str {
        if self.encoder.is_empty() {
            "polar-hist"
        } else {
            &self.encoder
        }
    }
}

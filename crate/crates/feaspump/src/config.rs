//! On-disk run configuration.
//!
//! A run is configured by a small TOML file with two optional sections,
//! `[train]` and `[env]`, whose keys map one-to-one onto
//! [`TrainConfig`](crate::ppo::TrainConfig) and
//! [`EnvConfig`](crate::env::EnvConfig). Missing keys fall back to the
//! built-in defaults; unknown sections or keys are rejected so a typo cannot
//! silently configure nothing; value ranges are validated after parsing.
//!
//! ```toml
//! [train]
//! iterations = 50
//! seed = 7
//!
//! [env]
//! max_steps = 100
//! variant = "mlp"
//! ```

use std::path::Path;

use thiserror::Error;

use crate::env::EnvConfig;
use crate::ppo::TrainConfig;

/// Failure to read, parse, or validate a configuration file.
#[derive(Debug, Error)]
pub enum ConfigError {
    #[error("config read error: {0}")]
    Io(#[from] std::io::Error),
    #[error("config parse error: {0}")]
    Parse(#[from] toml::de::Error),
    #[error("invalid config: {0}")]
    Invalid(String),
}

/// Fully resolved run configuration: training hyperparameters plus
/// environment parameters.
#[derive(Debug, Clone, Default, serde::Serialize, serde::Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct RunConfig {
    pub train: TrainConfig,
    pub env: EnvConfig,
}

impl RunConfig {
    /// Checks every value range on both sections.
    pub fn validate(&self) -> Result<(), ConfigError> {
        self.train
            .validate()
            .map_err(|e| ConfigError::Invalid(e.to_string()))?;
        self.env.validate().map_err(ConfigError::Invalid)?;
        Ok(())
    }

    /// Parses and validates a TOML document.
    pub fn from_toml_str(text: &str) -> Result<Self, ConfigError> {
        let cfg: RunConfig = toml::from_str(text)?;
        cfg.validate()?;
        Ok(cfg)
    }

    /// Reads, parses, and validates a TOML file.
    pub fn load(path: &Path) -> Result<Self, ConfigError> {
        Self::from_toml_str(&std::fs::read_to_string(path)?)
    }

    /// Renders the full resolved configuration (every key explicit) as TOML,
    /// suitable both as a template and as a record of what a run used.
    pub fn to_toml_string(&self) -> String {
        toml::to_string_pretty(self).expect("run config serializes")
    }
}

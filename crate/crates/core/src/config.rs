//! Versioned TOML run configuration.
//!
//! ```toml
//! version = 1
//! rng_seed = 7
//! output_dir = "runs/seed7"
//!
//! [budget]
//! max_iterations = 300
//! patience = 20
//!
//! [evaluator]
//! kind = "synthetic"
//! ```
//!
//! Every other section (`space`, `macro`, `ucb`, `simulation`, `oracle`,
//! `bridge`) is optional and falls back to defaults. `MNAS_SEED` overrides
//! `rng_seed`.

use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::arch::MacroConfig;
use crate::eval::bridge::Endpoint;
use crate::eval::OracleConfig;
use crate::mcts::{Budget, FailurePolicy, SearchConfig, SimulationConfig, UcbConfig};
use crate::space::SpaceConfig;

pub const CONFIG_VERSION: u32 = 1;
pub const SEED_ENV: &str = "MNAS_SEED";

#[derive(Debug, Clone, Copy, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum EvaluatorKind {
    #[default]
    Synthetic,
    Bridge,
}

#[derive(Debug, Clone, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct EvaluatorSection {
    #[serde(default)]
    pub kind: EvaluatorKind,
    #[serde(default)]
    pub on_failure: FailurePolicy,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct SimulationSection {
    pub k: usize,
}

impl Default for SimulationSection {
    fn default() -> Self {
        Self {
            k: SimulationConfig::default().k,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct OracleSection {
    /// Defaults to `rng_seed`.
    pub seed: Option<u64>,
    #[serde(default = "default_structural")]
    pub structural_weight: f64,
    #[serde(default = "default_noise")]
    pub noise_weight: f64,
}

fn default_structural() -> f64 {
    OracleConfig::default().structural_weight
}

fn default_noise() -> f64 {
    OracleConfig::default().noise_weight
}

impl Default for OracleSection {
    fn default() -> Self {
        Self {
            seed: None,
            structural_weight: default_structural(),
            noise_weight: default_noise(),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct BridgeSection {
    pub endpoint: Endpoint,
    #[serde(default = "default_timeout")]
    pub timeout_seconds: f64,
    #[serde(default = "default_epochs")]
    pub epochs: u64,
}

fn default_timeout() -> f64 {
    600.0
}

fn default_epochs() -> u64 {
    5
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct RunConfig {
    pub version: u32,
    #[serde(default)]
    pub rng_seed: u64,
    #[serde(default = "default_output")]
    pub output_dir: PathBuf,
    #[serde(default)]
    pub space: SpaceConfig,
    #[serde(default, rename = "macro")]
    pub macro_arch: MacroConfig,
    #[serde(default)]
    pub ucb: UcbConfig,
    #[serde(default)]
    pub simulation: SimulationSection,
    #[serde(default)]
    pub budget: Budget,
    #[serde(default)]
    pub evaluator: EvaluatorSection,
    #[serde(default)]
    pub oracle: OracleSection,
    pub bridge: Option<BridgeSection>,
    /// Cap for `enumerate`.
    #[serde(default = "default_enumerate_cap")]
    pub enumerate_cap: u64,
}

fn default_output() -> PathBuf {
    PathBuf::from("mnas-out")
}

fn default_enumerate_cap() -> u64 {
    crate::space::DEFAULT_CAP as u64
}

impl Default for RunConfig {
    fn default() -> Self {
        Self {
            version: CONFIG_VERSION,
            rng_seed: 0,
            output_dir: default_output(),
            space: SpaceConfig::default(),
            macro_arch: MacroConfig::default(),
            ucb: UcbConfig::default(),
            simulation: SimulationSection::default(),
            budget: Budget::default(),
            evaluator: EvaluatorSection::default(),
            oracle: OracleSection::default(),
            bridge: None,
            enumerate_cap: default_enumerate_cap(),
        }
    }
}

#[derive(Debug, Error)]
pub enum ConfigError {
    #[error("{path}: {message}")]
    Read { path: String, message: String },
    #[error("{0}")]
    Parse(String),
    #[error("field `{field}`: {message}")]
    Field { field: &'static str, message: String },
}

fn field(field: &'static str, message: impl ToString) -> ConfigError {
    ConfigError::Field {
        field,
        message: message.to_string(),
    }
}

impl RunConfig {
    /// Parses and validates; does not consult the environment.
    pub fn from_toml(text: &str) -> Result<Self, ConfigError> {
        let config: Self = toml::from_str(text).map_err(|e| ConfigError::Parse(e.to_string()))?;
        config.validate()?;
        Ok(config)
    }

    /// Reads, parses, applies `MNAS_SEED`, validates.
    pub fn load(path: &Path) -> Result<Self, ConfigError> {
        let text = std::fs::read_to_string(path).map_err(|e| ConfigError::Read {
            path: path.display().to_string(),
            message: e.to_string(),
        })?;
        let mut config = Self::from_toml(&text)?;
        config.apply_seed_override(std::env::var(SEED_ENV).ok().as_deref())?;
        Ok(config)
    }

    pub fn apply_seed_override(&mut self, value: Option<&str>) -> Result<(), ConfigError> {
        if let Some(v) = value {
            self.rng_seed = v
                .trim()
                .parse()
                .map_err(|e| field("MNAS_SEED", format!("{v:?}: {e}")))?;
        }
        Ok(())
    }

    pub fn validate(&self) -> Result<(), ConfigError> {
        if self.version != CONFIG_VERSION {
            return Err(field(
                "version",
                format!("unsupported version {} (expected {CONFIG_VERSION})", self.version),
            ));
        }
        self.space.validate().map_err(|e| field("space", e))?;
        self.macro_arch.validate().map_err(|e| field("macro", e))?;
        self.ucb.validate().map_err(|m| field("ucb.c", m))?;
        if self.budget.max_iterations == 0 {
            return Err(field("budget.max_iterations", "must be >= 1"));
        }
        if self.budget.patience == Some(0) {
            return Err(field("budget.patience", "must be >= 1"));
        }
        self.oracle_config().validate().map_err(|e| field("oracle", e))?;
        match (self.evaluator.kind, &self.bridge) {
            (EvaluatorKind::Bridge, None) => return Err(field("bridge", "required when evaluator.kind = \"bridge\"")),
            (_, Some(b)) if !(b.timeout_seconds > 0.0 && b.timeout_seconds.is_finite()) => {
                return Err(field("bridge.timeout_seconds", "must be a positive number"))
            }
            _ => {}
        }
        Ok(())
    }

    pub fn oracle_config(&self) -> OracleConfig {
        OracleConfig {
            seed: self.oracle.seed.unwrap_or(self.rng_seed),
            structural_weight: self.oracle.structural_weight,
            noise_weight: self.oracle.noise_weight,
        }
    }

    pub fn search_config(&self) -> SearchConfig {
        SearchConfig {
            space: self.space.clone(),
            ucb: self.ucb,
            simulation: SimulationConfig {
                k: self.simulation.k,
                rng_seed: self.rng_seed,
            },
            budget: self.budget,
            on_failure: self.evaluator.on_failure,
        }
    }
}

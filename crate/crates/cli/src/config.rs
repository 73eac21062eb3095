//! Run configuration.
//!
//! One TOML document drives every subcommand. Command-line flags override
//! keys from the file, which override the defaults below.
//!
//! ```toml
//! case_path = "data/case24_ieee_rts.m"
//! sigma_frac = 0.03
//! n_samples = 50000
//! train_fraction = 0.8
//! seed = 0
//! output_dir = "out"
//!
//! [stopping]
//! window = 1000
//! max_samples = 50000
//!
//! [nn]
//! layer_widths = [256, 256, 128, 128, 64]
//! epochs = 20
//! batch_size = 32
//! dropout_rate = 0.2
//!
//! [eval]
//! k_list = [1, 2, 3]
//! feasibility_tol = 1e-6
//!
//! [sweep]
//! sizes = [5000, 10000, 20000, 40000]
//! depths = [2, 3, 4, 5]
//! ```

use std::path::{Path, PathBuf};

use opf_activeset_core::active_set::TOL_FEASIBLE;
use opf_activeset_core::nn::TrainConfig;
use serde::{Deserialize, Serialize};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct Stopping {
    /// Stop discovery after this many consecutive draws without a new set.
    pub window: usize,
    pub max_samples: usize,
}

impl Default for Stopping {
    fn default() -> Self {
        Self {
            window: 1000,
            max_samples: 50_000,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct EvalConfig {
    pub k_list: Vec<usize>,
    pub feasibility_tol: f64,
}

impl Default for EvalConfig {
    fn default() -> Self {
        Self {
            k_list: vec![1, 2, 3],
            feasibility_tol: TOL_FEASIBLE,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct SweepConfig {
    pub sizes: Vec<usize>,
    pub depths: Vec<usize>,
}

impl Default for SweepConfig {
    fn default() -> Self {
        Self {
            sizes: vec![5000, 10_000, 20_000, 40_000],
            depths: vec![2, 3, 4, 5],
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct RunConfig {
    pub case_path: PathBuf,
    pub sigma_frac: f64,
    pub n_samples: usize,
    pub train_fraction: f64,
    pub seed: u64,
    pub output_dir: PathBuf,
    pub stopping: Stopping,
    pub nn: TrainConfig,
    pub eval: EvalConfig,
    pub sweep: SweepConfig,
}

impl Default for RunConfig {
    fn default() -> Self {
        Self {
            case_path: PathBuf::from("data/case24_ieee_rts.m"),
            sigma_frac: 0.03,
            n_samples: 50_000,
            train_fraction: 0.8,
            seed: 0,
            output_dir: PathBuf::from("out"),
            stopping: Stopping::default(),
            nn: TrainConfig::default(),
            eval: EvalConfig::default(),
            sweep: SweepConfig::default(),
        }
    }
}

#[derive(Debug, thiserror::Error)]
pub enum ConfigError {
    #[error("cannot read config {path}: {source}")]
    Io {
        path: String,
        source: std::io::Error,
    },
    #[error("config {path}: {source}")]
    Parse { path: String, source: toml::de::Error },
    #[error("invalid config: {0}")]
    Invalid(String),
}

impl RunConfig {
    pub fn from_toml(text: &str) -> Result<Self, toml::de::Error> {
        toml::from_str(text)
    }

    pub fn load(path: &Path) -> Result<Self, ConfigError> {
        let shown = path.display().to_string();
        let text = std::fs::read_to_string(path).map_err(|source| ConfigError::Io {
            path: shown.clone(),
            source,
        })?;
        Self::from_toml(&text).map_err(|source| ConfigError::Parse { path: shown, source })
    }

    pub fn to_toml(&self) -> String {
        toml::to_string(self).expect("config serializes")
    }

    pub fn validate(&self) -> Result<(), ConfigError> {
        let bad = |m: &str| Err(ConfigError::Invalid(m.to_string()));
        if !(self.sigma_frac >= 0.0) {
            return bad("sigma_frac must be nonnegative");
        }
        if !(self.train_fraction > 0.0 && self.train_fraction < 1.0) {
            return bad("train_fraction must lie in (0, 1)");
        }
        if self.eval.k_list.is_empty() || self.eval.k_list.contains(&0) {
            return bad("k_list entries must be at least 1");
        }
        if !(self.eval.feasibility_tol > 0.0) {
            return bad("feasibility_tol must be positive");
        }
        self.nn
            .validate()
            .map_err(|e| ConfigError::Invalid(e.to_string()))
    }
}

//! Run configuration file.
//!
//! ```json
//! {
//!   "scenario":   { ...every ScenarioConfig field... },
//!   "dataset":    { "n_train": 200, "n_val": 50 },
//!   "allocation": { "granularity": "column", "binarize_threshold": 0.5 },
//!   "bcd":        { "max_outer_iters": 200, "tol": 1e-5, ... },
//!   "train":      { "max_epochs": 200, "batch_size": 20, ... },
//!   "brute":      { "levels": 4, "include_off": true, "budget": 10000000 }
//! }
//! ```
//!
//! `scenario` is required and must list every field; the other sections
//! are optional and fall back to their defaults field by field. Unknown keys
//! are rejected everywhere.

use std::path::Path;

use clap::ValueEnum;
use serde::{Deserialize, Serialize};

use ris_core::alloc::DEFAULT_BINARIZE_THRESHOLD;
use ris_core::bcd::BcdOptions;
use ris_core::brute::{BruteOptions, DEFAULT_BUDGET};
use ris_core::learn::TrainOptions;
use ris_core::metrics::Granularity;
use ris_core::netgeom::ScenarioConfig;

use crate::error::{CliError, CliResult};

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
pub enum Profile {
    /// K=3, N=4, 8×8 RIS, 200/50 samples.
    Desk,
    /// 20×20 RIS, 8000/2000 samples.
    Full,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct DatasetSizes {
    pub n_train: usize,
    pub n_val: usize,
}

impl Default for DatasetSizes {
    fn default() -> Self {
        Self {
            n_train: 200,
            n_val: 50,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct AllocationOptions {
    pub granularity: Granularity,
    pub binarize_threshold: f64,
}

impl Default for AllocationOptions {
    fn default() -> Self {
        Self {
            granularity: Granularity::Column,
            binarize_threshold: DEFAULT_BINARIZE_THRESHOLD,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct BruteSettings {
    pub levels: usize,
    pub include_off: bool,
    pub budget: u64,
}

impl Default for BruteSettings {
    fn default() -> Self {
        let d = BruteOptions::default();
        Self {
            levels: d.levels,
            include_off: d.include_off,
            budget: DEFAULT_BUDGET,
        }
    }
}

impl BruteSettings {
    pub fn options(&self) -> BruteOptions {
        BruteOptions {
            levels: self.levels,
            include_off: self.include_off,
            budget: self.budget,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct RunConfig {
    pub scenario: ScenarioConfig,
    #[serde(default)]
    pub dataset: DatasetSizes,
    #[serde(default)]
    pub allocation: AllocationOptions,
    #[serde(default)]
    pub bcd: BcdOptions,
    #[serde(default)]
    pub train: TrainOptions,
    #[serde(default)]
    pub brute: BruteSettings,
}

impl RunConfig {
    pub fn profile(p: Profile) -> Self {
        match p {
            Profile::Desk => Self {
                scenario: ScenarioConfig::desk(),
                dataset: DatasetSizes::default(),
                allocation: AllocationOptions::default(),
                bcd: BcdOptions::default(),
                train: TrainOptions::default(),
                brute: BruteSettings::default(),
            },
            Profile::Full => Self {
                scenario: ScenarioConfig::full(),
                dataset: DatasetSizes {
                    n_train: 8000,
                    n_val: 2000,
                },
                ..Self::profile(Profile::Desk)
            },
        }
    }

    pub fn validate(&self) -> CliResult<()> {
        self.scenario.validate().map_err(CliError::config)?;
        self.bcd.validate().map_err(CliError::config)?;
        self.train.validate().map_err(CliError::config)?;
        if !(0.0..=1.0).contains(&self.allocation.binarize_threshold) {
            return Err(CliError::config(anyhow::anyhow!(
                "invalid config field `allocation.binarize_threshold`: must lie in [0, 1], got {}",
                self.allocation.binarize_threshold
            )));
        }
        if self.brute.levels == 0 {
            return Err(CliError::config(anyhow::anyhow!(
                "invalid config field `brute.levels`: must be >= 1"
            )));
        }
        Ok(())
    }

    pub fn from_json(text: &str, origin: &str) -> CliResult<Self> {
        let cfg: RunConfig = serde_json::from_str(text)
            .map_err(|e| CliError::config(anyhow::anyhow!("{origin}: {e}")))?;
        cfg.validate().map_err(|e| e.context(origin.to_string()))?;
        Ok(cfg)
    }

    pub fn load(path: &Path) -> CliResult<Self> {
        let text = std::fs::read_to_string(path).map_err(|e| {
            CliError::config(anyhow::Error::new(e).context(path.display().to_string()))
        })?;
        Self::from_json(&text, &path.display().to_string())
    }

    /// Config file if given, otherwise the named profile.
    pub fn resolve(path: Option<&Path>, profile: Profile) -> CliResult<Self> {
        match path {
            Some(p) => Self::load(p),
            None => Ok(Self::profile(profile)),
        }
    }

    pub fn to_json(&self) -> String {
        let mut s = serde_json::to_string_pretty(self).expect("config serializes");
        s.push('\n');
        s
    }
}

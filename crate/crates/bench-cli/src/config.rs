//! Declarative experiment configuration: JSON with schema validation,
//! protocol defaults, and a stable content hash stamped into every output.

use std::path::{Path, PathBuf};

use chrono::NaiveDate;
use serde::{Deserialize, Serialize};

use nembench_evaluation::TailScope;
use nembench_market_data::{time, Region, SyntheticSpec};
use nembench_model_zoo::ModelFamily;
use nembench_pipeline::{FitPartition, ForecastSetting};
use nembench_training::{GridSpec, TrainingConfig};

use crate::CliError;

/// Environment variable overriding the price-cache root.
pub const CACHE_ENV: &str = "NEMBENCH_CACHE";

#[derive(Clone, Debug, Serialize, Deserialize, PartialEq)]
#[serde(rename_all = "snake_case")]
pub enum DataSource {
    /// Deterministic synthetic series; the default test-data source.
    Synthetic,
    /// Real dispatch prices from the public archive (network or cache).
    Aemo,
}

#[derive(Clone, Debug, Serialize, Deserialize, PartialEq)]
pub struct DataConfig {
    pub source: DataSource,
    /// Base seed for synthetic generation; region `i` uses `seed + i`.
    #[serde(default)]
    pub seed: u64,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub synthetic: Option<SyntheticSpec>,
    /// Fetch range for the archive source (inclusive dates).
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub start: Option<NaiveDate>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub end: Option<NaiveDate>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub cache_dir: Option<PathBuf>,
}

#[derive(Clone, Debug, Serialize, Deserialize, PartialEq)]
pub struct SplitConfig {
    /// First day of the held-out test period.
    pub test_start: NaiveDate,
    pub train_fraction: f64,
    #[serde(default)]
    pub scaler_fit: FitPartition,
}

/// Whether baseline families see the price column only (the default) or the
/// full feature set.
#[derive(Clone, Copy, Debug, Serialize, Deserialize, PartialEq, Eq, Default)]
#[serde(rename_all = "snake_case")]
pub enum BaselineFeatures {
    #[default]
    PriceOnly,
    Full,
}

#[derive(Clone, Debug, Serialize, Deserialize, PartialEq)]
pub struct ExperimentConfig {
    pub name: String,
    pub data: DataConfig,
    pub regions: Vec<Region>,
    /// Setting labels: `24H` and/or `48H`.
    pub settings: Vec<String>,
    /// Family names as printed in reports (case-insensitive on input).
    pub families: Vec<String>,
    pub split: SplitConfig,
    #[serde(default)]
    pub baseline_features: BaselineFeatures,
    #[serde(default)]
    pub tail_scope: TailScope,
    #[serde(default)]
    pub training: TrainingConfig,
    #[serde(default)]
    pub grid: GridSpec,
    /// Cap on grid combinations per search; absent means the full grid.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub budget: Option<usize>,
    pub out_dir: PathBuf,
}

impl ExperimentConfig {
    pub fn from_json(json: &str) -> Result<ExperimentConfig, CliError> {
        let cfg: ExperimentConfig =
            serde_json::from_str(json).map_err(|e| CliError::Config(e.to_string()))?;
        cfg.validate()?;
        Ok(cfg)
    }

    pub fn load(path: &Path) -> Result<ExperimentConfig, CliError> {
        let json = std::fs::read_to_string(path)
            .map_err(|e| CliError::Config(format!("{}: {e}", path.display())))?;
        Self::from_json(&json)
    }

    /// Validation runs before any stage: unknown names or inconsistent
    /// fields fail the whole run upfront.
    pub fn validate(&self) -> Result<(), CliError> {
        if self.regions.is_empty() {
            return Err(CliError::Config("no regions listed".into()));
        }
        if self.families.is_empty() {
            return Err(CliError::Config("no model families listed".into()));
        }
        for f in &self.families {
            if ModelFamily::parse(f).is_none() {
                return Err(CliError::Config(format!("unknown model family: {f}")));
            }
        }
        if self.settings.is_empty() {
            return Err(CliError::Config("no forecast settings listed".into()));
        }
        for s in &self.settings {
            parse_setting(s)?;
        }
        if !(self.split.train_fraction > 0.0 && self.split.train_fraction < 1.0) {
            return Err(CliError::Config("train_fraction must be in (0, 1)".into()));
        }
        match self.data.source {
            DataSource::Synthetic => {
                if self.data.synthetic.is_none() {
                    return Err(CliError::Config(
                        "synthetic source needs a synthetic spec".into(),
                    ));
                }
            }
            DataSource::Aemo => {
                if self.data.start.is_none() || self.data.end.is_none() {
                    return Err(CliError::Config("archive source needs start and end".into()));
                }
            }
        }
        if self.budget == Some(0) {
            return Err(CliError::Config("budget must be positive when set".into()));
        }
        Ok(())
    }

    pub fn parsed_families(&self) -> Vec<ModelFamily> {
        self.families
            .iter()
            .map(|f| ModelFamily::parse(f).expect("validated"))
            .collect()
    }

    pub fn parsed_settings(&self) -> Vec<ForecastSetting> {
        self.settings
            .iter()
            .map(|s| parse_setting(s).expect("validated"))
            .collect()
    }

    pub fn test_start_ts(&self) -> i64 {
        time::epoch_at_midnight(self.split.test_start)
    }

    /// Cache directory: explicit config beats the environment variable beats
    /// `<out_dir>/cache`.
    pub fn cache_dir(&self) -> PathBuf {
        if let Some(dir) = &self.data.cache_dir {
            return dir.clone();
        }
        if let Ok(dir) = std::env::var(CACHE_ENV) {
            if !dir.is_empty() {
                return PathBuf::from(dir);
            }
        }
        self.out_dir.join("cache")
    }

    /// Stable content hash over the canonical JSON encoding.
    pub fn hash(&self) -> String {
        let canonical = serde_json::to_string(self).expect("config serializes");
        format!("{:016x}", fnv1a64(canonical.as_bytes()))
    }
}

pub fn parse_setting(label: &str) -> Result<ForecastSetting, CliError> {
    match label.trim().to_ascii_uppercase().as_str() {
        "24H" => Ok(ForecastSetting::H24),
        "48H" => Ok(ForecastSetting::H48),
        other => Err(CliError::Config(format!(
            "unknown setting {other:?} (expected 24H or 48H)"
        ))),
    }
}

fn fnv1a64(bytes: &[u8]) -> u64 {
    let mut hash: u64 = 0xcbf2_9ce4_8422_2325;
    for &b in bytes {
        hash ^= b as u64;
        hash = hash.wrapping_mul(0x0000_0100_0000_01b3);
    }
    hash
}

#[cfg(test)]
mod tests {
    use super::*;

    pub(crate) fn sample_json() -> String {
        r#"{
            "name": "smoke",
            "data": {
                "source": "synthetic",
                "seed": 7,
                "synthetic": {
                    "n_days": 40, "base_level": 100.0,
                    "daily_amplitude": 30.0, "weekly_amplitude": 10.0,
                    "noise_std": 5.0, "spike_rate": 0.0, "spike_scale": 0.0
                }
            },
            "regions": ["QLD"],
            "settings": ["24H"],
            "families": ["DLinear", "LSTM"],
            "split": {"test_start": "2023-02-03", "train_fraction": 0.7},
            "training": {
                "learning_rate": 0.005, "batch_size": 64, "max_epochs": 2,
                "early_stop_patience": 10,
                "plateau": {"factor": 0.5, "patience": 3, "min_lr": 1e-6},
                "seeds": [1, 2]
            },
            "budget": 2,
            "out_dir": "/tmp/nembench-test-out"
        }"#
        .to_string()
    }

    #[test]
    fn sample_config_parses_and_hashes_stably() {
        let cfg = ExperimentConfig::from_json(&sample_json()).unwrap();
        assert_eq!(cfg.parsed_families().len(), 2);
        assert_eq!(cfg.parsed_settings()[0], ForecastSetting::H24);
        let h1 = cfg.hash();
        let h2 = ExperimentConfig::from_json(&sample_json()).unwrap().hash();
        assert_eq!(h1, h2);
        let mut other = cfg.clone();
        other.budget = Some(3);
        assert_ne!(h1, other.hash());
    }

    #[test]
    fn unknown_family_is_a_config_error() {
        let json = sample_json().replace("\"LSTM\"", "\"NotAModel\"");
        assert!(matches!(
            ExperimentConfig::from_json(&json),
            Err(CliError::Config(_))
        ));
    }

    #[test]
    fn bad_setting_is_a_config_error() {
        let json = sample_json().replace("\"24H\"", "\"12H\"");
        assert!(matches!(
            ExperimentConfig::from_json(&json),
            Err(CliError::Config(_))
        ));
    }

    #[test]
    fn defaults_fill_protocol_values() {
        let json = sample_json().replace(
            r#""training": {
                "learning_rate": 0.005, "batch_size": 64, "max_epochs": 2,
                "early_stop_patience": 10,
                "plateau": {"factor": 0.5, "patience": 3, "min_lr": 1e-6},
                "seeds": [1, 2]
            },
            "#,
            "",
        );
        let cfg = ExperimentConfig::from_json(&json).unwrap();
        assert_eq!(cfg.training.batch_size, 64);
        assert_eq!(cfg.training.max_epochs, 30);
        assert_eq!(cfg.training.early_stop_patience, 10);
        assert_eq!(cfg.training.seeds.len(), 5);
        assert_eq!(cfg.baseline_features, BaselineFeatures::PriceOnly);
    }
}

//! Transforms raw 5-minute price series into normalized, windowed,
//! leakage-free supervised datasets for direct multi-horizon forecasting.

mod downsample;
mod features;
mod scaler;
mod split;
mod store;
mod windows;

pub use downsample::{downsample_to_30min, HalfHourlySeries, HALF_HOUR_SECS};
pub use features::{add_time_features, FeatureColumn, FeatureMatrix, N_FEATURES};
pub use scaler::{apply_scaler, fit_scaler, fit_scaler_on, invert_prices, ColumnScale, FitPartition, ScalerParams};
pub use split::{chronological_split, DatasetSplit};
pub use store::PreparedDataset;
pub use windows::{build_windows, window_count, FeatureSelection, WindowSet};

use serde::{Deserialize, Serialize};
use thiserror::Error;

/// The two experimental settings: day-ahead and two-day-ahead.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub struct ForecastSetting {
    /// Input window length in half-hour steps.
    pub lookback: usize,
    /// Forecast length in half-hour steps.
    pub horizon: usize,
}

impl ForecastSetting {
    /// 7-day lookback, 24-hour horizon.
    pub const H24: ForecastSetting = ForecastSetting {
        lookback: 336,
        horizon: 48,
    };
    /// 14-day lookback, 48-hour horizon.
    pub const H48: ForecastSetting = ForecastSetting {
        lookback: 672,
        horizon: 96,
    };

    pub fn label(&self) -> String {
        format!("{}H", self.horizon / 2)
    }
}

#[derive(Debug, Error)]
pub enum PipelineError {
    #[error("alignment error: {0}")]
    Alignment(String),
    #[error("range error: {0}")]
    Range(String),
    #[error("segment too short: length {length} < lookback {lookback} + horizon {horizon}")]
    SegmentTooShort {
        length: usize,
        lookback: usize,
        horizon: usize,
    },
    #[error("scaler mismatch: {0}")]
    ScalerMismatch(String),
    #[error("store error: {0}")]
    Store(String),
    #[error("io error: {0}")]
    Io(#[from] std::io::Error),
}

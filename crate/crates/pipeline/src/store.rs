//! Prepared-dataset persistence: a compressed columnar data file plus a
//! plain-text JSON manifest. Together they are sufficient to rebuild windows
//! and recompute metrics bit-for-bit.

use std::fs;
use std::io::{Read, Write};
use std::ops::Range;
use std::path::Path;

use flate2::read::GzDecoder;
use flate2::write::GzEncoder;
use flate2::Compression;
use ndarray::Array2;
use serde::{Deserialize, Serialize};

use nembench_market_data::{RawPriceSeries, Region};

use crate::downsample::{downsample_to_30min, HalfHourlySeries};
use crate::features::{add_time_features, FeatureMatrix, N_FEATURES};
use crate::scaler::{apply_scaler, fit_scaler_on, FitPartition, ScalerParams};
use crate::split::{chronological_split, DatasetSplit};
use crate::windows::{build_windows, FeatureSelection, WindowSet};
use crate::{ForecastSetting, PipelineError};

const MAGIC: &[u8; 4] = b"NEMD";
const VERSION: u32 = 1;

/// Everything downstream stages need for one (region, setting) cell: the raw
/// 30-minute series, the scaled feature matrix, the split, and the scaler.
#[derive(Clone, Debug)]
pub struct PreparedDataset {
    pub raw: HalfHourlySeries,
    /// Scaled feature matrix aligned row-for-row with `raw`.
    pub matrix: FeatureMatrix,
    pub split: DatasetSplit,
    pub scaler: ScalerParams,
    pub setting: ForecastSetting,
}

#[derive(Serialize, Deserialize)]
struct Manifest {
    region: Region,
    start_ts: i64,
    n_rows: usize,
    setting: ForecastSetting,
    split: DatasetSplit,
    scaler: ScalerParams,
}

impl PreparedDataset {
    /// Full preparation from a raw 5-minute series: aggregate, attach
    /// calendar features, split, fit the scaler on the configured partition,
    /// and scale.
    pub fn prepare(
        raw5: &RawPriceSeries,
        test_start_ts: i64,
        train_fraction: f64,
        fit: FitPartition,
        setting: ForecastSetting,
    ) -> Result<Self, PipelineError> {
        let raw = downsample_to_30min(raw5)?;
        let unscaled = add_time_features(&raw);
        let split = chronological_split(&raw, test_start_ts, train_fraction)?;
        let scaler = fit_scaler_on(&unscaled, &split, fit);
        let matrix = apply_scaler(&unscaled, &scaler)?;
        Ok(PreparedDataset {
            raw,
            matrix,
            split,
            scaler,
            setting,
        })
    }

    /// Windows for one partition, entirely inside that partition's segment.
    pub fn windows(
        &self,
        segment: Range<usize>,
        features: FeatureSelection,
    ) -> Result<WindowSet, PipelineError> {
        build_windows(
            &self.matrix,
            segment,
            self.setting.lookback,
            self.setting.horizon,
            features,
        )
    }

    pub fn train_windows(&self, features: FeatureSelection) -> Result<WindowSet, PipelineError> {
        self.windows(self.split.train.clone(), features)
    }

    pub fn val_windows(&self, features: FeatureSelection) -> Result<WindowSet, PipelineError> {
        self.windows(self.split.val.clone(), features)
    }

    pub fn test_windows(&self, features: FeatureSelection) -> Result<WindowSet, PipelineError> {
        self.windows(self.split.test.clone(), features)
    }

    /// The raw (A$/MWh) test-partition series, used for the seasonal-naive
    /// benchmark, tail thresholds, and diurnal diagnostics.
    pub fn test_series(&self) -> HalfHourlySeries {
        HalfHourlySeries {
            region: self.raw.region,
            start_ts: self.raw.timestamp(self.split.test.start),
            prices: self.raw.prices[self.split.test.clone()].to_vec(),
        }
    }

    /// Raw price at an absolute matrix row.
    pub fn raw_price(&self, row: usize) -> f64 {
        self.raw.prices[row]
    }

    pub fn save(&self, dir: &Path) -> Result<(), PipelineError> {
        fs::create_dir_all(dir)?;
        let manifest = Manifest {
            region: self.raw.region,
            start_ts: self.raw.start_ts,
            n_rows: self.raw.len(),
            setting: self.setting,
            split: self.split.clone(),
            scaler: self.scaler.clone(),
        };
        let json = serde_json::to_string_pretty(&manifest)
            .map_err(|e| PipelineError::Store(e.to_string()))?;
        fs::write(dir.join("manifest.json"), json)?;

        let n = self.raw.len();
        let mut raw_bytes = Vec::with_capacity(8 + n * 8 * (1 + N_FEATURES));
        raw_bytes.extend_from_slice(MAGIC);
        raw_bytes.extend_from_slice(&VERSION.to_le_bytes());
        for &p in &self.raw.prices {
            raw_bytes.extend_from_slice(&p.to_bits().to_le_bytes());
        }
        for v in self.matrix.values.iter() {
            raw_bytes.extend_from_slice(&v.to_bits().to_le_bytes());
        }
        let file = fs::File::create(dir.join("data.bin.gz"))?;
        let mut enc = GzEncoder::new(file, Compression::default());
        enc.write_all(&raw_bytes)?;
        enc.finish()?;
        Ok(())
    }

    pub fn load(dir: &Path) -> Result<Self, PipelineError> {
        let json = fs::read_to_string(dir.join("manifest.json"))?;
        let manifest: Manifest =
            serde_json::from_str(&json).map_err(|e| PipelineError::Store(e.to_string()))?;
        let file = fs::File::open(dir.join("data.bin.gz"))?;
        let mut bytes = Vec::new();
        GzDecoder::new(file).read_to_end(&mut bytes)?;
        let n = manifest.n_rows;
        let expected = 8 + n * 8 + n * N_FEATURES * 8;
        if bytes.len() != expected || &bytes[0..4] != MAGIC {
            return Err(PipelineError::Store(format!(
                "data file corrupt: {} bytes, expected {expected}",
                bytes.len()
            )));
        }
        let read_f64 = |at: usize| {
            f64::from_bits(u64::from_le_bytes(bytes[at..at + 8].try_into().unwrap()))
        };
        let mut prices = Vec::with_capacity(n);
        for i in 0..n {
            prices.push(read_f64(8 + i * 8));
        }
        let base = 8 + n * 8;
        let mut values = Array2::<f64>::zeros((n, N_FEATURES));
        for i in 0..n {
            for c in 0..N_FEATURES {
                values[[i, c]] = read_f64(base + (i * N_FEATURES + c) * 8);
            }
        }
        Ok(PreparedDataset {
            raw: HalfHourlySeries {
                region: manifest.region,
                start_ts: manifest.start_ts,
                prices,
            },
            matrix: FeatureMatrix {
                region: manifest.region,
                start_ts: manifest.start_ts,
                values,
            },
            split: manifest.split,
            scaler: manifest.scaler,
            setting: manifest.setting,
        })
    }
}

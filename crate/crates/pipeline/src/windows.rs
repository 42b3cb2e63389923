use std::ops::Range;
use std::sync::Arc;

use ndarray::{Array2, Array3};

use crate::downsample::HALF_HOUR_SECS;
use crate::features::{FeatureMatrix, N_FEATURES};
use crate::PipelineError;

/// Which feature columns feed the model. Baseline families default to the
/// price column only; the SOTA families take all five.
#[derive(Clone, Copy, Debug, PartialEq, Eq, serde::Serialize, serde::Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum FeatureSelection {
    PriceOnly,
    All,
}

impl FeatureSelection {
    pub fn n_features(&self) -> usize {
        match self {
            FeatureSelection::PriceOnly => 1,
            FeatureSelection::All => N_FEATURES,
        }
    }
}

/// Supervised (lookback, horizon) windows over one contiguous segment of the
/// scaled feature matrix, stride 1. Window `w` reads rows
/// `[segment.start + w, segment.start + w + L)` as input and predicts the
/// prices of the following `H` rows. Inputs and targets are materialized per
/// batch; targets are the scaled, un-featured price column.
#[derive(Clone, Debug)]
pub struct WindowSet {
    base: Arc<Array2<f64>>,
    base_start_ts: i64,
    segment: Range<usize>,
    pub lookback: usize,
    pub horizon: usize,
    pub features: FeatureSelection,
}

/// Number of stride-1 windows over a segment of `length` rows.
pub fn window_count(length: usize, lookback: usize, horizon: usize) -> usize {
    length.saturating_sub(lookback + horizon - 1)
}

/// Builds the window set over `segment`. Every window's full `L + H` row
/// range lies inside the segment, so splits never leak across partitions.
pub fn build_windows(
    matrix: &FeatureMatrix,
    segment: Range<usize>,
    lookback: usize,
    horizon: usize,
    features: FeatureSelection,
) -> Result<WindowSet, PipelineError> {
    assert!(lookback > 0 && horizon > 0);
    if segment.end > matrix.n_rows() {
        return Err(PipelineError::Range(format!(
            "segment {segment:?} exceeds matrix rows {}",
            matrix.n_rows()
        )));
    }
    if segment.len() < lookback + horizon {
        return Err(PipelineError::SegmentTooShort {
            length: segment.len(),
            lookback,
            horizon,
        });
    }
    Ok(WindowSet {
        base: Arc::new(matrix.values.clone()),
        base_start_ts: matrix.start_ts,
        segment,
        lookback,
        horizon,
        features,
    })
}

impl WindowSet {
    pub fn len(&self) -> usize {
        window_count(self.segment.len(), self.lookback, self.horizon)
    }

    pub fn is_empty(&self) -> bool {
        self.len() == 0
    }

    pub fn n_features(&self) -> usize {
        self.features.n_features()
    }

    /// Absolute matrix row where window `w`'s input begins.
    fn input_row(&self, w: usize) -> usize {
        self.segment.start + w
    }

    /// Absolute matrix row of window `w`'s first target.
    pub fn target_row(&self, w: usize) -> usize {
        self.input_row(w) + self.lookback
    }

    /// Timestamps of window `w`'s `H` targets.
    pub fn target_timestamps(&self, w: usize) -> Vec<i64> {
        let first = self.target_row(w);
        (0..self.horizon)
            .map(|j| self.base_start_ts + (first + j) as i64 * HALF_HOUR_SECS)
            .collect()
    }

    /// Inputs for the listed windows: `[batch, lookback, n_features]`.
    pub fn input_batch(&self, windows: &[usize]) -> Array3<f64> {
        let c = self.n_features();
        let mut out = Array3::<f64>::zeros((windows.len(), self.lookback, c));
        for (bi, &w) in windows.iter().enumerate() {
            debug_assert!(w < self.len());
            let start = self.input_row(w);
            for t in 0..self.lookback {
                for ci in 0..c {
                    out[[bi, t, ci]] = self.base[[start + t, ci]];
                }
            }
        }
        out
    }

    /// Scaled price targets for the listed windows: `[batch, horizon]`.
    pub fn target_batch(&self, windows: &[usize]) -> Array2<f64> {
        let mut out = Array2::<f64>::zeros((windows.len(), self.horizon));
        for (bi, &w) in windows.iter().enumerate() {
            let first = self.target_row(w);
            for j in 0..self.horizon {
                out[[bi, j]] = self.base[[first + j, 0]];
            }
        }
        out
    }

    /// Fully materialized inputs `[n_windows, L, C]`.
    pub fn inputs(&self) -> Array3<f64> {
        let all: Vec<usize> = (0..self.len()).collect();
        self.input_batch(&all)
    }

    /// Fully materialized targets `[n_windows, H]`.
    pub fn targets(&self) -> Array2<f64> {
        let all: Vec<usize> = (0..self.len()).collect();
        self.target_batch(&all)
    }
}

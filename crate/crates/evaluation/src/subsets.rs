use serde::{Deserialize, Serialize};

use crate::dump::ForecastDump;
use crate::metrics::{metrics_over, PointMetrics};
use crate::EvalError;

/// Whether tail thresholds come from each region's own test series (the
/// default) or from prices pooled across regions.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize, Default)]
#[serde(rename_all = "snake_case")]
pub enum TailScope {
    #[default]
    PerRegion,
    Global,
}

/// Row-index subsets of a dump for tail and negative-price evaluation.
#[derive(Clone, Debug)]
pub struct SubsetMasks {
    pub upper_threshold: f64,
    pub lower_threshold: f64,
    /// Rows with `y_true >= upper_threshold` (95th percentile).
    pub upper_tail: Vec<usize>,
    /// Rows with `y_true <= lower_threshold` (5th percentile).
    pub lower_tail: Vec<usize>,
    /// Rows with `y_true < 0`.
    pub negative: Vec<usize>,
}

/// Linear-interpolation empirical percentile (the `sorted[(n-1)p]`
/// convention). `p` in [0, 100].
pub fn percentile(values: &[f64], p: f64) -> f64 {
    assert!(!values.is_empty(), "percentile of empty slice");
    let mut sorted = values.to_vec();
    sorted.sort_by(|a, b| a.partial_cmp(b).unwrap());
    let rank = (p / 100.0) * (sorted.len() - 1) as f64;
    let lo = rank.floor() as usize;
    let hi = rank.ceil() as usize;
    if lo == hi {
        sorted[lo]
    } else {
        let w = rank - lo as f64;
        sorted[lo] * (1.0 - w) + sorted[hi] * w
    }
}

/// Builds tail and negative masks. Thresholds come from
/// `threshold_source`, the actual test-period prices of the scope in effect
/// (one region by default). The extreme-price evaluation pools
/// `upper_tail ∪ lower_tail`.
pub fn subset_masks(dump: &ForecastDump, threshold_source: &[f64]) -> SubsetMasks {
    let upper = percentile(threshold_source, 95.0);
    let lower = percentile(threshold_source, 5.0);
    let mut masks = SubsetMasks {
        upper_threshold: upper,
        lower_threshold: lower,
        upper_tail: Vec::new(),
        lower_tail: Vec::new(),
        negative: Vec::new(),
    };
    for (i, r) in dump.rows.iter().enumerate() {
        if r.y_true >= upper {
            masks.upper_tail.push(i);
        }
        if r.y_true <= lower {
            masks.lower_tail.push(i);
        }
        if r.y_true < 0.0 {
            masks.negative.push(i);
        }
    }
    masks
}

impl SubsetMasks {
    /// Union of the two 5% tails, deduplicated.
    pub fn extreme(&self) -> Vec<usize> {
        let mut rows: Vec<usize> = self
            .upper_tail
            .iter()
            .chain(self.lower_tail.iter())
            .copied()
            .collect();
        rows.sort_unstable();
        rows.dedup();
        rows
    }
}

/// Metrics over the masked rows only; an empty mask reports
/// [`EvalError::EmptySubset`] so callers render it as absent rather than
/// zero.
pub fn metrics_on_rows(dump: &ForecastDump, rows: &[usize]) -> Result<PointMetrics, EvalError> {
    if rows.is_empty() {
        return Err(EvalError::EmptySubset);
    }
    metrics_over(rows.iter().map(|&i| {
        let r = &dump.rows[i];
        (r.y_true, r.y_pred)
    }))
}

use std::ops::Range;

use serde::{Deserialize, Serialize};

use crate::downsample::HalfHourlySeries;
use crate::PipelineError;

/// Contiguous, disjoint, chronologically ordered index ranges on the
/// 30-minute axis.
#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct DatasetSplit {
    pub train: Range<usize>,
    pub val: Range<usize>,
    pub test: Range<usize>,
}

impl DatasetSplit {
    pub fn assert_invariants(&self) {
        assert!(self.train.start == 0);
        assert!(self.train.end == self.val.start);
        assert!(self.val.end == self.test.start);
        assert!(self.train.end >= self.train.start);
        assert!(self.val.end >= self.val.start);
        assert!(self.test.end >= self.test.start);
    }
}

/// Splits the pre-test region at `floor(train_fraction * pre_test_len)`;
/// everything from `test_start` onward is the held-out test partition.
pub fn chronological_split(
    series: &HalfHourlySeries,
    test_start_ts: i64,
    train_fraction: f64,
) -> Result<DatasetSplit, PipelineError> {
    if !(train_fraction > 0.0 && train_fraction < 1.0) {
        return Err(PipelineError::Range(format!(
            "train_fraction {train_fraction} outside (0, 1)"
        )));
    }
    let Some(test_idx) = series.index_of(test_start_ts) else {
        return Err(PipelineError::Range(
            "test start outside the series".into(),
        ));
    };
    if test_idx == 0 {
        return Err(PipelineError::Range(
            "test start leaves no training data".into(),
        ));
    }
    let train_len = ((train_fraction * test_idx as f64).floor() as usize).min(test_idx);
    let split = DatasetSplit {
        train: 0..train_len,
        val: train_len..test_idx,
        test: test_idx..series.len(),
    };
    split.assert_invariants();
    Ok(split)
}

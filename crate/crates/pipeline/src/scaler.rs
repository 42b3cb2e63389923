use serde::{Deserialize, Serialize};

use crate::features::FeatureMatrix;
use crate::split::DatasetSplit;
use crate::PipelineError;

/// Per-column affine map `x -> (x - min) / (max - min)` onto `[0, 1]` for the
/// fit partition. Columns with `max == min` are flagged degenerate and map to
/// a constant 0.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ColumnScale {
    pub min: f64,
    pub max: f64,
    pub degenerate: bool,
}

/// Which partition the scaler statistics come from. Training-only is the
/// default; train+validation is exposed as a configuration switch.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize, Default)]
#[serde(rename_all = "snake_case")]
pub enum FitPartition {
    #[default]
    Train,
    TrainVal,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ScalerParams {
    pub columns: Vec<ColumnScale>,
    pub fitted_on: FitPartition,
}

/// Fits min-max parameters on the training partition only.
pub fn fit_scaler(matrix: &FeatureMatrix, split: &DatasetSplit) -> ScalerParams {
    fit_scaler_on(matrix, split, FitPartition::Train)
}

/// Fits min-max parameters on the chosen partition.
pub fn fit_scaler_on(
    matrix: &FeatureMatrix,
    split: &DatasetSplit,
    partition: FitPartition,
) -> ScalerParams {
    let rows = match partition {
        FitPartition::Train => split.train.clone(),
        FitPartition::TrainVal => split.train.start..split.val.end,
    };
    let mut columns = Vec::with_capacity(matrix.values.ncols());
    for c in 0..matrix.values.ncols() {
        let mut min = f64::INFINITY;
        let mut max = f64::NEG_INFINITY;
        for r in rows.clone() {
            let v = matrix.values[[r, c]];
            min = min.min(v);
            max = max.max(v);
        }
        columns.push(ColumnScale {
            min,
            max,
            degenerate: max == min,
        });
    }
    ScalerParams {
        columns,
        fitted_on: partition,
    }
}

/// Applies the fitted map to every row. Values outside the fit range pass
/// through unclipped (scaled test values may exceed `[0, 1]`).
pub fn apply_scaler(
    matrix: &FeatureMatrix,
    params: &ScalerParams,
) -> Result<FeatureMatrix, PipelineError> {
    if params.columns.len() != matrix.values.ncols() {
        return Err(PipelineError::ScalerMismatch(format!(
            "{} columns fitted, matrix has {}",
            params.columns.len(),
            matrix.values.ncols()
        )));
    }
    let mut values = matrix.values.clone();
    for (c, scale) in params.columns.iter().enumerate() {
        let width = scale.max - scale.min;
        for v in values.column_mut(c) {
            *v = if scale.degenerate {
                0.0
            } else {
                (*v - scale.min) / width
            };
        }
    }
    Ok(FeatureMatrix {
        region: matrix.region,
        start_ts: matrix.start_ts,
        values,
    })
}

/// Maps scaled price values back to A$/MWh using the price column's fit.
/// Metric computation always receives inverted values.
pub fn invert_prices(values: &[f64], params: &ScalerParams) -> Vec<f64> {
    let scale = &params.columns[0];
    let width = scale.max - scale.min;
    values
        .iter()
        .map(|v| {
            if scale.degenerate {
                scale.min
            } else {
                v * width + scale.min
            }
        })
        .collect()
}

#[cfg(test)]
mod tests {
    use super::*;
    use ndarray::Array2;
    use nembench_market_data::Region;

    fn matrix(col: Vec<f64>) -> FeatureMatrix {
        let n = col.len();
        let mut values = Array2::<f64>::zeros((n, 1));
        for (i, v) in col.into_iter().enumerate() {
            values[[i, 0]] = v;
        }
        FeatureMatrix {
            region: Region::QLD,
            start_ts: 0,
            values,
        }
    }

    fn split_all_train(n: usize) -> DatasetSplit {
        DatasetSplit {
            train: 0..n,
            val: n..n,
            test: n..n,
        }
    }

    #[test]
    fn affine_endpoints() {
        let m = matrix(vec![-100.0, 0.0, 300.0]);
        let params = fit_scaler(&m, &split_all_train(3));
        let scaled = apply_scaler(&m, &params).unwrap();
        let col: Vec<f64> = scaled.values.column(0).to_vec();
        assert_eq!(col, vec![0.0, 0.25, 1.0]);
    }

    #[test]
    fn test_values_pass_through_unclipped() {
        let m = matrix(vec![-100.0, 0.0, 300.0, 400.0]);
        // Fit on the first three rows only.
        let split = DatasetSplit {
            train: 0..3,
            val: 3..3,
            test: 3..4,
        };
        let params = fit_scaler(&m, &split);
        let scaled = apply_scaler(&m, &params).unwrap();
        assert_eq!(scaled.values[[3, 0]], 1.25);
    }

    #[test]
    fn degenerate_column_flagged_and_constant_zero() {
        let m = matrix(vec![7.0, 7.0, 7.0]);
        let params = fit_scaler(&m, &split_all_train(3));
        assert!(params.columns[0].degenerate);
        let scaled = apply_scaler(&m, &params).unwrap();
        assert!(scaled.values.column(0).iter().all(|&v| v == 0.0));
        assert_eq!(invert_prices(&[0.0, 0.5], &params), vec![7.0, 7.0]);
    }

    #[test]
    fn train_val_switch_widens_the_fit_range() {
        let m = matrix(vec![0.0, 10.0, 50.0, 100.0]);
        let split = DatasetSplit {
            train: 0..2,
            val: 2..3,
            test: 3..4,
        };
        let train_only = fit_scaler_on(&m, &split, FitPartition::Train);
        assert_eq!(train_only.columns[0].max, 10.0);
        let with_val = fit_scaler_on(&m, &split, FitPartition::TrainVal);
        assert_eq!(with_val.columns[0].max, 50.0);
    }

    #[test]
    fn round_trip_is_identity_to_1e9_relative() {
        use rand::{Rng, SeedableRng};
        let mut rng = rand_chacha::ChaCha20Rng::seed_from_u64(11);
        let m = matrix(vec![-1000.0, 17_500.0]);
        let params = fit_scaler(&m, &split_all_train(2));
        let width = params.columns[0].max - params.columns[0].min;
        for _ in 0..1_000_000 {
            let x: f64 = rng.random::<f64>() * 30_000.0 - 5_000.0;
            let scaled = (x - params.columns[0].min) / width;
            let back = invert_prices(&[scaled], &params)[0];
            assert!(
                (back - x).abs() <= 1e-9 * x.abs().max(1.0),
                "{x} -> {back}"
            );
        }
    }
}

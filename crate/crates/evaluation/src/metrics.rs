use crate::dump::ForecastDump;
use crate::naive::NaiveBenchmark;
use crate::EvalError;

/// Overall absolute and relative error metrics of one dump.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct PointMetrics {
    pub mae: f64,
    pub rmse: f64,
    /// Two-sided symmetric percentage error on the 0-200 scale; 0/0 terms
    /// count as 0.
    pub smape: f64,
}

/// MAE, RMSE, and sMAPE over every forecast point of the dump.
pub fn point_metrics(dump: &ForecastDump) -> Result<PointMetrics, EvalError> {
    metrics_over(dump.rows.iter().map(|r| (r.y_true, r.y_pred)))
}

/// Same metrics over an explicit `(y_true, y_pred)` iterator (used for
/// subset evaluation).
pub fn metrics_over(
    pairs: impl Iterator<Item = (f64, f64)>,
) -> Result<PointMetrics, EvalError> {
    let mut n = 0usize;
    let mut abs_sum = 0.0;
    let mut sq_sum = 0.0;
    let mut smape_sum = 0.0;
    for (y, yhat) in pairs {
        let err = y - yhat;
        abs_sum += err.abs();
        sq_sum += err * err;
        let denom = y.abs() + yhat.abs();
        if denom > 0.0 {
            smape_sum += 2.0 * err.abs() / denom;
        }
        n += 1;
    }
    if n == 0 {
        return Err(EvalError::EmptyDump);
    }
    let nf = n as f64;
    Ok(PointMetrics {
        mae: abs_sum / nf,
        rmse: (sq_sum / nf).sqrt(),
        smape: 100.0 * smape_sum / nf,
    })
}

/// Model MAE divided by the seasonal-naive benchmark MAE. Values above 1 mean
/// the model loses to the weekly naive forecast.
pub fn rmae(dump: &ForecastDump, bench: &NaiveBenchmark) -> Result<f64, EvalError> {
    if bench.benchmark_mae <= 0.0 {
        return Err(EvalError::ZeroBenchmark);
    }
    Ok(point_metrics(dump)?.mae / bench.benchmark_mae)
}

fn sign(x: f64) -> i8 {
    if x > 0.0 {
        1
    } else if x < 0.0 {
        -1
    } else {
        0
    }
}

/// Mean directional accuracy, percent. Within each window, consecutive-step
/// predicted and actual changes are compared by sign for steps 2..=H; the
/// window score is the match rate, and the dump score is the mean over
/// windows. Zero changes use sign(0) = 0 and match only another zero.
/// Comparisons never cross window boundaries.
pub fn mda(dump: &ForecastDump) -> Result<f64, EvalError> {
    if dump.rows.is_empty() {
        return Err(EvalError::EmptyDump);
    }
    if dump.horizon() < 2 {
        return Err(EvalError::HorizonTooShort);
    }
    let mut window_scores = Vec::new();
    for w in dump.windows() {
        if w.len() < 2 {
            return Err(EvalError::HorizonTooShort);
        }
        let mut matches = 0usize;
        for pair in w.windows(2) {
            let actual = sign(pair[1].y_true - pair[0].y_true);
            let predicted = sign(pair[1].y_pred - pair[0].y_pred);
            if actual == predicted {
                matches += 1;
            }
        }
        window_scores.push(100.0 * matches as f64 / (w.len() - 1) as f64);
    }
    Ok(window_scores.iter().sum::<f64>() / window_scores.len() as f64)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::dump::DumpRow;
    use nembench_market_data::Region;

    pub(crate) fn dump_from_pairs(pairs: &[(f64, f64)]) -> ForecastDump {
        // One window holding every pair.
        let rows = pairs
            .iter()
            .enumerate()
            .map(|(i, &(y, yhat))| DumpRow {
                window_id: 0,
                step: (i + 1) as u16,
                target_ts: i as i64 * 1800,
                y_true: y,
                y_pred: yhat,
            })
            .collect();
        ForecastDump {
            region: Region::QLD,
            setting_label: "24H".into(),
            family: "TEST".into(),
            seed: 0,
            rows,
        }
    }

    #[test]
    fn perfect_forecast_is_zero_error() {
        let d = dump_from_pairs(&[(100.0, 100.0)]);
        let m = point_metrics(&d).unwrap();
        assert_eq!((m.mae, m.rmse, m.smape), (0.0, 0.0, 0.0));
    }

    #[test]
    fn single_point_closed_forms() {
        let d = dump_from_pairs(&[(100.0, 50.0)]);
        let m = point_metrics(&d).unwrap();
        assert_eq!(m.mae, 50.0);
        assert_eq!(m.rmse, 50.0);
        assert!((m.smape - 200.0 / 3.0).abs() < 1e-12, "{}", m.smape);
    }

    #[test]
    fn opposite_signs_hit_the_smape_ceiling() {
        let d = dump_from_pairs(&[(100.0, -100.0)]);
        let m = point_metrics(&d).unwrap();
        assert_eq!(m.smape, 200.0);
    }

    #[test]
    fn zero_over_zero_counts_as_zero() {
        let d = dump_from_pairs(&[(0.0, 0.0), (10.0, 10.0)]);
        let m = point_metrics(&d).unwrap();
        assert_eq!(m.smape, 0.0);
    }

    #[test]
    fn rmae_is_a_plain_ratio() {
        let d = dump_from_pairs(&[(100.0, 50.0)]); // MAE 50
        let bench = NaiveBenchmark {
            seasonal_lag: 336,
            out_of_sample_len: 1000,
            benchmark_mae: 100.0,
        };
        assert_eq!(rmae(&d, &bench).unwrap(), 0.5);
        let worse = dump_from_pairs(&[(100.0, -20.0)]); // MAE 120
        assert_eq!(rmae(&worse, &bench).unwrap(), 1.2);
        let zero = NaiveBenchmark {
            seasonal_lag: 336,
            out_of_sample_len: 1000,
            benchmark_mae: 0.0,
        };
        assert!(matches!(rmae(&d, &zero), Err(EvalError::ZeroBenchmark)));
    }

    #[test]
    fn mda_matches_enumerated_signs() {
        // y: +1, -1, +2 ; yhat: +5, -5, +9 -> all three directions agree.
        let d = dump_from_pairs(&[(1.0, 0.0), (2.0, 5.0), (1.0, 0.0), (3.0, 9.0)]);
        assert_eq!(mda(&d).unwrap(), 100.0);
        let inverted = dump_from_pairs(&[(1.0, 4.0), (2.0, 3.0), (3.0, 2.0), (4.0, 1.0)]);
        assert_eq!(mda(&inverted).unwrap(), 0.0);
        let flat = dump_from_pairs(&[(1.0, 1.0), (1.0, 2.0)]); // actual 0, predicted +
        assert_eq!(mda(&flat).unwrap(), 0.0);
        let both_flat = dump_from_pairs(&[(1.0, 2.0), (1.0, 2.0)]); // both 0
        assert_eq!(mda(&both_flat).unwrap(), 100.0);
    }

    #[test]
    fn mda_requires_two_steps() {
        let d = dump_from_pairs(&[(1.0, 1.0)]);
        assert!(matches!(mda(&d), Err(EvalError::HorizonTooShort)));
    }
}

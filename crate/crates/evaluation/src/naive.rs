use crate::EvalError;

/// Weekly seasonal lag in half-hour steps.
pub const WEEKLY_SEASONAL_LAG: usize = 336;

/// The seasonal-naive benchmark error over the out-of-sample series:
/// `(1/(M-f)) * Σ_{t=f..M-1} |y_t - y_{t-f}|`.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct NaiveBenchmark {
    pub seasonal_lag: usize,
    pub out_of_sample_len: usize,
    pub benchmark_mae: f64,
}

/// Computes the benchmark MAE of the lag-`f` naive forecast over `series`.
/// `f` is 336 for 30-minute data; smaller lags are accepted for tests.
pub fn seasonal_naive(series: &[f64], f: usize) -> Result<NaiveBenchmark, EvalError> {
    assert!(f > 0, "seasonal lag must be positive");
    let m = series.len();
    if m <= f {
        return Err(EvalError::SeriesTooShort(format!(
            "need more than {f} observations, got {m}"
        )));
    }
    let mut sum = 0.0;
    for t in f..m {
        sum += (series[t] - series[t - f]).abs();
    }
    let benchmark_mae = sum / (m - f) as f64;
    if benchmark_mae <= 0.0 {
        return Err(EvalError::ZeroBenchmark);
    }
    Ok(NaiveBenchmark {
        seasonal_lag: f,
        out_of_sample_len: m,
        benchmark_mae,
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn lag_one_is_mean_absolute_first_difference() {
        // 10 points; an independent loop oracle over first differences.
        let xs: [f64; 10] = [0.0, 1.0, 3.0, 2.0, 2.0, 5.0, 4.0, 8.0, 8.5, 7.0];
        let mut oracle = 0.0;
        for i in 1..xs.len() {
            oracle += (xs[i] - xs[i - 1]).abs();
        }
        oracle /= (xs.len() - 1) as f64;
        let b = seasonal_naive(&xs, 1).unwrap();
        assert!((b.benchmark_mae - oracle).abs() < 1e-12);
        // |1| + |2| + |-1| + |0| + |3| + |-1| + |4| + |0.5| + |-1.5| = 14
        assert!((b.benchmark_mae - 14.0 / 9.0).abs() < 1e-12);
    }

    #[test]
    fn exactly_periodic_series_is_degenerate() {
        let mut xs = Vec::new();
        for day in 0..4 {
            for k in 0..336 {
                let _ = day;
                xs.push((k as f64 * 0.1).sin() * 50.0 + 100.0);
            }
        }
        assert!(matches!(
            seasonal_naive(&xs, 336),
            Err(EvalError::ZeroBenchmark)
        ));
    }

    #[test]
    fn constant_series_is_degenerate() {
        let xs = vec![42.0; 700];
        assert!(matches!(
            seasonal_naive(&xs, 336),
            Err(EvalError::ZeroBenchmark)
        ));
    }

    #[test]
    fn too_short_series_rejected() {
        let xs = vec![1.0; 336];
        assert!(matches!(
            seasonal_naive(&xs, 336),
            Err(EvalError::SeriesTooShort(_))
        ));
    }
}

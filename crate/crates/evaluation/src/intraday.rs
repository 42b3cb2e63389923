use nembench_market_data::time::half_hour_interval;

use crate::dump::ForecastDump;
use crate::metrics::metrics_over;
use crate::EvalError;

pub const INTERVALS_PER_DAY_30M: usize = 48;

/// Per-half-hour-interval error metrics of a dump, grouped by the market
/// time of day of each target.
#[derive(Clone, Debug)]
pub struct IntradayProfile {
    pub count: [usize; INTERVALS_PER_DAY_30M],
    pub mae: [f64; INTERVALS_PER_DAY_30M],
    pub rmse: [f64; INTERVALS_PER_DAY_30M],
    pub smape: [f64; INTERVALS_PER_DAY_30M],
    /// Directional match rate of step pairs whose *later* step lands in the
    /// interval; `None` where no interior pairs land.
    pub mda: [Option<f64>; INTERVALS_PER_DAY_30M],
}

/// Groups forecast points by interval of day and computes per-interval
/// metrics. Directional pairs never cross window boundaries.
pub fn intraday_profile(dump: &ForecastDump) -> Result<IntradayProfile, EvalError> {
    if dump.rows.is_empty() {
        return Err(EvalError::EmptyDump);
    }
    let mut groups: Vec<Vec<(f64, f64)>> = vec![Vec::new(); INTERVALS_PER_DAY_30M];
    for r in &dump.rows {
        groups[half_hour_interval(r.target_ts)].push((r.y_true, r.y_pred));
    }

    let mut profile = IntradayProfile {
        count: [0; INTERVALS_PER_DAY_30M],
        mae: [0.0; INTERVALS_PER_DAY_30M],
        rmse: [0.0; INTERVALS_PER_DAY_30M],
        smape: [0.0; INTERVALS_PER_DAY_30M],
        mda: [None; INTERVALS_PER_DAY_30M],
    };
    for (k, g) in groups.iter().enumerate() {
        profile.count[k] = g.len();
        if !g.is_empty() {
            let m = metrics_over(g.iter().copied()).expect("non-empty group");
            profile.mae[k] = m.mae;
            profile.rmse[k] = m.rmse;
            profile.smape[k] = m.smape;
        }
    }

    let mut matches = [0usize; INTERVALS_PER_DAY_30M];
    let mut pairs = [0usize; INTERVALS_PER_DAY_30M];
    for w in dump.windows() {
        for pair in w.windows(2) {
            let k = half_hour_interval(pair[1].target_ts);
            let actual = (pair[1].y_true - pair[0].y_true).partial_cmp(&0.0);
            let predicted = (pair[1].y_pred - pair[0].y_pred).partial_cmp(&0.0);
            pairs[k] += 1;
            if actual == predicted {
                matches[k] += 1;
            }
        }
    }
    for k in 0..INTERVALS_PER_DAY_30M {
        if pairs[k] > 0 {
            profile.mda[k] = Some(100.0 * matches[k] as f64 / pairs[k] as f64);
        }
    }
    Ok(profile)
}

impl IntradayProfile {
    pub fn total_count(&self) -> usize {
        self.count.iter().sum()
    }

    /// Interval with the largest RMSE.
    pub fn argmax_rmse(&self) -> usize {
        (0..INTERVALS_PER_DAY_30M)
            .max_by(|&a, &b| self.rmse[a].partial_cmp(&self.rmse[b]).unwrap())
            .unwrap()
    }
}

use ndarray::Array2;
use nembench_market_data::{time, Region};

use crate::downsample::{HalfHourlySeries, HALF_HOUR_SECS};

/// Column layout of the feature matrix. Price first, then the four calendar
/// covariates derived purely from the timestamp.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum FeatureColumn {
    Price = 0,
    HourOfDay = 1,
    DayOfWeek = 2,
    DayOfMonth = 3,
    MonthOfYear = 4,
}

pub const N_FEATURES: usize = 5;

/// Row-per-interval numeric matrix over the fixed column set.
#[derive(Clone, Debug, PartialEq)]
pub struct FeatureMatrix {
    pub region: Region,
    pub start_ts: i64,
    /// `[n_rows, N_FEATURES]`.
    pub values: Array2<f64>,
}

impl FeatureMatrix {
    pub fn n_rows(&self) -> usize {
        self.values.nrows()
    }

    pub fn timestamp(&self, row: usize) -> i64 {
        self.start_ts + row as i64 * HALF_HOUR_SECS
    }

    pub fn price(&self, row: usize) -> f64 {
        self.values[[row, FeatureColumn::Price as usize]]
    }
}

/// Attaches the calendar features to each interval. Before scaling,
/// hour ∈ [0,23], day-of-week ∈ [0,6] (Monday = 0), day-of-month ∈ [1,31],
/// month ∈ [1,12].
pub fn add_time_features(series: &HalfHourlySeries) -> FeatureMatrix {
    let mut values = Array2::<f64>::zeros((series.len(), N_FEATURES));
    for (i, &p) in series.prices.iter().enumerate() {
        let (hour, dow, dom, month) = time::calendar_features(series.timestamp(i));
        values[[i, FeatureColumn::Price as usize]] = p;
        values[[i, FeatureColumn::HourOfDay as usize]] = hour as f64;
        values[[i, FeatureColumn::DayOfWeek as usize]] = dow as f64;
        values[[i, FeatureColumn::DayOfMonth as usize]] = dom as f64;
        values[[i, FeatureColumn::MonthOfYear as usize]] = month as f64;
    }
    FeatureMatrix {
        region: series.region,
        start_ts: series.start_ts,
        values,
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use chrono::NaiveDate;
    use nembench_market_data::time::{epoch_at_midnight, epoch_from_market};

    fn matrix_for(start_ts: i64, n: usize) -> FeatureMatrix {
        add_time_features(&HalfHourlySeries {
            region: Region::QLD,
            start_ts,
            prices: vec![50.0; n],
        })
    }

    /// Sakamoto's day-of-week algorithm, as an independent calendar oracle
    /// (0 = Monday).
    fn sakamoto_dow(y: i32, m: u32, d: u32) -> u32 {
        const T: [i32; 12] = [0, 3, 2, 5, 0, 3, 5, 1, 4, 6, 2, 4];
        let y = if m < 3 { y - 1 } else { y };
        let sunday0 =
            (y + y / 4 - y / 100 + y / 400 + T[(m - 1) as usize] + d as i32).rem_euclid(7);
        ((sunday0 + 6) % 7) as u32
    }

    #[test]
    fn new_years_day_2025_features() {
        let ts = epoch_at_midnight(NaiveDate::from_ymd_opt(2025, 1, 1).unwrap());
        let m = matrix_for(ts, 1);
        assert_eq!(m.values[[0, 1]], 0.0); // hour
        assert_eq!(m.values[[0, 2]], 2.0); // Wednesday
        assert_eq!(m.values[[0, 2]], sakamoto_dow(2025, 1, 1) as f64);
        assert_eq!(m.values[[0, 3]], 1.0); // day of month
        assert_eq!(m.values[[0, 4]], 1.0); // month
    }

    #[test]
    fn range_boundaries_at_year_end() {
        let ts = epoch_from_market(
            NaiveDate::from_ymd_opt(2023, 12, 31)
                .unwrap()
                .and_hms_opt(23, 30, 0)
                .unwrap(),
        );
        let m = matrix_for(ts, 1);
        assert_eq!(m.values[[0, 1]], 23.0);
        assert_eq!(m.values[[0, 2]], sakamoto_dow(2023, 12, 31) as f64);
        assert_eq!(m.values[[0, 3]], 31.0);
        assert_eq!(m.values[[0, 4]], 12.0);
    }

    #[test]
    fn half_hour_pairs_share_the_hour() {
        let ts = epoch_at_midnight(NaiveDate::from_ymd_opt(2024, 5, 5).unwrap());
        let m = matrix_for(ts, 48);
        for h in 0..24 {
            assert_eq!(m.values[[2 * h, 1]], h as f64);
            assert_eq!(m.values[[2 * h + 1, 1]], h as f64);
        }
    }

    #[test]
    fn dow_matches_oracle_across_a_year() {
        let start = NaiveDate::from_ymd_opt(2024, 1, 1).unwrap();
        for offset in (0..366).step_by(17) {
            let date = start + chrono::Duration::days(offset);
            let m = matrix_for(epoch_at_midnight(date), 1);
            let (y, mo, d) = (
                chrono::Datelike::year(&date),
                chrono::Datelike::month(&date),
                chrono::Datelike::day(&date),
            );
            assert_eq!(m.values[[0, 2]], sakamoto_dow(y, mo, d) as f64, "{date}");
        }
    }
}

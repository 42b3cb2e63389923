use chrono::NaiveDate;

use crate::region::Region;
use crate::{DataError, PRICE_CAP, PRICE_FLOOR};

/// Seconds per dispatch interval.
pub const FIVE_MIN_SECS: i64 = 300;
/// Dispatch intervals per market day.
pub const INTERVALS_PER_DAY: usize = 288;

/// One region's gap-free 5-minute regional reference price sequence.
/// Timestamps are implied by `(start_ts, FIVE_MIN_SECS, len)`; element `k`
/// covers the interval starting at `start_ts + k * 300`.
#[derive(Clone, Debug, PartialEq)]
pub struct RawPriceSeries {
    pub region: Region,
    /// Epoch seconds of the first interval start (market time midnight for
    /// whole-day ranges).
    pub start_ts: i64,
    pub prices: Vec<f64>,
}

impl RawPriceSeries {
    /// Validates invariants and constructs the series.
    pub fn new(region: Region, start_ts: i64, prices: Vec<f64>) -> Result<Self, DataError> {
        if prices.is_empty() {
            return Err(DataError::EmptySeries);
        }
        for (i, &p) in prices.iter().enumerate() {
            if !p.is_finite() {
                return Err(DataError::Integrity(format!(
                    "non-finite price at index {i}"
                )));
            }
            if !(PRICE_FLOOR..=PRICE_CAP).contains(&p) {
                return Err(DataError::Integrity(format!(
                    "price {p} at index {i} outside [{PRICE_FLOOR}, {PRICE_CAP}]"
                )));
            }
        }
        Ok(RawPriceSeries {
            region,
            start_ts,
            prices,
        })
    }

    pub fn len(&self) -> usize {
        self.prices.len()
    }

    pub fn is_empty(&self) -> bool {
        self.prices.is_empty()
    }

    pub fn timestamp(&self, idx: usize) -> i64 {
        self.start_ts + idx as i64 * FIVE_MIN_SECS
    }

    pub fn end_ts(&self) -> i64 {
        self.timestamp(self.len())
    }
}

/// Number of whole days in the inclusive date range.
pub fn days_inclusive(start: NaiveDate, end: NaiveDate) -> i64 {
    (end - start).num_days() + 1
}

/// Expected 5-minute series length for an inclusive date range.
pub fn expected_len(start: NaiveDate, end: NaiveDate) -> usize {
    days_inclusive(start, end) as usize * INTERVALS_PER_DAY
}

/// Full-series moments and order statistics.
#[derive(Clone, Debug, PartialEq)]
pub struct SeriesSummary {
    pub count: usize,
    pub mean: f64,
    pub std: f64,
    pub min: f64,
    pub median: f64,
    pub max: f64,
    /// Standardized third central moment; `None` flags zero variance.
    pub skewness: Option<f64>,
    /// Standardized fourth central moment (plain, not excess); `None` flags
    /// zero variance.
    pub kurtosis: Option<f64>,
}

/// Computes moments over the full series. Skewness and kurtosis use the
/// population convention (divide by N) and are undefined for zero variance.
pub fn summarize(series: &RawPriceSeries) -> Result<SeriesSummary, DataError> {
    let xs = &series.prices;
    if xs.is_empty() {
        return Err(DataError::EmptySeries);
    }
    let n = xs.len() as f64;
    let mean = xs.iter().sum::<f64>() / n;
    let mut m2 = 0.0;
    let mut m3 = 0.0;
    let mut m4 = 0.0;
    for &x in xs {
        let d = x - mean;
        m2 += d * d;
        m3 += d * d * d;
        m4 += d * d * d * d;
    }
    m2 /= n;
    m3 /= n;
    m4 /= n;
    let std = m2.sqrt();
    let (skewness, kurtosis) = if m2 > 0.0 {
        (Some(m3 / m2.powf(1.5)), Some(m4 / (m2 * m2)))
    } else {
        (None, None)
    };

    let mut sorted = xs.clone();
    sorted.sort_by(|a, b| a.partial_cmp(b).unwrap());
    let median = if sorted.len() % 2 == 1 {
        sorted[sorted.len() / 2]
    } else {
        0.5 * (sorted[sorted.len() / 2 - 1] + sorted[sorted.len() / 2])
    };

    Ok(SeriesSummary {
        count: xs.len(),
        mean,
        std,
        min: sorted[0],
        median,
        max: *sorted.last().unwrap(),
        skewness,
        kurtosis,
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    fn series(prices: Vec<f64>) -> RawPriceSeries {
        RawPriceSeries::new(Region::QLD, 0, prices).unwrap()
    }

    /// Independent brute-force implementation of every moment, written as
    /// plain loops so it shares nothing with `summarize`.
    fn oracle(xs: &[f64]) -> (f64, f64, f64, f64) {
        let n = xs.len() as f64;
        let mut sum = 0.0;
        for &x in xs {
            sum += x;
        }
        let mean = sum / n;
        let mut v = 0.0;
        for &x in xs {
            v += (x - mean) * (x - mean);
        }
        v /= n;
        let mut s3 = 0.0;
        for &x in xs {
            s3 += (x - mean).powi(3);
        }
        let skew = (s3 / n) / v.powf(1.5);
        let mut s4 = 0.0;
        for &x in xs {
            s4 += (x - mean).powi(4);
        }
        let kurt = (s4 / n) / (v * v);
        (mean, v.sqrt(), skew, kurt)
    }

    #[test]
    fn moments_match_loop_oracle() {
        // Fixed pseudo-random 10-point series.
        let xs = vec![
            101.3, -45.2, 300.0, 12.7, 88.8, -4.4, 156.1, 73.9, 220.5, -99.0,
        ];
        let s = summarize(&series(xs.clone())).unwrap();
        let (mean, std, skew, kurt) = oracle(&xs);
        let rel = |a: f64, b: f64| (a - b).abs() / b.abs().max(1.0);
        assert!(rel(s.mean, mean) < 1e-9);
        assert!(rel(s.std, std) < 1e-9);
        assert!(rel(s.skewness.unwrap(), skew) < 1e-9);
        assert!(rel(s.kurtosis.unwrap(), kurt) < 1e-9);
    }

    #[test]
    fn constant_series_flags_undefined_moments() {
        let s = summarize(&series(vec![42.0; 100])).unwrap();
        assert_eq!(s.mean, 42.0);
        assert_eq!(s.std, 0.0);
        assert!(s.skewness.is_none());
        assert!(s.kurtosis.is_none());
    }

    #[test]
    fn median_even_and_odd() {
        let s = summarize(&series(vec![3.0, 1.0, 2.0])).unwrap();
        assert_eq!(s.median, 2.0);
        let s = summarize(&series(vec![4.0, 1.0, 2.0, 3.0])).unwrap();
        assert_eq!(s.median, 2.5);
    }

    #[test]
    fn out_of_band_price_rejected() {
        let err = RawPriceSeries::new(Region::SA, 0, vec![0.0, 20_000.0]);
        assert!(matches!(err, Err(DataError::Integrity(_))));
        let err = RawPriceSeries::new(Region::SA, 0, vec![-1000.1]);
        assert!(matches!(err, Err(DataError::Integrity(_))));
    }

    #[test]
    fn study_period_calendar_arithmetic() {
        let start = NaiveDate::from_ymd_opt(2023, 1, 1).unwrap();
        let end = NaiveDate::from_ymd_opt(2025, 6, 30).unwrap();
        assert_eq!(days_inclusive(start, end), 912);
        assert_eq!(expected_len(start, end), 262_656);
    }
}

use nembench_market_data::{RawPriceSeries, Region, FIVE_MIN_SECS};

use crate::PipelineError;

/// Seconds per half-hour step.
pub const HALF_HOUR_SECS: i64 = 1800;

/// One region's 30-minute price series, obtained by block-averaging the
/// 5-minute dispatch prices.
#[derive(Clone, Debug, PartialEq)]
pub struct HalfHourlySeries {
    pub region: Region,
    /// Epoch seconds of the first half-hour interval start.
    pub start_ts: i64,
    pub prices: Vec<f64>,
}

impl HalfHourlySeries {
    pub fn len(&self) -> usize {
        self.prices.len()
    }

    pub fn is_empty(&self) -> bool {
        self.prices.is_empty()
    }

    pub fn timestamp(&self, idx: usize) -> i64 {
        self.start_ts + idx as i64 * HALF_HOUR_SECS
    }

    /// Index of the first interval starting at or after `ts`, if inside the
    /// series.
    pub fn index_of(&self, ts: i64) -> Option<usize> {
        if ts < self.start_ts {
            return None;
        }
        let offset = ts - self.start_ts;
        let idx = (offset / HALF_HOUR_SECS) as usize + usize::from(offset % HALF_HOUR_SECS != 0);
        (idx < self.len()).then_some(idx)
    }
}

/// Averages six consecutive 5-minute prices into each 30-minute value.
/// Element `k` is the arithmetic mean of raw elements `[6k, 6k+6)`.
pub fn downsample_to_30min(raw: &RawPriceSeries) -> Result<HalfHourlySeries, PipelineError> {
    if raw.len() % 6 != 0 {
        return Err(PipelineError::Alignment(format!(
            "length {} not divisible by 6",
            raw.len()
        )));
    }
    if (raw.start_ts - (raw.start_ts / HALF_HOUR_SECS) * HALF_HOUR_SECS) != 0 {
        return Err(PipelineError::Alignment(
            "series does not start on a half-hour boundary".into(),
        ));
    }
    debug_assert_eq!(HALF_HOUR_SECS, 6 * FIVE_MIN_SECS);
    let prices = raw
        .prices
        .chunks_exact(6)
        .map(|block| block.iter().sum::<f64>() / 6.0)
        .collect();
    Ok(HalfHourlySeries {
        region: raw.region,
        start_ts: raw.start_ts,
        prices,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use nembench_market_data::{generate_synthetic, SyntheticSpec};

    #[test]
    fn block_mean_of_one_to_six() {
        let raw = RawPriceSeries::new(Region::QLD, 0, vec![1.0, 2.0, 3.0, 4.0, 5.0, 6.0]).unwrap();
        let hh = downsample_to_30min(&raw).unwrap();
        assert_eq!(hh.prices, vec![3.5]);
    }

    #[test]
    fn ragged_length_rejected() {
        let raw = RawPriceSeries::new(Region::QLD, 0, vec![1.0; 7]).unwrap();
        assert!(matches!(
            downsample_to_30min(&raw),
            Err(PipelineError::Alignment(_))
        ));
    }

    #[test]
    fn misaligned_start_rejected() {
        let raw = RawPriceSeries::new(Region::QLD, 300, vec![1.0; 6]).unwrap();
        assert!(matches!(
            downsample_to_30min(&raw),
            Err(PipelineError::Alignment(_))
        ));
    }

    #[test]
    fn mean_is_preserved_exactly_over_whole_blocks() {
        let spec = SyntheticSpec {
            daily_amplitude: 40.0,
            weekly_amplitude: 12.0,
            noise_std: 25.0,
            spike_rate: 0.01,
            spike_scale: 500.0,
            ..SyntheticSpec::constant(28, 110.0)
        };
        let raw = generate_synthetic(&spec, 5).unwrap();
        let hh = downsample_to_30min(&raw).unwrap();
        assert_eq!(hh.len(), raw.len() / 6);
        let mean_raw = raw.prices.iter().sum::<f64>() / raw.len() as f64;
        let mean_hh = hh.prices.iter().sum::<f64>() / hh.len() as f64;
        assert!(
            (mean_raw - mean_hh).abs() / mean_raw.abs() < 1e-9,
            "{mean_raw} vs {mean_hh}"
        );
        // Averaging can only tighten the extremes.
        let max_raw = raw.prices.iter().cloned().fold(f64::MIN, f64::max);
        let max_hh = hh.prices.iter().cloned().fold(f64::MIN, f64::max);
        assert!(max_hh <= max_raw);
    }

    #[test]
    fn index_of_rounds_up_to_next_interval() {
        let hh = HalfHourlySeries {
            region: Region::NSW,
            start_ts: 0,
            prices: vec![0.0; 10],
        };
        assert_eq!(hh.index_of(0), Some(0));
        assert_eq!(hh.index_of(1), Some(1));
        assert_eq!(hh.index_of(1800), Some(1));
        assert_eq!(hh.index_of(9 * 1800), Some(9));
        assert_eq!(hh.index_of(10 * 1800), None);
        assert_eq!(hh.index_of(-5), None);
    }
}

use nembench_market_data::time::half_hour_interval;
use nembench_pipeline::HalfHourlySeries;

use crate::intraday::INTERVALS_PER_DAY_30M;
use crate::EvalError;

/// Diurnal structure of the actual price series, per half-hour interval:
/// volatility of price changes, the average price, the prevalence of
/// negative prices, and the frequency of direction flips.
#[derive(Clone, Debug)]
pub struct DiurnalDiagnostics {
    /// Std over days of `y[d, k] - y[d, k-1]`, wrapping across midnight.
    pub price_change_std: [f64; INTERVALS_PER_DAY_30M],
    pub mean_price: [f64; INTERVALS_PER_DAY_30M],
    /// Percent of days with a negative price at the interval.
    pub pct_negative: [f64; INTERVALS_PER_DAY_30M],
    /// Percent of days where `sign(Δ_k) != sign(Δ_{k-1})`.
    pub pct_directional_shift: [f64; INTERVALS_PER_DAY_30M],
    pub n_days: usize,
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

/// Computes the per-interval diagnostics from actual prices only. The series
/// must start at market midnight; trailing partial days are ignored.
pub fn diurnal_diagnostics(series: &HalfHourlySeries) -> Result<DiurnalDiagnostics, EvalError> {
    if half_hour_interval(series.start_ts) != 0 {
        return Err(EvalError::SeriesTooShort(
            "series must start at market midnight".into(),
        ));
    }
    let n_days = series.len() / INTERVALS_PER_DAY_30M;
    if n_days < 2 {
        return Err(EvalError::SeriesTooShort(format!(
            "need at least 2 whole days, got {n_days}"
        )));
    }
    let at = |d: usize, k: usize| series.prices[d * INTERVALS_PER_DAY_30M + k];
    // Δ_k(d): change into interval k on day d; k = 0 wraps to the previous
    // day's final interval and is undefined on day 0.
    let delta = |d: usize, k: usize| -> Option<f64> {
        if k == 0 {
            (d > 0).then(|| at(d, 0) - at(d - 1, INTERVALS_PER_DAY_30M - 1))
        } else {
            Some(at(d, k) - at(d, k - 1))
        }
    };
    // Δ preceding Δ_k(d) in time.
    let prev_delta = |d: usize, k: usize| -> Option<f64> {
        if k == 0 {
            (d > 0).then(|| delta(d - 1, INTERVALS_PER_DAY_30M - 1)).flatten()
        } else {
            delta(d, k - 1)
        }
    };

    let mut out = DiurnalDiagnostics {
        price_change_std: [0.0; INTERVALS_PER_DAY_30M],
        mean_price: [0.0; INTERVALS_PER_DAY_30M],
        pct_negative: [0.0; INTERVALS_PER_DAY_30M],
        pct_directional_shift: [0.0; INTERVALS_PER_DAY_30M],
        n_days,
    };

    for k in 0..INTERVALS_PER_DAY_30M {
        let mut price_sum = 0.0;
        let mut neg = 0usize;
        for d in 0..n_days {
            let p = at(d, k);
            price_sum += p;
            if p < 0.0 {
                neg += 1;
            }
        }
        out.mean_price[k] = price_sum / n_days as f64;
        out.pct_negative[k] = 100.0 * neg as f64 / n_days as f64;

        let changes: Vec<f64> = (0..n_days).filter_map(|d| delta(d, k)).collect();
        if !changes.is_empty() {
            let mean = changes.iter().sum::<f64>() / changes.len() as f64;
            let var = changes
                .iter()
                .map(|c| (c - mean) * (c - mean))
                .sum::<f64>()
                / changes.len() as f64;
            out.price_change_std[k] = var.sqrt();
        }

        let mut shifts = 0usize;
        let mut defined = 0usize;
        for d in 0..n_days {
            if let (Some(cur), Some(prev)) = (delta(d, k), prev_delta(d, k)) {
                defined += 1;
                if sign(cur) != sign(prev) {
                    shifts += 1;
                }
            }
        }
        if defined > 0 {
            out.pct_directional_shift[k] = 100.0 * shifts as f64 / defined as f64;
        }
    }
    Ok(out)
}

impl DiurnalDiagnostics {
    pub fn argmax_pct_negative(&self) -> usize {
        (0..INTERVALS_PER_DAY_30M)
            .max_by(|&a, &b| {
                self.pct_negative[a]
                    .partial_cmp(&self.pct_negative[b])
                    .unwrap()
            })
            .unwrap()
    }
}

//! Forecast evaluation in three tiers: overall error metrics against a
//! weekly seasonal-naive benchmark, extreme and negative-price subsets, and
//! per-half-hour-interval intraday profiles with diurnal diagnostics of the
//! actual series.
//!
//! All metrics operate on denormalized forecast dumps (A$/MWh).

mod diagnostics;
mod dump;
mod intraday;
mod metrics;
mod naive;
mod report;
mod subsets;

pub use diagnostics::{diurnal_diagnostics, DiurnalDiagnostics};
pub use dump::{read_dump_csv, write_dump_csv, DumpRow, ForecastDump};
pub use intraday::{intraday_profile, IntradayProfile, INTERVALS_PER_DAY_30M};
pub use metrics::{mda, metrics_over, point_metrics, rmae, PointMetrics};
pub use naive::{seasonal_naive, NaiveBenchmark, WEEKLY_SEASONAL_LAG};
pub use report::{MetricReport, SeedMetrics};
pub use subsets::{metrics_on_rows, percentile, subset_masks, SubsetMasks, TailScope};

use thiserror::Error;

#[derive(Debug, Error)]
pub enum EvalError {
    #[error("forecast dump is empty")]
    EmptyDump,
    #[error("series too short: {0}")]
    SeriesTooShort(String),
    #[error("seasonal benchmark is zero; rMAE undefined")]
    ZeroBenchmark,
    #[error("horizon too short for directional accuracy (need >= 2 steps)")]
    HorizonTooShort,
    #[error("subset is empty")]
    EmptySubset,
    #[error("dump format error: {0}")]
    Format(String),
    #[error("io error: {0}")]
    Io(#[from] std::io::Error),
}

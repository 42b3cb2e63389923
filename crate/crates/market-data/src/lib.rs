//! Regional reference price (RRP) data for the five regions of the Australian
//! National Electricity Market.
//!
//! Provides an AEMO archive client with a local columnar cache, integrity
//! validation of assembled 5-minute series, summary statistics, and a
//! deterministic synthetic generator used as the default data source for
//! tests and smoke experiments.

mod cache;
mod fetch;
mod mms;
mod region;
mod series;
mod synthetic;
pub mod time;

pub use cache::{cache_file_name, read_cache_file, write_cache_file};
pub use fetch::{fetch_rrp, AemoClient};
pub use mms::parse_dispatch_prices;
pub use region::Region;
pub use series::{summarize, RawPriceSeries, SeriesSummary, FIVE_MIN_SECS, INTERVALS_PER_DAY};
pub use synthetic::{generate_synthetic, Band, SyntheticSpec, VolatilityBand};

use thiserror::Error;

/// Market price floor and cap observed over the study period, in A$/MWh.
pub const PRICE_FLOOR: f64 = -1000.0;
pub const PRICE_CAP: f64 = 17500.0;

#[derive(Debug, Error)]
pub enum DataError {
    #[error("network unavailable and cache incomplete: {0}")]
    NetworkUnavailable(String),
    #[error("series integrity violated: {0}")]
    Integrity(String),
    #[error("requested range invalid: {0}")]
    Range(String),
    #[error("synthetic spec invalid: {0}")]
    Spec(String),
    #[error("series is empty")]
    EmptySeries,
    #[error("io error: {0}")]
    Io(#[from] std::io::Error),
}

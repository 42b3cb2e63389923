//! Market time helpers.
//!
//! The NEM runs on Australian Eastern Standard Time (UTC+10) with no daylight
//! saving, so every market day has exactly 288 five-minute intervals.
//! Timestamps are stored as UTC epoch seconds; conversion to civil market
//! time is a fixed 10-hour shift.

use chrono::{Datelike, NaiveDate, NaiveDateTime, Timelike};

/// Offset of market time from UTC, in seconds.
pub const MARKET_UTC_OFFSET_SECS: i64 = 10 * 3600;

/// Epoch seconds for a civil market-time instant.
pub fn epoch_from_market(dt: NaiveDateTime) -> i64 {
    dt.and_utc().timestamp() - MARKET_UTC_OFFSET_SECS
}

/// Civil market-time instant for epoch seconds.
pub fn market_from_epoch(ts: i64) -> NaiveDateTime {
    chrono::DateTime::from_timestamp(ts + MARKET_UTC_OFFSET_SECS, 0)
        .expect("timestamp in range")
        .naive_utc()
}

/// Epoch seconds of market-time midnight on `date`.
pub fn epoch_at_midnight(date: NaiveDate) -> i64 {
    epoch_from_market(date.and_hms_opt(0, 0, 0).unwrap())
}

/// Calendar features of a market-time instant:
/// (hour 0-23, day-of-week Monday=0, day-of-month 1-31, month 1-12).
pub fn calendar_features(ts: i64) -> (u32, u32, u32, u32) {
    let dt = market_from_epoch(ts);
    (
        dt.hour(),
        dt.weekday().num_days_from_monday(),
        dt.day(),
        dt.month(),
    )
}

/// Seconds since market-time midnight.
pub fn seconds_into_day(ts: i64) -> i64 {
    (ts + MARKET_UTC_OFFSET_SECS).rem_euclid(86_400)
}

/// Half-hour interval of the market day, 0..=47.
pub fn half_hour_interval(ts: i64) -> usize {
    (seconds_into_day(ts) / 1800) as usize
}

/// Parses `YYYY-MM-DD`.
pub fn parse_date(s: &str) -> Option<NaiveDate> {
    NaiveDate::parse_from_str(s.trim(), "%Y-%m-%d").ok()
}

/// Parses AEMO's `YYYY/MM/DD HH:MM:SS` settlement timestamps.
pub fn parse_settlement(s: &str) -> Option<NaiveDateTime> {
    NaiveDateTime::parse_from_str(s.trim().trim_matches('"'), "%Y/%m/%d %H:%M:%S").ok()
}

//! Opt-in tests against the real AEMO archive. These download multi-year
//! data and are ignored by default; run with
//! `cargo test -p nembench-market-data -- --ignored` on a machine with
//! network access and a few GB of cache space.

use chrono::NaiveDate;
use nembench_market_data::{fetch_rrp, summarize, Region};

fn cache_dir() -> std::path::PathBuf {
    let dir = std::env::temp_dir().join("nembench-archive-cache");
    std::fs::create_dir_all(&dir).unwrap();
    dir
}

#[test]
#[ignore = "requires network access to the AEMO archive"]
fn qld_study_period_matches_published_statistics() {
    let start = NaiveDate::from_ymd_opt(2023, 1, 1).unwrap();
    let end = NaiveDate::from_ymd_opt(2025, 6, 30).unwrap();
    let series = fetch_rrp(Region::QLD, start, end, &cache_dir()).unwrap();
    assert_eq!(series.len(), 262_656);

    let s = summarize(&series).unwrap();
    assert!((s.mean - 101.947).abs() < 5e-3, "mean {}", s.mean);
    assert!((s.median - 83.267).abs() < 5e-3, "median {}", s.median);
    assert!((s.max - 17_500.0).abs() < 1e-9, "max {}", s.max);
    assert!(s.min >= -1000.0);
}

#[test]
#[ignore = "requires network access to the AEMO archive"]
fn one_real_day_has_288_intervals() {
    let d = NaiveDate::from_ymd_opt(2023, 1, 1).unwrap();
    let series = fetch_rrp(Region::QLD, d, d, &cache_dir()).unwrap();
    assert_eq!(series.len(), 288);
}

//! Archive client: assembles gap-free 5-minute RRP series from the local
//! cache, downloading missing (region, month) files from the public AEMO
//! MMSDM archive on demand.

use std::collections::HashMap;
use std::io::Read;
use std::path::{Path, PathBuf};

use chrono::{Datelike, NaiveDate};

use crate::cache::{cache_file_name, read_cache_file, write_cache_file};
use crate::mms::parse_dispatch_prices;
use crate::region::Region;
use crate::series::{expected_len, RawPriceSeries, FIVE_MIN_SECS};
use crate::time::epoch_at_midnight;
use crate::DataError;

/// Earliest month available in the MMSDM data archive.
pub const ARCHIVE_START: (i32, u32) = (2009, 7);

const DEFAULT_BASE_URL: &str = "https://nemweb.com.au/Data_Archive/Wholesale_Electricity/MMSDM";

type MonthFetcher = Box<dyn Fn(i32, u32) -> Result<String, DataError>>;

/// Client over the AEMO dispatch-price archive with a local cache.
///
/// The default fetcher downloads the monthly `DISPATCHPRICE` zip over HTTPS
/// and extracts its CSV payload; tests inject an offline fetcher instead.
pub struct AemoClient {
    cache_dir: PathBuf,
    fetcher: MonthFetcher,
}

impl AemoClient {
    pub fn new(cache_dir: &Path) -> Self {
        let base = DEFAULT_BASE_URL.to_string();
        AemoClient {
            cache_dir: cache_dir.to_path_buf(),
            fetcher: Box::new(move |year, month| download_month_csv(&base, year, month)),
        }
    }

    /// Client with a custom source of monthly MMS CSV text.
    pub fn with_fetcher(
        cache_dir: &Path,
        fetcher: impl Fn(i32, u32) -> Result<String, DataError> + 'static,
    ) -> Self {
        AemoClient {
            cache_dir: cache_dir.to_path_buf(),
            fetcher: Box::new(fetcher),
        }
    }

    /// Returns the gap-free 5-minute series covering
    /// `[start 00:00, end 24:00)` market time, inclusive of both dates.
    /// Cached months are never re-downloaded, so repeat calls are pure cache
    /// hits.
    pub fn fetch_rrp(
        &self,
        region: Region,
        start: NaiveDate,
        end: NaiveDate,
    ) -> Result<RawPriceSeries, DataError> {
        if start > end {
            return Err(DataError::Range(format!("start {start} after end {end}")));
        }
        let floor = NaiveDate::from_ymd_opt(ARCHIVE_START.0, ARCHIVE_START.1, 1).unwrap();
        if start < floor {
            return Err(DataError::Range(format!(
                "start {start} precedes archive availability {floor}"
            )));
        }

        let mut parsed_months: HashMap<(i32, u32), Vec<crate::mms::DispatchPriceRow>> =
            HashMap::new();
        let mut rows: Vec<(i64, f64)> = Vec::new();
        for (year, month) in months_between(start, end) {
            rows.extend(self.month_rows(region, year, month, &mut parsed_months)?);
        }

        let range_start = epoch_at_midnight(start);
        let range_end = epoch_at_midnight(end) + 86_400;
        rows.retain(|(ts, _)| *ts >= range_start && *ts < range_end);
        rows.sort_by_key(|(ts, _)| *ts);
        rows.dedup_by_key(|(ts, _)| *ts);

        let expected = expected_len(start, end);
        if rows.len() != expected {
            return Err(DataError::Integrity(format!(
                "{} {start}..{end}: assembled {} intervals, expected {expected}",
                region,
                rows.len()
            )));
        }
        for (i, (ts, _)) in rows.iter().enumerate() {
            let want = range_start + i as i64 * FIVE_MIN_SECS;
            if *ts != want {
                return Err(DataError::Integrity(format!(
                    "gap or duplicate at index {i}: ts {ts}, expected {want}"
                )));
            }
        }
        RawPriceSeries::new(region, range_start, rows.into_iter().map(|(_, p)| p).collect())
    }

    /// Cached rows for one (region, month), building the cache file first if
    /// it is missing.
    fn month_rows(
        &self,
        region: Region,
        year: i32,
        month: u32,
        parsed: &mut HashMap<(i32, u32), Vec<crate::mms::DispatchPriceRow>>,
    ) -> Result<Vec<(i64, f64)>, DataError> {
        let path = self.cache_dir.join(cache_file_name(region, year, month));
        if path.exists() {
            return read_cache_file(&path, region);
        }

        self.ensure_month_parsed(year, month, parsed)?;
        let month_start = epoch_at_midnight(NaiveDate::from_ymd_opt(year, month, 1).unwrap());
        let (ny, nm) = next_month(year, month);
        let month_end = epoch_at_midnight(NaiveDate::from_ymd_opt(ny, nm, 1).unwrap());

        // The month's final interval settles at next month's midnight; some
        // archive files place that row in the following month's file.
        let have_last = parsed[&(year, month)]
            .iter()
            .any(|r| r.region == region && r.interval_start_ts == month_end - FIVE_MIN_SECS);
        if !have_last && self.ensure_month_parsed(ny, nm, parsed).is_ok() {
            // Merged below through the combined scan.
        }

        for r in Region::ALL {
            let file = self.cache_dir.join(cache_file_name(r, year, month));
            if file.exists() {
                continue;
            }
            let mut rows: Vec<(i64, f64)> = Vec::new();
            for source in [(year, month), (ny, nm)] {
                if let Some(batch) = parsed.get(&source) {
                    rows.extend(
                        batch
                            .iter()
                            .filter(|row| {
                                row.region == r
                                    && row.interval_start_ts >= month_start
                                    && row.interval_start_ts < month_end
                            })
                            .map(|row| (row.interval_start_ts, row.rrp)),
                    );
                }
            }
            rows.sort_by_key(|(ts, _)| *ts);
            rows.dedup_by_key(|(ts, _)| *ts);
            write_cache_file(&file, r, &rows)?;
        }
        read_cache_file(&path, region)
    }

    fn ensure_month_parsed(
        &self,
        year: i32,
        month: u32,
        parsed: &mut HashMap<(i32, u32), Vec<crate::mms::DispatchPriceRow>>,
    ) -> Result<(), DataError> {
        if parsed.contains_key(&(year, month)) {
            return Ok(());
        }
        let csv = (self.fetcher)(year, month)?;
        parsed.insert((year, month), parse_dispatch_prices(&csv));
        Ok(())
    }
}

/// Fetches one region's series with the default HTTPS client.
pub fn fetch_rrp(
    region: Region,
    start: NaiveDate,
    end: NaiveDate,
    cache_dir: &Path,
) -> Result<RawPriceSeries, DataError> {
    AemoClient::new(cache_dir).fetch_rrp(region, start, end)
}

fn next_month(year: i32, month: u32) -> (i32, u32) {
    if month == 12 {
        (year + 1, 1)
    } else {
        (year, month + 1)
    }
}

fn months_between(start: NaiveDate, end: NaiveDate) -> Vec<(i32, u32)> {
    let mut out = Vec::new();
    let (mut y, mut m) = (start.year(), start.month());
    loop {
        out.push((y, m));
        if (y, m) == (end.year(), end.month()) {
            break;
        }
        (y, m) = next_month(y, m);
    }
    out
}

fn download_month_csv(base_url: &str, year: i32, month: u32) -> Result<String, DataError> {
    let url = format!(
        "{base_url}/{year}/MMSDM_{year}_{month:02}/MMSDM_Historical_Data_SQLLoader/DATA/PUBLIC_DVD_DISPATCHPRICE_{year}{month:02}010000.zip"
    );
    let mut response = ureq::get(&url)
        .call()
        .map_err(|e| DataError::NetworkUnavailable(format!("{url}: {e}")))?;
    let bytes = response
        .body_mut()
        .with_config()
        .limit(1 << 30)
        .read_to_vec()
        .map_err(|e| DataError::NetworkUnavailable(format!("{url}: {e}")))?;
    let csv = extract_zip_csv(&bytes)?;
    Ok(csv)
}

/// Minimal zip reader: extracts the first `.csv` entry via the central
/// directory. Supports stored and deflate entries, which is all the archive
/// uses.
pub(crate) fn extract_zip_csv(bytes: &[u8]) -> Result<String, DataError> {
    let bad = |msg: &str| DataError::Integrity(format!("zip: {msg}"));
    if bytes.len() < 22 {
        return Err(bad("too short"));
    }
    // End-of-central-directory signature scan (comment may follow).
    let mut eocd = None;
    let min = bytes.len().saturating_sub(22 + 65_536);
    for i in (min..=bytes.len() - 22).rev() {
        if bytes[i..i + 4] == [0x50, 0x4b, 0x05, 0x06] {
            eocd = Some(i);
            break;
        }
    }
    let eocd = eocd.ok_or_else(|| bad("no end-of-central-directory record"))?;
    let entries = u16::from_le_bytes(bytes[eocd + 10..eocd + 12].try_into().unwrap()) as usize;
    let cd_offset = u32::from_le_bytes(bytes[eocd + 16..eocd + 20].try_into().unwrap()) as usize;

    let mut pos = cd_offset;
    for _ in 0..entries {
        if bytes.len() < pos + 46 || bytes[pos..pos + 4] != [0x50, 0x4b, 0x01, 0x02] {
            return Err(bad("corrupt central directory"));
        }
        let method = u16::from_le_bytes(bytes[pos + 10..pos + 12].try_into().unwrap());
        let comp_size = u32::from_le_bytes(bytes[pos + 20..pos + 24].try_into().unwrap()) as usize;
        let name_len = u16::from_le_bytes(bytes[pos + 28..pos + 30].try_into().unwrap()) as usize;
        let extra_len = u16::from_le_bytes(bytes[pos + 30..pos + 32].try_into().unwrap()) as usize;
        let comment_len =
            u16::from_le_bytes(bytes[pos + 32..pos + 34].try_into().unwrap()) as usize;
        let local_offset =
            u32::from_le_bytes(bytes[pos + 42..pos + 46].try_into().unwrap()) as usize;
        let name = String::from_utf8_lossy(&bytes[pos + 46..pos + 46 + name_len]).to_string();
        pos += 46 + name_len + extra_len + comment_len;

        if !name.to_ascii_lowercase().ends_with(".csv") {
            continue;
        }
        if bytes.len() < local_offset + 30 || bytes[local_offset..local_offset + 4] != [0x50, 0x4b, 0x03, 0x04] {
            return Err(bad("corrupt local header"));
        }
        let l_name =
            u16::from_le_bytes(bytes[local_offset + 26..local_offset + 28].try_into().unwrap())
                as usize;
        let l_extra =
            u16::from_le_bytes(bytes[local_offset + 28..local_offset + 30].try_into().unwrap())
                as usize;
        let data_start = local_offset + 30 + l_name + l_extra;
        let data = bytes
            .get(data_start..data_start + comp_size)
            .ok_or_else(|| bad("entry data out of bounds"))?;
        return match method {
            0 => Ok(String::from_utf8_lossy(data).to_string()),
            8 => {
                let mut out = String::new();
                flate2::read::DeflateDecoder::new(data)
                    .read_to_string(&mut out)
                    .map_err(|e| bad(&format!("deflate: {e}")))?;
                Ok(out)
            }
            m => Err(bad(&format!("unsupported compression method {m}"))),
        };
    }
    Err(bad("no csv entry found"))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::series::INTERVALS_PER_DAY;
    use std::fs;

    fn scratch_dir(tag: &str) -> PathBuf {
        let dir = std::env::temp_dir().join(format!(
            "nembench-fetch-test-{tag}-{}",
            std::process::id()
        ));
        fs::create_dir_all(&dir).unwrap();
        dir
    }

    /// Builds MMS CSV text covering a whole month (all regions), with a
    /// deterministic price pattern.
    fn month_csv(year: i32, month: u32, drop_ts: Option<i64>) -> String {
        let first = NaiveDate::from_ymd_opt(year, month, 1).unwrap();
        let (ny, nm) = next_month(year, month);
        let next = NaiveDate::from_ymd_opt(ny, nm, 1).unwrap();
        let n_days = (next - first).num_days() as usize;
        let mut out = String::from(
            "C,NEMP.WORLD,DISPATCHIS,AEMO,PUBLIC\nI,DISPATCH,PRICE,1,SETTLEMENTDATE,RUNNO,REGIONID,INTERVENTION,RRP\n",
        );
        let start = epoch_at_midnight(first);
        for i in 0..n_days * INTERVALS_PER_DAY {
            let ts = start + i as i64 * FIVE_MIN_SECS;
            if drop_ts == Some(ts) {
                continue;
            }
            let settlement = crate::time::market_from_epoch(ts + FIVE_MIN_SECS);
            for r in Region::ALL {
                out.push_str(&format!(
                    "D,DISPATCH,PRICE,1,\"{}\",1,{},0,{:.2}\n",
                    settlement.format("%Y/%m/%d %H:%M:%S"),
                    r.aemo_id(),
                    50.0 + (i % 288) as f64 * 0.25,
                ));
            }
        }
        out
    }

    #[test]
    fn fetch_one_day_has_288_intervals() {
        let dir = scratch_dir("oneday");
        let client = AemoClient::with_fetcher(&dir, |y, m| Ok(month_csv(y, m, None)));
        let d = NaiveDate::from_ymd_opt(2023, 1, 1).unwrap();
        let s = client.fetch_rrp(Region::QLD, d, d).unwrap();
        assert_eq!(s.len(), 288);
        assert_eq!(s.start_ts, epoch_at_midnight(d));
        fs::remove_dir_all(dir).ok();
    }

    #[test]
    fn repeat_fetch_is_cache_hit_and_idempotent() {
        let dir = scratch_dir("idem");
        let start = NaiveDate::from_ymd_opt(2023, 1, 15).unwrap();
        let end = NaiveDate::from_ymd_opt(2023, 2, 10).unwrap();
        let first = {
            let client = AemoClient::with_fetcher(&dir, |y, m| Ok(month_csv(y, m, None)));
            client.fetch_rrp(Region::SA, start, end).unwrap()
        };
        // Second client refuses all network traffic: must be served by cache.
        let offline = AemoClient::with_fetcher(&dir, |_, _| {
            Err(DataError::NetworkUnavailable("offline".into()))
        });
        let second = offline.fetch_rrp(Region::SA, start, end).unwrap();
        assert_eq!(first, second);
        // A different region over the same months is also already cached.
        assert!(offline.fetch_rrp(Region::TAS, start, end).is_ok());
        fs::remove_dir_all(dir).ok();
    }

    #[test]
    fn missing_interval_is_integrity_error() {
        let dir = scratch_dir("gap");
        let d = NaiveDate::from_ymd_opt(2023, 3, 5).unwrap();
        let missing = epoch_at_midnight(d) + 42 * FIVE_MIN_SECS;
        let client = AemoClient::with_fetcher(&dir, move |y, m| Ok(month_csv(y, m, Some(missing))));
        let err = client.fetch_rrp(Region::QLD, d, d);
        assert!(matches!(err, Err(DataError::Integrity(_))), "{err:?}");
        fs::remove_dir_all(dir).ok();
    }

    #[test]
    fn range_errors() {
        let dir = scratch_dir("range");
        let client = AemoClient::with_fetcher(&dir, |y, m| Ok(month_csv(y, m, None)));
        let a = NaiveDate::from_ymd_opt(2023, 1, 2).unwrap();
        let b = NaiveDate::from_ymd_opt(2023, 1, 1).unwrap();
        assert!(matches!(
            client.fetch_rrp(Region::QLD, a, b),
            Err(DataError::Range(_))
        ));
        let early = NaiveDate::from_ymd_opt(2005, 1, 1).unwrap();
        assert!(matches!(
            client.fetch_rrp(Region::QLD, early, a),
            Err(DataError::Range(_))
        ));
        fs::remove_dir_all(dir).ok();
    }

    #[test]
    fn no_cache_no_network_fails() {
        let dir = scratch_dir("nonet");
        let client = AemoClient::with_fetcher(&dir, |_, _| {
            Err(DataError::NetworkUnavailable("no connectivity".into()))
        });
        let d = NaiveDate::from_ymd_opt(2023, 1, 1).unwrap();
        assert!(matches!(
            client.fetch_rrp(Region::QLD, d, d),
            Err(DataError::NetworkUnavailable(_))
        ));
        fs::remove_dir_all(dir).ok();
    }

    #[test]
    fn zip_reader_handles_stored_and_deflate() {
        // Hand-built zip with one stored CSV entry.
        let payload = b"I,DISPATCH,PRICE,1,SETTLEMENTDATE,REGIONID,RRP\n";
        let stored = build_zip("PRICES.CSV", payload, false);
        assert_eq!(extract_zip_csv(&stored).unwrap().as_bytes(), payload);
        let deflated = build_zip("prices.csv", payload, true);
        assert_eq!(extract_zip_csv(&deflated).unwrap().as_bytes(), payload);
        assert!(extract_zip_csv(b"not a zip at all........").is_err());
    }

    /// Constructs a single-entry zip (no data descriptors), enough to
    /// exercise the reader.
    fn build_zip(name: &str, payload: &[u8], deflate: bool) -> Vec<u8> {
        use std::io::Write;
        let data = if deflate {
            let mut enc = flate2::write::DeflateEncoder::new(Vec::new(), flate2::Compression::default());
            enc.write_all(payload).unwrap();
            enc.finish().unwrap()
        } else {
            payload.to_vec()
        };
        let method: u16 = if deflate { 8 } else { 0 };
        let mut out = Vec::new();
        // local header
        out.extend_from_slice(&[0x50, 0x4b, 0x03, 0x04]);
        out.extend_from_slice(&20u16.to_le_bytes()); // version
        out.extend_from_slice(&0u16.to_le_bytes()); // flags
        out.extend_from_slice(&method.to_le_bytes());
        out.extend_from_slice(&[0u8; 8]); // time/date/crc (reader ignores)
        out.extend_from_slice(&(data.len() as u32).to_le_bytes());
        out.extend_from_slice(&(payload.len() as u32).to_le_bytes());
        out.extend_from_slice(&(name.len() as u16).to_le_bytes());
        out.extend_from_slice(&0u16.to_le_bytes());
        out.extend_from_slice(name.as_bytes());
        out.extend_from_slice(&data);
        let cd_offset = out.len();
        // central directory
        out.extend_from_slice(&[0x50, 0x4b, 0x01, 0x02]);
        out.extend_from_slice(&20u16.to_le_bytes());
        out.extend_from_slice(&20u16.to_le_bytes());
        out.extend_from_slice(&0u16.to_le_bytes());
        out.extend_from_slice(&method.to_le_bytes());
        out.extend_from_slice(&[0u8; 8]);
        out.extend_from_slice(&(data.len() as u32).to_le_bytes());
        out.extend_from_slice(&(payload.len() as u32).to_le_bytes());
        out.extend_from_slice(&(name.len() as u16).to_le_bytes());
        out.extend_from_slice(&[0u8; 8]); // extra/comment lens, disk, internal attrs
        out.extend_from_slice(&0u32.to_le_bytes()); // external attrs
        out.extend_from_slice(&0u32.to_le_bytes()); // local offset
        out.extend_from_slice(name.as_bytes());
        let cd_len = out.len() - cd_offset;
        // EOCD
        out.extend_from_slice(&[0x50, 0x4b, 0x05, 0x06]);
        out.extend_from_slice(&[0u8; 4]);
        out.extend_from_slice(&1u16.to_le_bytes());
        out.extend_from_slice(&1u16.to_le_bytes());
        out.extend_from_slice(&(cd_len as u32).to_le_bytes());
        out.extend_from_slice(&(cd_offset as u32).to_le_bytes());
        out.extend_from_slice(&0u16.to_le_bytes());
        out
    }
}

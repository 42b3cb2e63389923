//! Local price cache: one compressed columnar file per (region, month).
//!
//! Layout after gzip decompression, all little-endian:
//!
//! ```text
//! magic  "NEMC"            4 bytes
//! version u32              currently 1
//! region  u8               index into Region::ALL
//! count   u64
//! timestamps i64 * count   epoch seconds, interval starts
//! rrp        f64 * count   A$/MWh, bit-exact round trip
//! ```
//!
//! Writes go through a temp file followed by an atomic rename, so concurrent
//! fetchers of distinct files never observe partial writes.

use std::fs;
use std::io::{Read, Write};
use std::path::{Path, PathBuf};

use flate2::read::GzDecoder;
use flate2::write::GzEncoder;
use flate2::Compression;

use crate::region::Region;
use crate::DataError;

const MAGIC: &[u8; 4] = b"NEMC";
const VERSION: u32 = 1;

/// Cache file name for a region-month, e.g. `rrp_QLD_2023-01.bin.gz`.
pub fn cache_file_name(region: Region, year: i32, month: u32) -> String {
    format!("rrp_{}_{year:04}-{month:02}.bin.gz", region.code())
}

/// Writes one region-month of (timestamp, rrp) pairs.
pub fn write_cache_file(
    path: &Path,
    region: Region,
    rows: &[(i64, f64)],
) -> Result<(), DataError> {
    let mut raw = Vec::with_capacity(21 + rows.len() * 16);
    raw.extend_from_slice(MAGIC);
    raw.extend_from_slice(&VERSION.to_le_bytes());
    raw.push(region_index(region));
    raw.extend_from_slice(&(rows.len() as u64).to_le_bytes());
    for (ts, _) in rows {
        raw.extend_from_slice(&ts.to_le_bytes());
    }
    for (_, rrp) in rows {
        raw.extend_from_slice(&rrp.to_bits().to_le_bytes());
    }

    if let Some(parent) = path.parent() {
        fs::create_dir_all(parent)?;
    }
    let tmp = tmp_path(path);
    {
        let file = fs::File::create(&tmp)?;
        let mut enc = GzEncoder::new(file, Compression::default());
        enc.write_all(&raw)?;
        enc.finish()?;
    }
    fs::rename(&tmp, path)?;
    Ok(())
}

/// Reads one region-month back; validates the header and region.
pub fn read_cache_file(path: &Path, region: Region) -> Result<Vec<(i64, f64)>, DataError> {
    let file = fs::File::open(path)?;
    let mut raw = Vec::new();
    GzDecoder::new(file).read_to_end(&mut raw)?;
    if raw.len() < 17 || &raw[0..4] != MAGIC {
        return Err(DataError::Integrity(format!(
            "bad cache header in {}",
            path.display()
        )));
    }
    let version = u32::from_le_bytes(raw[4..8].try_into().unwrap());
    if version != VERSION {
        return Err(DataError::Integrity(format!(
            "unsupported cache version {version}"
        )));
    }
    if raw[8] != region_index(region) {
        return Err(DataError::Integrity(format!(
            "cache file {} holds a different region",
            path.display()
        )));
    }
    let count = u64::from_le_bytes(raw[9..17].try_into().unwrap()) as usize;
    let expected = 17 + count * 16;
    if raw.len() != expected {
        return Err(DataError::Integrity(format!(
            "cache file {} truncated: {} != {expected} bytes",
            path.display(),
            raw.len()
        )));
    }
    let mut rows = Vec::with_capacity(count);
    let ts_base = 17;
    let px_base = 17 + count * 8;
    for i in 0..count {
        let ts = i64::from_le_bytes(raw[ts_base + i * 8..ts_base + i * 8 + 8].try_into().unwrap());
        let bits =
            u64::from_le_bytes(raw[px_base + i * 8..px_base + i * 8 + 8].try_into().unwrap());
        rows.push((ts, f64::from_bits(bits)));
    }
    Ok(rows)
}

fn region_index(region: Region) -> u8 {
    Region::ALL.iter().position(|r| *r == region).unwrap() as u8
}

fn tmp_path(path: &Path) -> PathBuf {
    let mut name = path.file_name().unwrap_or_default().to_os_string();
    name.push(format!(".tmp.{}", std::process::id()));
    path.with_file_name(name)
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    fn scratch_dir(tag: &str) -> PathBuf {
        let dir = std::env::temp_dir().join(format!(
            "nembench-cache-test-{tag}-{}",
            std::process::id()
        ));
        fs::create_dir_all(&dir).unwrap();
        dir
    }

    #[test]
    fn region_mismatch_detected() {
        let dir = scratch_dir("region");
        let path = dir.join(cache_file_name(Region::QLD, 2023, 1));
        write_cache_file(&path, Region::QLD, &[(0, 1.0)]).unwrap();
        assert!(read_cache_file(&path, Region::QLD).is_ok());
        assert!(matches!(
            read_cache_file(&path, Region::NSW),
            Err(DataError::Integrity(_))
        ));
        fs::remove_dir_all(dir).ok();
    }

    proptest! {
        #[test]
        fn prices_round_trip_bit_exactly(
            rows in proptest::collection::vec((any::<i64>(), -1000.0f64..17500.0), 0..200)
        ) {
            let dir = scratch_dir("roundtrip");
            let path = dir.join("prop.bin.gz");
            write_cache_file(&path, Region::VIC, &rows).unwrap();
            let back = read_cache_file(&path, Region::VIC).unwrap();
            prop_assert_eq!(back.len(), rows.len());
            for ((ts_a, px_a), (ts_b, px_b)) in rows.iter().zip(&back) {
                prop_assert_eq!(ts_a, ts_b);
                prop_assert_eq!(px_a.to_bits(), px_b.to_bits());
            }
            fs::remove_dir_all(dir).ok();
        }
    }
}

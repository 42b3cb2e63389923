use std::io::{BufRead, BufReader, Write};
use std::path::Path;

use nembench_market_data::Region;
use serde::{Deserialize, Serialize};

use crate::EvalError;

/// One forecast point. `step` is 1-based within the window; `y_true` and
/// `y_pred` are denormalized A$/MWh.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct DumpRow {
    pub window_id: u32,
    pub step: u16,
    pub target_ts: i64,
    pub y_true: f64,
    pub y_pred: f64,
}

/// All forecast points of one (region, setting, family, seed) run, ordered by
/// `(window_id, step)` with contiguous steps inside each window.
#[derive(Clone, Debug, PartialEq)]
pub struct ForecastDump {
    pub region: Region,
    pub setting_label: String,
    pub family: String,
    pub seed: u64,
    pub rows: Vec<DumpRow>,
}

impl ForecastDump {
    /// Steps per window (the forecast horizon). Assumes a homogeneous dump.
    pub fn horizon(&self) -> usize {
        let Some(first) = self.rows.first() else {
            return 0;
        };
        self.rows
            .iter()
            .take_while(|r| r.window_id == first.window_id)
            .count()
    }

    /// Iterates windows as contiguous row slices.
    pub fn windows(&self) -> impl Iterator<Item = &[DumpRow]> {
        self.rows.chunk_by(|a, b| a.window_id == b.window_id)
    }
}

/// Writes the dump as delimiter-separated text. Floats use the shortest
/// round-trip encoding, so regeneration is bit-identical.
pub fn write_dump_csv(dump: &ForecastDump, path: &Path) -> Result<(), EvalError> {
    if let Some(parent) = path.parent() {
        std::fs::create_dir_all(parent)?;
    }
    let mut out = std::io::BufWriter::new(std::fs::File::create(path)?);
    writeln!(
        out,
        "# region={} setting={} family={} seed={}",
        dump.region, dump.setting_label, dump.family, dump.seed
    )?;
    writeln!(out, "window_id,step,target_ts,y_true,y_pred")?;
    for r in &dump.rows {
        writeln!(
            out,
            "{},{},{},{},{}",
            r.window_id, r.step, r.target_ts, r.y_true, r.y_pred
        )?;
    }
    Ok(())
}

pub fn read_dump_csv(path: &Path) -> Result<ForecastDump, EvalError> {
    let file = std::fs::File::open(path)?;
    let mut lines = BufReader::new(file).lines();
    let header = lines
        .next()
        .ok_or_else(|| EvalError::Format("empty dump file".into()))??;
    let mut region = None;
    let mut setting_label = String::new();
    let mut family = String::new();
    let mut seed = 0u64;
    for part in header.trim_start_matches('#').split_whitespace() {
        if let Some((k, v)) = part.split_once('=') {
            match k {
                "region" => region = Region::parse(v),
                "setting" => setting_label = v.to_string(),
                "family" => family = v.to_string(),
                "seed" => seed = v.parse().unwrap_or(0),
                _ => {}
            }
        }
    }
    let region = region.ok_or_else(|| EvalError::Format("missing region".into()))?;
    let mut rows = Vec::new();
    for line in lines {
        let line = line?;
        if line.starts_with("window_id") || line.is_empty() {
            continue;
        }
        let fields: Vec<&str> = line.split(',').collect();
        if fields.len() != 5 {
            return Err(EvalError::Format(format!("bad row: {line}")));
        }
        rows.push(DumpRow {
            window_id: fields[0]
                .parse()
                .map_err(|_| EvalError::Format(format!("bad window_id: {line}")))?,
            step: fields[1]
                .parse()
                .map_err(|_| EvalError::Format(format!("bad step: {line}")))?,
            target_ts: fields[2]
                .parse()
                .map_err(|_| EvalError::Format(format!("bad target_ts: {line}")))?,
            y_true: fields[3]
                .parse()
                .map_err(|_| EvalError::Format(format!("bad y_true: {line}")))?,
            y_pred: fields[4]
                .parse()
                .map_err(|_| EvalError::Format(format!("bad y_pred: {line}")))?,
        });
    }
    Ok(ForecastDump {
        region,
        setting_label,
        family,
        seed,
        rows,
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    fn sample() -> ForecastDump {
        ForecastDump {
            region: Region::SA,
            setting_label: "24H".into(),
            family: "DLINEAR".into(),
            seed: 3,
            rows: vec![
                DumpRow {
                    window_id: 0,
                    step: 1,
                    target_ts: 1800,
                    y_true: 101.25,
                    y_pred: 99.875,
                },
                DumpRow {
                    window_id: 0,
                    step: 2,
                    target_ts: 3600,
                    y_true: -13.0625,
                    y_pred: 0.1,
                },
                DumpRow {
                    window_id: 1,
                    step: 1,
                    target_ts: 3600,
                    y_true: 17_500.0,
                    y_pred: 16_000.333,
                },
            ],
        }
    }

    #[test]
    fn csv_round_trip_preserves_values() {
        let dump = sample();
        let path = std::env::temp_dir().join(format!(
            "nembench-dump-test-{}.csv",
            std::process::id()
        ));
        write_dump_csv(&dump, &path).unwrap();
        let back = read_dump_csv(&path).unwrap();
        assert_eq!(dump, back);
        std::fs::remove_file(path).ok();
    }

    #[test]
    fn windows_iterator_groups_rows() {
        let dump = sample();
        let groups: Vec<usize> = dump.windows().map(|w| w.len()).collect();
        assert_eq!(groups, vec![2, 1]);
        assert_eq!(dump.horizon(), 2);
    }
}

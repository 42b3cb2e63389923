//! Append-only run ledger: one JSON line per completed stage cell. A cell
//! with an `ok` record under the same config hash whose outputs still exist
//! is up to date and is skipped on rerun.

use std::fs::{self, OpenOptions};
use std::io::Write;
use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};

use crate::CliError;

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Stage {
    Fetch,
    Prepare,
    Tune,
    Train,
    Evaluate,
    Report,
}

impl std::fmt::Display for Stage {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        let s = match self {
            Stage::Fetch => "fetch",
            Stage::Prepare => "prepare",
            Stage::Tune => "tune",
            Stage::Train => "train",
            Stage::Evaluate => "evaluate",
            Stage::Report => "report",
        };
        f.write_str(s)
    }
}

#[derive(Clone, Debug, Serialize, Deserialize)]
pub struct LedgerRecord {
    pub config_hash: String,
    pub stage: Stage,
    /// Cell key, e.g. `QLD/24H/DLinear`.
    pub cell: String,
    pub status: String,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub error: Option<String>,
    pub outputs: Vec<PathBuf>,
    pub wall_ms: u64,
}

pub struct RunLedger {
    path: PathBuf,
    records: Vec<LedgerRecord>,
}

impl RunLedger {
    /// Opens (or starts) the ledger at `<out_dir>/ledger.jsonl`.
    pub fn open(out_dir: &Path) -> Result<RunLedger, CliError> {
        fs::create_dir_all(out_dir)?;
        let path = out_dir.join("ledger.jsonl");
        let mut records = Vec::new();
        if path.exists() {
            for line in fs::read_to_string(&path)?.lines() {
                if line.trim().is_empty() {
                    continue;
                }
                let rec: LedgerRecord = serde_json::from_str(line)
                    .map_err(|e| CliError::Ledger(format!("corrupt ledger line: {e}")))?;
                records.push(rec);
            }
        }
        Ok(RunLedger { path, records })
    }

    /// True when the cell already completed under this hash and its outputs
    /// are still present.
    pub fn is_done(&self, hash: &str, stage: Stage, cell: &str) -> bool {
        self.records.iter().rev().any(|r| {
            r.config_hash == hash
                && r.stage == stage
                && r.cell == cell
                && r.status == "ok"
                && r.outputs.iter().all(|p| p.exists())
        })
    }

    pub fn append(&mut self, record: LedgerRecord) -> Result<(), CliError> {
        let line = serde_json::to_string(&record)
            .map_err(|e| CliError::Ledger(e.to_string()))?;
        let mut file = OpenOptions::new()
            .create(true)
            .append(true)
            .open(&self.path)?;
        writeln!(file, "{line}")?;
        self.records.push(record);
        Ok(())
    }

    pub fn records(&self) -> &[LedgerRecord] {
        &self.records
    }

    pub fn failed_cells(&self, hash: &str) -> Vec<&LedgerRecord> {
        // A cell counts as failed only if no later ok record supersedes it.
        self.records
            .iter()
            .filter(|r| r.config_hash == hash && r.status != "ok")
            .filter(|r| {
                !self
                    .records
                    .iter()
                    .any(|later| {
                        later.config_hash == hash
                            && later.stage == r.stage
                            && later.cell == r.cell
                            && later.status == "ok"
                    })
            })
            .collect()
    }
}

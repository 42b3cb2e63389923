//! Experiment orchestration for the NEM price-forecasting benchmark:
//! declarative JSON configs, an append-only run ledger with stage skipping,
//! cell-level fault isolation, and report emission (metric tables,
//! extreme/negative-price tables, intraday profiles with figures).

pub mod config;
pub mod ledger;
pub mod report;
pub mod stages;
pub mod svg;

pub use config::{parse_setting, BaselineFeatures, DataConfig, DataSource, ExperimentConfig, SplitConfig, CACHE_ENV};
pub use ledger::{LedgerRecord, RunLedger, Stage};
pub use stages::{EvalRecord, Experiment, RunSummary};

use thiserror::Error;

#[derive(Debug, Error)]
pub enum CliError {
    #[error("config error: {0}")]
    Config(String),
    #[error("ledger error: {0}")]
    Ledger(String),
    #[error("stage error: {0}")]
    Stage(String),
    #[error(transparent)]
    Data(#[from] nembench_market_data::DataError),
    #[error(transparent)]
    Pipeline(#[from] nembench_pipeline::PipelineError),
    #[error(transparent)]
    Model(#[from] nembench_model_zoo::ModelError),
    #[error(transparent)]
    Train(#[from] nembench_training::TrainError),
    #[error(transparent)]
    Eval(#[from] nembench_evaluation::EvalError),
    #[error("io error: {0}")]
    Io(#[from] std::io::Error),
}

impl CliError {
    /// Process exit code: 2 for configuration errors, 1 otherwise.
    pub fn exit_code(&self) -> i32 {
        match self {
            CliError::Config(_) => 2,
            _ => 1,
        }
    }
}

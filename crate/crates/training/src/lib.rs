//! Model optimization following the benchmark protocol: Adam with
//! mean-squared-error loss on scaled prices, learning-rate reduction on a
//! validation plateau, early stopping with best-parameter restoration, grid
//! search over the per-family hyperparameter space, and five-seed
//! replication. Grid combinations and seed replicates run on a parallel
//! worker pool; results merge in enumeration order, so reruns are
//! bit-stable.

mod adam;
mod grid;
mod run;
mod schedule;
mod seeds;

pub use adam::Adam;
pub use grid::{
    enumerate_candidates, grid_search, Candidate, GridSpec, LeaderboardRow, SearchOutcome,
    GRID_TRAINING_SEED,
};
pub use run::{evaluate_mse, predict_all, train, EpochRecord, TrainedRun, TrainingConfig};
pub use schedule::{EarlyStopper, PlateauConfig, PlateauSchedule};
pub use seeds::run_seeds;

use thiserror::Error;

#[derive(Debug, Error)]
pub enum TrainError {
    #[error("training diverged: non-finite loss at epoch {0}")]
    Divergence(usize),
    #[error("empty dataset: {0}")]
    EmptyDataset(String),
    #[error("search budget is zero")]
    BudgetZero,
    #[error("model error: {0}")]
    Model(#[from] nembench_model_zoo::ModelError),
}

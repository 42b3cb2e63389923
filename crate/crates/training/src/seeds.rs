use rayon::prelude::*;

use nembench_model_zoo::Forecaster;
use nembench_pipeline::WindowSet;

use crate::grid::Candidate;
use crate::run::{train, TrainedRun, TrainingConfig};
use crate::TrainError;

/// Trains the tuned configuration once per seed, in parallel, returning the
/// runs in seed order together with their restored models. Reported metrics
/// downstream are means over these runs.
pub fn run_seeds(
    candidate: &Candidate,
    train_windows: &WindowSet,
    val_windows: &WindowSet,
    cfg: &TrainingConfig,
) -> Result<Vec<(TrainedRun, Forecaster)>, TrainError> {
    if cfg.seeds.is_empty() {
        return Err(TrainError::EmptyDataset("seed list".into()));
    }
    let run_cfg = TrainingConfig {
        learning_rate: candidate.learning_rate,
        ..cfg.clone()
    };
    cfg.seeds
        .par_iter()
        .map(|&seed| {
            let mut model = Forecaster::build(candidate.config, seed)?;
            let run = train(&mut model, train_windows, val_windows, &run_cfg, seed)?;
            Ok((run, model))
        })
        .collect()
}

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use nembench_model_zoo::{Forecaster, ModelConfig, ModelFamily};
use nembench_pipeline::WindowSet;

use crate::run::{train, TrainingConfig};
use crate::TrainError;

/// Fixed seed used for every grid combination, so searches are comparable
/// and affordable (one run per combination).
pub const GRID_TRAINING_SEED: u64 = 2023;

/// The per-family hyperparameter search space. Dimension/layer families
/// enumerate 50 combinations, the linear family 5, and the
/// convolutional-recurrent hybrid 375.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct GridSpec {
    pub learning_rates: Vec<f64>,
    pub dims: Vec<usize>,
    pub layers: Vec<usize>,
    pub cnn_kernels: Vec<usize>,
    pub cnn_filters: Vec<usize>,
}

impl Default for GridSpec {
    fn default() -> Self {
        GridSpec {
            learning_rates: vec![0.001, 0.005, 0.01, 0.05, 0.1],
            dims: vec![32, 64, 128, 256, 512],
            layers: vec![1, 2],
            cnn_kernels: vec![3, 5, 7],
            cnn_filters: vec![32, 64, 128, 256, 512],
        }
    }
}

/// One grid point: an architecture configuration plus its learning rate.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct Candidate {
    pub config: ModelConfig,
    pub learning_rate: f64,
}

/// Deterministic enumeration order: learning rate ascending, then model
/// dimension, then layers, then (CNN-LSTM only) kernel size, then filters —
/// matching the order the fields are listed in the grid. A budget cap
/// truncates this sequence.
pub fn enumerate_candidates(
    family: ModelFamily,
    grid: &GridSpec,
    base: &ModelConfig,
) -> Vec<Candidate> {
    let mut out = Vec::new();
    match family {
        ModelFamily::DLinear => {
            for &lr in &grid.learning_rates {
                let config = ModelConfig::new(family, 1, 1)
                    .with_setting(base.lookback, base.horizon)
                    .with_features(base.n_features);
                out.push(Candidate {
                    config,
                    learning_rate: lr,
                });
            }
        }
        ModelFamily::CnnLstm => {
            for &lr in &grid.learning_rates {
                for &dim in &grid.dims {
                    for &kernel in &grid.cnn_kernels {
                        for &filters in &grid.cnn_filters {
                            let config = ModelConfig::new(family, dim, 1)
                                .with_setting(base.lookback, base.horizon)
                                .with_features(base.n_features)
                                .with_cnn(filters, kernel);
                            out.push(Candidate {
                                config,
                                learning_rate: lr,
                            });
                        }
                    }
                }
            }
        }
        _ => {
            for &lr in &grid.learning_rates {
                for &dim in &grid.dims {
                    for &layers in &grid.layers {
                        let config = ModelConfig::new(family, dim, layers)
                            .with_setting(base.lookback, base.horizon)
                            .with_features(base.n_features);
                        out.push(Candidate {
                            config,
                            learning_rate: lr,
                        });
                    }
                }
            }
        }
    }
    out
}

#[derive(Clone, Debug, Serialize, Deserialize)]
pub struct LeaderboardRow {
    pub candidate: Candidate,
    /// Best validation loss of the run; infinite when the run diverged.
    pub val_loss: f64,
    pub stopped_epoch: usize,
}

#[derive(Clone, Debug, Serialize, Deserialize)]
pub struct SearchOutcome {
    pub best: Candidate,
    pub leaderboard: Vec<LeaderboardRow>,
}

/// Tie-break key: lower learning rate wins, then smaller dimension, fewer
/// layers, smaller kernel, fewer filters.
fn tie_break_key(c: &Candidate) -> (u64, usize, usize, usize, usize) {
    (
        c.learning_rate.to_bits(),
        c.config.model_dim,
        c.config.n_layers,
        c.config.cnn_kernel.unwrap_or(0),
        c.config.cnn_filters.unwrap_or(0),
    )
}

/// Evaluates each combination by best validation loss under a single fixed
/// seed and returns the argmin. Divergent combinations score as infinite
/// loss rather than aborting the search. With a budget, the documented
/// enumeration order is truncated. Combinations run on the rayon pool;
/// the leaderboard keeps enumeration order, so the outcome is deterministic
/// and (without a budget) independent of evaluation order.
pub fn grid_search(
    family: ModelFamily,
    grid: &GridSpec,
    base: &ModelConfig,
    train_windows: &WindowSet,
    val_windows: &WindowSet,
    cfg: &TrainingConfig,
    budget: Option<usize>,
) -> Result<SearchOutcome, TrainError> {
    if budget == Some(0) {
        return Err(TrainError::BudgetZero);
    }
    let mut candidates = enumerate_candidates(family, grid, base);
    if let Some(cap) = budget {
        candidates.truncate(cap);
    }
    let leaderboard: Vec<LeaderboardRow> = candidates
        .par_iter()
        .map(|candidate| {
            let run_cfg = TrainingConfig {
                learning_rate: candidate.learning_rate,
                ..cfg.clone()
            };
            let row = match Forecaster::build(candidate.config, GRID_TRAINING_SEED) {
                Ok(mut model) => {
                    match train(&mut model, train_windows, val_windows, &run_cfg, GRID_TRAINING_SEED)
                    {
                        Ok(run) => LeaderboardRow {
                            candidate: *candidate,
                            val_loss: run.best_val_loss,
                            stopped_epoch: run.stopped_epoch,
                        },
                        Err(TrainError::Divergence(_)) => LeaderboardRow {
                            candidate: *candidate,
                            val_loss: f64::INFINITY,
                            stopped_epoch: 0,
                        },
                        Err(_) => LeaderboardRow {
                            candidate: *candidate,
                            val_loss: f64::INFINITY,
                            stopped_epoch: 0,
                        },
                    }
                }
                Err(_) => LeaderboardRow {
                    candidate: *candidate,
                    val_loss: f64::INFINITY,
                    stopped_epoch: 0,
                },
            };
            row
        })
        .collect();

    let best = leaderboard
        .iter()
        .min_by(|a, b| {
            a.val_loss
                .partial_cmp(&b.val_loss)
                .unwrap()
                .then_with(|| tie_break_key(&a.candidate).cmp(&tie_break_key(&b.candidate)))
        })
        .expect("non-empty candidate list")
        .candidate;
    Ok(SearchOutcome { best, leaderboard })
}

use ndarray::Array2;
use rand::seq::SliceRandom;
use rand::SeedableRng;
use rand_chacha::ChaCha20Rng;
use serde::{Deserialize, Serialize};

use nembench_model_zoo::Forecaster;
use nembench_pipeline::WindowSet;
use nembench_tensor::{ParamBinding, Tape};

use crate::adam::Adam;
use crate::schedule::{EarlyStopper, PlateauConfig, PlateauSchedule};
use crate::TrainError;

/// Protocol defaults: batch size 64, at most 30 epochs, early-stopping
/// patience 10 epochs on validation loss, five seeds. Everything is
/// overridable for desk-scale runs.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct TrainingConfig {
    pub learning_rate: f64,
    pub batch_size: usize,
    pub max_epochs: usize,
    pub early_stop_patience: usize,
    pub plateau: PlateauConfig,
    pub seeds: Vec<u64>,
}

impl Default for TrainingConfig {
    fn default() -> Self {
        TrainingConfig {
            learning_rate: 0.001,
            batch_size: 64,
            max_epochs: 30,
            early_stop_patience: 10,
            plateau: PlateauConfig::default(),
            seeds: vec![1, 2, 3, 4, 5],
        }
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct EpochRecord {
    pub train_loss: f64,
    pub val_loss: f64,
    /// Learning rate in effect during the epoch.
    pub lr: f64,
}

/// Outcome of one training run. The best-validation parameters are restored
/// into the model that was trained; this record carries the provenance.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct TrainedRun {
    pub config: nembench_model_zoo::ModelConfig,
    pub learning_rate: f64,
    pub seed: u64,
    pub history: Vec<EpochRecord>,
    pub stopped_epoch: usize,
    pub best_epoch: usize,
    pub best_val_loss: f64,
    pub wall_time_ms: u64,
}

/// Mean squared error of the model over a window set, batched, in scaled
/// units. Deterministic: fixed iteration order, sample-weighted mean.
pub fn evaluate_mse(
    model: &Forecaster,
    windows: &WindowSet,
    batch_size: usize,
) -> Result<f64, TrainError> {
    if windows.is_empty() {
        return Err(TrainError::EmptyDataset("validation windows".into()));
    }
    let mut sq_sum = 0.0;
    let mut count = 0usize;
    let all: Vec<usize> = (0..windows.len()).collect();
    for chunk in all.chunks(batch_size.max(1)) {
        let inputs = windows.input_batch(chunk);
        let targets = windows.target_batch(chunk);
        let preds = model.forecast(&inputs)?;
        for (p, t) in preds.iter().zip(targets.iter()) {
            let d = p - t;
            sq_sum += d * d;
            count += 1;
        }
    }
    Ok(sq_sum / count as f64)
}

/// Model predictions for every window, batched: `[n_windows, horizon]`.
pub fn predict_all(
    model: &Forecaster,
    windows: &WindowSet,
    batch_size: usize,
) -> Result<Array2<f64>, TrainError> {
    let mut out = Array2::<f64>::zeros((windows.len(), model.config.horizon));
    let all: Vec<usize> = (0..windows.len()).collect();
    for chunk in all.chunks(batch_size.max(1)) {
        let preds = model.forecast(&windows.input_batch(chunk))?;
        for (bi, &w) in chunk.iter().enumerate() {
            for j in 0..model.config.horizon {
                out[[w, j]] = preds[[bi, j]];
            }
        }
    }
    Ok(out)
}

/// Trains the model in place: Adam on the MSE of scaled prices, plateau LR
/// reduction, early stopping on validation loss, and best-parameter
/// restoration. Training order reshuffles every epoch from the run seed;
/// validation order is fixed. Deterministic for fixed inputs.
pub fn train(
    model: &mut Forecaster,
    train_windows: &WindowSet,
    val_windows: &WindowSet,
    cfg: &TrainingConfig,
    seed: u64,
) -> Result<TrainedRun, TrainError> {
    if train_windows.is_empty() {
        return Err(TrainError::EmptyDataset("training windows".into()));
    }
    if val_windows.is_empty() {
        return Err(TrainError::EmptyDataset("validation windows".into()));
    }
    let start = std::time::Instant::now();
    let mut rng = ChaCha20Rng::seed_from_u64(seed);
    let mut adam = Adam::new(model.params.len());
    let mut schedule = PlateauSchedule::new(cfg.learning_rate, cfg.plateau);
    let mut stopper = EarlyStopper::new(cfg.early_stop_patience.max(1));
    let mut best_params = model.params.data().to_vec();
    let mut history = Vec::new();

    let mut order: Vec<usize> = (0..train_windows.len()).collect();
    for epoch in 0..cfg.max_epochs {
        order.shuffle(&mut rng);
        let lr = schedule.lr();
        let mut loss_sum = 0.0;
        let mut sample_count = 0usize;
        for chunk in order.chunks(cfg.batch_size.max(1)) {
            let inputs = train_windows.input_batch(chunk);
            let targets = train_windows.target_batch(chunk);
            let tape = Tape::new();
            let mut binding = ParamBinding::new();
            let out = model.forward_var(&tape, &mut binding, &inputs)?;
            let target_leaf = tape.leaf(targets.into_dyn());
            let loss = out.sub(target_leaf).square().mean_all();
            let loss_value = loss.scalar_value();
            if !loss_value.is_finite() {
                return Err(TrainError::Divergence(epoch));
            }
            loss_sum += loss_value * chunk.len() as f64;
            sample_count += chunk.len();
            let grads = tape.backward(loss);
            let flat = binding.flat_grads(&model.params, &grads);
            adam.step(model.params.data_mut(), &flat, lr);
        }
        if !model.params.all_finite() {
            return Err(TrainError::Divergence(epoch));
        }
        let train_loss = loss_sum / sample_count as f64;
        let val_loss = evaluate_mse(model, val_windows, cfg.batch_size)?;
        if !val_loss.is_finite() {
            return Err(TrainError::Divergence(epoch));
        }
        history.push(EpochRecord {
            train_loss,
            val_loss,
            lr,
        });
        let (improved, stop_now) = stopper.observe(epoch, val_loss);
        if improved {
            best_params.copy_from_slice(model.params.data());
        }
        schedule.observe(val_loss);
        if stop_now {
            break;
        }
    }
    model.params.restore(&best_params);
    Ok(TrainedRun {
        config: model.config,
        learning_rate: cfg.learning_rate,
        seed,
        stopped_epoch: history.len(),
        best_epoch: stopper.best_epoch(),
        best_val_loss: stopper.best(),
        history,
        wall_time_ms: start.elapsed().as_millis() as u64,
    })
}


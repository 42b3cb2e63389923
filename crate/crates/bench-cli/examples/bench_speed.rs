//! Desk benchmark used to size the scaled-down study; mirrors the
//! acceptance configuration.

use nembench_evaluation::{rmae, seasonal_naive, DumpRow, ForecastDump};
use nembench_market_data::{generate_synthetic, Region, SyntheticSpec};
use nembench_model_zoo::{Forecaster, ModelConfig, ModelFamily};
use nembench_pipeline::{FeatureSelection, ForecastSetting, PreparedDataset};
use nembench_training::{predict_all, train, TrainingConfig};

fn main() {
    let spec = SyntheticSpec {
        daily_amplitude: 30.0,
        weekly_amplitude: 3.0,
        noise_std: 10.0,
        ..SyntheticSpec::constant(120, 100.0)
    };
    let raw = generate_synthetic(&spec, 51).unwrap();
    let ds = PreparedDataset::prepare(&raw, raw.start_ts + 100 * 86400, 0.7,
        nembench_pipeline::FitPartition::Train, ForecastSetting::H24).unwrap();
    let test_series = ds.test_series();
    let bench = seasonal_naive(&test_series.prices, 336).unwrap();
    println!("benchmark mae = {:.4}", bench.benchmark_mae);

    for (dim, fam, lr, epochs) in [
        (1usize, ModelFamily::DLinear, 0.01, 8usize),
        (32, ModelFamily::Lstm, 0.01, 10),
        (32, ModelFamily::TimeXer, 0.005, 6),
    ] {
        let feats = if fam.uses_time_features() { FeatureSelection::All } else { FeatureSelection::PriceOnly };
        let t0 = std::time::Instant::now();
        let train_ws = ds.train_windows(feats).unwrap();
        let val_ws = ds.val_windows(feats).unwrap();
        let test_ws = ds.test_windows(feats).unwrap();
        let cfg = ModelConfig::new(fam, dim, 1).with_setting(336, 48).with_features(feats.n_features());
        let mut model = Forecaster::build(cfg, 1).unwrap();
        let tc = TrainingConfig { learning_rate: lr, max_epochs: epochs, ..TrainingConfig::default() };
        let run = train(&mut model, &train_ws, &val_ws, &tc, 1).unwrap();
        let preds = predict_all(&model, &test_ws, 256).unwrap();
        let mut rows = Vec::new();
        for w in 0..test_ws.len() {
            let scaled: Vec<f64> = (0..48).map(|j| preds[[w, j]]).collect();
            let inv = nembench_pipeline::invert_prices(&scaled, &ds.scaler);
            let first = test_ws.target_row(w);
            for j in 0..48 {
                rows.push(DumpRow { window_id: w as u32, step: (j + 1) as u16, target_ts: 0,
                    y_true: ds.raw_price(first + j), y_pred: inv[j] });
            }
        }
        let dump = ForecastDump { region: Region::QLD, setting_label: "24H".into(),
            family: fam.name().into(), seed: 1, rows };
        let r = rmae(&dump, &bench).unwrap();
        println!("{fam}: rMAE {:.4} after {epochs} epochs in {:.0}s (best val {:.6})",
            r, t0.elapsed().as_secs_f64(), run.best_val_loss);
    }
}

//! Stage orchestration for one experiment: fetch, prepare, tune, train,
//! evaluate, report. Every (region, setting, family) cell is fault-isolated;
//! completed cells are skipped on rerun via the ledger.

use std::path::PathBuf;
use std::time::Instant;

use serde::{Deserialize, Serialize};

use nembench_evaluation::{
    diurnal_diagnostics, intraday_profile, mda, metrics_on_rows, point_metrics, read_dump_csv,
    rmae, seasonal_naive, subset_masks, write_dump_csv, DumpRow, EvalError, ForecastDump,
    MetricReport, SeedMetrics, TailScope, WEEKLY_SEASONAL_LAG,
};
use nembench_market_data::{generate_synthetic, AemoClient, RawPriceSeries, Region};
use nembench_model_zoo::{save_checkpoint, Forecaster, ModelFamily};
use nembench_pipeline::{FeatureSelection, ForecastSetting, PreparedDataset, WindowSet};
use nembench_training::{
    grid_search, predict_all, run_seeds, Candidate, SearchOutcome, TrainedRun,
};

use crate::config::{BaselineFeatures, DataSource, ExperimentConfig};
use crate::ledger::{LedgerRecord, RunLedger, Stage};
use crate::report::emit_report;
use crate::CliError;

/// Outcome of an experiment run: the stamped hash plus cell accounting.
#[derive(Clone, Debug, Serialize, Deserialize)]
pub struct RunSummary {
    pub config_hash: String,
    pub cells_run: usize,
    pub cells_skipped: usize,
    pub cells_failed: usize,
}

impl RunSummary {
    pub fn exit_code(&self) -> i32 {
        if self.cells_failed > 0 {
            1
        } else {
            0
        }
    }
}

/// Per-seed evaluation of one cell, persisted as JSON.
#[derive(Clone, Debug, Serialize, Deserialize)]
pub struct PointSummary {
    pub mae: f64,
    pub rmse: f64,
    pub smape: f64,
}

#[derive(Clone, Debug, Serialize, Deserialize)]
pub struct IntradayCurves {
    pub count: Vec<usize>,
    pub mae: Vec<f64>,
    pub rmse: Vec<f64>,
    pub smape: Vec<f64>,
    pub mda: Vec<Option<f64>>,
}

#[derive(Clone, Debug, Serialize, Deserialize)]
pub struct DiagnosticCurves {
    pub price_change_std: Vec<f64>,
    pub mean_price: Vec<f64>,
    pub pct_negative: Vec<f64>,
    pub pct_directional_shift: Vec<f64>,
}

#[derive(Clone, Debug, Serialize, Deserialize)]
pub struct EvalRecord {
    pub config_hash: String,
    pub region: Region,
    pub setting: String,
    pub family: String,
    pub report: MetricReport,
    pub benchmark_mae: Option<f64>,
    pub extreme: Option<PointSummary>,
    pub negative: Option<PointSummary>,
    pub intraday: IntradayCurves,
    pub diagnostics: DiagnosticCurves,
}

pub struct Experiment {
    pub cfg: ExperimentConfig,
    pub hash: String,
}

impl Experiment {
    pub fn new(cfg: ExperimentConfig) -> Experiment {
        let hash = cfg.hash();
        Experiment { cfg, hash }
    }

    // ---- path layout ----

    fn prepared_dir(&self, region: Region, setting: &str) -> PathBuf {
        self.cfg.out_dir.join("prepared").join(format!("{region}_{setting}"))
    }

    fn tune_path(&self, region: Region, setting: &str, family: ModelFamily) -> PathBuf {
        self.cfg
            .out_dir
            .join("tune")
            .join(format!("{region}_{setting}_{family}.json"))
    }

    fn run_dir(&self, region: Region, setting: &str, family: ModelFamily, seed: u64) -> PathBuf {
        self.cfg
            .out_dir
            .join("runs")
            .join(format!("{region}_{setting}_{family}"))
            .join(format!("seed{seed}"))
    }

    fn dump_path(&self, region: Region, setting: &str, family: ModelFamily, seed: u64) -> PathBuf {
        self.cfg
            .out_dir
            .join("dumps")
            .join(format!("{region}_{setting}_{family}_seed{seed}.csv"))
    }

    fn eval_path(&self, region: Region, setting: &str, family: ModelFamily) -> PathBuf {
        self.cfg
            .out_dir
            .join("eval")
            .join(format!("{region}_{setting}_{family}.json"))
    }

    pub fn reports_dir(&self) -> PathBuf {
        self.cfg.out_dir.join("reports")
    }

    fn features_for(&self, family: ModelFamily) -> FeatureSelection {
        if family.uses_time_features() || self.cfg.baseline_features == BaselineFeatures::Full {
            FeatureSelection::All
        } else {
            FeatureSelection::PriceOnly
        }
    }

    /// Raw 5-minute series for a region: deterministic synthesis, or the
    /// archive client backed by the cache directory.
    fn load_raw(&self, region: Region) -> Result<RawPriceSeries, CliError> {
        match self.cfg.data.source {
            DataSource::Synthetic => {
                let mut spec = self.cfg.data.synthetic.clone().expect("validated");
                spec.region = region;
                let offset = Region::ALL.iter().position(|r| *r == region).unwrap() as u64;
                Ok(generate_synthetic(&spec, self.cfg.data.seed + offset)?)
            }
            DataSource::Aemo => {
                let client = AemoClient::new(&self.cfg.cache_dir());
                Ok(client.fetch_rrp(
                    region,
                    self.cfg.data.start.expect("validated"),
                    self.cfg.data.end.expect("validated"),
                )?)
            }
        }
    }

    // ---- stage runner plumbing ----

    fn run_cell(
        &self,
        ledger: &mut RunLedger,
        summary: &mut RunSummary,
        stage: Stage,
        cell: &str,
        outputs: Vec<PathBuf>,
        work: impl FnOnce() -> Result<(), CliError>,
    ) -> Result<(), CliError> {
        if ledger.is_done(&self.hash, stage, cell) {
            summary.cells_skipped += 1;
            return Ok(());
        }
        let started = Instant::now();
        match work() {
            Ok(()) => {
                ledger.append(LedgerRecord {
                    config_hash: self.hash.clone(),
                    stage,
                    cell: cell.to_string(),
                    status: "ok".into(),
                    error: None,
                    outputs,
                    wall_ms: started.elapsed().as_millis() as u64,
                })?;
                summary.cells_run += 1;
                Ok(())
            }
            Err(err) => {
                ledger.append(LedgerRecord {
                    config_hash: self.hash.clone(),
                    stage,
                    cell: cell.to_string(),
                    status: "failed".into(),
                    error: Some(err.to_string()),
                    outputs: vec![],
                    wall_ms: started.elapsed().as_millis() as u64,
                })?;
                summary.cells_failed += 1;
                Ok(())
            }
        }
    }

    // ---- stages ----

    pub fn stage_fetch(
        &self,
        ledger: &mut RunLedger,
        summary: &mut RunSummary,
    ) -> Result<(), CliError> {
        for &region in &self.cfg.regions {
            let cell = region.to_string();
            self.run_cell(ledger, summary, Stage::Fetch, &cell, vec![], || {
                self.load_raw(region).map(|_| ())
            })?;
        }
        Ok(())
    }

    pub fn stage_prepare(
        &self,
        ledger: &mut RunLedger,
        summary: &mut RunSummary,
    ) -> Result<(), CliError> {
        for &region in &self.cfg.regions {
            for setting in self.cfg.parsed_settings() {
                let label = setting.label();
                let dir = self.prepared_dir(region, &label);
                let cell = format!("{region}/{label}");
                let outputs = vec![dir.join("manifest.json"), dir.join("data.bin.gz")];
                self.run_cell(ledger, summary, Stage::Prepare, &cell, outputs, || {
                    let raw = self.load_raw(region)?;
                    let ds = PreparedDataset::prepare(
                        &raw,
                        self.cfg.test_start_ts(),
                        self.cfg.split.train_fraction,
                        self.cfg.split.scaler_fit,
                        setting,
                    )?;
                    ds.save(&dir)?;
                    Ok(())
                })?;
            }
        }
        Ok(())
    }

    fn load_prepared(
        &self,
        region: Region,
        setting: &str,
    ) -> Result<PreparedDataset, CliError> {
        let dir = self.prepared_dir(region, setting);
        PreparedDataset::load(&dir)
            .map_err(|e| CliError::Stage(format!("missing prepared data {}: {e}", dir.display())))
    }

    fn cell_windows(
        &self,
        ds: &PreparedDataset,
        family: ModelFamily,
    ) -> Result<(WindowSet, WindowSet, WindowSet), CliError> {
        let features = self.features_for(family);
        Ok((
            ds.train_windows(features)?,
            ds.val_windows(features)?,
            ds.test_windows(features)?,
        ))
    }

    pub fn stage_tune(
        &self,
        ledger: &mut RunLedger,
        summary: &mut RunSummary,
    ) -> Result<(), CliError> {
        for &region in &self.cfg.regions {
            for setting in self.cfg.parsed_settings() {
                let label = setting.label();
                for family in self.cfg.parsed_families() {
                    let cell = format!("{region}/{label}/{family}");
                    let path = self.tune_path(region, &label, family);
                    let outputs = vec![path.clone()];
                    self.run_cell(ledger, summary, Stage::Tune, &cell, outputs, || {
                        let ds = self.load_prepared(region, &label)?;
                        let (train_ws, val_ws, _) = self.cell_windows(&ds, family)?;
                        let base = nembench_model_zoo::ModelConfig::new(family, 32, 1)
                            .with_setting(setting.lookback, setting.horizon)
                            .with_features(train_ws.n_features());
                        let base = if family == ModelFamily::CnnLstm {
                            base.with_cnn(32, 3)
                        } else {
                            base
                        };
                        let outcome = grid_search(
                            family,
                            &self.cfg.grid,
                            &base,
                            &train_ws,
                            &val_ws,
                            &self.cfg.training,
                            self.cfg.budget,
                        )?;
                        write_json(&path, &outcome)?;
                        Ok(())
                    })?;
                }
            }
        }
        Ok(())
    }

    fn load_best(&self, region: Region, setting: &str, family: ModelFamily) -> Result<Candidate, CliError> {
        let path = self.tune_path(region, setting, family);
        let json = std::fs::read_to_string(&path)
            .map_err(|e| CliError::Stage(format!("missing tune outcome {}: {e}", path.display())))?;
        let outcome: SearchOutcome =
            serde_json::from_str(&json).map_err(|e| CliError::Stage(e.to_string()))?;
        Ok(outcome.best)
    }

    pub fn stage_train(
        &self,
        ledger: &mut RunLedger,
        summary: &mut RunSummary,
    ) -> Result<(), CliError> {
        for &region in &self.cfg.regions {
            for setting in self.cfg.parsed_settings() {
                let label = setting.label();
                for family in self.cfg.parsed_families() {
                    let cell = format!("{region}/{label}/{family}");
                    let mut outputs = Vec::new();
                    for &seed in &self.cfg.training.seeds {
                        outputs.push(self.dump_path(region, &label, family, seed));
                        outputs.push(self.run_dir(region, &label, family, seed).join("history.json"));
                        outputs.push(self.run_dir(region, &label, family, seed).join("params.bin"));
                    }
                    self.run_cell(ledger, summary, Stage::Train, &cell, outputs, || {
                        self.train_cell(region, setting, family)
                    })?;
                }
            }
        }
        Ok(())
    }

    fn train_cell(
        &self,
        region: Region,
        setting: ForecastSetting,
        family: ModelFamily,
    ) -> Result<(), CliError> {
        let label = setting.label();
        let ds = self.load_prepared(region, &label)?;
        let (train_ws, val_ws, test_ws) = self.cell_windows(&ds, family)?;
        let best = self.load_best(region, &label, family)?;
        let runs = run_seeds(&best, &train_ws, &val_ws, &self.cfg.training)?;
        for (run, model) in &runs {
            let dir = self.run_dir(region, &label, family, run.seed);
            std::fs::create_dir_all(&dir)?;
            write_json(&dir.join("history.json"), run)?;
            save_checkpoint(model, &dir)?;
            let dump = self.build_dump(&ds, &test_ws, model, run, region, &label, family)?;
            write_dump_csv(&dump, &self.dump_path(region, &label, family, run.seed))?;
        }
        Ok(())
    }

    /// Denormalized forecast dump over the test windows.
    fn build_dump(
        &self,
        ds: &PreparedDataset,
        test_ws: &WindowSet,
        model: &Forecaster,
        run: &TrainedRun,
        region: Region,
        label: &str,
        family: ModelFamily,
    ) -> Result<ForecastDump, CliError> {
        let preds = predict_all(model, test_ws, 256)?;
        let horizon = model.config.horizon;
        let mut rows = Vec::with_capacity(test_ws.len() * horizon);
        for w in 0..test_ws.len() {
            let ts = test_ws.target_timestamps(w);
            let scaled: Vec<f64> = (0..horizon).map(|j| preds[[w, j]]).collect();
            let inverted = nembench_pipeline::invert_prices(&scaled, &ds.scaler);
            let first_row = test_ws.target_row(w);
            for j in 0..horizon {
                rows.push(DumpRow {
                    window_id: w as u32,
                    step: (j + 1) as u16,
                    target_ts: ts[j],
                    y_true: ds.raw_price(first_row + j),
                    y_pred: inverted[j],
                });
            }
        }
        Ok(ForecastDump {
            region,
            setting_label: label.to_string(),
            family: family.name().to_string(),
            seed: run.seed,
            rows,
        })
    }

    pub fn stage_evaluate(
        &self,
        ledger: &mut RunLedger,
        summary: &mut RunSummary,
    ) -> Result<(), CliError> {
        for &region in &self.cfg.regions {
            for setting in self.cfg.parsed_settings() {
                let label = setting.label();
                for family in self.cfg.parsed_families() {
                    let cell = format!("{region}/{label}/{family}");
                    let path = self.eval_path(region, &label, family);
                    let outputs = vec![path.clone()];
                    self.run_cell(ledger, summary, Stage::Evaluate, &cell, outputs, || {
                        let record = self.evaluate_cell(region, &label, family)?;
                        write_json(&path, &record)?;
                        Ok(())
                    })?;
                }
            }
        }
        Ok(())
    }

    /// Pooled tail-threshold source when the scope is global: the
    /// concatenated test series of every configured region.
    fn threshold_source(&self, label: &str, own: &[f64]) -> Result<Vec<f64>, CliError> {
        match self.cfg.tail_scope {
            TailScope::PerRegion => Ok(own.to_vec()),
            TailScope::Global => {
                let mut pooled = Vec::new();
                for &r in &self.cfg.regions {
                    let ds = self.load_prepared(r, label)?;
                    pooled.extend(ds.test_series().prices);
                }
                Ok(pooled)
            }
        }
    }

    fn evaluate_cell(
        &self,
        region: Region,
        label: &str,
        family: ModelFamily,
    ) -> Result<EvalRecord, CliError> {
        let ds = self.load_prepared(region, label)?;
        let test_series = ds.test_series();
        let bench = match seasonal_naive(&test_series.prices, WEEKLY_SEASONAL_LAG) {
            Ok(b) => Some(b),
            Err(EvalError::SeriesTooShort(_)) | Err(EvalError::ZeroBenchmark) => None,
            Err(e) => return Err(e.into()),
        };
        let thresholds = self.threshold_source(label, &test_series.prices)?;

        let mut per_seed = Vec::new();
        let mut extreme_seeds: Vec<Option<PointSummary>> = Vec::new();
        let mut negative_seeds: Vec<Option<PointSummary>> = Vec::new();
        let mut intraday_acc: Option<IntradayCurves> = None;
        for &seed in &self.cfg.training.seeds {
            let dump = read_dump_csv(&self.dump_path(region, label, family, seed))?;
            let pm = point_metrics(&dump)?;
            let seed_rmae = match &bench {
                Some(b) => rmae(&dump, b).ok(),
                None => None,
            };
            per_seed.push(SeedMetrics {
                seed,
                mae: pm.mae,
                rmse: pm.rmse,
                smape: pm.smape,
                rmae: seed_rmae,
                mda: mda(&dump)?,
            });

            let masks = subset_masks(&dump, &thresholds);
            extreme_seeds.push(match metrics_on_rows(&dump, &masks.extreme()) {
                Ok(m) => Some(PointSummary {
                    mae: m.mae,
                    rmse: m.rmse,
                    smape: m.smape,
                }),
                Err(EvalError::EmptySubset) => None,
                Err(e) => return Err(e.into()),
            });
            negative_seeds.push(match metrics_on_rows(&dump, &masks.negative) {
                Ok(m) => Some(PointSummary {
                    mae: m.mae,
                    rmse: m.rmse,
                    smape: m.smape,
                }),
                Err(EvalError::EmptySubset) => None,
                Err(e) => return Err(e.into()),
            });

            let profile = intraday_profile(&dump)?;
            intraday_acc = Some(match intraday_acc.take() {
                None => IntradayCurves {
                    count: profile.count.to_vec(),
                    mae: profile.mae.to_vec(),
                    rmse: profile.rmse.to_vec(),
                    smape: profile.smape.to_vec(),
                    mda: profile.mda.to_vec(),
                },
                Some(mut acc) => {
                    for k in 0..48 {
                        acc.mae[k] += profile.mae[k];
                        acc.rmse[k] += profile.rmse[k];
                        acc.smape[k] += profile.smape[k];
                        acc.mda[k] = match (acc.mda[k], profile.mda[k]) {
                            (Some(a), Some(b)) => Some(a + b),
                            _ => None,
                        };
                    }
                    acc
                }
            });
        }
        let n_seeds = self.cfg.training.seeds.len() as f64;
        let mut intraday = intraday_acc.expect("at least one seed");
        for k in 0..48 {
            intraday.mae[k] /= n_seeds;
            intraday.rmse[k] /= n_seeds;
            intraday.smape[k] /= n_seeds;
            intraday.mda[k] = intraday.mda[k].map(|v| v / n_seeds);
        }

        let diag = diurnal_diagnostics(&test_series)?;
        Ok(EvalRecord {
            config_hash: self.hash.clone(),
            region,
            setting: label.to_string(),
            family: family.name().to_string(),
            report: MetricReport::aggregate(per_seed),
            benchmark_mae: bench.map(|b| b.benchmark_mae),
            extreme: mean_subset(&extreme_seeds),
            negative: mean_subset(&negative_seeds),
            intraday,
            diagnostics: DiagnosticCurves {
                price_change_std: diag.price_change_std.to_vec(),
                mean_price: diag.mean_price.to_vec(),
                pct_negative: diag.pct_negative.to_vec(),
                pct_directional_shift: diag.pct_directional_shift.to_vec(),
            },
        })
    }

    pub fn stage_report(
        &self,
        ledger: &mut RunLedger,
        summary: &mut RunSummary,
    ) -> Result<(), CliError> {
        let dir = self.reports_dir();
        let outputs = vec![dir.join("summary.json")];
        self.run_cell(ledger, summary, Stage::Report, "all", outputs, || {
            let records = self.load_eval_records()?;
            if records.is_empty() {
                return Err(CliError::Stage(
                    "nothing to report: no completed evaluations".into(),
                ));
            }
            emit_report(&self.cfg, &self.hash, &records, &dir)
        })?;
        Ok(())
    }

    pub fn load_eval_records(&self) -> Result<Vec<EvalRecord>, CliError> {
        let mut records = Vec::new();
        for &region in &self.cfg.regions {
            for setting in self.cfg.parsed_settings() {
                let label = setting.label();
                for family in self.cfg.parsed_families() {
                    let path = self.eval_path(region, &label, family);
                    if !path.exists() {
                        continue;
                    }
                    let json = std::fs::read_to_string(&path)?;
                    let record: EvalRecord = serde_json::from_str(&json)
                        .map_err(|e| CliError::Stage(format!("{}: {e}", path.display())))?;
                    records.push(record);
                }
            }
        }
        Ok(records)
    }

    /// Full pipeline: fetch, prepare, tune, train, evaluate, report. One
    /// failing cell never aborts the others; failures land in the ledger and
    /// the summary.
    pub fn run(&self) -> Result<RunSummary, CliError> {
        std::fs::create_dir_all(&self.cfg.out_dir)?;
        write_json(&self.cfg.out_dir.join("config.resolved.json"), &self.cfg)?;
        let mut ledger = RunLedger::open(&self.cfg.out_dir)?;
        let mut summary = RunSummary {
            config_hash: self.hash.clone(),
            cells_run: 0,
            cells_skipped: 0,
            cells_failed: 0,
        };
        self.stage_fetch(&mut ledger, &mut summary)?;
        self.stage_prepare(&mut ledger, &mut summary)?;
        self.stage_tune(&mut ledger, &mut summary)?;
        self.stage_train(&mut ledger, &mut summary)?;
        self.stage_evaluate(&mut ledger, &mut summary)?;
        self.stage_report(&mut ledger, &mut summary)?;
        Ok(summary)
    }
}

fn mean_subset(seeds: &[Option<PointSummary>]) -> Option<PointSummary> {
    let present: Vec<&PointSummary> = seeds.iter().flatten().collect();
    if present.is_empty() {
        return None;
    }
    let n = present.len() as f64;
    Some(PointSummary {
        mae: present.iter().map(|m| m.mae).sum::<f64>() / n,
        rmse: present.iter().map(|m| m.rmse).sum::<f64>() / n,
        smape: present.iter().map(|m| m.smape).sum::<f64>() / n,
    })
}

pub(crate) fn write_json<T: Serialize>(path: &std::path::Path, value: &T) -> Result<(), CliError> {
    if let Some(parent) = path.parent() {
        std::fs::create_dir_all(parent)?;
    }
    let json = serde_json::to_string_pretty(value).map_err(|e| CliError::Stage(e.to_string()))?;
    std::fs::write(path, json)?;
    Ok(())
}

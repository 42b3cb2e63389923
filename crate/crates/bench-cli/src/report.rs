//! Report emission: the region x model metric grids with best/second-best
//! flags, the extreme/negative-price tables, per-interval profile data
//! files, static figures, and a machine-readable summary. Everything here is
//! a pure function of the evaluation records, so regeneration is
//! bit-identical.

use std::collections::BTreeSet;
use std::fmt::Write as _;
use std::path::Path;

use nembench_market_data::Region;

use crate::config::ExperimentConfig;
use crate::stages::{EvalRecord, PointSummary};
use crate::svg;
use crate::CliError;

/// Marks appended to table values: `*` best in its (region, setting) group,
/// `^` second best. Lower is better except for directional accuracy.
const BEST: &str = "*";
const SECOND: &str = "^";

pub fn emit_report(
    cfg: &ExperimentConfig,
    hash: &str,
    records: &[EvalRecord],
    dir: &Path,
) -> Result<(), CliError> {
    std::fs::create_dir_all(dir)?;
    let settings: BTreeSet<String> = records.iter().map(|r| r.setting.clone()).collect();
    for setting in &settings {
        let subset: Vec<&EvalRecord> = records.iter().filter(|r| &r.setting == setting).collect();
        std::fs::write(
            dir.join(format!("metrics_{setting}.tsv")),
            metrics_table(cfg, hash, setting, &subset),
        )?;
        std::fs::write(
            dir.join(format!("extreme_{setting}.tsv")),
            subset_table(hash, setting, &subset, "extreme", |r| r.extreme.as_ref()),
        )?;
        std::fs::write(
            dir.join(format!("negative_{setting}.tsv")),
            subset_table(hash, setting, &subset, "negative", |r| r.negative.as_ref()),
        )?;
        emit_intraday_files(hash, setting, &subset, dir)?;
    }
    let summary = serde_json::json!({
        "config_hash": hash,
        "name": cfg.name,
        "cells": records,
    });
    std::fs::write(
        dir.join("summary.json"),
        serde_json::to_string_pretty(&summary).map_err(|e| CliError::Stage(e.to_string()))?,
    )?;
    Ok(())
}

fn fmt3(v: f64) -> String {
    format!("{v:.3}")
}

/// Flags per column within one (region, setting) group: strict best and the
/// next-distinct second best. `higher_better` flips the ordering (MDA).
fn flags(values: &[Option<f64>], higher_better: bool) -> Vec<&'static str> {
    let present: Vec<f64> = values.iter().flatten().copied().collect();
    if present.len() < 2 {
        return vec![""; values.len()];
    }
    let better = |a: f64, b: f64| {
        if higher_better {
            a > b
        } else {
            a < b
        }
    };
    let mut best = present[0];
    for &v in &present {
        if better(v, best) {
            best = v;
        }
    }
    let mut second: Option<f64> = None;
    for &v in &present {
        if v != best && second.map_or(true, |s| better(v, s)) {
            second = Some(v);
        }
    }
    values
        .iter()
        .map(|v| match v {
            Some(x) if *x == best => BEST,
            Some(x) if second == Some(*x) => SECOND,
            _ => "",
        })
        .collect()
}

fn metrics_table(
    cfg: &ExperimentConfig,
    hash: &str,
    setting: &str,
    records: &[&EvalRecord],
) -> String {
    let mut out = String::new();
    let _ = writeln!(out, "# config_hash={hash}");
    let _ = writeln!(
        out,
        "# {BEST} best in region, {SECOND} second best; lower is better except MDA"
    );
    let _ = writeln!(out, "region\tmodel\tMAE\tRMSE\tsMAPE\trMAE\tMDA");

    let mut body_rows: Vec<(String, String, [Option<f64>; 5])> = Vec::new();
    let regions: Vec<Region> = cfg
        .regions
        .iter()
        .copied()
        .filter(|r| records.iter().any(|rec| rec.region == *r))
        .collect();
    for &region in &regions {
        let group: Vec<&&EvalRecord> = records.iter().filter(|r| r.region == region).collect();
        for rec in &group {
            body_rows.push((
                region.to_string(),
                rec.family.clone(),
                [
                    Some(rec.report.mae),
                    Some(rec.report.rmse),
                    Some(rec.report.smape),
                    rec.report.rmae,
                    Some(rec.report.mda),
                ],
            ));
        }
    }
    // Average block across regions, unweighted, for families present in
    // every region group.
    if regions.len() > 1 {
        let families: BTreeSet<String> = records.iter().map(|r| r.family.clone()).collect();
        for family in families {
            let cells: Vec<&&EvalRecord> =
                records.iter().filter(|r| r.family == family).collect();
            if cells.len() != regions.len() {
                continue;
            }
            let n = cells.len() as f64;
            let mean = |f: &dyn Fn(&EvalRecord) -> f64| {
                cells.iter().map(|r| f(r)).sum::<f64>() / n
            };
            let rmae = if cells.iter().all(|r| r.report.rmae.is_some()) {
                Some(cells.iter().map(|r| r.report.rmae.unwrap()).sum::<f64>() / n)
            } else {
                None
            };
            body_rows.push((
                "Average".into(),
                family,
                [
                    Some(mean(&|r| r.report.mae)),
                    Some(mean(&|r| r.report.rmse)),
                    Some(mean(&|r| r.report.smape)),
                    rmae,
                    Some(mean(&|r| r.report.mda)),
                ],
            ));
        }
    }

    // Emit with per-(region, column) flags.
    let group_names: Vec<String> = {
        let mut seen = Vec::new();
        for (g, _, _) in &body_rows {
            if !seen.contains(g) {
                seen.push(g.clone());
            }
        }
        seen
    };
    for group in group_names {
        let rows: Vec<&(String, String, [Option<f64>; 5])> =
            body_rows.iter().filter(|(g, _, _)| *g == group).collect();
        let mut col_flags: Vec<Vec<&'static str>> = Vec::new();
        for col in 0..5 {
            let values: Vec<Option<f64>> = rows.iter().map(|(_, _, v)| v[col]).collect();
            col_flags.push(flags(&values, col == 4));
        }
        for (i, (g, family, vals)) in rows.iter().enumerate() {
            let mut line = format!("{g}\t{family}");
            for (col, v) in vals.iter().enumerate() {
                match v {
                    Some(x) => {
                        let _ = write!(line, "\t{}{}", fmt3(*x), col_flags[col][i]);
                    }
                    None => line.push_str("\t-"),
                }
            }
            let _ = writeln!(out, "{line}");
        }
    }
    let _ = writeln!(out, "# setting={setting} rows={}", body_rows.len());
    out
}

/// Extreme / negative tables: model rows, metrics aggregated over regions
/// (unweighted mean of the regions where the subset is present).
fn subset_table(
    hash: &str,
    setting: &str,
    records: &[&EvalRecord],
    kind: &str,
    select: impl Fn(&EvalRecord) -> Option<&PointSummary>,
) -> String {
    let mut out = String::new();
    let _ = writeln!(out, "# config_hash={hash}");
    let _ = writeln!(out, "# subset={kind} setting={setting}");
    let _ = writeln!(out, "model\tMAE\tRMSE\tsMAPE");
    let families: BTreeSet<String> = records.iter().map(|r| r.family.clone()).collect();
    let mut rows: Vec<(String, Option<[f64; 3]>)> = Vec::new();
    for family in families {
        let cells: Vec<&PointSummary> = records
            .iter()
            .filter(|r| r.family == family)
            .filter_map(|r| select(r))
            .collect();
        if cells.is_empty() {
            rows.push((family, None));
            continue;
        }
        let n = cells.len() as f64;
        rows.push((
            family,
            Some([
                cells.iter().map(|m| m.mae).sum::<f64>() / n,
                cells.iter().map(|m| m.rmse).sum::<f64>() / n,
                cells.iter().map(|m| m.smape).sum::<f64>() / n,
            ]),
        ));
    }
    let col_values: Vec<Vec<Option<f64>>> = (0..3)
        .map(|col| rows.iter().map(|(_, v)| v.as_ref().map(|a| a[col])).collect())
        .collect();
    let col_flags: Vec<Vec<&'static str>> =
        col_values.iter().map(|vals| flags(vals, false)).collect();
    for (i, (family, vals)) in rows.iter().enumerate() {
        match vals {
            Some(a) => {
                let _ = writeln!(
                    out,
                    "{family}\t{}{}\t{}{}\t{}{}",
                    fmt3(a[0]),
                    col_flags[0][i],
                    fmt3(a[1]),
                    col_flags[1][i],
                    fmt3(a[2]),
                    col_flags[2][i]
                );
            }
            None => {
                let _ = writeln!(out, "{family}\t-\t-\t-");
            }
        }
    }
    out
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::stages::{DiagnosticCurves, IntradayCurves};
    use nembench_evaluation::{MetricReport, SeedMetrics};

    fn record(region: Region, setting: &str, family: &str, mae: f64) -> EvalRecord {
        let seed = SeedMetrics {
            seed: 1,
            mae,
            rmse: mae * 2.0,
            smape: 66.666_666_7,
            rmae: Some(mae / 100.0),
            mda: 50.0 + mae,
        };
        EvalRecord {
            config_hash: "h".into(),
            region,
            setting: setting.into(),
            family: family.into(),
            report: MetricReport::aggregate(vec![seed]),
            benchmark_mae: Some(100.0),
            extreme: Some(PointSummary {
                mae: mae * 3.0,
                rmse: mae * 4.0,
                smape: 110.0,
            }),
            negative: None,
            intraday: IntradayCurves {
                count: vec![1; 48],
                mae: vec![mae; 48],
                rmse: vec![mae * 2.0; 48],
                smape: vec![60.0; 48],
                mda: vec![Some(50.0); 48],
            },
            diagnostics: DiagnosticCurves {
                price_change_std: vec![1.0; 48],
                mean_price: vec![90.0; 48],
                pct_negative: vec![0.0; 48],
                pct_directional_shift: vec![25.0; 48],
            },
        }
    }

    fn full_grid_config() -> ExperimentConfig {
        let json = r#"{
            "name": "layout",
            "data": {"source": "synthetic", "seed": 1,
                     "synthetic": {"n_days": 10, "base_level": 100.0}},
            "regions": ["QLD", "NSW", "VIC", "SA", "TAS"],
            "settings": ["24H", "48H"],
            "families": ["LSTM"],
            "split": {"test_start": "2023-01-08", "train_fraction": 0.7},
            "out_dir": "/tmp/unused"
        }"#;
        ExperimentConfig::from_json(json).unwrap()
    }

    #[test]
    fn full_study_layout_has_ninety_rows_plus_average_block() {
        // 5 regions x 9 models x 2 settings: each setting table carries 45
        // region rows plus a 9-row Average block.
        let families = [
            "LSTM", "CNN-LSTM", "Transformer", "DLinear", "iTransformer", "TimesNet", "Mamba",
            "TimeMixer", "TimeXer",
        ];
        let cfg = full_grid_config();
        let mut total_data_rows = 0;
        for setting in ["24H", "48H"] {
            let mut records = Vec::new();
            for (ri, region) in Region::ALL.iter().enumerate() {
                for (fi, family) in families.iter().enumerate() {
                    records.push(record(*region, setting, family, 40.0 + ri as f64 + fi as f64));
                }
            }
            let refs: Vec<&EvalRecord> = records.iter().collect();
            let table = metrics_table(&cfg, "hash", setting, &refs);
            let body: Vec<&str> = table
                .lines()
                .filter(|l| !l.starts_with('#') && !l.starts_with("region\t"))
                .collect();
            let region_rows = body.iter().filter(|l| !l.starts_with("Average")).count();
            let average_rows = body.iter().filter(|l| l.starts_with("Average")).count();
            assert_eq!(region_rows, 45);
            assert_eq!(average_rows, 9);
            total_data_rows += region_rows;
        }
        assert_eq!(total_data_rows, 90);
    }

    #[test]
    fn three_decimal_rendering_and_flags() {
        assert_eq!(fmt3(66.666_666_7), "66.667");
        assert_eq!(fmt3(0.9785), "0.979");
        let cfg = full_grid_config();
        let records = vec![
            record(Region::QLD, "24H", "A", 50.0),
            record(Region::QLD, "24H", "B", 40.0),
            record(Region::QLD, "24H", "C", 60.0),
        ];
        let refs: Vec<&EvalRecord> = records.iter().collect();
        let table = metrics_table(&cfg, "hash", "24H", &refs);
        let row_b = table.lines().find(|l| l.contains("\tB\t")).unwrap();
        // Lowest MAE is flagged best; MDA flags the highest instead.
        assert!(row_b.contains("40.000*"), "{row_b}");
        let row_c = table.lines().find(|l| l.contains("\tC\t")).unwrap();
        assert!(row_c.contains("110.000*"), "MDA best goes to the highest: {row_c}");
        let row_a = table.lines().find(|l| l.contains("\tA\t")).unwrap();
        assert!(row_a.contains("50.000^"), "{row_a}");
    }

    #[test]
    fn absent_subsets_render_as_dashes() {
        let records = vec![record(Region::QLD, "24H", "A", 50.0)];
        let refs: Vec<&EvalRecord> = records.iter().collect();
        let table = subset_table("hash", "24H", &refs, "negative", |r| r.negative.as_ref());
        let row = table.lines().find(|l| l.starts_with("A\t")).unwrap();
        assert_eq!(row, "A\t-\t-\t-");
        let extreme = subset_table("hash", "24H", &refs, "extreme", |r| r.extreme.as_ref());
        assert!(extreme.lines().any(|l| l.starts_with("A\t150.000")));
    }
}

/// Per-(region, setting) interval-level data files and static figures. The
/// CSV alone is sufficient to re-render every figure.
fn emit_intraday_files(
    hash: &str,
    setting: &str,
    records: &[&EvalRecord],
    dir: &Path,
) -> Result<(), CliError> {
    let regions: BTreeSet<Region> = records.iter().map(|r| r.region).collect();
    for region in regions {
        let group: Vec<&&EvalRecord> = records
            .iter()
            .filter(|r| r.region == region)
            .collect();
        if group.is_empty() {
            continue;
        }
        let mut csv = String::new();
        let _ = writeln!(csv, "# config_hash={hash}");
        let mut header = String::from("interval");
        for rec in &group {
            let f = rec.family.replace([' ', '-'], "_");
            let _ = write!(header, ",mae_{f},rmse_{f},smape_{f},mda_{f}");
        }
        header.push_str(",price_change_std,mean_price,pct_negative,pct_directional_shift");
        let _ = writeln!(csv, "{header}");
        let diag = &group[0].diagnostics;
        for k in 0..48 {
            let mut line = k.to_string();
            for rec in &group {
                let mda = rec.intraday.mda[k]
                    .map(|v| format!("{v:.6}"))
                    .unwrap_or_else(|| "-".into());
                let _ = write!(
                    line,
                    ",{:.6},{:.6},{:.6},{mda}",
                    rec.intraday.mae[k], rec.intraday.rmse[k], rec.intraday.smape[k]
                );
            }
            let _ = write!(
                line,
                ",{:.6},{:.6},{:.6},{:.6}",
                diag.price_change_std[k],
                diag.mean_price[k],
                diag.pct_negative[k],
                diag.pct_directional_shift[k]
            );
            let _ = writeln!(csv, "{line}");
        }
        std::fs::write(dir.join(format!("intraday_{region}_{setting}.csv")), csv)?;

        // Static figures: per-metric model curves plus the diurnal
        // diagnostics, mirroring the interval-level analysis.
        for (metric, title) in [
            ("mae", "MAE by half-hour interval"),
            ("rmse", "RMSE by half-hour interval"),
            ("smape", "sMAPE by half-hour interval"),
            ("mda", "MDA by half-hour interval"),
        ] {
            let series: Vec<(String, Vec<f64>)> = group
                .iter()
                .map(|rec| {
                    let values: Vec<f64> = match metric {
                        "mae" => rec.intraday.mae.clone(),
                        "rmse" => rec.intraday.rmse.clone(),
                        "smape" => rec.intraday.smape.clone(),
                        _ => rec
                            .intraday
                            .mda
                            .iter()
                            .map(|v| v.unwrap_or(f64::NAN))
                            .collect(),
                    };
                    (rec.family.clone(), values)
                })
                .collect();
            let figure = svg::line_chart(
                &format!("{title} - {region} {setting}"),
                hash,
                &series,
            );
            std::fs::write(
                dir.join(format!("fig_{metric}_{region}_{setting}.svg")),
                figure,
            )?;
        }
        let volatility = svg::line_chart(
            &format!("Price-change volatility and mean price - {region} {setting}"),
            hash,
            &[
                ("price_change_std".into(), diag.price_change_std.clone()),
                ("mean_price".into(), diag.mean_price.clone()),
            ],
        );
        std::fs::write(
            dir.join(format!("fig_volatility_{region}_{setting}.svg")),
            volatility,
        )?;
        let negative = svg::bar_line_chart(
            &format!("Negative-price share and mean price - {region} {setting}"),
            hash,
            ("pct_negative", &diag.pct_negative),
            ("mean_price", &diag.mean_price),
        );
        std::fs::write(
            dir.join(format!("fig_negative_{region}_{setting}.svg")),
            negative,
        )?;
        let shifts = svg::bar_line_chart(
            &format!("Directional-shift share - {region} {setting}"),
            hash,
            ("pct_directional_shift", &diag.pct_directional_shift),
            ("mean_price", &diag.mean_price),
        );
        std::fs::write(
            dir.join(format!("fig_shifts_{region}_{setting}.svg")),
            shifts,
        )?;
    }
    Ok(())
}

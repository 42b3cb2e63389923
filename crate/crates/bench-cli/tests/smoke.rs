//! End-to-end smoke tests through the library API and the binary.

use std::fs;
use std::path::{Path, PathBuf};

use nembench_cli::{Experiment, ExperimentConfig};

fn scratch(tag: &str) -> PathBuf {
    let dir = std::env::temp_dir().join(format!("nembench-smoke-{tag}-{}", std::process::id()));
    fs::remove_dir_all(&dir).ok();
    fs::create_dir_all(&dir).unwrap();
    dir
}

fn smoke_config(out_dir: &Path) -> String {
    format!(
        r#"{{
        "name": "smoke",
        "data": {{
            "source": "synthetic",
            "seed": 11,
            "synthetic": {{
                "n_days": 40, "base_level": 100.0,
                "daily_amplitude": 30.0, "weekly_amplitude": 10.0,
                "noise_std": 6.0,
                "negative_band": {{"start": 84, "end": 192, "probability": 0.4}}
            }}
        }},
        "regions": ["QLD"],
        "settings": ["24H"],
        "families": ["DLinear"],
        "split": {{"test_start": "2023-01-31", "train_fraction": 0.7}},
        "training": {{
            "learning_rate": 0.01, "batch_size": 64, "max_epochs": 2,
            "early_stop_patience": 10,
            "plateau": {{"factor": 0.5, "patience": 3, "min_lr": 1e-6}},
            "seeds": [1, 2]
        }},
        "grid": {{
            "learning_rates": [0.01],
            "dims": [16], "layers": [1],
            "cnn_kernels": [3], "cnn_filters": [8]
        }},
        "budget": 1,
        "out_dir": {:?}
    }}"#,
        out_dir.to_str().unwrap()
    )
}

#[test]
fn full_pipeline_runs_and_reruns_as_noop() {
    let dir = scratch("pipeline");
    let cfg = ExperimentConfig::from_json(&smoke_config(&dir)).unwrap();
    let experiment = Experiment::new(cfg.clone());
    let first = experiment.run().unwrap();
    assert_eq!(first.cells_failed, 0, "ledger: {:?}", first);
    assert!(first.cells_run > 0);

    // All artifacts exist.
    for file in [
        "ledger.jsonl",
        "config.resolved.json",
        "reports/summary.json",
        "reports/metrics_24H.tsv",
        "reports/extreme_24H.tsv",
        "reports/negative_24H.tsv",
        "reports/intraday_QLD_24H.csv",
        "reports/fig_mae_QLD_24H.svg",
        "dumps/QLD_24H_DLinear_seed1.csv",
        "eval/QLD_24H_DLinear.json",
        "tune/QLD_24H_DLinear.json",
    ] {
        assert!(dir.join(file).exists(), "missing {file}");
    }

    // Rerunning the unchanged config is a pure cache hit.
    let second = Experiment::new(cfg).run().unwrap();
    assert_eq!(second.cells_run, 0, "{second:?}");
    assert_eq!(second.cells_failed, 0);
    assert!(second.cells_skipped >= first.cells_run);
    fs::remove_dir_all(dir).ok();
}

#[test]
fn rerun_in_fresh_directory_is_bit_identical() {
    let dir_a = scratch("det-a");
    let dir_b = scratch("det-b");
    let run = |dir: &Path| {
        let cfg = ExperimentConfig::from_json(&smoke_config(dir)).unwrap();
        Experiment::new(cfg).run().unwrap()
    };
    let a = run(&dir_a);
    let b = run(&dir_b);
    assert_eq!(a.cells_failed + b.cells_failed, 0);

    // Reports and dumps must match byte for byte (out_dir differs, so the
    // hash differs; compare artifact bodies that don't embed paths).
    for rel in [
        "reports/metrics_24H.tsv",
        "reports/intraday_QLD_24H.csv",
        "dumps/QLD_24H_DLinear_seed1.csv",
        "dumps/QLD_24H_DLinear_seed2.csv",
    ] {
        let fa = fs::read_to_string(dir_a.join(rel)).unwrap();
        let fb = fs::read_to_string(dir_b.join(rel)).unwrap();
        // Strip the config-hash stamp (it covers out_dir).
        let strip = |s: &str| {
            s.lines()
                .filter(|l| !l.contains("config_hash"))
                .collect::<Vec<_>>()
                .join("\n")
        };
        assert_eq!(strip(&fa), strip(&fb), "{rel} differs");
    }
    fs::remove_dir_all(dir_a).ok();
    fs::remove_dir_all(dir_b).ok();
}

#[test]
fn bundled_smoke_config_is_valid() {
    let path = Path::new(env!("CARGO_MANIFEST_DIR")).join("../../configs/smoke.json");
    let cfg = ExperimentConfig::load(&path).unwrap();
    assert_eq!(cfg.parsed_families().len(), 3);
    assert_eq!(cfg.regions.len(), 2);
    assert!(cfg.budget.is_some());
}

#[test]
fn binary_reports_config_errors_with_exit_code_2() {
    let dir = scratch("badcfg");
    let bad = smoke_config(&dir).replace("\"DLinear\"", "\"NotAModel\"");
    let cfg_path = dir.join("bad.json");
    fs::write(&cfg_path, bad).unwrap();
    let out = std::process::Command::new(env!("CARGO_BIN_EXE_nembench"))
        .args(["run", "--config", cfg_path.to_str().unwrap()])
        .output()
        .unwrap();
    assert_eq!(out.status.code(), Some(2), "{out:?}");
    let stderr = String::from_utf8_lossy(&out.stderr);
    assert!(stderr.contains("unknown model family"), "{stderr}");
    fs::remove_dir_all(dir).ok();
}

#[test]
fn binary_runs_the_smoke_pipeline() {
    let dir = scratch("bin");
    let cfg_path = dir.join("smoke.json");
    fs::write(&cfg_path, smoke_config(&dir.join("out"))).unwrap();
    let out = std::process::Command::new(env!("CARGO_BIN_EXE_nembench"))
        .args(["run", "--config", cfg_path.to_str().unwrap()])
        .output()
        .unwrap();
    assert_eq!(out.status.code(), Some(0), "stderr: {}", String::from_utf8_lossy(&out.stderr));
    assert!(dir.join("out/reports/summary.json").exists());
    fs::remove_dir_all(dir).ok();
}

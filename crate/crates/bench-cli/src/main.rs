//! `nembench`: multi-horizon electricity price forecasting benchmark for the
//! Australian NEM. Subcommands run individual stages or the whole pipeline
//! from a declarative JSON config.

use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand};

use nembench_cli::{CliError, ExperimentConfig, Experiment, RunLedger, RunSummary};
use nembench_market_data::Region;

#[derive(Parser)]
#[command(name = "nembench", version, about = "NEM electricity price forecasting benchmark")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Args, Clone)]
struct ConfigArgs {
    /// Experiment config (JSON).
    #[arg(long)]
    config: PathBuf,
    /// Override the configured output directory.
    #[arg(long)]
    out: Option<PathBuf>,
    /// Restrict to these regions (comma separated, e.g. QLD,NSW).
    #[arg(long, value_delimiter = ',')]
    regions: Vec<String>,
    /// Restrict to one forecast setting: 24h or 48h.
    #[arg(long)]
    setting: Option<String>,
    /// Cap grid-search combinations per family.
    #[arg(long)]
    budget: Option<usize>,
    /// Override the seed list (comma separated).
    #[arg(long, value_delimiter = ',')]
    seeds: Vec<u64>,
}

#[derive(Subcommand)]
enum Command {
    /// Download (or verify) raw dispatch prices into the cache.
    Fetch {
        #[arg(long)]
        region: String,
        #[arg(long)]
        start: String,
        #[arg(long)]
        end: String,
        #[arg(long)]
        cache: PathBuf,
    },
    /// Build prepared datasets for every (region, setting).
    Prepare(ConfigArgs),
    /// Grid-search hyperparameters for every cell.
    Tune(ConfigArgs),
    /// Train the tuned configuration across seeds and dump forecasts.
    Train(ConfigArgs),
    /// Compute metrics, subsets, and intraday profiles from the dumps.
    Evaluate(ConfigArgs),
    /// Emit tables, figures, and the machine-readable summary.
    Report(ConfigArgs),
    /// Full pipeline: fetch, prepare, tune, train, evaluate, report.
    Run(ConfigArgs),
}

fn load_config(args: &ConfigArgs) -> Result<ExperimentConfig, CliError> {
    let mut cfg = ExperimentConfig::load(&args.config)?;
    if let Some(out) = &args.out {
        cfg.out_dir = out.clone();
    }
    if !args.regions.is_empty() {
        let mut regions = Vec::new();
        for r in &args.regions {
            regions.push(
                Region::parse(r)
                    .ok_or_else(|| CliError::Config(format!("unknown region: {r}")))?,
            );
        }
        cfg.regions = regions;
    }
    if let Some(setting) = &args.setting {
        nembench_cli::parse_setting(setting)?;
        cfg.settings = vec![setting.to_ascii_uppercase()];
    }
    if let Some(budget) = args.budget {
        cfg.budget = Some(budget);
    }
    if !args.seeds.is_empty() {
        cfg.training.seeds = args.seeds.clone();
    }
    cfg.validate()?;
    Ok(cfg)
}

fn print_summary(summary: &RunSummary) {
    println!(
        "config {}: {} cells run, {} skipped, {} failed",
        summary.config_hash, summary.cells_run, summary.cells_skipped, summary.cells_failed
    );
}

fn run_stage(
    args: &ConfigArgs,
    f: impl Fn(&Experiment, &mut RunLedger, &mut RunSummary) -> Result<(), CliError>,
) -> Result<RunSummary, CliError> {
    let cfg = load_config(args)?;
    std::fs::create_dir_all(&cfg.out_dir)?;
    let experiment = Experiment::new(cfg);
    let mut ledger = RunLedger::open(&experiment.cfg.out_dir)?;
    let mut summary = RunSummary {
        config_hash: experiment.hash.clone(),
        cells_run: 0,
        cells_skipped: 0,
        cells_failed: 0,
    };
    f(&experiment, &mut ledger, &mut summary)?;
    Ok(summary)
}

fn dispatch(cli: Cli) -> Result<RunSummary, CliError> {
    match cli.command {
        Command::Fetch {
            region,
            start,
            end,
            cache,
        } => {
            let region = Region::parse(&region)
                .ok_or_else(|| CliError::Config(format!("unknown region: {region}")))?;
            let start = nembench_market_data::time::parse_date(&start)
                .ok_or_else(|| CliError::Config(format!("bad date: {start}")))?;
            let end = nembench_market_data::time::parse_date(&end)
                .ok_or_else(|| CliError::Config(format!("bad date: {end}")))?;
            let series = nembench_market_data::fetch_rrp(region, start, end, &cache)?;
            println!(
                "{region}: {} five-minute intervals cached under {}",
                series.len(),
                cache.display()
            );
            Ok(RunSummary {
                config_hash: String::new(),
                cells_run: 1,
                cells_skipped: 0,
                cells_failed: 0,
            })
        }
        Command::Prepare(args) => run_stage(&args, |e, l, s| {
            e.stage_fetch(l, s)?;
            e.stage_prepare(l, s)
        }),
        Command::Tune(args) => run_stage(&args, |e, l, s| e.stage_tune(l, s)),
        Command::Train(args) => run_stage(&args, |e, l, s| e.stage_train(l, s)),
        Command::Evaluate(args) => run_stage(&args, |e, l, s| e.stage_evaluate(l, s)),
        Command::Report(args) => run_stage(&args, |e, l, s| e.stage_report(l, s)),
        Command::Run(args) => {
            let cfg = load_config(&args)?;
            Experiment::new(cfg).run()
        }
    }
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    match dispatch(cli) {
        Ok(summary) => {
            print_summary(&summary);
            ExitCode::from(summary.exit_code() as u8)
        }
        Err(err) => {
            eprintln!("error: {err}");
            ExitCode::from(err.exit_code() as u8)
        }
    }
}

//! `dss`: run the decision-support pipeline one stage at a time.

use std::path::PathBuf;
use std::process::ExitCode;

use chrono::NaiveDate;
use clap::{Parser, Subcommand};
use dss_core::dataset::Horizon;
use dss_core::pipeline::{Manifest, Pipeline, PipelineConfig, PipelineError};

const GROUND_TRUTH_FILE: &str = "ground_truth.json";

#[derive(Debug, Parser)]
#[command(name = "dss", version, about = "Staged fundamental-analysis pipeline")]
struct Cli {
    /// TOML configuration; built-in defaults are used when omitted.
    #[arg(long, global = true)]
    config: Option<PathBuf>,
    /// Work directory for stage artifacts (overrides `paths.work`).
    #[arg(long, global = true)]
    out: Option<PathBuf>,
    /// Fixture bundle directory (overrides `paths.fixtures`).
    #[arg(long, global = true)]
    fixtures: Option<PathBuf>,
    /// Seed for synthetic generation and model training.
    #[arg(long, global = true)]
    seed: Option<u64>,
    #[command(subcommand)]
    command: Command,
}

#[derive(Debug, Subcommand)]
enum Command {
    /// Generate a synthetic fixture bundle and its ground-truth file.
    Synth {
        #[arg(long)]
        n_stocks: Option<usize>,
        #[arg(long)]
        n_quarters: Option<usize>,
        #[arg(long)]
        signal_strength: Option<f64>,
    },
    /// Load the report fixture into the store.
    Ingest,
    /// Map stored reports onto the unified schema and merge revisions.
    Clean,
    /// Assemble point-in-time feature rows on the quarterly grid.
    Features,
    /// Label, split and scale one dataset per horizon.
    Dataset,
    /// Fit every configured model for every horizon.
    Train,
    /// Score the models on the train and test sets.
    Evaluate,
    /// Aggregate stock probabilities into a market forecast.
    Outlook {
        /// Forecast horizon in months.
        #[arg(long)]
        horizon: u32,
    },
    /// Replay the allocation strategy against the forecasts.
    Backtest {
        #[arg(long)]
        from: Option<NaiveDate>,
        #[arg(long)]
        to: Option<NaiveDate>,
    },
    /// Write the accuracy table and return series.
    Report,
}

fn exit_code(e: &PipelineError) -> u8 {
    match e {
        PipelineError::Config(_) => 3,
        PipelineError::MissingUpstreamArtifact { .. } => 4,
        PipelineError::ConfigConflict { .. } => 5,
        PipelineError::Locked(_) => 6,
        PipelineError::Io { .. } | PipelineError::Artifact { .. } | PipelineError::Fixture(_) => 7,
        PipelineError::Store(_) | PipelineError::Clean(_) | PipelineError::Feature(_) | PipelineError::Dataset(_) => 8,
        PipelineError::Model(_) => 9,
        PipelineError::Outlook(_) | PipelineError::Backtest(_) => 10,
        PipelineError::Synth(_) => 11,
    }
}

fn load_config(cli: &Cli) -> Result<PipelineConfig, PipelineError> {
    let mut cfg = match &cli.config {
        Some(p) => PipelineConfig::load(p)?,
        None => PipelineConfig::default(),
    };
    if let Some(out) = &cli.out {
        cfg.paths.work = out.clone();
    }
    if let Some(f) = &cli.fixtures {
        cfg.paths.fixtures = f.clone();
    }
    if let Some(seed) = cli.seed {
        cfg.seeds.synth = seed;
        cfg.seeds.model = seed;
    }
    if let Command::Synth {
        n_stocks,
        n_quarters,
        signal_strength,
    } = &cli.command
    {
        cfg.synth.n_stocks = n_stocks.unwrap_or(cfg.synth.n_stocks);
        cfg.synth.n_quarters = n_quarters.unwrap_or(cfg.synth.n_quarters);
        cfg.synth.signal_strength = signal_strength.unwrap_or(cfg.synth.signal_strength);
    }
    cfg.validate()?;
    Ok(cfg)
}

fn run(cli: &Cli) -> Result<Option<Manifest>, PipelineError> {
    let cfg = load_config(cli)?;
    let pipeline = Pipeline::new(cfg);
    let _lock = pipeline.workspace().lock()?;
    let manifest = match &cli.command {
        Command::Synth { .. } => {
            let truth = pipeline.workspace().root().join(GROUND_TRUTH_FILE);
            pipeline.synth(&truth)?;
            println!(
                "synth: fixtures in {}, ground truth in {}",
                pipeline.config.paths.fixtures.display(),
                truth.display()
            );
            return Ok(None);
        }
        Command::Ingest => pipeline.ingest()?,
        Command::Clean => pipeline.clean()?,
        Command::Features => pipeline.features()?,
        Command::Dataset => pipeline.dataset()?,
        Command::Train => pipeline.train()?,
        Command::Evaluate => pipeline.evaluate()?,
        Command::Outlook { horizon } => {
            let h = Horizon::new(*horizon).map_err(|e| PipelineError::Config(e.to_string()))?;
            pipeline.outlook(h)?
        }
        Command::Backtest { from, to } => pipeline.backtest(*from, *to)?,
        Command::Report => pipeline.report()?,
    };
    Ok(Some(manifest))
}

fn main() -> ExitCode {
    env_logger::Builder::from_env(env_logger::Env::default().default_filter_or("warn")).init();
    let cli = match Cli::try_parse() {
        Ok(c) => c,
        Err(e) => {
            let _ = e.print();
            return if e.use_stderr() { ExitCode::from(2) } else { ExitCode::SUCCESS };
        }
    };
    match run(&cli) {
        Ok(Some(m)) => {
            println!("{}: {} artifacts written", m.stage, m.outputs.len());
            ExitCode::SUCCESS
        }
        Ok(None) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(exit_code(&e))
        }
    }
}

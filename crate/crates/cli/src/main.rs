//! `polads`: ingest, stats, train, evaluate and explain political-ad classifiers.
//!
//! Exit codes: 0 success, 1 internal error, 2 user or input error.

mod commands;
mod report;

use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand};
use polads_core::bundle::EvalSplit;
use polads_core::evaluation::ResampleUnit;
use polads_core::pipeline::SystemKind;
use polads_core::RunConfig;

#[derive(Debug, Parser)]
#[command(name = "polads", version, about = "Political vs. non-political ad classification pipeline")]
struct Cli {
    /// Run configuration (flat TOML, see `polads config`).
    #[arg(long, global = true, value_name = "PATH")]
    config: Option<PathBuf>,

    /// Overrides the configured seed.
    #[arg(long, global = true)]
    seed: Option<u64>,

    /// Fail on the first malformed input record instead of skipping it.
    #[arg(long, global = true)]
    strict: bool,

    /// Overwrite existing model bundles.
    #[arg(long, global = true)]
    force: bool,

    /// More log output on standard error (-v info, -vv debug).
    #[arg(short, long, global = true, action = clap::ArgAction::Count)]
    verbose: u8,

    #[command(subcommand)]
    command: Command,
}

#[derive(Debug, Subcommand)]
enum Command {
    /// Parse and label a raw newline-delimited JSON corpus.
    Ingest(IngestArgs),
    /// Aggregate statistics over an ingested dataset.
    Stats(StatsArgs),
    /// Train one system on the advertiser-disjoint training split.
    Train(TrainArgs),
    /// Score bundles on the held-out advertisers; compare two or more with a paired bootstrap.
    Evaluate(EvaluateArgs),
    /// TreeSHAP keyword and targeting-attribute importance for a boosted-tree bundle.
    Explain(ExplainArgs),
    /// Print the effective configuration as TOML.
    Config,
}

#[derive(Debug, Args)]
struct IngestArgs {
    /// Raw corpus; defaults to `corpus` from the configuration.
    corpus: Option<PathBuf>,
    /// Where to write the labeled dataset.
    #[arg(long)]
    out: Option<PathBuf>,
}

#[derive(Debug, Args)]
struct StatsArgs {
    #[arg(long)]
    dataset: Option<PathBuf>,
    #[arg(long)]
    out_dir: Option<PathBuf>,
    /// Number of interest segments to report.
    #[arg(long)]
    top_k: Option<usize>,
}

#[derive(Debug, Args)]
struct TrainArgs {
    #[arg(long)]
    dataset: Option<PathBuf>,
    /// mnb, gbm-text or gbm-text+targets.
    #[arg(long)]
    system: Option<SystemKind>,
    /// Tune the boosted trees with advertiser-grouped k-fold grid search first.
    #[arg(long, conflicts_with = "no_grid")]
    grid: bool,
    #[arg(long)]
    no_grid: bool,
    /// Bundle directory; defaults to `<model_dir>/<system>`.
    #[arg(long)]
    out: Option<PathBuf>,
}

#[derive(Debug, Args)]
struct EvaluateArgs {
    #[arg(long)]
    dataset: Option<PathBuf>,
    /// Bundle directory; repeat to compare systems (the first is the baseline).
    #[arg(long = "bundle", required = true)]
    bundles: Vec<PathBuf>,
    /// Allow more than two bundles: one metrics row each, each compared to the first.
    #[arg(long)]
    compare_all: bool,
    /// Which ads to score relative to the bundles' training split.
    #[arg(long, default_value = "test")]
    split: EvalSplit,
    /// Required to score ads of advertisers the bundles were trained on.
    #[arg(long)]
    allow_train_eval: bool,
    #[arg(long)]
    bootstrap_samples: Option<usize>,
    #[arg(long)]
    resample_unit: Option<ResampleUnit>,
    /// Report path; defaults to `<report_dir>/evaluation.json`.
    #[arg(long)]
    out: Option<PathBuf>,
}

#[derive(Debug, Args)]
struct ExplainArgs {
    #[arg(long)]
    bundle: PathBuf,
    #[arg(long)]
    dataset: Option<PathBuf>,
    /// Samples to attribute; importance is conventionally measured on the training ads.
    #[arg(long, default_value = "train")]
    split: EvalSplit,
    #[arg(long)]
    top_keywords: Option<usize>,
    #[arg(long)]
    top_targeting: Option<usize>,
    /// Defaults to `<report_dir>/explain-<system>`.
    #[arg(long)]
    out_dir: Option<PathBuf>,
    /// Also write the full samples x features attribution matrix as CSV.
    #[arg(long)]
    dump_matrix: bool,
}

#[derive(Debug)]
pub enum CliError {
    User(String),
    Internal(String),
}

impl From<polads_core::Error> for CliError {
    fn from(e: polads_core::Error) -> Self {
        if e.is_user_error() {
            CliError::User(e.to_string())
        } else {
            CliError::Internal(e.to_string())
        }
    }
}

impl From<serde_json::Error> for CliError {
    fn from(e: serde_json::Error) -> Self {
        CliError::Internal(e.to_string())
    }
}

pub struct Context {
    pub cfg: RunConfig,
    pub force: bool,
}

fn context(cli: &Cli) -> Result<Context, CliError> {
    let mut cfg = match &cli.config {
        Some(p) => RunConfig::load(p)?,
        None => RunConfig::default(),
    };
    if let Some(s) = cli.seed {
        cfg.seed = s;
    }
    cfg.strict |= cli.strict;
    Ok(Context { cfg, force: cli.force })
}

fn run(cli: Cli) -> Result<(), CliError> {
    let mut ctx = context(&cli)?;
    match cli.command {
        Command::Ingest(a) => commands::ingest(&ctx, a.corpus, a.out),
        Command::Stats(a) => commands::stats(&ctx, a.dataset, a.out_dir, a.top_k),
        Command::Train(a) => {
            if a.grid {
                ctx.cfg.grid = true;
            }
            if a.no_grid {
                ctx.cfg.grid = false;
            }
            commands::train(&ctx, a.dataset, a.system, a.out)
        }
        Command::Evaluate(a) => {
            if let Some(b) = a.bootstrap_samples {
                ctx.cfg.bootstrap_samples = b;
            }
            if let Some(u) = a.resample_unit {
                ctx.cfg.resample_unit = u;
            }
            ctx.cfg.validate()?;
            commands::evaluate(
                &ctx,
                a.dataset,
                &a.bundles,
                a.compare_all,
                a.split,
                a.allow_train_eval,
                a.out,
            )
        }
        Command::Explain(a) => commands::explain(
            &ctx,
            &a.bundle,
            a.dataset,
            a.split,
            a.top_keywords,
            a.top_targeting,
            a.out_dir,
            a.dump_matrix,
        ),
        Command::Config => {
            print!("{}", ctx.cfg.to_toml()?);
            Ok(())
        }
    }
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    env_logger::Builder::new()
        .filter_level(match cli.verbose {
            0 => log::LevelFilter::Warn,
            1 => log::LevelFilter::Info,
            _ => log::LevelFilter::Debug,
        })
        .parse_env("POLADS_LOG")
        .format_timestamp(None)
        .init();
    match run(cli) {
        Ok(()) => ExitCode::SUCCESS,
        Err(CliError::User(m)) => {
            eprintln!("error: {m}");
            ExitCode::from(2)
        }
        Err(CliError::Internal(m)) => {
            eprintln!("internal error: {m}");
            ExitCode::from(1)
        }
    }
}

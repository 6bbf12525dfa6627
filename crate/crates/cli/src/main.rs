//! `lbeval`: score runs and analyze leaderboards from the command line.

mod commands;
mod output;

use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand};
use lbeval_core::corpus::DEFAULT_DEPTH_CAP;
use lbeval_core::resampling::DEFAULT_TRIALS;
use lbeval_core::scale::DEFAULT_STATE_CAP;
use lbeval_core::stats::DEFAULT_ALPHA;
use lbeval_core::agreement::DEFAULT_SPLITS;
use lbeval_core::{Aggregation, MetricSpec};

use crate::output::Format;

#[derive(Debug, Parser)]
#[command(name = "lbeval", version, about = "Leaderboard evaluation and meta-evaluation")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Debug, Args)]
pub struct OutputArgs {
    #[arg(long, value_enum, default_value = "csv")]
    pub format: Format,
    /// Write report files here instead of standard output.
    #[arg(long)]
    pub out_dir: Option<PathBuf>,
}

#[derive(Debug, Args)]
pub struct RunArgs {
    /// Run file in 6-column TREC format; repeat for several runs.
    #[arg(long = "run", required = true)]
    pub runs: Vec<PathBuf>,
    /// Keep at most this many results per query.
    #[arg(long, default_value_t = DEFAULT_DEPTH_CAP)]
    pub depth: usize,
}

#[derive(Debug, Subcommand)]
enum Command {
    /// Per-query scores and aggregates for each run.
    Eval {
        #[command(flatten)]
        runs: RunArgs,
        /// Qrels file, optionally tagged `scheme=path`.
        #[arg(long)]
        qrels: String,
        #[arg(long = "metric", required = true)]
        metrics: Vec<MetricSpec>,
        #[arg(long, default_value = "mean")]
        aggregation: Aggregation,
        #[command(flatten)]
        output: OutputArgs,
    },
    /// Bootstrap rank distribution of every run.
    Bootstrap {
        #[command(flatten)]
        runs: RunArgs,
        #[arg(long)]
        qrels: String,
        #[arg(long)]
        metric: MetricSpec,
        #[arg(long, default_value_t = DEFAULT_TRIALS)]
        trials: usize,
        #[arg(long)]
        seed: u64,
        #[arg(long, default_value = "mean")]
        aggregation: Aggregation,
        #[command(flatten)]
        output: OutputArgs,
    },
    /// Split-half agreement of significance tests over all run pairs.
    Agreement {
        #[command(flatten)]
        runs: RunArgs,
        #[arg(long)]
        qrels: String,
        #[arg(long)]
        metric: MetricSpec,
        #[arg(long, default_value_t = DEFAULT_SPLITS)]
        splits: usize,
        #[arg(long)]
        seed: u64,
        #[arg(long, default_value_t = DEFAULT_ALPHA)]
        alpha: f64,
        /// Also report the t-test under median aggregation.
        #[arg(long)]
        include_t_median: bool,
        #[command(flatten)]
        output: OutputArgs,
    },
    /// Public versus private leaderboards across judgment schemes and metrics.
    Holdout {
        #[command(flatten)]
        runs: RunArgs,
        /// Qrels per scheme as `scheme=path`; repeat for several schemes.
        #[arg(long = "qrels", required = true)]
        qrels: Vec<String>,
        /// TOML file with `public` and `private` query id arrays.
        #[arg(long)]
        partition: PathBuf,
        #[arg(long = "metric", required = true)]
        metrics: Vec<MetricSpec>,
        #[arg(long, default_value_t = DEFAULT_TRIALS)]
        trials: usize,
        #[arg(long)]
        seed: u64,
        #[arg(long, default_value = "mean")]
        aggregation: Aggregation,
        /// Run whose ranks are tracked across conditions; repeatable.
        #[arg(long = "focus")]
        focus: Vec<String>,
        #[command(flatten)]
        output: OutputArgs,
    },
    /// Submission policy checks, group statistics and the SOTA trajectory.
    Monitor {
        /// Leaderboard manifest (TOML).
        #[arg(long)]
        manifest: PathBuf,
        /// CSV with `run_id,score` columns.
        #[arg(long, conflicts_with_all = ["qrels", "metric"])]
        scores: Option<PathBuf>,
        /// Score the manifest's run files against these qrels instead.
        #[arg(long, requires = "metric")]
        qrels: Option<String>,
        #[arg(long, requires = "qrels")]
        metric: Option<MetricSpec>,
        #[arg(long, default_value_t = DEFAULT_DEPTH_CAP)]
        depth: usize,
        /// Defaults to the best baseline-flagged score, or no floor without one.
        #[arg(long, allow_hyphen_values = true)]
        baseline_score: Option<f64>,
        #[arg(long, default_value_t = 2)]
        max_runs: u32,
        /// `month` or `rolling:DAYS`.
        #[arg(long, default_value = "month")]
        window: String,
        #[arg(long, default_value_t = 1)]
        max_minor_variants: u32,
        #[command(flatten)]
        output: OutputArgs,
    },
    /// Interval-scale checks of a metric over all SERP states.
    ScaleCheck {
        #[arg(long)]
        metric: MetricSpec,
        #[arg(long)]
        depth: usize,
        /// Number of relevance grades (2 for binary).
        #[arg(long)]
        grades: u32,
        #[arg(long, default_value_t = DEFAULT_STATE_CAP)]
        state_cap: usize,
        #[command(flatten)]
        output: OutputArgs,
    },
}

fn run(cli: Cli) -> anyhow::Result<()> {
    let (report, output) = match cli.command {
        Command::Eval { runs, qrels, metrics, aggregation, output } => {
            (commands::eval(&runs, &qrels, &metrics, aggregation)?, output)
        }
        Command::Bootstrap { runs, qrels, metric, trials, seed, aggregation, output } => {
            (commands::bootstrap(&runs, &qrels, metric, trials, seed, aggregation)?, output)
        }
        Command::Agreement { runs, qrels, metric, splits, seed, alpha, include_t_median, output } => {
            let settings = commands::AgreementSettings { splits, seed, alpha, include_t_median };
            (commands::agreement(&runs, &qrels, metric, settings)?, output)
        }
        Command::Holdout { runs, qrels, partition, metrics, trials, seed, aggregation, focus, output } => {
            let settings = commands::HoldoutSettings { trials, seed, aggregation, focus };
            (commands::holdout(&runs, &qrels, &partition, &metrics, settings)?, output)
        }
        Command::Monitor {
            manifest,
            scores,
            qrels,
            metric,
            depth,
            baseline_score,
            max_runs,
            window,
            max_minor_variants,
            output,
        } => {
            let settings = commands::MonitorSettings {
                scores,
                qrels: qrels.zip(metric),
                depth,
                baseline_score,
                max_runs,
                window,
                max_minor_variants,
            };
            (commands::monitor(&manifest, settings)?, output)
        }
        Command::ScaleCheck { metric, depth, grades, state_cap, output } => {
            (commands::scale_check(metric, depth, grades, state_cap)?, output)
        }
    };
    output::emit(&report, output.format, output.out_dir.as_deref())?;
    Ok(())
}

fn main() -> ExitCode {
    match run(Cli::parse()) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("lbeval: error: {e:#}");
            ExitCode::FAILURE
        }
    }
}

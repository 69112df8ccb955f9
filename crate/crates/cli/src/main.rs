//! `kmland`: explore, connect and analyse K-means solution landscapes.

// `!(x > 0.0)` is used on purpose so that NaN is rejected too
#![allow(clippy::neg_cmp_op_on_partial_ord)]

mod commands;
mod config;
mod error;

use std::path::PathBuf;
use std::process::ExitCode;
use std::time::Instant;

use clap::{Args, Parser, Subcommand};

use commands::{Context, LeafColour};
use config::{RawConfig, RunConfig};
use error::CliError;

#[derive(Parser)]
#[command(
    name = "kmland",
    version,
    about = "K-means solution landscape explorer"
)]
struct Cli {
    #[command(flatten)]
    run: RunArgs,
    #[command(subcommand)]
    command: Command,
}

/// Settings shared by all subcommands; they override values from `--config`.
#[derive(Args)]
struct RunArgs {
    /// `key = value` file with any of the settings below.
    #[arg(long, global = true)]
    config: Option<PathBuf>,
    /// CSV of data points with a header row.
    #[arg(long, global = true)]
    data: Option<PathBuf>,
    /// Column holding ground-truth class labels.
    #[arg(long, global = true)]
    labels: Option<String>,
    /// Header-less CSV of outlier rows appended to the data.
    #[arg(long, global = true)]
    outliers: Option<PathBuf>,
    /// Number of clusters.
    #[arg(long, global = true)]
    k: Option<usize>,
    /// Random starts for exploration [default: 10000].
    #[arg(long, global = true)]
    starts: Option<usize>,
    /// RNG seed [default: 1].
    #[arg(long, global = true)]
    seed: Option<u64>,
    /// Penalty strength of the crossing-point surrogate [default: 30].
    #[arg(long, global = true)]
    sigma: Option<f64>,
    /// Smoothing of the crossing-point surrogate [default: 0.02].
    #[arg(long, global = true)]
    alpha: Option<f64>,
    /// Temperature for rates and paths [default: 1].
    #[arg(long, global = true)]
    temp: Option<f64>,
    /// Maximum connection searches [default: 200].
    #[arg(long, global = true)]
    budget: Option<usize>,
    /// Output directory [default: out].
    #[arg(long, global = true)]
    out: Option<PathBuf>,
    /// Worker threads for exploration [default: 1].
    #[arg(long, global = true)]
    threads: Option<usize>,
}

impl RunArgs {
    fn raw(&self) -> RawConfig {
        RawConfig {
            data: self.data.clone(),
            labels: self.labels.clone(),
            outliers: self.outliers.clone(),
            k: self.k,
            starts: self.starts,
            seed: self.seed,
            sigma: self.sigma,
            alpha: self.alpha,
            temp: self.temp,
            budget: self.budget,
            out: self.out.clone(),
            threads: self.threads,
        }
    }
}

#[derive(Subcommand)]
enum Command {
    /// Minimise random starts and store the distinct minima.
    Explore,
    /// Search for transition states until all minima are connected.
    Connect {
        /// Minima database [default: <out>/minima.json].
        #[arg(long)]
        db: Option<PathBuf>,
    },
    /// Escape rates to the global minimum, or one set-to-set rate.
    Rates {
        #[arg(long)]
        db: Option<PathBuf>,
        /// Source minima ids.
        #[arg(long, value_delimiter = ',')]
        from: Vec<usize>,
        /// Sink minima ids [default: the global minimum].
        #[arg(long, value_delimiter = ',')]
        to: Vec<usize>,
    },
    /// Fastest path between two minima.
    Path {
        #[arg(long)]
        db: Option<PathBuf>,
        #[arg(long)]
        from: usize,
        /// [default: the global minimum]
        #[arg(long)]
        to: Option<usize>,
    },
    /// Disconnectivity graph as SVG with a JSON sidecar.
    Dgraph {
        #[arg(long)]
        db: Option<PathBuf>,
        #[arg(long, value_enum, default_value = "uniform")]
        colour: LeafColour,
        #[arg(long, default_value_t = 100)]
        levels: usize,
    },
    /// Entropy of minima occupations over a temperature grid.
    Frustration {
        /// [default: <out>/minima.json]
        #[arg(long)]
        db: Option<PathBuf>,
        #[arg(long, default_value_t = 1e-2)]
        t_min: f64,
        #[arg(long, default_value_t = 1e2)]
        t_max: f64,
        #[arg(long, default_value_t = 50)]
        n_temps: usize,
    },
    /// Rand index, adjusted Rand index and rate between two minima.
    Compare {
        #[arg(long)]
        db: Option<PathBuf>,
        #[arg(long)]
        a: usize,
        #[arg(long)]
        b: usize,
    },
    /// Re-check every record of a database.
    Validate {
        /// [default: <out>/network.json, else <out>/minima.json]
        #[arg(long)]
        db: Option<PathBuf>,
    },
}

impl Command {
    fn name(&self) -> &'static str {
        match self {
            Command::Explore => "explore",
            Command::Connect { .. } => "connect",
            Command::Rates { .. } => "rates",
            Command::Path { .. } => "path",
            Command::Dgraph { .. } => "dgraph",
            Command::Frustration { .. } => "frustration",
            Command::Compare { .. } => "compare",
            Command::Validate { .. } => "validate",
        }
    }
}

fn config(args: &RunArgs) -> Result<RunConfig, CliError> {
    let file = match &args.config {
        Some(path) => RawConfig::load(path)?,
        None => RawConfig::default(),
    };
    RunConfig::resolve(file.overlay(args.raw()))
}

fn run(cli: &Cli, cfg: RunConfig) -> Result<String, CliError> {
    let pool = rayon::ThreadPoolBuilder::new()
        .num_threads(cfg.threads)
        .build()
        .map_err(|e| CliError::Config(format!("thread pool: {e}")))?;
    let ctx = Context::new(cfg)?;
    pool.install(|| match &cli.command {
        Command::Explore => commands::explore_cmd(&ctx),
        Command::Connect { db } => commands::connect_cmd(&ctx, db),
        Command::Rates { db, from, to } => commands::rates_cmd(&ctx, db, from, to),
        Command::Path { db, from, to } => commands::path_cmd(&ctx, db, *from, *to),
        Command::Dgraph { db, colour, levels } => commands::dgraph_cmd(&ctx, db, *colour, *levels),
        Command::Frustration {
            db,
            t_min,
            t_max,
            n_temps,
        } => commands::frustration_cmd(&ctx, db, *t_min, *t_max, *n_temps),
        Command::Compare { db, a, b } => commands::compare_cmd(&ctx, db, *a, *b),
        Command::Validate { db } => commands::validate_cmd(&ctx, db),
    })
}

fn main() -> ExitCode {
    env_logger::Builder::from_env(env_logger::Env::default().default_filter_or("info"))
        .format_timestamp(None)
        .init();
    let cli = Cli::parse();
    let start = Instant::now();
    let name = cli.command.name();
    let result = config(&cli.run).and_then(|cfg| {
        let seed = cfg.seed;
        run(&cli, cfg).map(|s| format!("seed={seed} {s}"))
    });
    match result {
        Ok(summary) => {
            log::info!(
                "{name} wall={:.3}s {summary}",
                start.elapsed().as_secs_f64()
            );
            ExitCode::SUCCESS
        }
        Err(e) => {
            log::error!("{name} wall={:.3}s {e}", start.elapsed().as_secs_f64());
            ExitCode::from(e.exit_code())
        }
    }
}

//! `eegtopo` command line: staged pipeline over an on-disk store.
//!
//! ```text
//! synth -> ingest -> reduce -> topo -> features -> train -> eval
//! ```
//!
//! `run-all` chains every stage; `plot-data` writes the trajectory and
//! landscape of a single segment for external plotting.

pub mod commands;
pub mod config;
pub mod error;
pub mod store;

use std::ffi::OsString;
use std::path::PathBuf;

use clap::{Parser, Subcommand};
use eegtopo::dimred::Method;

use crate::commands::Context;
use crate::config::PipelineConfig;
pub use crate::error::{CliError, CliResult};

#[derive(Debug, Parser)]
#[command(
    name = "eegtopo",
    version,
    about = "Topological classification of EEG segments"
)]
pub struct Cli {
    /// TOML config file
    #[arg(short, long, global = true, value_name = "FILE")]
    pub config: Option<PathBuf>,
    /// Output directory; overrides the config file and EEGTOPO_OUT
    #[arg(short, long, global = true, value_name = "DIR")]
    pub out: Option<String>,
    /// Master seed
    #[arg(long, global = true)]
    pub seed: Option<u64>,
    /// Worker threads (0: one per logical CPU)
    #[arg(long, global = true)]
    pub workers: Option<usize>,
    /// Override a config value, e.g. `--set svm.folds=10`
    #[arg(long = "set", global = true, value_name = "KEY=VALUE")]
    pub sets: Vec<String>,
    /// Replace stored results built with a different configuration
    #[arg(long, global = true)]
    pub force: bool,
    /// Print the resolved configuration and exit
    #[arg(long, global = true)]
    pub print_config: bool,
    #[command(subcommand)]
    pub command: Option<Command>,
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Read recordings, apply the montage and cut segments
    Ingest {
        /// Recordings (.edf or .csv) or directories of them
        inputs: Vec<String>,
        /// Label file with columns source_id,start_sample,label
        #[arg(long)]
        labels: Option<String>,
        /// bipolar, average, cz, a montage file, or none
        #[arg(long)]
        montage: Option<String>,
        /// Sampling rate of CSV inputs, Hz
        #[arg(long)]
        rate: Option<f64>,
        /// Window length, seconds
        #[arg(long)]
        window: Option<f64>,
    },
    /// Reduce every segment to a trajectory
    Reduce {
        /// dyca or pca
        #[arg(long, value_parser = parse_method)]
        method: Option<Method>,
        /// Trajectory dimension
        #[arg(short)]
        n: Option<usize>,
        /// DyCA components obeying linear equations
        #[arg(short)]
        m: Option<usize>,
    },
    /// Persistence diagrams and landscapes of every trajectory
    Topo {
        /// Longest edge in the Rips filtration; `inf` for the full diameter
        #[arg(long)]
        max_length: Option<f64>,
        /// Landscape levels written per dimension
        #[arg(long)]
        levels: Option<usize>,
    },
    /// Feature matrix from the stored diagrams
    Features,
    /// Stratified split, grid search and final model
    Train,
    /// Accuracy and confusion matrix on the held-out split
    Eval {
        /// Model file to evaluate instead of the stored one
        #[arg(long)]
        model: Option<PathBuf>,
    },
    /// Trajectory and H1 landscape CSVs of one segment
    PlotData {
        /// `source_id:start_sample` or the stored segment key
        segment: String,
        /// Destination directory (default: <output>/plot)
        #[arg(long)]
        dir: Option<PathBuf>,
    },
    /// Generate the synthetic demo corpus
    Synth {
        /// Destination directory (default: <output>/corpus)
        #[arg(long)]
        dir: Option<PathBuf>,
        /// IED segments to generate
        #[arg(long)]
        positives: Option<usize>,
        /// Background segments to generate
        #[arg(long)]
        negatives: Option<usize>,
    },
    /// Run every stage in order
    RunAll,
}

fn parse_method(text: &str) -> Result<Method, String> {
    match text.to_ascii_lowercase().as_str() {
        "dyca" => Ok(Method::Dyca),
        "pca" => Ok(Method::Pca),
        _ => Err(format!("unknown method {text:?}; expected dyca or pca")),
    }
}

/// Resolves the configuration of `cli`, including command-specific flags.
pub fn resolve_config(cli: &Cli) -> CliResult<PipelineConfig> {
    let mut config = PipelineConfig::load(cli.config.as_deref(), &cli.sets)?;
    if let Some(out) = &cli.out {
        config.output = out.clone();
    }
    if let Some(seed) = cli.seed {
        config.seed = seed;
    }
    if let Some(w) = cli.workers {
        config.workers = w;
    }
    match &cli.command {
        Some(Command::Ingest {
            inputs,
            labels,
            montage,
            rate,
            window,
        }) => {
            if !inputs.is_empty() {
                config.inputs = inputs.clone();
            }
            if let Some(l) = labels {
                config.labels = l.clone();
            }
            if let Some(m) = montage {
                config.montage = m.clone();
            }
            if let Some(r) = rate {
                config.input_rate = *r;
            }
            if let Some(w) = window {
                config.window_seconds = *w;
            }
        }
        Some(Command::Reduce { method, n, m }) => {
            if let Some(method) = method {
                config.reduce.method = *method;
            }
            if let Some(n) = n {
                config.reduce.n = *n;
            }
            if let Some(m) = m {
                config.reduce.m = *m;
            }
        }
        Some(Command::Topo { max_length, levels }) => {
            if let Some(l) = max_length {
                config.topo.max_length = *l;
            }
            if let Some(l) = levels {
                config.topo.levels = *l;
            }
        }
        Some(Command::Synth {
            positives,
            negatives,
            ..
        }) => {
            if let Some(p) = positives {
                config.synth.positives = *p;
            }
            if let Some(n) = negatives {
                config.synth.negatives = *n;
            }
        }
        _ => {}
    }
    config.validate()?;
    Ok(config)
}

/// Parses `args` (program name first) and runs the command.
pub fn run<I, T>(args: I) -> CliResult<()>
where
    I: IntoIterator<Item = T>,
    T: Into<OsString> + Clone,
{
    let cli = match Cli::try_parse_from(args) {
        Ok(cli) => cli,
        Err(e) => e.exit(),
    };
    execute(&cli)
}

pub fn execute(cli: &Cli) -> CliResult<()> {
    let config = resolve_config(cli)?;
    if cli.print_config {
        print!("{}", config.to_toml());
        return Ok(());
    }
    let Some(command) = &cli.command else {
        return Err(CliError::config("no command given; see `eegtopo --help`"));
    };
    let pool = rayon::ThreadPoolBuilder::new()
        .num_threads(config.workers)
        .build()
        .map_err(|e| CliError::new("internal", format!("worker pool: {e}")))?;
    let ctx = Context::new(config, cli.force);
    pool.install(|| match command {
        Command::Ingest { inputs, labels, .. } => {
            commands::ingest(&ctx, inputs, labels.as_deref()).map(drop)
        }
        Command::Reduce { .. } => commands::reduce(&ctx).map(drop),
        Command::Topo { .. } => commands::topo(&ctx).map(drop),
        Command::Features => commands::features(&ctx).map(drop),
        Command::Train => commands::train(&ctx).map(drop),
        Command::Eval { model } => commands::eval(&ctx, model.as_deref()).map(drop),
        Command::PlotData { segment, dir } => {
            commands::plot_data(&ctx, segment, dir.as_deref()).map(drop)
        }
        Command::Synth { dir, .. } => commands::synth(&ctx, dir.as_deref()).map(drop),
        Command::RunAll => commands::run_all(&ctx).map(drop),
    })
}

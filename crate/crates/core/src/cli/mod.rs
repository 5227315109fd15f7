//! Command-line front end. [`run`] parses arguments, executes one
//! subcommand and maps the outcome to an exit code.

mod commands;
pub mod config;

use std::ffi::OsString;
use std::path::PathBuf;

use clap::{Args, Parser, Subcommand};

pub use config::{CliConfig, EmbedConfig, PredictConfig, TextConfig};

use crate::error::{Error, ErrorKind, Result};

pub const EXIT_OK: i32 = 0;
pub const EXIT_USAGE: i32 = 1;
pub const EXIT_DATA: i32 = 2;
pub const EXIT_NUMERICAL: i32 = 3;

/// User-level depression classifier: LSTM autoencoder features with
/// attention multi-instance pooling.
#[derive(Debug, Parser)]
#[command(name = "lmilatt", version, about)]
pub struct Cli {
    #[command(flatten)]
    pub global: GlobalArgs,
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, Args)]
pub struct GlobalArgs {
    /// TOML configuration file; flags override its values.
    #[arg(long, global = true, value_name = "PATH")]
    pub config: Option<PathBuf>,
    /// Root seed for every seeded stage.
    #[arg(long, global = true)]
    pub seed: Option<u64>,
    /// Run directory (default: runs/<timestamp>-seed<seed>).
    #[arg(long, global = true, value_name = "DIR")]
    pub out: Option<PathBuf>,
    /// Worker threads; results do not depend on this value.
    #[arg(long, global = true)]
    pub threads: Option<usize>,
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Generate a synthetic embedded corpus.
    Synth {
        /// Output corpus (.bin/.lmil for binary, otherwise JSON lines).
        #[arg(long)]
        output: Option<PathBuf>,
    },
    /// Normalize the tweet text of a raw corpus.
    Preprocess {
        #[arg(long)]
        input: PathBuf,
        #[arg(long)]
        output: Option<PathBuf>,
    },
    /// Hash-embed a raw corpus, or validate and convert an embedded one.
    Embed {
        #[arg(long)]
        input: PathBuf,
        #[arg(long)]
        output: Option<PathBuf>,
        /// Treat the input as precomputed vectors instead of raw text.
        #[arg(long)]
        import: bool,
    },
    /// Pretrain the autoencoder without labels.
    #[command(name = "pretrain-ae")]
    PretrainAe {
        #[arg(long)]
        corpus: PathBuf,
        /// Use every user instead of the training split.
        #[arg(long)]
        no_split: bool,
    },
    /// Split, pretrain and train the classifier.
    Train {
        #[arg(long)]
        corpus: PathBuf,
        /// Reuse a pretrained autoencoder instead of running stage one.
        #[arg(long, value_name = "PATH")]
        autoencoder: Option<PathBuf>,
    },
    /// Score a labeled corpus, or a predictions file, and write reports.
    Eval {
        #[arg(long, required_unless_present = "predictions", requires = "corpus")]
        checkpoint: Option<PathBuf>,
        #[arg(long, requires = "checkpoint")]
        corpus: Option<PathBuf>,
        /// Output of `predict` carrying ground truth.
        #[arg(long, conflicts_with_all = ["checkpoint", "corpus"])]
        predictions: Option<PathBuf>,
        /// `history.json` from `train`, for the loss-curve table.
        #[arg(long)]
        history: Option<PathBuf>,
    },
    /// Per-user probabilities and most-attended tweets.
    Predict {
        #[arg(long)]
        checkpoint: PathBuf,
        #[arg(long)]
        corpus: PathBuf,
        #[arg(long)]
        output: Option<PathBuf>,
    },
    /// Compare attention, mean and max pooling on the same features.
    Ablate {
        #[arg(long)]
        corpus: PathBuf,
        #[arg(long, value_name = "PATH")]
        autoencoder: Option<PathBuf>,
    },
    /// Finite-difference check of every gradient.
    Gradcheck {
        #[arg(long, hide = true)]
        inject_fault: bool,
    },
}

pub fn exit_code(err: &Error) -> i32 {
    match err.kind() {
        ErrorKind::Usage => EXIT_USAGE,
        ErrorKind::Data => EXIT_DATA,
        ErrorKind::Numerical => EXIT_NUMERICAL,
    }
}

/// One stable line: `lmilatt: error[<kind>]: <message>`.
pub fn error_line(err: &Error) -> String {
    let kind = match err.kind() {
        ErrorKind::Usage => "usage",
        ErrorKind::Data => "data",
        ErrorKind::Numerical => "numerical",
    };
    let message = err.to_string().replace('\n', " ");
    format!("lmilatt: error[{kind}]: {message}")
}

/// Parses `argv` (program name first), runs the command and returns the
/// process exit code.
pub fn run<I, T>(argv: I) -> i32
where
    I: IntoIterator<Item = T>,
    T: Into<OsString> + Clone,
{
    let cli = match Cli::try_parse_from(argv) {
        Ok(cli) => cli,
        Err(e) => {
            let _ = e.print();
            return if e.use_stderr() { EXIT_USAGE } else { EXIT_OK };
        }
    };
    match execute(cli) {
        Ok(()) => EXIT_OK,
        Err(err) => {
            eprintln!("{}", error_line(&err));
            exit_code(&err)
        }
    }
}

/// Resolves configuration and runs the command on a pool of the requested
/// size.
pub fn execute(cli: Cli) -> Result<()> {
    let config = resolve_config(&cli.global)?;
    let pool = rayon::ThreadPoolBuilder::new()
        .num_threads(config.threads)
        .build()
        .map_err(|e| Error::Config(format!("thread pool: {e}")))?;
    pool.install(|| commands::dispatch(&cli.command, config))
}

fn resolve_config(global: &GlobalArgs) -> Result<CliConfig> {
    let mut config = match &global.config {
        Some(path) => CliConfig::load(path)?,
        None => CliConfig::default(),
    };
    if let Some(seed) = global.seed {
        config.seed = seed;
    }
    if let Some(threads) = global.threads {
        config.threads = threads;
    }
    if let Some(out) = &global.out {
        config.out = Some(out.clone());
    }
    if config.out.is_none() {
        let stamp = chrono::Local::now().format("%Y%m%dT%H%M%S");
        config.out = Some(PathBuf::from("runs").join(format!("{stamp}-seed{}", config.seed)));
    }
    config.resolve()
}

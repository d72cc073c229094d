//! The `simplify` command line: corpus partitioning, synthetic data,
//! training, batch simplification, evaluation and the labeled-data sweep.
//!
//! Exit codes: 0 on success, 1 on an internal or runtime failure, 2 on a
//! usage, configuration or input-file error.

pub mod kv;
mod tools;
mod train;

use std::ffi::OsString;
use std::path::PathBuf;

use clap::{Args, Parser, Subcommand};

pub use train::{sweep, SweepRow};

#[derive(Debug)]
pub enum CliError {
    /// Bad flags, configuration or input files.
    Usage(String),
    Runtime(String),
}

impl CliError {
    pub fn exit_code(&self) -> i32 {
        match self {
            CliError::Usage(_) => 2,
            CliError::Runtime(_) => 1,
        }
    }
}

impl std::fmt::Display for CliError {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        match self {
            CliError::Usage(m) | CliError::Runtime(m) => f.write_str(m),
        }
    }
}

impl From<simplify_core::Error> for CliError {
    fn from(e: simplify_core::Error) -> Self {
        use simplify_core::Error as E;
        match &e {
            E::Config(_) | E::Parse { .. } | E::EmptyInput(_) => CliError::Usage(e.to_string()),
            E::Io { source, .. } if source.kind() == std::io::ErrorKind::NotFound => CliError::Usage(e.to_string()),
            _ => CliError::Runtime(e.to_string()),
        }
    }
}

pub(crate) fn io_error(path: &std::path::Path, e: std::io::Error) -> CliError {
    CliError::from(simplify_core::Error::Io {
        path: path.to_path_buf(),
        source: e,
    })
}

#[derive(Parser, Debug)]
#[command(name = "simplify", version, about = "Unsupervised neural text simplification")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

/// Configuration shared by the configurable commands.
#[derive(Args, Debug, Clone)]
pub struct ConfigArgs {
    /// `key = value` file; command-line pairs override it.
    #[arg(long)]
    pub config: Option<PathBuf>,
    /// `key=value` overrides.
    #[arg(value_name = "KEY=VALUE")]
    pub overrides: Vec<String>,
}

#[derive(Subcommand, Debug)]
enum Command {
    /// Split a sentence file into simple and complex sets by Flesch reading ease.
    Partition {
        #[arg(long)]
        input: PathBuf,
        #[arg(long)]
        out: PathBuf,
        #[command(flatten)]
        config: ConfigArgs,
    },
    /// Generate the synthetic corpus with its synonym and embedding tables.
    Synth {
        #[arg(long)]
        out: PathBuf,
        #[arg(long)]
        seed: Option<u64>,
        #[command(flatten)]
        config: ConfigArgs,
    },
    /// Train a model on a corpus directory.
    Train {
        #[arg(long)]
        data: PathBuf,
        #[arg(long)]
        out: PathBuf,
        #[arg(long)]
        seed: Option<u64>,
        /// Continue from `<out>/state.ckpt` and `<out>/train_log.jsonl`.
        #[arg(long)]
        resume: bool,
        #[command(flatten)]
        config: ConfigArgs,
    },
    /// Simplify every line of a file.
    Simplify {
        #[arg(long)]
        model: PathBuf,
        #[arg(long)]
        input: PathBuf,
        #[arg(long)]
        output: PathBuf,
    },
    /// Score predictions against references.
    Evaluate {
        #[arg(long)]
        src: PathBuf,
        #[arg(long)]
        pred: PathBuf,
        /// Reference file; repeat for several references.
        #[arg(long = "ref", required = true)]
        refs: Vec<PathBuf>,
        #[arg(long)]
        report: PathBuf,
        /// Add-one smoothing for BLEU orders above one.
        #[arg(long)]
        smooth: bool,
    },
    /// Train at several labeled-set sizes and seeds and tabulate test metrics.
    Sweep {
        #[arg(long)]
        data: PathBuf,
        #[arg(long)]
        out: PathBuf,
        /// Labeled pairs to use; 0 trains unsupervised.
        #[arg(long, value_delimiter = ',', required = true)]
        sizes: Vec<usize>,
        #[arg(long, value_delimiter = ',', default_value = "1")]
        seeds: Vec<u64>,
        #[command(flatten)]
        config: ConfigArgs,
    },
}

fn dispatch(cli: Cli) -> Result<(), CliError> {
    match cli.command {
        Command::Partition { input, out, config } => tools::partition(&input, &out, &config),
        Command::Synth { out, seed, config } => tools::synth(&out, seed, &config),
        Command::Train {
            data,
            out,
            seed,
            resume,
            config,
        } => train::train_command(&data, &out, seed, resume, &config),
        Command::Simplify { model, input, output } => tools::simplify(&model, &input, &output),
        Command::Evaluate {
            src,
            pred,
            refs,
            report,
            smooth,
        } => tools::evaluate(&src, &pred, &refs, &report, smooth),
        Command::Sweep {
            data,
            out,
            sizes,
            seeds,
            config,
        } => train::sweep_command(&data, &out, &sizes, &seeds, &config),
    }
}

/// Runs the command line given by `args` (program name first) and returns
/// the process exit code.
pub fn run<I, T>(args: I) -> i32
where
    I: IntoIterator<Item = T>,
    T: Into<OsString> + Clone,
{
    let cli = match Cli::try_parse_from(args) {
        Ok(cli) => cli,
        Err(e) => {
            let _ = e.print();
            return if e.use_stderr() { 2 } else { 0 };
        }
    };
    match dispatch(cli) {
        Ok(()) => 0,
        Err(e) => {
            eprintln!("error: {e}");
            e.exit_code()
        }
    }
}

//! The `noisereg` command-line tool.
//!
//! Every subcommand reads one JSON config, writes its results under an output
//! directory together with the resolved config and a run manifest, and exits
//! with 0 (success), 1 (a scientific check failed) or 2 (usage or config error).

pub mod commands;
pub mod config;
pub mod data;
pub mod output;

use std::ffi::OsString;
use std::fmt;
use std::path::PathBuf;

use clap::{Args, Parser, Subcommand};

use crate::config::ExperimentConfig;

#[derive(Debug)]
pub enum CliError {
    /// Bad invocation, config, or input files. Exit code 2.
    Usage(String),
    /// A check ran and failed, or a computation broke down. Exit code 1.
    Failure(String),
}

impl CliError {
    pub fn exit_code(&self) -> i32 {
        match self {
            CliError::Usage(_) => 2,
            CliError::Failure(_) => 1,
        }
    }
}

impl fmt::Display for CliError {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            CliError::Usage(m) => write!(f, "error: {m}"),
            CliError::Failure(m) => write!(f, "failed: {m}"),
        }
    }
}

impl From<noisereg::Error> for CliError {
    fn from(e: noisereg::Error) -> Self {
        match e {
            noisereg::Error::InvalidArgument(_)
            | noisereg::Error::ShapeMismatch(_)
            | noisereg::Error::Csv { .. }
            | noisereg::Error::Infeasible(_) => CliError::Usage(e.to_string()),
            _ => CliError::Failure(e.to_string()),
        }
    }
}

pub type CliResult<T> = Result<T, CliError>;

#[derive(Debug, Parser)]
#[command(
    name = "noisereg",
    version,
    about = "Noise-injection training and effective-regularizer experiments"
)]
pub struct Cli {
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Train with Gaussian weight noise, one run per seed and noise mode.
    ///
    /// Each step perturbs the weights, takes the gradient at the perturbed
    /// point, and applies it to the clean weights.
    Train(CommonArgs),
    /// Expected smoothed loss across hidden widths, full vs layer-wise noise.
    VarianceSweep(CommonArgs),
    /// Fit log-log convergence rates of the diagonal model as sigma shrinks.
    RateProbe(CommonArgs),
    /// Compare a factored effective regularizer with its convex counterpart.
    Equivalence(CommonArgs),
    /// Compare analytic Jacobians and loss derivatives with finite differences.
    GradCheck(CommonArgs),
}

impl Command {
    pub fn name(&self) -> &'static str {
        match self {
            Command::Train(_) => "train",
            Command::VarianceSweep(_) => "variance-sweep",
            Command::RateProbe(_) => "rate-probe",
            Command::Equivalence(_) => "equivalence",
            Command::GradCheck(_) => "grad-check",
        }
    }

    fn args(&self) -> &CommonArgs {
        match self {
            Command::Train(a)
            | Command::VarianceSweep(a)
            | Command::RateProbe(a)
            | Command::Equivalence(a)
            | Command::GradCheck(a) => a,
        }
    }
}

#[derive(Debug, Clone, Args)]
pub struct CommonArgs {
    /// JSON experiment config.
    #[arg(long)]
    pub config: PathBuf,
    /// Output directory (overrides io.out_dir).
    #[arg(long)]
    pub out: Option<PathBuf>,
    /// Run with this single seed instead of sweep.seeds.
    #[arg(long)]
    pub seed: Option<u64>,
    /// Worker threads; results do not depend on this.
    #[arg(long, env = "NOISEREG_THREADS")]
    pub threads: Option<usize>,
}

/// Everything a subcommand needs: the resolved config and where to write.
pub struct Context {
    pub config: ExperimentConfig,
    /// The config file exactly as given.
    pub source: String,
    pub out_dir: PathBuf,
    pub threads: usize,
}

impl Context {
    pub fn seeds(&self) -> &[u64] {
        &self.config.sweep.seeds
    }
}

/// Parses `args` and runs the chosen subcommand, returning the exit code.
pub fn run<I, T>(args: I) -> i32
where
    I: IntoIterator<Item = T>,
    T: Into<OsString> + Clone,
{
    let cli = match Cli::try_parse_from(args) {
        Ok(c) => c,
        Err(e) => {
            let _ = e.print();
            return e.exit_code();
        }
    };
    match execute(&cli.command) {
        Ok(()) => 0,
        Err(e) => {
            eprintln!("noisereg {}: {e}", cli.command.name());
            e.exit_code()
        }
    }
}

pub fn execute(command: &Command) -> CliResult<()> {
    let args = command.args();
    let source = std::fs::read_to_string(&args.config).map_err(|e| {
        CliError::Usage(format!("cannot read config {}: {e}", args.config.display()))
    })?;
    let mut config = ExperimentConfig::parse(&source, &args.config)?;
    if let Some(seed) = args.seed {
        config.sweep.seeds = vec![seed];
    }
    let out_dir = args
        .out
        .clone()
        .or_else(|| config.io.out_dir.clone())
        .unwrap_or_else(|| PathBuf::from("noisereg-out"));
    let threads = match args.threads {
        Some(0) => return Err(CliError::Usage("--threads must be positive".into())),
        Some(t) => t,
        None => std::thread::available_parallelism().map_or(1, |n| n.get()),
    };
    let pool = rayon::ThreadPoolBuilder::new()
        .num_threads(threads)
        .build()
        .map_err(|e| CliError::Failure(format!("thread pool: {e}")))?;
    let ctx = Context {
        config,
        source,
        out_dir,
        threads,
    };
    output::prepare(&ctx, command.name())?;
    pool.install(|| match command {
        Command::Train(_) => commands::train::run(&ctx),
        Command::VarianceSweep(_) => commands::sweep::run(&ctx),
        Command::RateProbe(_) => commands::rates::run(&ctx),
        Command::Equivalence(_) => commands::equivalence::run(&ctx),
        Command::GradCheck(_) => commands::grad_check::run(&ctx),
    })
}

//! `impactwatch` command line: synth, train, tune, detect, eval, sweep, bench.

use std::process::ExitCode;

use clap::{Args, Parser, Subcommand};
use impactwatch::{ErrorKind, RunConfig};

pub mod commands;

pub const EXIT_CONFIG: u8 = 2;
pub const EXIT_IO: u8 = 3;
pub const EXIT_DEGENERATE: u8 = 4;
pub const EXIT_CONTRACT: u8 = 5;

#[derive(Debug, Parser)]
#[command(name = "impactwatch", version, about = "Streaming accelerometer fall detection")]
pub struct Cli {
    /// Worker threads for training and scoring (default: all cores).
    #[arg(long, global = true)]
    pub threads: Option<usize>,
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Generate a seeded synthetic dataset with annotated falls.
    Synth(commands::synth::SynthArgs),
    /// Train a window classifier on a dataset.
    Train(commands::train::TrainArgs),
    /// Tune the decision threshold by participant-wise cross-validation.
    Tune(commands::tune::TuneArgs),
    /// Run a trained model over recordings in streaming mode.
    Detect(commands::detect::DetectArgs),
    /// Score detections against annotations.
    Eval(commands::eval::EvalArgs),
    /// Cross-validate every candidate window size.
    Sweep(commands::sweep::SweepArgs),
    /// Measure per-window inference latency.
    Bench(commands::bench::BenchArgs),
}

/// Pipeline settings shared by most commands. Unset flags keep the base
/// configuration (defaults, or the one stored with a model).
#[derive(Debug, Clone, Default, Args)]
pub struct RunArgs {
    /// Window size in seconds.
    #[arg(long = "w")]
    pub w: Option<u32>,
    /// Window step in seconds.
    #[arg(long)]
    pub step: Option<u32>,
    /// Detection tolerance in seconds.
    #[arg(long)]
    pub tolerance: Option<f64>,
    /// Impact gate in g.
    #[arg(long)]
    pub gate: Option<f64>,
    /// Cost of a missed fall relative to a false alarm.
    #[arg(long)]
    pub cost_ratio: Option<u32>,
    #[arg(long)]
    pub folds: Option<usize>,
    /// Number of points in the threshold grid.
    #[arg(long)]
    pub grid: Option<usize>,
    #[arg(long)]
    pub trees: Option<usize>,
    #[arg(long)]
    pub seed: Option<u64>,
}

impl RunArgs {
    pub fn apply(&self, base: RunConfig) -> impactwatch::Result<RunConfig> {
        let cfg = RunConfig {
            w_seconds: self.w.unwrap_or(base.w_seconds),
            step_seconds: self.step.unwrap_or(base.step_seconds),
            tolerance_seconds: self.tolerance.unwrap_or(base.tolerance_seconds),
            gate_g: self.gate.unwrap_or(base.gate_g),
            cost_ratio: self.cost_ratio.unwrap_or(base.cost_ratio),
            folds: self.folds.unwrap_or(base.folds),
            grid_size: self.grid.unwrap_or(base.grid_size),
            n_trees: self.trees.unwrap_or(base.n_trees),
            seed: self.seed.unwrap_or(base.seed),
            ..base
        };
        cfg.validate()?;
        Ok(cfg)
    }
}

pub fn run(cli: Cli) -> anyhow::Result<()> {
    let command = cli.command;
    let dispatch = move || match command {
        Command::Synth(a) => commands::synth::run(&a),
        Command::Train(a) => commands::train::run(&a),
        Command::Tune(a) => commands::tune::run(&a),
        Command::Detect(a) => commands::detect::run(&a),
        Command::Eval(a) => commands::eval::run(&a),
        Command::Sweep(a) => commands::sweep::run(&a),
        Command::Bench(a) => commands::bench::run(&a),
    };
    match cli.threads {
        Some(n) => rayon::ThreadPoolBuilder::new()
            .num_threads(n)
            .build()
            .map_err(|e| impactwatch::Error::Config(format!("thread pool: {e}")))?
            .install(dispatch),
        None => dispatch(),
    }
}

/// Process exit code for an error: the first library error in the chain
/// decides; bare I/O errors map to the I/O code.
pub fn exit_code(err: &anyhow::Error) -> u8 {
    for cause in err.chain() {
        if let Some(e) = cause.downcast_ref::<impactwatch::Error>() {
            return match e.kind() {
                ErrorKind::Config => EXIT_CONFIG,
                ErrorKind::Io => EXIT_IO,
                ErrorKind::DegenerateTraining => EXIT_DEGENERATE,
                ErrorKind::Contract => EXIT_CONTRACT,
            };
        }
        if cause.downcast_ref::<std::io::Error>().is_some() {
            return EXIT_IO;
        }
    }
    1
}

pub fn main_with_args<I, T>(args: I) -> ExitCode
where
    I: IntoIterator<Item = T>,
    T: Into<std::ffi::OsString> + Clone,
{
    let cli = match Cli::try_parse_from(args) {
        Ok(cli) => cli,
        Err(e) => {
            let _ = e.print();
            return ExitCode::from(if e.use_stderr() { EXIT_CONFIG } else { 0 });
        }
    };
    match run(cli) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e:#}");
            ExitCode::from(exit_code(&e))
        }
    }
}

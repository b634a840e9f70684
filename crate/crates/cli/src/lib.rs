//! `laionc`: command-line adapters over `laionc_core` plus the HTTP service
//! for the forced-choice experiment.

pub mod commands;
pub mod config;
pub mod serve;

use std::ffi::OsString;
use std::path::PathBuf;

use clap::{Args, Parser, Subcommand};
use serde_json::Value;

/// Exit status for a handled failure.
pub const EXIT_FAILURE: i32 = 1;
/// Exit status for bad invocations.
pub const EXIT_USAGE: i32 = 2;

/// Marks an error as a usage problem (exit 2) rather than a failure (exit 1).
#[derive(Debug)]
pub struct UsageError(pub String);

impl std::fmt::Display for UsageError {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.write_str(&self.0)
    }
}

impl std::error::Error for UsageError {}

#[derive(Parser, Debug)]
#[command(name = "laionc", version, about = "LAION-C corruption, dataset and evaluation toolkit", arg_required_else_help = true)]
pub struct Cli {
    #[command(flatten)]
    pub global: GlobalArgs,
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Args, Debug, Clone, Default)]
pub struct GlobalArgs {
    /// JSON config file for build, coverage, vlm-run and serve.
    #[arg(long, global = true, value_name = "FILE")]
    pub config: Option<PathBuf>,
    /// Override one config key (dotted paths reach nested keys).
    #[arg(long = "set", global = true, value_name = "KEY=VALUE")]
    pub set: Vec<String>,
    /// Global seed for every random stream.
    #[arg(long, global = true)]
    pub seed: Option<u64>,
    /// Append the effective configuration to this JSON Lines file.
    #[arg(long, global = true, value_name = "FILE")]
    pub run_log: Option<PathBuf>,
    /// More log output (repeatable).
    #[arg(short, long, global = true, action = clap::ArgAction::Count)]
    pub verbose: u8,
}

#[derive(Subcommand, Debug)]
pub enum Command {
    /// Corrupt one image with one kind at one severity.
    Corrupt(commands::CorruptArgs),
    /// Cut a donor patch pool from a directory of images.
    PoolBuild(commands::PoolBuildArgs),
    /// Build a dataset from a build config.
    Build(commands::BuildArgs),
    /// Monte Carlo overlay coverage for Stickers and Geometric Shapes.
    Coverage(commands::CoverageArgs),
    /// Accuracy tables and headline scores for observation logs.
    Eval(commands::EvalArgs),
    /// Error consistency between two observers.
    Ec(commands::EcArgs),
    /// Fréchet distance between two feature files.
    Fid(commands::FidArgs),
    /// Query a vision-language model over a dataset subset.
    VlmRun(commands::VlmRunArgs),
    /// Serve the experiment API.
    Serve(serve::ServeArgs),
    /// Render all 30 corruption cells of one image into a contact sheet.
    Gallery(commands::GalleryArgs),
}

impl Command {
    fn name(&self) -> &'static str {
        match self {
            Command::Corrupt(_) => "corrupt",
            Command::PoolBuild(_) => "pool-build",
            Command::Build(_) => "build",
            Command::Coverage(_) => "coverage",
            Command::Eval(_) => "eval",
            Command::Ec(_) => "ec",
            Command::Fid(_) => "fid",
            Command::VlmRun(_) => "vlm-run",
            Command::Serve(_) => "serve",
            Command::Gallery(_) => "gallery",
        }
    }

    fn takes_config(&self) -> bool {
        matches!(self, Command::Build(_) | Command::Coverage(_) | Command::VlmRun(_) | Command::Serve(_))
    }
}

/// Records what a run did, enough to repeat it.
pub fn record_run(global: &GlobalArgs, subcommand: &str, seed: u64, effective: &Value) -> anyhow::Result<()> {
    let entry = serde_json::json!({
        "toolkit": "laionc",
        "version": env!("CARGO_PKG_VERSION"),
        "subcommand": subcommand,
        "seed": seed,
        "config": effective,
    });
    log::info!("effective config: {entry}");
    if let Some(path) = &global.run_log {
        use std::io::Write;
        let mut f = std::fs::OpenOptions::new().create(true).append(true).open(path)?;
        writeln!(f, "{entry}")?;
    }
    Ok(())
}

fn dispatch(cli: Cli) -> anyhow::Result<()> {
    if !cli.command.takes_config() && (cli.global.config.is_some() || !cli.global.set.is_empty()) {
        return Err(UsageError(format!("{} takes no --config/--set", cli.command.name())).into());
    }
    let g = &cli.global;
    match cli.command {
        Command::Corrupt(a) => commands::corrupt(g, a),
        Command::PoolBuild(a) => commands::pool_build(g, a),
        Command::Build(a) => commands::build(g, a),
        Command::Coverage(a) => commands::coverage(g, a),
        Command::Eval(a) => commands::eval(g, a),
        Command::Ec(a) => commands::ec(g, a),
        Command::Fid(a) => commands::fid(g, a),
        Command::VlmRun(a) => commands::vlm_run(g, a),
        Command::Serve(a) => serve::serve(g, a),
        Command::Gallery(a) => commands::gallery(g, a),
    }
}

/// Parses `argv` and runs the subcommand; returns the process exit status.
pub fn run<I, T>(argv: I) -> i32
where
    I: IntoIterator<Item = T>,
    T: Into<OsString> + Clone,
{
    let cli = match Cli::try_parse_from(argv) {
        Ok(c) => c,
        Err(e) => {
            let _ = e.print();
            return e.exit_code();
        }
    };
    let level = match cli.global.verbose {
        0 => "warn",
        1 => "info",
        _ => "debug",
    };
    let _ = env_logger::Builder::from_env(env_logger::Env::default().default_filter_or(level)).try_init();
    match dispatch(cli) {
        Ok(()) => 0,
        Err(e) => {
            if let Some(u) = e.downcast_ref::<UsageError>() {
                eprintln!("usage error: {u}");
                eprintln!("run `laionc --help` for the synopsis");
                EXIT_USAGE
            } else {
                for line in format!("{e:#}").lines() {
                    eprintln!("error: {line}");
                }
                EXIT_FAILURE
            }
        }
    }
}

use std::io::{self, Write};
use std::path::{Path, PathBuf};
use std::process::ExitCode;

use clap::{Parser, Subcommand, ValueEnum};
use log::info;

use shiptrack::engine::{simulate, RunOptions};
use shiptrack::output::{write_run_dir, OutputError, OutputOptions};
use shiptrack::scenario::{Scenario, ScenarioError, PAPER_FIG3};
use shiptrack::summary::{summarize, write_summary_json, SummaryError};
use shiptrack::EngineError;

const EXIT_CONFIG: u8 = 2;
const EXIT_INPUT: u8 = 3;
const EXIT_RUNTIME: u8 = 4;

#[derive(Parser)]
#[command(name = "shiptrack", version, about = "Ship-track aerosol simulator")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Clone, Copy, ValueEnum)]
enum Format {
    Pgm,
}

#[derive(Subcommand)]
enum Command {
    /// Run a simulation and write a run directory.
    Simulate {
        /// TOML config file.
        #[arg(long, conflicts_with = "preset")]
        config: Option<PathBuf>,
        /// Built-in scenario (`paper-fig3`).
        #[arg(long)]
        preset: Option<String>,
        /// Overrides the config seed.
        #[arg(long)]
        seed: Option<u64>,
        #[arg(long, default_value = "run")]
        out: PathBuf,
        /// Write PGM frames.
        #[arg(long, overrides_with = "no_frames")]
        frames: bool,
        #[arg(long = "no-frames", overrides_with = "frames")]
        no_frames: bool,
        #[arg(long, value_enum, default_value = "pgm")]
        format: Format,
    },
    /// Report metrics of a finished run directory.
    Summarize { dir: PathBuf },
}

struct Failure {
    code: u8,
    message: String,
}

impl Failure {
    fn new(code: u8, message: impl ToString) -> Self {
        Self { code, message: message.to_string() }
    }
}

impl From<ScenarioError> for Failure {
    fn from(e: ScenarioError) -> Self {
        Self::new(if e.is_config() { EXIT_CONFIG } else { EXIT_INPUT }, e)
    }
}

impl From<EngineError> for Failure {
    fn from(e: EngineError) -> Self {
        match e {
            EngineError::Config(_) => Self::new(EXIT_CONFIG, e),
            _ => Self::new(EXIT_RUNTIME, e),
        }
    }
}

impl From<OutputError> for Failure {
    fn from(e: OutputError) -> Self {
        Self::new(EXIT_RUNTIME, e)
    }
}

impl From<SummaryError> for Failure {
    fn from(e: SummaryError) -> Self {
        match e {
            SummaryError::MissingLog(_) | SummaryError::Malformed { .. } => Self::new(EXIT_INPUT, e),
            SummaryError::Io { .. } => Self::new(EXIT_RUNTIME, e),
        }
    }
}

fn run_simulation(
    config: Option<&Path>,
    preset: Option<&str>,
    seed: Option<u64>,
    out: &Path,
    frames: bool,
) -> Result<(), Failure> {
    let mut scenario = match (config, preset) {
        (Some(path), _) => Scenario::<f64>::load(path)?,
        (None, Some(name)) => Scenario::preset(name, 0)?,
        (None, None) => Scenario::preset(PAPER_FIG3, 0)?,
    };
    if let Some(seed) = seed {
        scenario.config.seed = seed;
    }
    let scene = scenario.into_scene()?;
    info!("simulating {} frames, seed {}", scene.cfg.n_frames, scene.cfg.seed);
    let result = simulate(&scene, RunOptions { render: true })?;
    write_run_dir(&scene, &result, out, OutputOptions { frames })?;
    info!("wrote {}", out.display());
    Ok(())
}

fn run_summary(dir: &Path) -> Result<(), Failure> {
    let summary = summarize(dir)?;
    let json = write_summary_json(dir, &summary)?;
    // a closed pipe (e.g. `| head`) is not an error
    let mut out = io::stdout().lock();
    let _ = writeln!(out, "{summary}").and_then(|_| writeln!(out, "json: {}", json.display()));
    Ok(())
}

fn main() -> ExitCode {
    env_logger::Builder::from_env(env_logger::Env::default().default_filter_or("warn")).init();
    let cli = Cli::parse();
    let outcome = match &cli.command {
        Command::Simulate { config, preset, seed, out, frames: _, no_frames, format: Format::Pgm } => {
            run_simulation(config.as_deref(), preset.as_deref(), *seed, out, !no_frames)
        }
        Command::Summarize { dir } => run_summary(dir),
    };
    match outcome {
        Ok(()) => ExitCode::SUCCESS,
        Err(f) => {
            eprintln!("error: {}", f.message);
            ExitCode::from(f.code)
        }
    }
}

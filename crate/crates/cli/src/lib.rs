//! `movdet` command line: detection, evaluation, synthetic sequences and
//! throughput measurement over sequence directories.

use std::ffi::OsString;
use std::io::Write;
use std::path::PathBuf;

use clap::{Args, CommandFactory, FromArgMatches, Parser, Subcommand};

mod commands;
pub mod config;

pub use config::RunConfig;

/// Failure of a command, classified by exit code.
#[derive(Debug, thiserror::Error)]
pub enum CliError {
    #[error("{0}")]
    Usage(String),
    #[error("{0}")]
    Data(String),
    #[error("{0}")]
    Internal(String),
}

impl CliError {
    pub fn exit_code(&self) -> i32 {
        match self {
            CliError::Usage(_) => 1,
            CliError::Data(_) => 2,
            CliError::Internal(_) => 3,
        }
    }
}

impl From<movdet_core::Error> for CliError {
    fn from(e: movdet_core::Error) -> Self {
        if e.is_data_error() {
            CliError::Data(e.to_string())
        } else {
            CliError::Internal(e.to_string())
        }
    }
}

impl From<std::io::Error> for CliError {
    fn from(e: std::io::Error) -> Self {
        CliError::Data(e.to_string())
    }
}

#[derive(Debug, Parser)]
#[command(name = "movdet", version, about = "Moving-object detection for moving cameras")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Debug, Clone, Args)]
struct ConfigArgs {
    /// TOML file of configuration keys.
    #[arg(long, value_name = "FILE")]
    config: Option<PathBuf>,
    /// Override one configuration key; repeatable.
    #[arg(long = "set", value_name = "KEY=VALUE")]
    set: Vec<String>,
}

impl ConfigArgs {
    fn load(&self) -> Result<RunConfig, CliError> {
        RunConfig::load(self.config.as_deref(), &self.set)
    }
}

#[derive(Debug, Subcommand)]
enum Command {
    /// Run the detector over a sequence and write one box file per frame.
    Detect {
        /// Sequence directory containing images/.
        seq: PathBuf,
        /// Output directory [default: <SEQ>/detections].
        #[arg(long, value_name = "DIR")]
        out: Option<PathBuf>,
        /// Also write frames with the boxes drawn to <OUT>/overlay.
        #[arg(long)]
        overlay: bool,
        #[command(flatten)]
        config: ConfigArgs,
    },
    /// Score detections against ground truth. Without DETECTIONS the
    /// detector is run first.
    Evaluate {
        /// A sequence directory, or a directory of sequence directories.
        path: PathBuf,
        /// Box files per frame; for a directory of sequences, one
        /// subdirectory per sequence name.
        detections: Option<PathBuf>,
        /// Print comma-separated records instead of a table.
        #[arg(long)]
        csv: bool,
        #[command(flatten)]
        config: ConfigArgs,
    },
    /// Render a synthetic sequence with ground truth from a TOML description.
    Synth {
        /// Synthetic sequence description (TOML).
        config: PathBuf,
        /// Destination sequence directory.
        out: PathBuf,
    },
    /// Measure throughput and per-stage timings.
    Bench {
        /// Sequence directory; omit when using --synth.
        seq: Option<PathBuf>,
        /// Benchmark on an in-memory synthetic sequence of this size.
        #[arg(long, value_name = "WxH", conflicts_with = "seq")]
        synth: Option<String>,
        /// Number of frames to process [default: all, or 100 with --synth].
        #[arg(long)]
        frames: Option<usize>,
        #[command(flatten)]
        config: ConfigArgs,
    },
    /// Print the effective configuration as TOML.
    Config {
        #[command(flatten)]
        config: ConfigArgs,
    },
}

const SYNTH_HELP: &str = "\
Description keys (all optional):
  width = 640, height = 360, frame_count = 200, seed = 1
  base = 128.0                    mean background intensity
  noise_sigma = 0.0               Gaussian pixel noise
  [[octaves]] cell, amplitude     value-noise layers (default 53/48, 23/24, 11/10)
  [camera] tx, ty, rotation, zoom per-frame background motion about the centre
  [[sprites]] x, y, w, h, vx, vy, color = [r, g, b]

Example:
  frame_count = 50
  [camera]
  tx = 2.0
  [[sprites]]
  x = 10.0
  y = 170.0
  w = 20
  h = 20
  vx = 3.0
  vy = 0.0
  color = [220, 60, 60]";

fn command_line() -> clap::Command {
    let help = config::help_text();
    let mut cmd = Cli::command();
    for name in ["detect", "evaluate", "bench", "config"] {
        cmd = cmd.mut_subcommand(name, |c| c.after_help(help.clone()));
    }
    cmd.mut_subcommand("synth", |c| c.after_help(SYNTH_HELP))
}

/// Parses `args` (program name first) and runs the command, writing to the
/// process's standard streams. Returns the exit code.
pub fn run_command<I, T>(args: I) -> i32
where
    I: IntoIterator<Item = T>,
    T: Into<OsString> + Clone,
{
    let stdout = std::io::stdout();
    let stderr = std::io::stderr();
    run_command_with(args, &mut stdout.lock(), &mut stderr.lock())
}

/// [`run_command`] with explicit output streams.
pub fn run_command_with<I, T>(args: I, out: &mut dyn Write, err: &mut dyn Write) -> i32
where
    I: IntoIterator<Item = T>,
    T: Into<OsString> + Clone,
{
    let matches = match command_line().try_get_matches_from(args) {
        Ok(m) => m,
        Err(e) => {
            use clap::error::ErrorKind;
            let text = e.render().to_string();
            return match e.kind() {
                ErrorKind::DisplayHelp | ErrorKind::DisplayVersion => {
                    let _ = write!(out, "{text}");
                    0
                }
                _ => {
                    let _ = write!(err, "{text}");
                    1
                }
            };
        }
    };
    let cli = match Cli::from_arg_matches(&matches) {
        Ok(c) => c,
        Err(e) => {
            let _ = write!(err, "{}", e.render());
            return 1;
        }
    };
    match dispatch(cli.command, out, err) {
        Ok(()) => 0,
        Err(e) => {
            let _ = writeln!(err, "error: {e}");
            if matches!(e, CliError::Usage(_)) {
                let _ = writeln!(err, "run with --help for usage");
            }
            e.exit_code()
        }
    }
}

fn dispatch(command: Command, out: &mut dyn Write, err: &mut dyn Write) -> Result<(), CliError> {
    match command {
        Command::Detect {
            seq,
            out: dir,
            overlay,
            config,
        } => commands::detect(&seq, dir, overlay, &config.load()?, out, err),
        Command::Evaluate {
            path,
            detections,
            csv,
            config,
        } => commands::evaluate(&path, detections.as_deref(), csv, &config.load()?, out, err),
        Command::Synth { config, out: dir } => commands::synth(&config, &dir, out),
        Command::Bench {
            seq,
            synth,
            frames,
            config,
        } => {
            let source = match (seq, synth) {
                (Some(seq), None) => commands::BenchSource::Sequence(seq),
                (None, Some(size)) => commands::BenchSource::Synthetic(commands::parse_size(&size)?),
                _ => return Err(CliError::Usage("bench needs a sequence directory or --synth WxH".into())),
            };
            commands::bench(source, frames, &config.load()?, out, err)
        }
        Command::Config { config } => {
            write!(out, "{}", config.load()?.to_toml())?;
            Ok(())
        }
    }
}

//! Argument parsing for the `otfs-lab` binary.

use std::ffi::OsString;
use std::path::PathBuf;

use clap::{Args, Parser, Subcommand};
use serde_json::json;

use crate::config::{run, Command, ExperimentConfig};
use crate::error::{Error, Result};
use crate::grid::GridParams;
use crate::modem::Scheme;

#[derive(Debug, Parser)]
#[command(name = "otfs-lab", version, about = "OTFS / TICP4-OTFS waveform experiments")]
struct Cli {
    #[command(subcommand)]
    command: Sub,
}

#[derive(Debug, Subcommand)]
enum Sub {
    /// Full ambiguity surfaces of the shaped probe.
    Ambiguity(Overrides),
    /// Zero-Doppler and zero-delay ambiguity cuts.
    Cuts(Overrides),
    /// Pulse-compression range profiles of a multi-target scene.
    Range(Overrides),
    /// Monte-Carlo BER with LMMSE detection.
    Ber(Overrides),
    /// Built-in invariant checks.
    Selftest(Overrides),
    /// Run whatever command the config file names.
    Run(Overrides),
}

#[derive(Debug, Args)]
struct Overrides {
    /// JSON experiment config; flags below override its values.
    #[arg(long)]
    config: Option<PathBuf>,
    #[arg(long = "M")]
    m: Option<usize>,
    #[arg(long = "N")]
    n: Option<usize>,
    /// Scheme(s): otfs, ticp4. Repeat or comma-separate.
    #[arg(long, value_delimiter = ',')]
    scheme: Vec<String>,
    /// SNR grid in dB, comma-separated.
    #[arg(long, value_delimiter = ',', allow_hyphen_values = true)]
    snr: Vec<f64>,
    #[arg(long)]
    seed: Option<u64>,
    #[arg(long)]
    out_dir: Option<PathBuf>,
    /// Frames per BER point.
    #[arg(long)]
    frames: Option<usize>,
}

impl Overrides {
    fn resolve(self, command: Option<Command>) -> Result<ExperimentConfig> {
        let mut config = match (&self.config, command) {
            (Some(path), _) => ExperimentConfig::from_path(path)?,
            (None, Some(c)) => ExperimentConfig::new(c),
            (None, None) => return Err(Error::validation("`run` needs --config")),
        };
        if let Some(c) = command {
            config.command = c;
        }
        if self.m.is_some() || self.n.is_some() {
            let g = config.grid;
            config.grid = GridParams::new(
                self.m.unwrap_or(g.m()),
                self.n.unwrap_or(g.n()),
                g.slot_duration(),
                g.oversampling(),
            )?;
        }
        if !self.scheme.is_empty() {
            config.schemes = self
                .scheme
                .iter()
                .map(|s| s.parse())
                .collect::<Result<Vec<Scheme>>>()?;
        }
        if !self.snr.is_empty() {
            config.ber.snr_db = self.snr;
        }
        if let Some(seed) = self.seed {
            config.seed = seed;
        }
        if let Some(dir) = self.out_dir {
            config.out_dir = dir;
        }
        if let Some(frames) = self.frames {
            config.ber.frames = frames;
        }
        Ok(config)
    }
}

/// Process exit status for an error: 2 for numerical failures, 1 otherwise.
pub fn exit_code(err: &Error) -> i32 {
    match err {
        Error::Numerical(_) => 2,
        _ => 1,
    }
}

/// Machine-readable error line written to standard error.
pub fn error_json(err: &Error) -> String {
    json!({"error": err.kind(), "message": err.to_string()}).to_string()
}

/// Parses `args`, runs the command and returns the process exit status.
/// The summary JSON goes to standard output, progress and errors to
/// standard error.
pub fn main_with_args<I, T>(args: I) -> i32
where
    I: IntoIterator<Item = T>,
    T: Into<OsString> + Clone,
{
    let cli = match Cli::try_parse_from(args) {
        Ok(cli) => cli,
        Err(e) if !e.use_stderr() => {
            print!("{e}");
            return 0;
        }
        Err(e) => {
            let err = Error::validation(e.to_string().trim().to_string());
            eprintln!("{}", error_json(&err));
            return 1;
        }
    };
    let (overrides, command) = match cli.command {
        Sub::Ambiguity(o) => (o, Some(Command::Ambiguity)),
        Sub::Cuts(o) => (o, Some(Command::Cuts)),
        Sub::Range(o) => (o, Some(Command::Range)),
        Sub::Ber(o) => (o, Some(Command::Ber)),
        Sub::Selftest(o) => (o, Some(Command::Selftest)),
        Sub::Run(o) => (o, None),
    };
    let outcome = overrides.resolve(command).and_then(|config| {
        let summary = run(&config, |line| eprintln!("{line}"))?;
        Ok(serde_json::to_string_pretty(&summary)?)
    });
    match outcome {
        Ok(text) => {
            println!("{text}");
            0
        }
        Err(e) => {
            eprintln!("{}", error_json(&e));
            exit_code(&e)
        }
    }
}

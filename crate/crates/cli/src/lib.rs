//! `pmu`: operator entry points for the PMU pipeline.
//!
//! Every subcommand resolves its settings from the `--config` file section of
//! the same name, then applies command-line flags on top (flags win). The
//! resolved settings are hashed and the hash is printed to stderr, so a run is
//! reproducible from that hash plus its inputs.
//!
//! Exit codes: 0 success, 1 usage error, 2 I/O error, 3 validation error.

use std::ffi::OsString;
use std::path::{Path, PathBuf};
use std::process::ExitCode;

use anyhow::Context;
use clap::{Parser, Subcommand};
use serde::{de::DeserializeOwned, Serialize};
use sha2::{Digest, Sha256};

mod commands;

pub use commands::FileConfig;

pub const EXIT_USAGE: u8 = 1;
pub const EXIT_IO: u8 = 2;
pub const EXIT_VALIDATION: u8 = 3;

#[derive(Debug, Parser)]
#[command(name = "pmu", version, about = "Hit-sound detection pipeline and match service")]
pub struct Cli {
    /// JSON config file with one optional section per subcommand.
    #[arg(long, global = true, env = "PMU_CONFIG")]
    pub config: Option<PathBuf>,
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Render a synthetic corpus (WAVs + manifest) or a single clip.
    Synth(commands::synth::SynthArgs),
    /// Write the spectrogram of a WAV file as CSV.
    Featurize(commands::featurize::FeaturizeArgs),
    /// Split a manifest, train a model and write its checkpoint.
    Train(commands::train::TrainArgs),
    /// Evaluate a checkpoint on a manifest and write a JSON report.
    Eval(commands::eval::EvalArgs),
    /// Classify one WAV window.
    Infer(commands::infer::InferArgs),
    /// Run the streaming detector over a WAV file or raw PCM on stdin.
    Detect(commands::detect::DetectArgs),
    /// Host the match service.
    Serve(commands::serve::ServeArgs),
    /// Rebuild the final match state from an event log.
    Replay(commands::replay::ReplayArgs),
}

/// A usage problem detected after parsing, e.g. a required input missing
/// from both the flags and the config file.
#[derive(Debug)]
pub struct UsageError(pub String);

impl std::fmt::Display for UsageError {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.write_str(&self.0)
    }
}

impl std::error::Error for UsageError {}

pub(crate) fn usage(message: impl Into<String>) -> anyhow::Error {
    UsageError(message.into()).into()
}

/// A required setting: `name` is the flag spelling used in the message.
pub(crate) fn required<T: Clone>(value: &Option<T>, name: &str, section: &str) -> anyhow::Result<T> {
    value
        .clone()
        .ok_or_else(|| usage(format!("missing --{name} (or \"{}\" in the \"{section}\" config section)", name.replace('-', "_"))))
}

/// Exit code for a failed run.
pub fn exit_code(err: &anyhow::Error) -> u8 {
    if err.downcast_ref::<UsageError>().is_some() {
        EXIT_USAGE
    } else if err.chain().any(|e| e.is::<std::io::Error>()) {
        EXIT_IO
    } else {
        EXIT_VALIDATION
    }
}

/// SHA-256 over the canonical JSON of `{command, settings}`.
pub fn config_hash<T: Serialize>(command: &str, settings: &T) -> String {
    let doc = serde_json::json!({ "command": command, "settings": settings });
    let bytes = serde_json::to_vec(&doc).expect("settings serialize");
    hex(&Sha256::digest(&bytes))
}

pub fn sha256_hex(bytes: &[u8]) -> String {
    hex(&Sha256::digest(bytes))
}

fn hex(bytes: &[u8]) -> String {
    bytes.iter().map(|b| format!("{b:02x}")).collect()
}

pub(crate) fn read_json<T: DeserializeOwned>(path: &Path, what: &str) -> anyhow::Result<T> {
    let text = std::fs::read_to_string(path).with_context(|| format!("reading {what} {}", path.display()))?;
    serde_json::from_str(&text).with_context(|| format!("parsing {what} {}", path.display()))
}

pub(crate) fn write_or_print(out: Option<&Path>, text: &str) -> anyhow::Result<()> {
    match out {
        Some(path) => std::fs::write(path, text).with_context(|| format!("writing {}", path.display())),
        None => {
            print!("{text}");
            Ok(())
        }
    }
}

pub fn load_config(path: Option<&Path>) -> anyhow::Result<FileConfig> {
    match path {
        Some(p) => read_json(p, "config"),
        None => Ok(FileConfig::default()),
    }
}

/// Parse, execute and map the outcome to an exit code. Diagnostics go to
/// stderr; command output goes to stdout or the requested files.
pub fn run<I, T>(argv: I) -> ExitCode
where
    I: IntoIterator<Item = T>,
    T: Into<OsString> + Clone,
{
    let cli = match Cli::try_parse_from(argv) {
        Ok(cli) => cli,
        Err(e) => {
            let _ = e.print();
            return if e.use_stderr() {
                ExitCode::from(EXIT_USAGE)
            } else {
                ExitCode::SUCCESS
            };
        }
    };
    match execute(cli) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e:#}");
            ExitCode::from(exit_code(&e))
        }
    }
}

pub fn execute(cli: Cli) -> anyhow::Result<()> {
    let file = load_config(cli.config.as_deref())?;
    commands::dispatch(cli.command, file)
}

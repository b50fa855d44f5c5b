use std::path::PathBuf;

use anyhow::Context;
use clap::Args;
use pmu_core::game::{log_from_jsonl, replay, MatchConfig};
use serde::{Deserialize, Serialize};

use super::overlay;
use crate::{read_json, required, write_or_print};

#[derive(Debug, Args)]
pub struct ReplayArgs {
    /// Event log written by `serve` (JSON Lines).
    #[arg(long)]
    pub log: Option<PathBuf>,
    /// Match config JSON; defaults to the config file's `replay.match`,
    /// then `serve.match`, then the built-in match.
    #[arg(long = "match")]
    pub match_file: Option<PathBuf>,
    /// Final state destination; stdout when omitted.
    #[arg(long)]
    pub out: Option<PathBuf>,
}

#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct ReplaySettings {
    pub log: Option<PathBuf>,
    #[serde(rename = "match")]
    pub match_config: Option<MatchConfig>,
    pub out: Option<PathBuf>,
}

impl ReplayArgs {
    pub fn resolve(&self, mut s: ReplaySettings, serve_match: Option<MatchConfig>) -> anyhow::Result<ReplaySettings> {
        overlay!(s, self; some log, some out);
        if let Some(path) = &self.match_file {
            s.match_config = Some(read_json(path, "match config")?);
        }
        if s.match_config.is_none() {
            s.match_config = serve_match;
        }
        Ok(s)
    }
}

pub fn run(s: &ReplaySettings) -> anyhow::Result<()> {
    let log_path = required(&s.log, "log", "replay")?;
    let config = s.match_config.clone().unwrap_or_default();
    let text = std::fs::read_to_string(&log_path).with_context(|| format!("reading {}", log_path.display()))?;
    let log = log_from_jsonl(&text)?;
    let state = replay(config, &log)?;
    let mut json = serde_json::to_string_pretty(&state.snapshot())?;
    json.push('\n');
    write_or_print(s.out.as_deref(), &json)
}

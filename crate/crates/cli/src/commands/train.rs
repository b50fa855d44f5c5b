use std::path::{Path, PathBuf};

use anyhow::Context;
use clap::Args;
use pmu_core::dsp::FrontEnd;
use pmu_core::train::{
    history_csv, split_dataset, train_from_manifests, Checkpoint, DatasetManifest, LrPhase,
    SplitRatio, TrainConfig,
};
use serde::{Deserialize, Serialize};

use super::overlay;
use crate::{required, sha256_hex};

#[derive(Debug, Args)]
pub struct TrainArgs {
    /// Manifest (JSON Lines) listing every labelled clip; it is split here.
    #[arg(long)]
    pub manifest: Option<PathBuf>,
    /// Checkpoint destination.
    #[arg(long)]
    pub out: Option<PathBuf>,
    /// History CSV destination; defaults to `<out>.history.csv`.
    #[arg(long)]
    pub history: Option<PathBuf>,
    /// Write train/val/test manifests (absolute paths) into this directory.
    #[arg(long)]
    pub splits_dir: Option<PathBuf>,
    /// Seeds the split, the initialization and the batch draws.
    #[arg(long)]
    pub seed: Option<u64>,
    /// Rescale the learning-rate schedule to this many steps.
    #[arg(long)]
    pub steps: Option<u64>,
    #[arg(long)]
    pub batch_size: Option<usize>,
    /// Steps between validation passes (history rows).
    #[arg(long)]
    pub eval_interval: Option<u64>,
    /// Split ratio as train:val:test, e.g. 8:1:1.
    #[arg(long, value_parser = parse_split)]
    pub split: Option<SplitRatio>,
    /// Train behind the Butterworth low-pass at this cutoff.
    #[arg(long)]
    pub lowpass_hz: Option<f64>,
}

fn parse_split(s: &str) -> Result<SplitRatio, String> {
    let parts: Vec<u32> = s
        .split(':')
        .map(|p| p.trim().parse::<u32>().map_err(|e| format!("'{p}': {e}")))
        .collect::<Result<_, _>>()?;
    match parts[..] {
        [train, val, test] => Ok(SplitRatio { train, val, test }),
        _ => Err(format!("expected train:val:test, got '{s}'")),
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct TrainSettings {
    pub manifest: Option<PathBuf>,
    pub out: Option<PathBuf>,
    pub history: Option<PathBuf>,
    pub splits_dir: Option<PathBuf>,
    pub seed: u64,
    pub steps: Option<u64>,
    pub batch_size: usize,
    pub eval_interval: u64,
    pub split: SplitRatio,
    pub lowpass_hz: Option<f64>,
    /// Learning-rate phases before any `steps` rescaling.
    pub schedule: Vec<LrPhase>,
}

impl Default for TrainSettings {
    fn default() -> Self {
        let c = TrainConfig::default();
        Self {
            manifest: None,
            out: None,
            history: None,
            splits_dir: None,
            seed: c.seed,
            steps: None,
            batch_size: c.batch_size,
            eval_interval: c.eval_interval,
            split: c.split,
            lowpass_hz: None,
            schedule: c.schedule,
        }
    }
}

impl TrainArgs {
    pub fn resolve(&self, mut s: TrainSettings) -> TrainSettings {
        overlay!(s, self;
            some manifest, some out, some history, some splits_dir, set seed, some steps,
            set batch_size, set eval_interval, set split, some lowpass_hz);
        s
    }
}

impl TrainSettings {
    pub fn train_config(&self) -> TrainConfig {
        let c = TrainConfig {
            schedule: self.schedule.clone(),
            batch_size: self.batch_size,
            split: self.split,
            seed: self.seed,
            eval_interval: self.eval_interval,
        };
        match self.steps {
            Some(n) => c.scaled_to(n),
            None => c,
        }
    }

    pub fn frontend(&self) -> FrontEnd {
        FrontEnd {
            lowpass_hz: self.lowpass_hz,
            ..FrontEnd::assist_tone()
        }
    }
}

fn write_absolute(manifest: &DatasetManifest, path: &Path) -> anyhow::Result<()> {
    let mut m = manifest.clone();
    for e in &mut m.entries {
        e.path = std::path::absolute(&e.path).with_context(|| format!("resolving {}", e.path.display()))?;
    }
    Ok(m.save(path)?)
}

pub fn run(s: &TrainSettings) -> anyhow::Result<()> {
    let manifest_path = required(&s.manifest, "manifest", "train")?;
    let out = required(&s.out, "out", "train")?;
    let config = s.train_config();
    config.validate()?;
    let frontend = s.frontend();
    frontend.validate()?;

    let manifest = DatasetManifest::load(&manifest_path, None)?;
    let split = split_dataset(&manifest, config.split, config.seed)?;
    eprintln!(
        "split: {} train, {} val, {} test; {} steps",
        split.train.len(),
        split.val.len(),
        split.test.len(),
        config.total_steps()
    );
    if let Some(dir) = &s.splits_dir {
        std::fs::create_dir_all(dir).with_context(|| format!("creating {}", dir.display()))?;
        write_absolute(&split.train, &dir.join("train.jsonl"))?;
        write_absolute(&split.val, &dir.join("val.jsonl"))?;
        write_absolute(&split.test, &dir.join("test.jsonl"))?;
    }

    let outcome = train_from_manifests(&split.train, &split.val, &frontend, &config)?;
    let checkpoint = Checkpoint::new(outcome.params, frontend, manifest.label_set.clone())?;
    let bytes = checkpoint.save();
    std::fs::write(&out, &bytes).with_context(|| format!("writing {}", out.display()))?;
    let history = s.history.clone().unwrap_or_else(|| {
        let mut p = out.clone().into_os_string();
        p.push(".history.csv");
        p.into()
    });
    std::fs::write(&history, history_csv(&outcome.history))
        .with_context(|| format!("writing {}", history.display()))?;

    let best = outcome
        .best_step
        .and_then(|b| outcome.history.iter().find(|r| r.step == b));
    let summary = serde_json::json!({
        "checkpoint": out,
        "checkpoint_sha256": sha256_hex(&bytes),
        "history": history,
        "best_step": outcome.best_step,
        "best_val_accuracy": best.map(|r| r.val_accuracy),
    });
    println!("{summary}");
    Ok(())
}

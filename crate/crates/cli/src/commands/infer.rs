use std::path::{Path, PathBuf};

use anyhow::Context;
use clap::Args;
use pmu_core::audio::{downmix_mono, read_wav_file};
use pmu_core::detect::Classifier;
use pmu_core::train::{fit_window, Checkpoint};
use serde::{Deserialize, Serialize};

use super::overlay;
use crate::{required, sha256_hex};

#[derive(Debug, Args)]
pub struct InferArgs {
    #[arg(long)]
    pub checkpoint: Option<PathBuf>,
    /// WAV clip; cropped or zero-padded to one window.
    #[arg(long)]
    pub input: Option<PathBuf>,
}

#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct InferSettings {
    pub checkpoint: Option<PathBuf>,
    pub input: Option<PathBuf>,
}

impl InferArgs {
    pub fn resolve(&self, mut s: InferSettings) -> InferSettings {
        overlay!(s, self; some checkpoint, some input);
        s
    }
}

pub(crate) fn load_checkpoint_hashed(path: &Path) -> anyhow::Result<(Checkpoint, String)> {
    let bytes = std::fs::read(path).with_context(|| format!("reading checkpoint {}", path.display()))?;
    let ckpt = Checkpoint::load(&bytes).with_context(|| format!("loading checkpoint {}", path.display()))?;
    Ok((ckpt, sha256_hex(&bytes)))
}

pub(crate) fn load_checkpoint(path: &Path) -> anyhow::Result<Checkpoint> {
    load_checkpoint_hashed(path).map(|(c, _)| c)
}

pub fn run(s: &InferSettings) -> anyhow::Result<()> {
    let classifier = Classifier::new(load_checkpoint(&required(&s.checkpoint, "checkpoint", "infer")?)?);
    let input = required(&s.input, "input", "infer")?;
    let clip = downmix_mono(&read_wav_file(&input)?);
    let window = fit_window(clip, classifier.checkpoint().frontend.clip_samples());
    let (class, posteriors) = classifier.classify_window(&window)?;
    let out = serde_json::json!({
        "class": classifier.class_name(class),
        "classes": classifier.checkpoint().labels.classes(),
        "posteriors": posteriors,
    });
    println!("{out}");
    Ok(())
}

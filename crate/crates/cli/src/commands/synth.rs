use std::path::PathBuf;

use anyhow::{bail, Context};
use clap::Args;
use pmu_core::audio::{synthesize, write_wav_file, CorpusPreset, CorpusSpec, SynthSpec};
use pmu_core::train::materialize_corpus;
use serde::{Deserialize, Serialize};

use super::overlay;
use crate::{read_json, required};

#[derive(Debug, Args)]
pub struct SynthArgs {
    /// Corpus spec JSON (has "classes") or single-clip synth spec JSON.
    #[arg(long)]
    pub spec: Option<PathBuf>,
    /// Built-in corpus used when no spec is given: five or six.
    #[arg(long)]
    pub preset: Option<CorpusPreset>,
    /// Clips per class for the built-in corpus.
    #[arg(long)]
    pub clips_per_class: Option<usize>,
    /// Overrides the spec's seed; single clips default to 0.
    #[arg(long)]
    pub seed: Option<u64>,
    /// Corpus directory, or the WAV path for a single clip.
    #[arg(long)]
    pub out: Option<PathBuf>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct SynthSettings {
    pub spec: Option<PathBuf>,
    pub preset: CorpusPreset,
    pub clips_per_class: usize,
    pub seed: Option<u64>,
    pub out: Option<PathBuf>,
}

impl Default for SynthSettings {
    fn default() -> Self {
        Self {
            spec: None,
            preset: CorpusPreset::FiveClass,
            clips_per_class: 200,
            seed: None,
            out: None,
        }
    }
}

impl SynthArgs {
    pub fn resolve(&self, mut s: SynthSettings) -> SynthSettings {
        overlay!(s, self; some spec, set preset, set clips_per_class, some seed, some out);
        s
    }
}

enum Job {
    Corpus(CorpusSpec),
    Clip(SynthSpec),
}

fn load_job(s: &SynthSettings) -> anyhow::Result<Job> {
    let Some(path) = &s.spec else {
        let mut spec = CorpusSpec::preset(s.preset, s.clips_per_class, 0);
        if let Some(seed) = s.seed {
            spec.seed = seed;
        }
        return Ok(Job::Corpus(spec));
    };
    let doc: serde_json::Value = read_json(path, "synth spec")?;
    let what = || format!("synth spec {}", path.display());
    if doc.get("classes").is_some() {
        let mut spec: CorpusSpec = serde_json::from_value(doc).with_context(what)?;
        if let Some(seed) = s.seed {
            spec.seed = seed;
        }
        Ok(Job::Corpus(spec))
    } else {
        Ok(Job::Clip(serde_json::from_value(doc).with_context(what)?))
    }
}

pub fn run(s: &SynthSettings) -> anyhow::Result<()> {
    let out = required(&s.out, "out", "synth")?;
    match load_job(s)? {
        Job::Corpus(spec) => {
            if spec.classes.is_empty() {
                bail!("corpus spec has no classes");
            }
            let manifest = materialize_corpus(&spec, &out)?;
            let summary = serde_json::json!({
                "manifest": out.join("manifest.jsonl"),
                "clips": manifest.len(),
                "classes": manifest.class_counts(),
                "seed": spec.seed,
            });
            println!("{summary}");
        }
        Job::Clip(spec) => {
            let seed = s.seed.unwrap_or(0);
            let clip = synthesize(&spec, seed)?;
            write_wav_file(&out, &clip)?;
            println!("{}", serde_json::json!({ "wav": out, "samples": clip.len(), "seed": seed }));
        }
    }
    Ok(())
}

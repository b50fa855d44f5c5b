use std::collections::BTreeMap;
use std::path::PathBuf;

use clap::Args;
use pmu_core::eval::{confusion, report, MergeSpec, RunMetadata};
use pmu_core::train::{featurize_manifest, predict_all, DatasetManifest};
use serde::{Deserialize, Serialize};

use super::overlay;
use crate::{required, write_or_print};

#[derive(Debug, Args)]
pub struct EvalArgs {
    #[arg(long)]
    pub checkpoint: Option<PathBuf>,
    /// Manifest of the clips to evaluate (typically a test split).
    #[arg(long)]
    pub manifest: Option<PathBuf>,
    /// Also report metrics after merging classes, e.g. `hand,forearm,upper_arm=body`.
    /// Several groups are separated by `;`.
    #[arg(long)]
    pub merge: Option<String>,
    /// Report destination; stdout when omitted.
    #[arg(long)]
    pub out: Option<PathBuf>,
    /// Confusion matrix CSV destination.
    #[arg(long)]
    pub confusion_csv: Option<PathBuf>,
    /// Split name recorded in the report metadata.
    #[arg(long)]
    pub split: Option<String>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct EvalSettings {
    pub checkpoint: Option<PathBuf>,
    pub manifest: Option<PathBuf>,
    pub merge: Option<String>,
    pub out: Option<PathBuf>,
    pub confusion_csv: Option<PathBuf>,
    pub split: String,
}

impl Default for EvalSettings {
    fn default() -> Self {
        Self {
            checkpoint: None,
            manifest: None,
            merge: None,
            out: None,
            confusion_csv: None,
            split: "test".into(),
        }
    }
}

impl EvalArgs {
    pub fn resolve(&self, mut s: EvalSettings) -> EvalSettings {
        overlay!(s, self; some checkpoint, some manifest, some merge, some out, some confusion_csv, set split);
        s
    }
}

pub fn run(s: &EvalSettings, config_hash: &str) -> anyhow::Result<()> {
    let ckpt_path = required(&s.checkpoint, "checkpoint", "eval")?;
    let manifest_path = required(&s.manifest, "manifest", "eval")?;
    let merge = s.merge.as_deref().map(str::parse::<MergeSpec>).transpose()?;

    let (checkpoint, ckpt_hash) = super::infer::load_checkpoint_hashed(&ckpt_path)?;
    let classes = checkpoint.labels.classes().to_vec();
    let mapping = merge.map(|m| m.mapping_for(&classes)).transpose()?;
    let manifest = DatasetManifest::load(&manifest_path, Some(checkpoint.labels.clone()))?;
    let set = featurize_manifest(&manifest, &checkpoint.frontend)?;
    let preds = predict_all(&checkpoint.params, &set.inputs)?;
    let cm = confusion(&preds, &set.labels, &classes)?;

    let mut extra = BTreeMap::new();
    extra.insert("checkpoint_sha256".into(), ckpt_hash);
    extra.insert("manifest".into(), manifest_path.display().to_string());
    let metadata = RunMetadata {
        split: s.split.clone(),
        seed: None,
        config_hash: config_hash.into(),
        extra,
    };
    let rep = report(&cm, metadata, mapping.as_ref())?;
    if let Some(path) = &s.confusion_csv {
        write_or_print(Some(path), &cm.to_csv())?;
    }
    let mut json = rep.to_json();
    json.push('\n');
    write_or_print(s.out.as_deref(), &json)
}

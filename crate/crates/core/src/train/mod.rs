//! Dataset manifests, stratified splitting, the SGD training loop and
//! checkpoint I/O.

mod checkpoint;
mod config;
mod dataset;
mod trainer;

pub use checkpoint::{Checkpoint, CheckpointError, CHECKPOINT_MAGIC, CHECKPOINT_VERSION};
pub use config::{lr_at_step, LrPhase, SplitRatio, TrainConfig};
pub use dataset::{
    featurize_clips, featurize_manifest, fit_window, materialize_corpus, split_dataset, split_features,
    synthesize_features,
    Clothing, DatasetManifest, FeatureSet, LabelSet, Location, ManifestEntry, Split,
    CANONICAL_CLASSES,
};
pub use trainer::{
    accuracy, history_csv, predict_all, train_from_manifests, train_model, HistoryRow,
    TrainOutcome,
};

use thiserror::Error;

use crate::{audio::AudioError, dsp::DspError, nn::NnError};

#[derive(Debug, Error)]
pub enum TrainError {
    #[error("class '{class}' has {count} examples; splitting needs at least {min}")]
    ClassTooSmall {
        class: String,
        count: usize,
        min: usize,
    },
    #[error("step {step} outside schedule of {total} steps")]
    StepOutOfRange { step: u64, total: u64 },
    #[error("invalid training config: {0}")]
    InvalidConfig(String),
    #[error("invalid label set: {0}")]
    InvalidLabels(String),
    #[error("manifest line {line}: {message}")]
    Manifest { line: usize, message: String },
    #[error("{0} set is empty")]
    EmptyDataset(&'static str),
    #[error("loss became non-finite at step {step}")]
    NonFiniteLoss { step: u64 },
    #[error("{path}: {source}")]
    Io {
        path: String,
        #[source]
        source: std::io::Error,
    },
    #[error("{path}: {source}")]
    Clip {
        path: String,
        #[source]
        source: AudioError,
    },
    #[error(transparent)]
    Audio(#[from] AudioError),
    #[error(transparent)]
    Dsp(#[from] DspError),
    #[error(transparent)]
    Nn(#[from] NnError),
    #[error(transparent)]
    Checkpoint(#[from] CheckpointError),
}

pub(crate) fn io_err(path: &std::path::Path) -> impl FnOnce(std::io::Error) -> TrainError + '_ {
    move |source| TrainError::Io {
        path: path.display().to_string(),
        source,
    }
}

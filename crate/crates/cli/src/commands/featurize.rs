use std::path::PathBuf;

use clap::Args;
use pmu_core::audio::read_wav_file;
use pmu_core::dsp::{FrontEnd, SpectrogramConfig};
use serde::{Deserialize, Serialize};

use super::overlay;
use crate::{required, write_or_print};

#[derive(Debug, Args)]
pub struct FeaturizeArgs {
    /// WAV file to featurize (any length of at least one frame).
    #[arg(long)]
    pub input: Option<PathBuf>,
    /// CSV destination; stdout when omitted.
    #[arg(long)]
    pub out: Option<PathBuf>,
    /// Apply the Butterworth low-pass at this cutoff first.
    #[arg(long)]
    pub lowpass_hz: Option<f64>,
    /// Use this checkpoint's front end instead (sample rates must match).
    #[arg(long)]
    pub checkpoint: Option<PathBuf>,
}

#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct FeaturizeSettings {
    pub input: Option<PathBuf>,
    pub out: Option<PathBuf>,
    pub lowpass_hz: Option<f64>,
    pub checkpoint: Option<PathBuf>,
}

impl FeaturizeArgs {
    pub fn resolve(&self, mut s: FeaturizeSettings) -> FeaturizeSettings {
        overlay!(s, self; some input, some out, some lowpass_hz, some checkpoint);
        s
    }
}

pub fn run(s: &FeaturizeSettings) -> anyhow::Result<()> {
    let input = required(&s.input, "input", "featurize")?;
    let clip = read_wav_file(&input)?;
    let frontend = match &s.checkpoint {
        Some(path) => super::infer::load_checkpoint(path)?.frontend,
        None => FrontEnd {
            sample_rate: clip.sample_rate(),
            clip_s: clip.duration_s(),
            lowpass_hz: s.lowpass_hz,
            spectrogram: SpectrogramConfig::default(),
        },
    };
    let spec = frontend.features(&clip)?;
    let (t, f) = spec.shape();
    eprintln!("spectrogram: {t} frames x {f} features");
    write_or_print(s.out.as_deref(), &spec.to_csv())
}

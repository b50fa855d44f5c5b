use serde::{Deserialize, Serialize};

use super::{design_lowpass, filter_apply, spectrogram, DspError, Spectrogram, SpectrogramConfig};
use crate::audio::{downmix_mono, AudioClip};

/// The full clip-to-features chain: downmix, optional low-pass, spectrogram.
///
/// Saved inside model checkpoints so training and inference featurize
/// identically.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct FrontEnd {
    pub sample_rate: u32,
    /// Length of one classification window.
    pub clip_s: f64,
    /// Cutoff of the optional Butterworth stage.
    #[serde(default)]
    pub lowpass_hz: Option<f64>,
    #[serde(default)]
    pub spectrogram: SpectrogramConfig,
}

pub const DEFAULT_LOWPASS_HZ: f64 = 252.0;

impl FrontEnd {
    /// 44.1 kHz, 1 s windows, low-pass off (assist-tone corpora).
    pub fn assist_tone() -> Self {
        Self {
            sample_rate: 44_100,
            clip_s: 1.0,
            lowpass_hz: None,
            spectrogram: SpectrogramConfig::default(),
        }
    }

    /// 44.1 kHz, 1 s windows, 252 Hz low-pass on.
    pub fn filtered() -> Self {
        Self {
            lowpass_hz: Some(DEFAULT_LOWPASS_HZ),
            ..Self::assist_tone()
        }
    }

    pub fn clip_samples(&self) -> usize {
        (self.clip_s * f64::from(self.sample_rate)).round() as usize
    }

    /// `(T, F)` of the spectrogram for one full window.
    pub fn input_shape(&self) -> Result<(usize, usize), DspError> {
        let g = self.spectrogram.geometry(self.sample_rate)?;
        let n = self.clip_samples();
        let t = g
            .frame_count(n)
            .ok_or(DspError::ClipTooShort { len: n, window: g.window })?;
        Ok((t, g.features))
    }

    pub fn validate(&self) -> Result<(), DspError> {
        if let Some(fc) = self.lowpass_hz {
            design_lowpass(fc, f64::from(self.sample_rate))?;
        }
        self.input_shape().map(|_| ())
    }

    pub fn features(&self, clip: &AudioClip) -> Result<Spectrogram, DspError> {
        if clip.sample_rate() != self.sample_rate {
            return Err(DspError::SampleRateMismatch {
                expected: self.sample_rate,
                got: clip.sample_rate(),
            });
        }
        let mono = downmix_mono(clip);
        let mono = match self.lowpass_hz {
            Some(fc) => filter_apply(&design_lowpass(fc, f64::from(self.sample_rate))?, &mono)?,
            None => mono,
        };
        spectrogram(&mono, &self.spectrogram)
    }
}

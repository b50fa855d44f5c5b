//! PCM container, WAV I/O and synthetic signal generation.

mod corpus;
mod synth;
mod wav;

pub use corpus::{ClassFamily, CorpusPreset, CorpusSpec, GeneratedClip};
pub use synth::{synthesize, Component, SynthSpec};
pub use wav::{read_wav, read_wav_file, write_wav, write_wav_file, WavError};

use thiserror::Error;

#[derive(Debug, Error)]
pub enum AudioError {
    #[error("sample rate must be positive")]
    ZeroSampleRate,
    #[error("unsupported channel count {0} (expected 1 or 2)")]
    ChannelCount(usize),
    #[error("channel lengths differ: {0} vs {1}")]
    RaggedChannels(usize, usize),
    #[error("sample {value} at channel {channel}, index {index} is outside [-1, 1]")]
    OutOfRange {
        channel: usize,
        index: usize,
        value: f32,
    },
    #[error("expected a mono clip, got {0} channels")]
    NotMono(usize),
    #[error("invalid synth spec: {0}")]
    InvalidSpec(String),
    #[error("mixed peak {peak} exceeds 1.0 at sample {index}")]
    Clipping { peak: f32, index: usize },
    #[error(transparent)]
    Wav(#[from] WavError),
    #[error("{path}: {source}")]
    Io {
        path: String,
        #[source]
        source: std::io::Error,
    },
}

/// Normalized PCM audio. Samples are stored per channel in `[-1.0, 1.0]`.
#[derive(Debug, Clone, PartialEq)]
pub struct AudioClip {
    sample_rate: u32,
    channels: Vec<Vec<f32>>,
}

impl AudioClip {
    pub fn new(sample_rate: u32, channels: Vec<Vec<f32>>) -> Result<Self, AudioError> {
        if sample_rate == 0 {
            return Err(AudioError::ZeroSampleRate);
        }
        if channels.is_empty() || channels.len() > 2 {
            return Err(AudioError::ChannelCount(channels.len()));
        }
        let len = channels[0].len();
        for (c, ch) in channels.iter().enumerate() {
            if ch.len() != len {
                return Err(AudioError::RaggedChannels(len, ch.len()));
            }
            if let Some((index, &value)) = ch
                .iter()
                .enumerate()
                .find(|(_, v)| !(-1.0..=1.0).contains(*v))
            {
                return Err(AudioError::OutOfRange {
                    channel: c,
                    index,
                    value,
                });
            }
        }
        Ok(Self {
            sample_rate,
            channels,
        })
    }

    pub fn mono(sample_rate: u32, samples: Vec<f32>) -> Result<Self, AudioError> {
        Self::new(sample_rate, vec![samples])
    }

    pub fn stereo(sample_rate: u32, left: Vec<f32>, right: Vec<f32>) -> Result<Self, AudioError> {
        Self::new(sample_rate, vec![left, right])
    }

    /// All-zero mono clip.
    pub fn silence(sample_rate: u32, len: usize) -> Result<Self, AudioError> {
        Self::mono(sample_rate, vec![0.0; len])
    }

    pub fn sample_rate(&self) -> u32 {
        self.sample_rate
    }

    pub fn num_channels(&self) -> usize {
        self.channels.len()
    }

    /// Samples per channel.
    pub fn len(&self) -> usize {
        self.channels[0].len()
    }

    pub fn is_empty(&self) -> bool {
        self.len() == 0
    }

    pub fn duration_s(&self) -> f64 {
        self.len() as f64 / f64::from(self.sample_rate)
    }

    pub fn channel(&self, index: usize) -> &[f32] {
        &self.channels[index]
    }

    pub fn channels(&self) -> &[Vec<f32>] {
        &self.channels
    }

    /// The single channel of a mono clip.
    pub fn mono_samples(&self) -> Result<&[f32], AudioError> {
        match self.channels.len() {
            1 => Ok(&self.channels[0]),
            n => Err(AudioError::NotMono(n)),
        }
    }

    pub fn into_channels(self) -> Vec<Vec<f32>> {
        self.channels
    }
}

/// Average the two microphones into one channel; mono clips pass through.
pub fn downmix_mono(clip: &AudioClip) -> AudioClip {
    match clip.channels.as_slice() {
        [left, right] => AudioClip {
            sample_rate: clip.sample_rate,
            channels: vec![left
                .iter()
                .zip(right)
                .map(|(l, r)| (l + r) * 0.5)
                .collect()],
        },
        _ => clip.clone(),
    }
}

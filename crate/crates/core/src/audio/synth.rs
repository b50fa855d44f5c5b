//! Deterministic signal synthesis: tones, noise beds and decaying noise bursts.

use std::f64::consts::TAU;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use super::{AudioClip, AudioError};

/// One additive component of a synthesized clip. Times are in seconds from
/// the start of the clip.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case", deny_unknown_fields)]
pub enum Component {
    /// `amplitude * sin(2π·freq·t)`, with `t` measured from the clip start so
    /// that overlapping windows of one tone stay phase coherent.
    Sine {
        freq: f64,
        amplitude: f64,
        start_s: f64,
        duration_s: f64,
    },
    /// Uniform white noise in `[-amplitude, amplitude]`.
    Noise {
        amplitude: f64,
        start_s: f64,
        duration_s: f64,
    },
    /// White noise under an `exp(-decay_rate·(t - start_s))` envelope.
    Burst {
        amplitude: f64,
        start_s: f64,
        duration_s: f64,
        decay_rate: f64,
    },
}

impl Component {
    pub fn tone(freq: f64, amplitude: f64, start_s: f64, duration_s: f64) -> Self {
        Self::Sine {
            freq,
            amplitude,
            start_s,
            duration_s,
        }
    }

    fn window(&self) -> (f64, f64) {
        match *self {
            Self::Sine {
                start_s,
                duration_s,
                ..
            }
            | Self::Noise {
                start_s,
                duration_s,
                ..
            }
            | Self::Burst {
                start_s,
                duration_s,
                ..
            } => (start_s, duration_s),
        }
    }

    fn amplitude(&self) -> f64 {
        match *self {
            Self::Sine { amplitude, .. }
            | Self::Noise { amplitude, .. }
            | Self::Burst { amplitude, .. } => amplitude,
        }
    }
}

/// JSON-serializable description of a clip to synthesize.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SynthSpec {
    pub sample_rate: u32,
    pub duration_s: f64,
    /// Output channel count; stereo output duplicates the mono mix.
    #[serde(default = "default_channels")]
    pub channels: usize,
    #[serde(default)]
    pub components: Vec<Component>,
}

fn default_channels() -> usize {
    1
}

const WINDOW_SLACK: f64 = 1e-9;

impl SynthSpec {
    pub fn new(sample_rate: u32, duration_s: f64) -> Self {
        Self {
            sample_rate,
            duration_s,
            channels: 1,
            components: Vec::new(),
        }
    }

    pub fn with(mut self, component: Component) -> Self {
        self.components.push(component);
        self
    }

    pub fn validate(&self) -> Result<(), AudioError> {
        let bad = |m: String| Err(AudioError::InvalidSpec(m));
        if self.sample_rate == 0 {
            return Err(AudioError::ZeroSampleRate);
        }
        if !(self.duration_s.is_finite() && self.duration_s >= 0.0) {
            return bad(format!("duration {} is not a non-negative time", self.duration_s));
        }
        if !(1..=2).contains(&self.channels) {
            return Err(AudioError::ChannelCount(self.channels));
        }
        for (i, c) in self.components.iter().enumerate() {
            let (start, dur) = c.window();
            if !(start.is_finite() && dur.is_finite() && start >= 0.0 && dur >= 0.0)
                || start + dur > self.duration_s + WINDOW_SLACK
            {
                return bad(format!(
                    "component {i} window [{start}, {}] lies outside [0, {}]",
                    start + dur,
                    self.duration_s
                ));
            }
            if !(0.0..=1.0).contains(&c.amplitude()) {
                return bad(format!("component {i} amplitude {} outside [0, 1]", c.amplitude()));
            }
            match *c {
                Component::Sine { freq, .. } if !(freq.is_finite() && freq >= 0.0) => {
                    return bad(format!("component {i} frequency {freq} is invalid"));
                }
                Component::Burst { decay_rate, .. }
                    if !(decay_rate.is_finite() && decay_rate >= 0.0) =>
                {
                    return bad(format!("component {i} decay rate {decay_rate} is invalid"));
                }
                _ => {}
            }
        }
        Ok(())
    }

    pub fn num_samples(&self) -> usize {
        (self.duration_s * f64::from(self.sample_rate)).round() as usize
    }
}

/// Render `spec`. Noise is drawn from a ChaCha8 stream seeded with `seed`, one
/// value per sample of each noisy component in declaration order, so equal
/// `(spec, seed)` pairs give bit-identical output.
pub fn synthesize(spec: &SynthSpec, seed: u64) -> Result<AudioClip, AudioError> {
    spec.validate()?;
    let rate = f64::from(spec.sample_rate);
    let n = spec.num_samples();
    let mut mix = vec![0.0f64; n];
    let mut rng = ChaCha8Rng::seed_from_u64(seed);

    for component in &spec.components {
        let (start_s, dur_s) = component.window();
        let first = ((start_s * rate).round() as usize).min(n);
        let last = (((start_s + dur_s) * rate).round() as usize).min(n);
        let range = first..last;
        match *component {
            Component::Sine {
                freq, amplitude, ..
            } => {
                for i in range {
                    let t = i as f64 / rate;
                    mix[i] += amplitude * (TAU * freq * t).sin();
                }
            }
            Component::Noise { amplitude, .. } => {
                for i in range {
                    mix[i] += amplitude * rng.random_range(-1.0..=1.0);
                }
            }
            Component::Burst {
                amplitude,
                decay_rate,
                start_s,
                ..
            } => {
                for i in range {
                    let t = i as f64 / rate - start_s;
                    let envelope = (-decay_rate * t.max(0.0)).exp();
                    mix[i] += amplitude * envelope * rng.random_range(-1.0..=1.0);
                }
            }
        }
    }

    if let Some((index, peak)) = mix
        .iter()
        .map(|v| v.abs())
        .enumerate()
        .find(|(_, v)| *v > 1.0)
    {
        return Err(AudioError::Clipping {
            peak: peak as f32,
            index,
        });
    }

    let samples: Vec<f32> = mix.into_iter().map(|v| v as f32).collect();
    let channels = vec![samples; spec.channels];
    AudioClip::new(spec.sample_rate, channels)
}

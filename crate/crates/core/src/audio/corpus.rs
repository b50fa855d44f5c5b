//! Synthetic class families standing in for recorded hit sounds.
//!
//! Each family is a randomized [`SynthSpec`] template. Hit classes are a noise
//! transient plus a ringing tone at a class-specific band center, riding on the
//! continuous 10 kHz assist tone when the family has one. Background classes
//! are near-silence or broadband clutter.

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use super::{synthesize, AudioClip, AudioError, Component, SynthSpec};

pub const ASSIST_TONE_HZ: f64 = 10_000.0;

/// Inclusive uniform range `[lo, hi]`.
pub type Span = [f64; 2];

fn draw(rng: &mut ChaCha8Rng, span: Span) -> f64 {
    if span[1] > span[0] {
        rng.random_range(span[0]..=span[1])
    } else {
        span[0]
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct Carrier {
    pub freq: f64,
    pub amplitude: Span,
    /// Chance that a given clip carries the tone at all.
    #[serde(default = "one")]
    pub probability: f64,
}

fn one() -> f64 {
    1.0
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct Transient {
    /// Tone accompanying the burst; `None` for an untuned knock.
    #[serde(default)]
    pub band_hz: Option<f64>,
    #[serde(default)]
    pub band_amplitude: Span,
    pub amplitude: Span,
    pub decay_rate: Span,
    pub duration_s: f64,
    #[serde(default = "one")]
    pub probability: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct Clutter {
    pub count: usize,
    pub freq: Span,
    pub amplitude: Span,
    pub duration_s: Span,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ClassFamily {
    pub name: String,
    #[serde(default)]
    pub carrier: Option<Carrier>,
    #[serde(default)]
    pub transient: Option<Transient>,
    /// Continuous noise floor amplitude.
    #[serde(default)]
    pub bed_noise: Span,
    #[serde(default)]
    pub clutter: Option<Clutter>,
    /// Chance that a clip is rendered fully empty regardless of the above.
    #[serde(default)]
    pub blank_probability: f64,
}

impl ClassFamily {
    /// Draw one concrete spec from the family.
    pub fn sample_spec(&self, rng: &mut ChaCha8Rng, sample_rate: u32, duration_s: f64) -> SynthSpec {
        let mut spec = SynthSpec::new(sample_rate, duration_s);
        if rng.random_bool(self.blank_probability.clamp(0.0, 1.0)) {
            return spec;
        }
        if let Some(c) = &self.carrier {
            if rng.random_bool(c.probability.clamp(0.0, 1.0)) {
                spec = spec.with(Component::tone(c.freq, draw(rng, c.amplitude), 0.0, duration_s));
            }
        }
        let bed = draw(rng, self.bed_noise);
        if bed > 0.0 {
            spec = spec.with(Component::Noise {
                amplitude: bed,
                start_s: 0.0,
                duration_s,
            });
        }
        if let Some(t) = &self.transient {
            if rng.random_bool(t.probability.clamp(0.0, 1.0)) {
                let dur = t.duration_s.min(duration_s);
                let start = rng.random_range(0.0..=(duration_s - dur));
                spec = spec.with(Component::Burst {
                    amplitude: draw(rng, t.amplitude),
                    start_s: start,
                    duration_s: dur,
                    decay_rate: draw(rng, t.decay_rate),
                });
                if let Some(band) = t.band_hz {
                    spec = spec.with(Component::tone(band, draw(rng, t.band_amplitude), start, dur));
                }
            }
        }
        if let Some(c) = &self.clutter {
            for _ in 0..c.count {
                let dur = draw(rng, c.duration_s).min(duration_s);
                let start = rng.random_range(0.0..=(duration_s - dur));
                spec = spec.with(Component::tone(draw(rng, c.freq), draw(rng, c.amplitude), start, dur));
            }
        }
        spec
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum CorpusPreset {
    /// hand / forearm / upper_arm / silence / other, with the assist tone.
    FiveClass,
    /// hand / forearm / upper_arm / sword / silence / other, no assist tone.
    SixClass,
}

impl std::str::FromStr for CorpusPreset {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        match s {
            "five" | "five_class" | "five-class" => Ok(Self::FiveClass),
            "six" | "six_class" | "six-class" => Ok(Self::SixClass),
            other => Err(format!("unknown corpus preset '{other}' (expected five or six)")),
        }
    }
}

fn hit_family(name: &str, band_hz: f64, decay: Span, duration_s: f64, carrier: bool) -> ClassFamily {
    ClassFamily {
        name: name.into(),
        carrier: carrier.then(|| Carrier {
            freq: ASSIST_TONE_HZ,
            amplitude: [0.08, 0.12],
            probability: 1.0,
        }),
        transient: Some(Transient {
            band_hz: Some(band_hz),
            band_amplitude: [0.3, 0.4],
            amplitude: [0.2, 0.3],
            decay_rate: decay,
            duration_s,
            probability: 1.0,
        }),
        bed_noise: [0.0, 0.01],
        clutter: None,
        blank_probability: 0.0,
    }
}

fn silence_family(carrier: bool) -> ClassFamily {
    ClassFamily {
        name: "silence".into(),
        carrier: carrier.then(|| Carrier {
            freq: ASSIST_TONE_HZ,
            amplitude: [0.08, 0.12],
            probability: 0.5,
        }),
        transient: None,
        bed_noise: [0.0, 0.01],
        clutter: None,
        blank_probability: 0.25,
    }
}

fn other_family() -> ClassFamily {
    ClassFamily {
        name: "other".into(),
        carrier: None,
        transient: Some(Transient {
            band_hz: None,
            band_amplitude: [0.0, 0.0],
            amplitude: [0.1, 0.3],
            decay_rate: [10.0, 50.0],
            duration_s: 0.2,
            probability: 0.5,
        }),
        bed_noise: [0.01, 0.05],
        clutter: Some(Clutter {
            count: 2,
            freq: [150.0, 900.0],
            amplitude: [0.05, 0.2],
            duration_s: [0.05, 0.4],
        }),
        blank_probability: 0.0,
    }
}

impl CorpusPreset {
    pub fn families(self) -> Vec<ClassFamily> {
        match self {
            Self::FiveClass => vec![
                hit_family("hand", 1500.0, [50.0, 70.0], 0.3, true),
                hit_family("forearm", 3000.0, [20.0, 30.0], 0.3, true),
                hit_family("upper_arm", 5000.0, [90.0, 110.0], 0.3, true),
                silence_family(true),
                other_family(),
            ],
            Self::SixClass => vec![
                hit_family("hand", 1500.0, [50.0, 70.0], 0.3, false),
                hit_family("forearm", 3000.0, [20.0, 30.0], 0.3, false),
                hit_family("upper_arm", 5000.0, [90.0, 110.0], 0.3, false),
                hit_family("sword", 7500.0, [180.0, 220.0], 0.25, false),
                silence_family(false),
                other_family(),
            ],
        }
    }
}

/// A full synthetic corpus: families plus per-class clip counts.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct CorpusSpec {
    pub sample_rate: u32,
    pub duration_s: f64,
    pub clips_per_class: usize,
    /// Per-class overrides of `clips_per_class`, by class name.
    #[serde(default)]
    pub class_counts: std::collections::BTreeMap<String, usize>,
    pub seed: u64,
    pub classes: Vec<ClassFamily>,
}

/// One rendered member of a corpus.
#[derive(Debug, Clone)]
pub struct GeneratedClip {
    pub label: String,
    /// Position within its class.
    pub index: usize,
    pub seed: u64,
    pub spec: SynthSpec,
    pub clip: AudioClip,
}

fn mix_seed(seed: u64, class: usize, index: usize) -> u64 {
    // splitmix64 finalizer over the packed coordinates
    let mut z = seed
        .wrapping_add((class as u64).wrapping_mul(0x9E37_79B9_7F4A_7C15))
        .wrapping_add((index as u64).wrapping_mul(0xBF58_476D_1CE4_E5B9));
    z = (z ^ (z >> 30)).wrapping_mul(0xBF58_476D_1CE4_E5B9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94D0_49BB_1331_11EB);
    z ^ (z >> 31)
}

impl CorpusSpec {
    pub fn preset(preset: CorpusPreset, clips_per_class: usize, seed: u64) -> Self {
        Self {
            sample_rate: 44_100,
            duration_s: 1.0,
            clips_per_class,
            class_counts: Default::default(),
            seed,
            classes: preset.families(),
        }
    }

    pub fn class_names(&self) -> Vec<String> {
        self.classes.iter().map(|c| c.name.clone()).collect()
    }

    pub fn count_for(&self, class: &str) -> usize {
        self.class_counts
            .get(class)
            .copied()
            .unwrap_or(self.clips_per_class)
    }

    /// Every `(class index, clip index)` coordinate in generation order.
    pub fn coordinates(&self) -> Vec<(usize, usize)> {
        self.classes
            .iter()
            .enumerate()
            .flat_map(|(k, fam)| (0..self.count_for(&fam.name)).map(move |i| (k, i)))
            .collect()
    }

    /// Render a single clip. Each clip depends only on `(seed, class, index)`.
    pub fn render(&self, class: usize, index: usize) -> Result<GeneratedClip, AudioError> {
        let family = self
            .classes
            .get(class)
            .ok_or_else(|| AudioError::InvalidSpec(format!("class index {class} out of range")))?;
        let clip_seed = mix_seed(self.seed, class, index);
        let mut rng = ChaCha8Rng::seed_from_u64(clip_seed);
        let spec = family.sample_spec(&mut rng, self.sample_rate, self.duration_s);
        let clip = synthesize(&spec, clip_seed)?;
        Ok(GeneratedClip {
            label: family.name.clone(),
            index,
            seed: clip_seed,
            spec,
            clip,
        })
    }
}

//! Streaming hit detection: a sliding one-second window advanced on hop
//! boundaries, classification, debouncing and [`HitEvent`] emission.

use std::collections::VecDeque;

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::audio::{downmix_mono, AudioClip};
use crate::dsp::{design_lowpass, Biquad, DspError, FrameGeometry, SpectrumAnalyzer};
use crate::nn::{forward, predict, NnError, Tensor};
use crate::train::Checkpoint;

#[derive(Debug, Error, PartialEq)]
pub enum DetectError {
    #[error("invalid detector config: {0}")]
    InvalidConfig(String),
    #[error("stream sample rate {got} Hz, detector expects {expected} Hz")]
    SampleRateMismatch { expected: u32, got: u32 },
    #[error("window has {got} samples, expected {expected}")]
    WindowLength { expected: usize, got: usize },
    #[error(transparent)]
    Dsp(#[from] DspError),
    #[error(transparent)]
    Nn(#[from] NnError),
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct DetectorConfig {
    pub window_s: f64,
    /// Run inference every `stride_hops` hops.
    pub stride_hops: usize,
    pub threshold: f64,
    /// Consecutive agreeing inferences required before emitting.
    pub persistence: usize,
    pub refractory_ms: u64,
}

impl Default for DetectorConfig {
    fn default() -> Self {
        Self {
            window_s: 1.0,
            stride_hops: 1,
            threshold: 0.8,
            persistence: 3,
            refractory_ms: 500,
        }
    }
}

impl DetectorConfig {
    pub fn validate(&self) -> Result<(), DetectError> {
        let bad = |m: &str| Err(DetectError::InvalidConfig(m.to_string()));
        if !(self.threshold > 0.0 && self.threshold < 1.0) {
            return bad("threshold must lie in (0, 1)");
        }
        if self.persistence == 0 {
            return bad("persistence must be at least 1");
        }
        if self.stride_hops == 0 {
            return bad("stride_hops must be at least 1");
        }
        if !(self.window_s > 0.0 && self.window_s.is_finite()) {
            return bad("window_s must be positive");
        }
        Ok(())
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct HitEvent {
    pub pmu_id: String,
    pub location: String,
    pub confidence: f64,
    /// Stream time of the end of the deciding window.
    pub timestamp_ms: u64,
}

/// A trained model with its front end, classifying whole windows.
#[derive(Debug, Clone)]
pub struct Classifier {
    checkpoint: Checkpoint,
}

impl Classifier {
    pub fn new(checkpoint: Checkpoint) -> Self {
        Self { checkpoint }
    }

    pub fn checkpoint(&self) -> &Checkpoint {
        &self.checkpoint
    }

    pub fn class_name(&self, index: usize) -> &str {
        self.checkpoint.labels.name(index)
    }

    /// Argmax class (lowest index on ties) and the posterior vector.
    pub fn classify_features(&self, input: &Tensor) -> Result<(usize, Vec<f64>), DetectError> {
        let out = forward(input, &self.checkpoint.params)?;
        Ok((predict(&out.probabilities), out.probabilities))
    }

    pub fn classify_window(&self, window: &AudioClip) -> Result<(usize, Vec<f64>), DetectError> {
        let fe = &self.checkpoint.frontend;
        if window.len() != fe.clip_samples() {
            return Err(DetectError::WindowLength {
                expected: fe.clip_samples(),
                got: window.len(),
            });
        }
        let spec = fe.features(window)?;
        self.classify_features(&Tensor::from(spec))
    }
}

/// One inference on the stream.
#[derive(Debug, Clone, PartialEq)]
pub struct Decision {
    /// Sample index one past the window's last sample.
    pub end_sample: u64,
    pub class: usize,
    pub probabilities: Vec<f64>,
    pub event: Option<HitEvent>,
}

/// Per-stream detector state. Features for each hop-aligned frame are
/// computed once and reused by every window that contains the frame.
#[derive(Debug)]
pub struct Detector {
    pmu_id: String,
    classifier: Classifier,
    config: DetectorConfig,
    sample_rate: u32,
    geometry: FrameGeometry,
    analyzer: SpectrumAnalyzer,
    filter: Option<Biquad>,
    window_len: u64,
    frames_per_window: usize,
    /// Filtered samples starting at global index `buffer_start`.
    buffer: VecDeque<f32>,
    buffer_start: u64,
    received: u64,
    /// Feature rows for frames `first_frame..`.
    frames: VecDeque<Vec<f64>>,
    first_frame: u64,
    next_decision: u64,
    streak: Option<(usize, usize)>,
    last_emit_ms: Option<u64>,
}

impl Detector {
    pub fn new(pmu_id: impl Into<String>, classifier: Classifier, config: DetectorConfig) -> Result<Self, DetectError> {
        config.validate()?;
        let fe = classifier.checkpoint().frontend.clone();
        let sample_rate = fe.sample_rate;
        let window_len = (config.window_s * f64::from(sample_rate)).round() as u64;
        if window_len as usize != fe.clip_samples() {
            return Err(DetectError::InvalidConfig(format!(
                "window of {window_len} samples does not match the model's {}",
                fe.clip_samples()
            )));
        }
        let geometry = fe.spectrogram.geometry(sample_rate)?;
        let (frames_per_window, _) = fe.input_shape()?;
        let filter = fe
            .lowpass_hz
            .map(|fc| design_lowpass(fc, f64::from(sample_rate)).map(Biquad::new))
            .transpose()?;
        Ok(Self {
            pmu_id: pmu_id.into(),
            classifier,
            analyzer: SpectrumAnalyzer::new(geometry, fe.spectrogram.log_floor),
            sample_rate,
            geometry,
            filter,
            window_len,
            frames_per_window,
            buffer: VecDeque::new(),
            buffer_start: 0,
            received: 0,
            frames: VecDeque::new(),
            first_frame: 0,
            next_decision: window_len,
            streak: None,
            last_emit_ms: None,
            config,
        })
    }

    pub fn config(&self) -> &DetectorConfig {
        &self.config
    }

    pub fn sample_rate(&self) -> u32 {
        self.sample_rate
    }

    pub fn classifier(&self) -> &Classifier {
        &self.classifier
    }

    /// Samples consumed so far.
    pub fn position(&self) -> u64 {
        self.received
    }

    pub fn push_samples(&mut self, chunk: &[f32]) -> Result<Vec<HitEvent>, DetectError> {
        Ok(self
            .push_decisions(chunk)?
            .into_iter()
            .filter_map(|d| d.event)
            .collect())
    }

    /// Push a clip after checking its rate; stereo input is downmixed.
    pub fn push_clip(&mut self, clip: &AudioClip) -> Result<Vec<HitEvent>, DetectError> {
        if clip.sample_rate() != self.sample_rate {
            return Err(DetectError::SampleRateMismatch {
                expected: self.sample_rate,
                got: clip.sample_rate(),
            });
        }
        let mono = downmix_mono(clip);
        self.push_samples(mono.channel(0))
    }

    /// Like [`Detector::push_samples`] but reports every inference.
    pub fn push_decisions(&mut self, chunk: &[f32]) -> Result<Vec<Decision>, DetectError> {
        match &mut self.filter {
            Some(f) => self.buffer.extend(f.process_block(chunk)),
            None => self.buffer.extend(chunk.iter().copied()),
        }
        self.received += chunk.len() as u64;

        let hop = self.geometry.hop as u64;
        let win = self.geometry.window as u64;
        let mut frame = vec![0.0f32; self.geometry.window];
        loop {
            let j = self.first_frame + self.frames.len() as u64;
            let start = j * hop;
            if start + win > self.received {
                break;
            }
            let offset = (start - self.buffer_start) as usize;
            for (dst, src) in frame.iter_mut().zip(self.buffer.range(offset..offset + self.geometry.window)) {
                *dst = *src;
            }
            let mut row = vec![0.0; self.geometry.features];
            self.analyzer.frame_features(&frame, &mut row);
            self.frames.push_back(row);
        }

        let mut decisions = Vec::new();
        while self.next_decision <= self.received {
            decisions.push(self.decide()?);
            self.next_decision += self.config.stride_hops as u64 * hop;
        }
        let keep_from_frame = (self.next_decision - self.window_len) / hop;
        while self.first_frame < keep_from_frame && !self.frames.is_empty() {
            self.frames.pop_front();
            self.first_frame += 1;
        }
        let keep_from_sample = (self.first_frame + self.frames.len() as u64) * hop;
        while self.buffer_start < keep_from_sample && !self.buffer.is_empty() {
            self.buffer.pop_front();
            self.buffer_start += 1;
        }
        Ok(decisions)
    }

    fn decide(&mut self) -> Result<Decision, DetectError> {
        let hop = self.geometry.hop as u64;
        let end = self.next_decision;
        let j0 = ((end - self.window_len) / hop - self.first_frame) as usize;
        let t = self.frames_per_window;
        let f = self.geometry.features;
        let mut data = Vec::with_capacity(t * f);
        for row in self.frames.range(j0..j0 + t) {
            data.extend_from_slice(row);
        }
        let input = Tensor::new(vec![t, f, 1], data)?;
        let (class, probabilities) = self.classifier.classify_features(&input)?;

        let confidence = probabilities[class];
        let labels = &self.classifier.checkpoint().labels;
        let candidate = !labels.is_background(class) && confidence >= self.config.threshold;
        self.streak = match (candidate, self.streak) {
            (false, _) => None,
            (true, Some((c, n))) if c == class => Some((c, n + 1)),
            (true, _) => Some((class, 1)),
        };

        let timestamp_ms = end * 1000 / u64::from(self.sample_rate);
        let mut event = None;
        if self.streak == Some((class, self.config.persistence)) {
            let clear = self
                .last_emit_ms
                .is_none_or(|last| timestamp_ms - last >= self.config.refractory_ms);
            if clear {
                self.last_emit_ms = Some(timestamp_ms);
                event = Some(HitEvent {
                    pmu_id: self.pmu_id.clone(),
                    location: labels.name(class).to_string(),
                    confidence,
                    timestamp_ms,
                });
            }
        }
        Ok(Decision {
            end_sample: end,
            class,
            probabilities,
            event,
        })
    }
}

/// Decode raw little-endian 16-bit PCM; a trailing odd byte is ignored.
pub fn decode_pcm16le(bytes: &[u8]) -> Vec<f32> {
    bytes
        .chunks_exact(2)
        .map(|b| f32::from(i16::from_le_bytes([b[0], b[1]])) / 32768.0)
        .collect()
}

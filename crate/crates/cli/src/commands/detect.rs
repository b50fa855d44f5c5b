use std::io::{BufWriter, Read, Write};
use std::path::PathBuf;

use anyhow::{bail, Context};
use clap::Args;
use pmu_core::audio::{downmix_mono, read_wav_file};
use pmu_core::detect::{decode_pcm16le, Classifier, Detector, DetectorConfig, HitEvent};
use serde::{Deserialize, Serialize};

use super::overlay;
use crate::required;

/// Samples handed to the detector per push when reading a WAV file.
const WAV_CHUNK: usize = 4410;

#[derive(Debug, Args)]
pub struct DetectArgs {
    #[arg(long)]
    pub checkpoint: Option<PathBuf>,
    /// WAV file, or `-` for raw little-endian 16-bit PCM on stdin.
    #[arg(long)]
    pub input: Option<String>,
    /// Identifier stamped on every event.
    #[arg(long)]
    pub pmu_id: Option<String>,
    /// Sample rate of raw stdin input; defaults to the checkpoint's rate.
    #[arg(long)]
    pub raw_rate: Option<u32>,
    /// Interleaved channels of raw stdin input (1 or 2).
    #[arg(long)]
    pub raw_channels: Option<usize>,
    #[arg(long)]
    pub window_s: Option<f64>,
    /// Run inference every this many hops.
    #[arg(long)]
    pub stride_hops: Option<usize>,
    /// Minimum posterior of the winning class.
    #[arg(long)]
    pub threshold: Option<f64>,
    /// Agreeing consecutive inferences required before an event.
    #[arg(long)]
    pub persistence: Option<usize>,
    /// Dead time after an event, in stream milliseconds.
    #[arg(long)]
    pub refractory_ms: Option<u64>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct DetectSettings {
    pub checkpoint: Option<PathBuf>,
    pub input: String,
    pub pmu_id: String,
    pub raw_rate: Option<u32>,
    pub raw_channels: usize,
    pub window_s: f64,
    pub stride_hops: usize,
    pub threshold: f64,
    pub persistence: usize,
    pub refractory_ms: u64,
}

impl Default for DetectSettings {
    fn default() -> Self {
        let d = DetectorConfig::default();
        Self {
            checkpoint: None,
            input: "-".into(),
            pmu_id: "pmu-1".into(),
            raw_rate: None,
            raw_channels: 1,
            window_s: d.window_s,
            stride_hops: d.stride_hops,
            threshold: d.threshold,
            persistence: d.persistence,
            refractory_ms: d.refractory_ms,
        }
    }
}

impl DetectArgs {
    pub fn resolve(&self, mut s: DetectSettings) -> DetectSettings {
        overlay!(s, self;
            some checkpoint, set input, set pmu_id, some raw_rate, set raw_channels, set window_s,
            set stride_hops, set threshold, set persistence, set refractory_ms);
        s
    }
}

impl DetectSettings {
    pub fn detector_config(&self) -> DetectorConfig {
        DetectorConfig {
            window_s: self.window_s,
            stride_hops: self.stride_hops,
            threshold: self.threshold,
            persistence: self.persistence,
            refractory_ms: self.refractory_ms,
        }
    }
}

fn emit(out: &mut impl Write, events: &[HitEvent]) -> anyhow::Result<()> {
    for e in events {
        serde_json::to_writer(&mut *out, e)?;
        out.write_all(b"\n").context("writing events")?;
    }
    if !events.is_empty() {
        out.flush().context("writing events")?;
    }
    Ok(())
}

pub fn run(s: &DetectSettings) -> anyhow::Result<()> {
    let checkpoint = super::infer::load_checkpoint(&required(&s.checkpoint, "checkpoint", "detect")?)?;
    let rate = checkpoint.frontend.sample_rate;
    let mut detector = Detector::new(s.pmu_id.clone(), Classifier::new(checkpoint), s.detector_config())?;
    let mut out = BufWriter::new(std::io::stdout().lock());
    let mut count = 0usize;

    if s.input == "-" {
        if let Some(r) = s.raw_rate.filter(|&r| r != rate) {
            bail!("raw input rate {r} Hz does not match the checkpoint's {rate} Hz");
        }
        if !(1..=2).contains(&s.raw_channels) {
            bail!("raw_channels must be 1 or 2, got {}", s.raw_channels);
        }
        let frame_bytes = 2 * s.raw_channels;
        let mut stdin = std::io::stdin().lock();
        let mut buf = vec![0u8; 8192];
        let mut pending = Vec::new();
        loop {
            let n = stdin.read(&mut buf).context("reading stdin")?;
            if n == 0 {
                break;
            }
            pending.extend_from_slice(&buf[..n]);
            let usable = pending.len() - pending.len() % frame_bytes;
            let samples = decode_pcm16le(&pending[..usable]);
            pending.drain(..usable);
            let mono: Vec<f32> = if s.raw_channels == 2 {
                samples.chunks_exact(2).map(|p| (p[0] + p[1]) / 2.0).collect()
            } else {
                samples
            };
            let events = detector.push_samples(&mono)?;
            count += events.len();
            emit(&mut out, &events)?;
        }
        if !pending.is_empty() {
            eprintln!("warning: ignored {} trailing bytes (partial frame)", pending.len());
        }
    } else {
        let clip = read_wav_file(&s.input)?;
        if clip.sample_rate() != rate {
            bail!("{} is {} Hz but the checkpoint expects {rate} Hz", s.input, clip.sample_rate());
        }
        let mono = downmix_mono(&clip);
        for chunk in mono.channel(0).chunks(WAV_CHUNK) {
            let events = detector.push_samples(chunk)?;
            count += events.len();
            emit(&mut out, &events)?;
        }
    }
    eprintln!("{count} events over {} samples", detector.position());
    Ok(())
}

use std::f64::consts::TAU;
use std::fmt::Write as _;
use std::sync::Arc;

use rustfft::num_complex::Complex;
use rustfft::{Fft, FftPlanner};
use serde::{Deserialize, Serialize};

use super::DspError;
use crate::audio::AudioClip;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SpectrogramConfig {
    pub window_ms: f64,
    pub hop_ms: f64,
    /// `None` picks the smallest power of two covering the window.
    #[serde(default)]
    pub fft_size: Option<usize>,
    pub feature_bins: usize,
    pub log_floor: f64,
}

impl Default for SpectrogramConfig {
    fn default() -> Self {
        Self {
            window_ms: 30.0,
            hop_ms: 20.0,
            fft_size: None,
            feature_bins: 40,
            log_floor: 1e-6,
        }
    }
}

/// Sample-domain framing resolved for one sample rate.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct FrameGeometry {
    pub window: usize,
    pub hop: usize,
    pub fft_size: usize,
    pub features: usize,
}

impl FrameGeometry {
    /// `1 + floor((n - window) / hop)`, or `None` when `n < window`.
    pub fn frame_count(&self, n: usize) -> Option<usize> {
        (n >= self.window).then(|| 1 + (n - self.window) / self.hop)
    }

    pub fn spectrum_bins(&self) -> usize {
        self.fft_size / 2
    }
}

impl SpectrogramConfig {
    pub fn geometry(&self, rate: u32) -> Result<FrameGeometry, DspError> {
        let bad = |m: String| Err(DspError::InvalidConfig(m));
        let rate = f64::from(rate);
        let window = (self.window_ms * rate / 1000.0).round();
        let hop = (self.hop_ms * rate / 1000.0).round();
        if !(window >= 1.0 && window.is_finite()) {
            return bad(format!("window of {} ms is empty at {rate} Hz", self.window_ms));
        }
        if !(hop >= 1.0 && hop.is_finite()) {
            return bad(format!("hop of {} ms is empty at {rate} Hz", self.hop_ms));
        }
        let window = window as usize;
        let hop = hop as usize;
        let fft_size = self.fft_size.unwrap_or_else(|| window.next_power_of_two());
        if !fft_size.is_power_of_two() || fft_size < window {
            return bad(format!(
                "fft size {fft_size} must be a power of two of at least {window} samples"
            ));
        }
        if self.feature_bins == 0 || self.feature_bins > fft_size / 2 {
            return bad(format!(
                "{} feature bins cannot be drawn from {} spectrum bins",
                self.feature_bins,
                fft_size / 2
            ));
        }
        if !(self.log_floor > 0.0 && self.log_floor.is_finite()) {
            return bad(format!("log floor {} must be positive", self.log_floor));
        }
        Ok(FrameGeometry {
            window,
            hop,
            fft_size,
            features: self.feature_bins,
        })
    }
}

/// Split a mono clip into full windows; a trailing partial window is dropped.
pub fn frame_signal<'a>(
    clip: &'a AudioClip,
    cfg: &SpectrogramConfig,
) -> Result<Vec<&'a [f32]>, DspError> {
    let samples = clip
        .mono_samples()
        .map_err(|_| DspError::NotMono(clip.num_channels()))?;
    let g = cfg.geometry(clip.sample_rate())?;
    let count = g.frame_count(samples.len()).ok_or(DspError::ClipTooShort {
        len: samples.len(),
        window: g.window,
    })?;
    Ok((0..count)
        .map(|t| &samples[t * g.hop..t * g.hop + g.window])
        .collect())
}

/// Periodic Hann window.
fn hann(len: usize) -> Vec<f64> {
    (0..len)
        .map(|n| 0.5 - 0.5 * (TAU * n as f64 / len as f64).cos())
        .collect()
}

/// Per-frame feature extractor holding the FFT plan and scratch buffers.
///
/// Features for one frame: Hann window, zero-pad to `fft_size`, magnitudes of
/// the first `fft_size/2` bins, mean magnitude over `F` contiguous bin groups,
/// then `ln(x + log_floor)`. Group `f` covers bins `[f·B/F, (f+1)·B/F)`.
pub struct SpectrumAnalyzer {
    geometry: FrameGeometry,
    log_floor: f64,
    fft: Arc<dyn Fft<f64>>,
    window: Vec<f64>,
    edges: Vec<usize>,
    buffer: Vec<Complex<f64>>,
    scratch: Vec<Complex<f64>>,
}

impl std::fmt::Debug for SpectrumAnalyzer {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.debug_struct("SpectrumAnalyzer")
            .field("geometry", &self.geometry)
            .field("log_floor", &self.log_floor)
            .finish_non_exhaustive()
    }
}

impl SpectrumAnalyzer {
    pub fn new(geometry: FrameGeometry, log_floor: f64) -> Self {
        let fft = FftPlanner::new().plan_fft_forward(geometry.fft_size);
        let scratch = vec![Complex::default(); fft.get_inplace_scratch_len()];
        let bins = geometry.spectrum_bins();
        let edges = (0..=geometry.features)
            .map(|f| f * bins / geometry.features)
            .collect();
        Self {
            geometry,
            log_floor,
            fft,
            window: hann(geometry.window),
            edges,
            buffer: vec![Complex::default(); geometry.fft_size],
            scratch,
        }
    }

    pub fn for_config(cfg: &SpectrogramConfig, rate: u32) -> Result<Self, DspError> {
        Ok(Self::new(cfg.geometry(rate)?, cfg.log_floor))
    }

    pub fn geometry(&self) -> FrameGeometry {
        self.geometry
    }

    /// Feature group boundaries in spectrum-bin units (`F + 1` entries).
    pub fn group_edges(&self) -> &[usize] {
        &self.edges
    }

    pub fn frame_features(&mut self, frame: &[f32], out: &mut [f64]) {
        assert_eq!(frame.len(), self.geometry.window, "frame length");
        assert_eq!(out.len(), self.geometry.features, "feature row length");
        for (slot, (&x, &w)) in self.buffer.iter_mut().zip(frame.iter().zip(&self.window)) {
            *slot = Complex::new(f64::from(x) * w, 0.0);
        }
        for slot in &mut self.buffer[self.geometry.window..] {
            *slot = Complex::default();
        }
        self.fft
            .process_with_scratch(&mut self.buffer, &mut self.scratch);
        for (f, value) in out.iter_mut().enumerate() {
            let group = &self.buffer[self.edges[f]..self.edges[f + 1]];
            let mean = group.iter().map(|c| c.norm()).sum::<f64>() / group.len() as f64;
            *value = (mean + self.log_floor).ln();
        }
    }
}

/// T×F log-magnitude feature map, row-major (one row per frame).
#[derive(Debug, Clone, PartialEq)]
pub struct Spectrogram {
    frames: usize,
    features: usize,
    values: Vec<f64>,
    config: SpectrogramConfig,
}

impl Spectrogram {
    pub fn from_rows(
        frames: usize,
        features: usize,
        values: Vec<f64>,
        config: SpectrogramConfig,
    ) -> Self {
        assert_eq!(values.len(), frames * features);
        Self {
            frames,
            features,
            values,
            config,
        }
    }

    /// `(T, F)`.
    pub fn shape(&self) -> (usize, usize) {
        (self.frames, self.features)
    }

    pub fn values(&self) -> &[f64] {
        &self.values
    }

    pub fn into_values(self) -> Vec<f64> {
        self.values
    }

    pub fn row(&self, t: usize) -> &[f64] {
        &self.values[t * self.features..(t + 1) * self.features]
    }

    pub fn config(&self) -> &SpectrogramConfig {
        &self.config
    }

    /// T rows of F comma-separated values, no header.
    pub fn to_csv(&self) -> String {
        let mut out = String::new();
        for t in 0..self.frames {
            for (f, v) in self.row(t).iter().enumerate() {
                if f > 0 {
                    out.push(',');
                }
                write!(out, "{v}").unwrap();
            }
            out.push('\n');
        }
        out
    }
}

pub fn spectrogram(clip: &AudioClip, cfg: &SpectrogramConfig) -> Result<Spectrogram, DspError> {
    let frames = frame_signal(clip, cfg)?;
    let mut analyzer = SpectrumAnalyzer::for_config(cfg, clip.sample_rate())?;
    let f = cfg.feature_bins;
    let mut values = vec![0.0; frames.len() * f];
    for (frame, row) in frames.iter().zip(values.chunks_exact_mut(f)) {
        analyzer.frame_features(frame, row);
    }
    Ok(Spectrogram::from_rows(frames.len(), f, values, cfg.clone()))
}

fn fft_of(samples: &[f32], window: Option<&[f64]>, fft_size: usize) -> Vec<Complex<f64>> {
    let mut buf: Vec<Complex<f64>> = samples
        .iter()
        .enumerate()
        .map(|(i, &x)| Complex::new(f64::from(x) * window.map_or(1.0, |w| w[i]), 0.0))
        .collect();
    buf.resize(fft_size, Complex::default());
    FftPlanner::new().plan_fft_forward(fft_size).process(&mut buf);
    buf
}

/// |X_k| for all `fft_size` bins of the zero-padded, unwindowed input.
pub fn fft_magnitudes(samples: &[f32], fft_size: usize) -> Vec<f64> {
    assert!(fft_size >= samples.len(), "fft size shorter than input");
    fft_of(samples, None, fft_size)
        .into_iter()
        .map(|c| c.norm())
        .collect()
}

/// |X_k|² over all bins of an unwindowed FFT whose length equals the input.
pub fn power_spectrum(samples: &[f32]) -> Vec<f64> {
    fft_of(samples, None, samples.len())
        .into_iter()
        .map(|c| c.norm_sqr())
        .collect()
}

/// Mean power of the clip inside `[center - bw/2, center + bw/2]`.
///
/// The whole clip is Hann windowed and zero-padded to a power of two. Power is
/// normalized by the window energy and folded over both spectrum halves, so a
/// pure in-band sine of amplitude A reads ≈ A²/2.
pub fn band_energy(clip: &AudioClip, center_hz: f64, bandwidth_hz: f64) -> Result<f64, DspError> {
    let samples = clip
        .mono_samples()
        .map_err(|_| DspError::NotMono(clip.num_channels()))?;
    let rate = f64::from(clip.sample_rate());
    let nyquist_hz = rate / 2.0;
    let (lo_hz, hi_hz) = (center_hz - bandwidth_hz / 2.0, center_hz + bandwidth_hz / 2.0);
    if !(bandwidth_hz > 0.0 && lo_hz >= 0.0 && hi_hz <= nyquist_hz) {
        return Err(DspError::BandOutOfRange {
            lo_hz,
            hi_hz,
            nyquist_hz,
        });
    }
    if samples.is_empty() {
        return Ok(0.0);
    }
    let k = samples.len().next_power_of_two();
    let window = hann(samples.len());
    let window_energy: f64 = window.iter().map(|w| w * w).sum();
    if window_energy == 0.0 {
        return Ok(0.0);
    }
    let spectrum = fft_of(samples, Some(&window), k);
    let first = (lo_hz * k as f64 / rate).ceil() as usize;
    let last = ((hi_hz * k as f64 / rate).floor() as usize).min(k / 2);
    let power: f64 = spectrum[first..=last].iter().map(|c| c.norm_sqr()).sum();
    Ok(2.0 * power / (k as f64 * window_energy))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::audio::{synthesize, Component, SynthSpec};
    use proptest::prelude::*;

    fn tone(freq: f64, amp: f64) -> AudioClip {
        synthesize(
            &SynthSpec::new(44_100, 1.0).with(Component::tone(freq, amp, 0.0, 1.0)),
            0,
        )
        .unwrap()
    }

    #[test]
    fn default_geometry_at_44k1() {
        let g = SpectrogramConfig::default().geometry(44_100).unwrap();
        assert_eq!(
            g,
            FrameGeometry {
                window: 1323,
                hop: 882,
                fft_size: 2048,
                features: 40
            }
        );
    }

    #[test]
    fn framing_counts() {
        let cfg = SpectrogramConfig::default();
        let clip = AudioClip::silence(44_100, 44_100).unwrap();
        let frames = frame_signal(&clip, &cfg).unwrap();
        assert_eq!(frames.len(), 49);
        assert!(frames.iter().all(|f| f.len() == 1323));

        let one = AudioClip::silence(44_100, 1323).unwrap();
        assert_eq!(frame_signal(&one, &cfg).unwrap().len(), 1);

        let short = AudioClip::silence(44_100, 1322).unwrap();
        assert_eq!(
            frame_signal(&short, &cfg),
            Err(DspError::ClipTooShort {
                len: 1322,
                window: 1323
            })
        );
    }

    #[test]
    fn invalid_configs() {
        let mut cfg = SpectrogramConfig::default();
        cfg.fft_size = Some(1024);
        assert!(cfg.geometry(44_100).is_err());
        cfg.fft_size = Some(3000);
        assert!(cfg.geometry(44_100).is_err());
        let cfg = SpectrogramConfig {
            feature_bins: 1025,
            ..Default::default()
        };
        assert!(cfg.geometry(44_100).is_err());
        let cfg = SpectrogramConfig {
            log_floor: 0.0,
            ..Default::default()
        };
        assert!(cfg.geometry(44_100).is_err());
    }

    #[test]
    fn silence_hits_the_log_floor() {
        let cfg = SpectrogramConfig::default();
        let s = spectrogram(&AudioClip::silence(44_100, 44_100).unwrap(), &cfg).unwrap();
        assert_eq!(s.shape(), (49, 40));
        let floor = cfg.log_floor.ln();
        assert!(s.values().iter().all(|&v| v == floor));
    }

    #[test]
    fn tone_peaks_in_its_group() {
        let cfg = SpectrogramConfig::default();
        // bin spacing 44100/2048 Hz; 40 groups over 1024 bins
        for (freq, group) in [(100.0, 0usize), (3000.0, 5), (10_000.0, 18)] {
            let bin = (freq * 2048.0 / 44_100.0f64).round() as usize;
            assert_eq!(bin * 40 / 1024, group, "oracle arithmetic for {freq} Hz");
            let s = spectrogram(&tone(freq, 0.5), &cfg).unwrap();
            for t in 0..49 {
                let row = s.row(t);
                let argmax = (0..40)
                    .max_by(|&a, &b| row[a].total_cmp(&row[b]))
                    .unwrap();
                assert_eq!(argmax, group, "{freq} Hz frame {t}");
            }
        }
    }

    #[test]
    fn csv_shape() {
        let s = spectrogram(
            &AudioClip::silence(44_100, 44_100).unwrap(),
            &SpectrogramConfig::default(),
        )
        .unwrap();
        let csv = s.to_csv();
        let rows: Vec<&str> = csv.lines().collect();
        assert_eq!(rows.len(), 49);
        assert!(rows.iter().all(|r| r.split(',').count() == 40));
    }

    #[test]
    fn band_energy_of_assist_tone() {
        let e = band_energy(&tone(10_000.0, 0.3), 10_000.0, 200.0).unwrap();
        assert!((e - 0.045).abs() <= 0.045 * 0.05, "{e}");
    }

    #[test]
    fn band_energy_of_silence_and_leakage() {
        let silence = AudioClip::silence(44_100, 44_100).unwrap();
        assert!(band_energy(&silence, 10_000.0, 200.0).unwrap().abs() <= 1e-12);
        let low = band_energy(&tone(100.0, 0.5), 10_000.0, 200.0).unwrap();
        assert!(low <= 1e-6, "{low}");
    }

    #[test]
    fn band_out_of_range() {
        let clip = tone(100.0, 0.5);
        assert!(band_energy(&clip, 22_000.0, 200.0).is_err());
        assert!(band_energy(&clip, 50.0, 200.0).is_err());
        assert!(band_energy(&clip, 1000.0, 0.0).is_err());
    }

    #[test]
    fn pure_tone_energy_in_nearest_bin_pair() {
        for freq in [100.0, 252.0, 1000.0, 10_000.0] {
            let clip = tone(freq, 0.4);
            let p = power_spectrum(clip.channel(0));
            let n = p.len();
            let k = (freq * n as f64 / 44_100.0).round() as usize;
            let total: f64 = p.iter().sum();
            assert!((p[k] + p[n - k]) / total > 0.99, "{freq} Hz");
        }
    }

    proptest! {
        #[test]
        fn frame_count_law(w in 1usize..400, h in 1usize..400, extra in 0usize..2000) {
            let n = w + extra;
            let g = FrameGeometry { window: w, hop: h, fft_size: w.next_power_of_two(), features: 1 };
            let t = g.frame_count(n).unwrap();
            // every frame fits, and one more would not
            prop_assert!((t - 1) * h + w <= n);
            prop_assert!(t * h + w > n);
            prop_assert_eq!(t, 1 + (n - w) / h);
        }

        #[test]
        fn spectrogram_shape_follows_frame_law(
            window_ms in 2.0f64..40.0,
            hop_ms in 1.0f64..40.0,
            n in 0usize..6000,
        ) {
            let rate = 8000;
            let cfg = SpectrogramConfig { window_ms, hop_ms, feature_bins: 4, ..Default::default() };
            let g = cfg.geometry(rate).unwrap();
            let clip = AudioClip::silence(rate, n).unwrap();
            match spectrogram(&clip, &cfg) {
                Ok(s) => {
                    prop_assert!(n >= g.window);
                    prop_assert_eq!(s.shape(), (1 + (n - g.window) / g.hop, 4));
                    let floor = cfg.log_floor.ln();
                    prop_assert!(s.values().iter().all(|&v| v >= floor));
                }
                Err(e) => {
                    prop_assert!(n < g.window);
                    prop_assert_eq!(e, DspError::ClipTooShort { len: n, window: g.window });
                }
            }
        }

        #[test]
        fn parseval_on_padded_frames(
            frame in prop::collection::vec(-1.0f32..=1.0, 1..300),
            pad in 0u32..3,
        ) {
            let fft_size = frame.len().next_power_of_two() << pad;
            let time: f64 = frame.iter().map(|&x| f64::from(x).powi(2)).sum();
            let freq: f64 = fft_magnitudes(&frame, fft_size).iter().map(|m| m * m).sum::<f64>()
                / fft_size as f64;
            let scale = time.max(1e-300);
            prop_assert!((time - freq).abs() / scale < 1e-6 || time < 1e-20);
        }
    }
}

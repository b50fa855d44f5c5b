use std::f64::consts::{PI, SQRT_2};

use serde::{Deserialize, Serialize};

use super::DspError;
use crate::audio::AudioClip;

/// Second-order section with `a0` normalized to 1.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct BiquadCoeffs {
    pub b0: f64,
    pub b1: f64,
    pub b2: f64,
    pub a1: f64,
    pub a2: f64,
}

impl BiquadCoeffs {
    /// Roots of `z² + a1·z + a2` as `(re, im)` pairs.
    pub fn poles(&self) -> [(f64, f64); 2] {
        let disc = self.a1 * self.a1 - 4.0 * self.a2;
        let re = -self.a1 / 2.0;
        if disc < 0.0 {
            let im = (-disc).sqrt() / 2.0;
            [(re, im), (re, -im)]
        } else {
            let d = disc.sqrt() / 2.0;
            [(re + d, 0.0), (re - d, 0.0)]
        }
    }

    pub fn is_stable(&self) -> bool {
        self.poles().iter().all(|(re, im)| re.hypot(*im) < 1.0)
    }

    /// |H(e^{jω})| at `freq_hz`.
    pub fn magnitude(&self, freq_hz: f64, rate_hz: f64) -> f64 {
        let w = 2.0 * PI * freq_hz / rate_hz;
        let (c1, s1) = (w.cos(), -w.sin());
        let (c2, s2) = ((2.0 * w).cos(), -(2.0 * w).sin());
        let num_re = self.b0 + self.b1 * c1 + self.b2 * c2;
        let num_im = self.b1 * s1 + self.b2 * s2;
        let den_re = 1.0 + self.a1 * c1 + self.a2 * c2;
        let den_im = self.a1 * s1 + self.a2 * s2;
        num_re.hypot(num_im) / den_re.hypot(den_im)
    }

    pub fn magnitude_db(&self, freq_hz: f64, rate_hz: f64) -> f64 {
        20.0 * self.magnitude(freq_hz, rate_hz).log10()
    }
}

/// Second-order Butterworth low-pass, bilinear transform with the cutoff
/// prewarped so the digital response is exactly −3.01 dB at `cutoff_hz`.
pub fn design_lowpass(cutoff_hz: f64, rate_hz: f64) -> Result<BiquadCoeffs, DspError> {
    let nyquist_hz = rate_hz / 2.0;
    if !(cutoff_hz > 0.0 && cutoff_hz < nyquist_hz) {
        return Err(DspError::CutoffOutOfRange {
            cutoff_hz,
            nyquist_hz,
        });
    }
    let k = (PI * cutoff_hz / rate_hz).tan();
    let k2 = k * k;
    let norm = 1.0 / (1.0 + SQRT_2 * k + k2);
    let b0 = k2 * norm;
    Ok(BiquadCoeffs {
        b0,
        b1: 2.0 * b0,
        b2: b0,
        a1: 2.0 * (k2 - 1.0) * norm,
        a2: (1.0 - SQRT_2 * k + k2) * norm,
    })
}

/// Transposed direct-form II biquad with persistent state, for streams.
#[derive(Debug, Clone)]
pub struct Biquad {
    coeffs: BiquadCoeffs,
    s1: f64,
    s2: f64,
}

impl Biquad {
    pub fn new(coeffs: BiquadCoeffs) -> Self {
        Self {
            coeffs,
            s1: 0.0,
            s2: 0.0,
        }
    }

    #[inline]
    pub fn process(&mut self, x: f64) -> f64 {
        let c = &self.coeffs;
        let y = c.b0 * x + self.s1;
        self.s1 = c.b1 * x - c.a1 * y + self.s2;
        self.s2 = c.b2 * x - c.a2 * y;
        y
    }

    /// Filter a block, saturating output to the normalized sample range.
    pub fn process_block(&mut self, input: &[f32]) -> Vec<f32> {
        input
            .iter()
            .map(|&x| self.process(f64::from(x)).clamp(-1.0, 1.0) as f32)
            .collect()
    }

    pub fn reset(&mut self) {
        self.s1 = 0.0;
        self.s2 = 0.0;
    }
}

/// Filter a mono clip from zero initial state. Overshoot past full scale is
/// saturated so the output remains a valid clip.
pub fn filter_apply(coeffs: &BiquadCoeffs, clip: &AudioClip) -> Result<AudioClip, DspError> {
    let samples = clip
        .mono_samples()
        .map_err(|_| DspError::NotMono(clip.num_channels()))?;
    let out = Biquad::new(*coeffs).process_block(samples);
    Ok(AudioClip::mono(clip.sample_rate(), out).expect("saturated output is within range"))
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    const RATE: f64 = 44_100.0;

    /// Analog Butterworth magnitude 1/sqrt(1 + (f/fc)^4) in dB.
    fn analog_db(f: f64, fc: f64) -> f64 {
        -10.0 * (1.0 + (f / fc).powi(4)).log10()
    }

    #[test]
    fn cutoff_is_minus_three_db() {
        let c = design_lowpass(252.0, RATE).unwrap();
        assert!((c.magnitude_db(252.0, RATE) + 3.0103).abs() < 0.1);
    }

    #[test]
    fn stopband_and_passband() {
        let c = design_lowpass(252.0, RATE).unwrap();
        let at_10k = c.magnitude_db(10_000.0, RATE);
        // analytic prototype gives ≈ -63.9 dB; bilinear warping only deepens it
        assert!((analog_db(10_000.0, 252.0) + 63.9).abs() < 0.1);
        assert!(at_10k <= -60.0, "{at_10k}");
        assert!(at_10k <= analog_db(10_000.0, 252.0) + 4.0);
        assert!(c.magnitude_db(50.0, RATE) >= -0.1);
        assert!((c.magnitude(0.0, RATE) - 1.0).abs() < 1e-12);
    }

    #[test]
    fn rejects_out_of_range_cutoff() {
        for cutoff in [0.0, -5.0, 22_050.0, 30_000.0, f64::NAN] {
            assert!(design_lowpass(cutoff, RATE).is_err());
        }
    }

    fn mono(samples: Vec<f32>) -> AudioClip {
        AudioClip::mono(RATE as u32, samples).unwrap()
    }

    #[test]
    fn zero_in_zero_out() {
        let c = design_lowpass(252.0, RATE).unwrap();
        let out = filter_apply(&c, &mono(vec![0.0; 1000])).unwrap();
        assert_eq!(out.len(), 1000);
        assert!(out.channel(0).iter().all(|&v| v == 0.0));
    }

    #[test]
    fn unity_dc_gain() {
        let c = design_lowpass(252.0, RATE).unwrap();
        let out = filter_apply(&c, &mono(vec![0.5; 44_100])).unwrap();
        let tail = &out.channel(0)[40_000..];
        assert!(tail.iter().all(|&v| (v - 0.5).abs() < 1e-6));
    }

    #[test]
    fn attenuates_assist_tone() {
        let c = design_lowpass(252.0, RATE).unwrap();
        let input: Vec<f32> = (0..44_100)
            .map(|i| (0.5 * (2.0 * PI * 10_000.0 * i as f64 / RATE).sin()) as f32)
            .collect();
        let out = filter_apply(&c, &mono(input)).unwrap();
        let peak = out.channel(0)[22_050..]
            .iter()
            .fold(0.0f32, |m, v| m.max(v.abs()));
        assert!(peak <= 0.0005, "{peak}");
    }

    #[test]
    fn stereo_input_is_rejected() {
        let c = design_lowpass(252.0, RATE).unwrap();
        let clip = AudioClip::stereo(44_100, vec![0.0], vec![0.0]).unwrap();
        assert_eq!(filter_apply(&c, &clip), Err(DspError::NotMono(2)));
    }

    #[test]
    fn monotone_attenuation() {
        let c = design_lowpass(252.0, RATE).unwrap();
        let nyquist = RATE / 2.0;
        let (lo, hi) = (1.0f64.ln(), (nyquist * 0.999).ln());
        let mut prev = f64::INFINITY;
        for i in 0..100 {
            let f = (lo + (hi - lo) * i as f64 / 99.0).exp();
            let m = c.magnitude(f, RATE);
            assert!(m <= prev + 1e-12, "magnitude rose at {f} Hz");
            prev = m;
        }
    }

    proptest! {
        #[test]
        fn always_stable(frac in 1e-4f64..0.9999, rate in 1_000.0f64..192_000.0) {
            let c = design_lowpass(frac * rate / 2.0, rate).unwrap();
            prop_assert!(c.is_stable());
        }
    }
}

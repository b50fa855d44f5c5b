//! The front end: low-pass filtering, framing, FFT spectrograms and
//! band-energy measurement.

mod filter;
mod frontend;
mod spectrum;

pub use filter::{design_lowpass, filter_apply, Biquad, BiquadCoeffs};
pub use frontend::FrontEnd;
pub use spectrum::{
    band_energy, fft_magnitudes, frame_signal, power_spectrum, spectrogram, FrameGeometry,
    Spectrogram, SpectrogramConfig, SpectrumAnalyzer,
};

use thiserror::Error;

#[derive(Debug, Error, PartialEq)]
pub enum DspError {
    #[error("cutoff {cutoff_hz} Hz must lie strictly between 0 and Nyquist ({nyquist_hz} Hz)")]
    CutoffOutOfRange { cutoff_hz: f64, nyquist_hz: f64 },
    #[error("invalid spectrogram config: {0}")]
    InvalidConfig(String),
    #[error("clip of {len} samples is shorter than one {window}-sample window")]
    ClipTooShort { len: usize, window: usize },
    #[error("expected a mono clip, got {0} channels")]
    NotMono(usize),
    #[error("sample rate {got} Hz does not match the configured {expected} Hz")]
    SampleRateMismatch { expected: u32, got: u32 },
    #[error("band [{lo_hz}, {hi_hz}] Hz is outside [0, {nyquist_hz}] Hz")]
    BandOutOfRange { lo_hz: f64, hi_hz: f64, nyquist_hz: f64 },
}

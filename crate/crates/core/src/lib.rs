//! Signal pipeline and match engine for a body-worn microphone hit detector.
//!
//! Audio flows through [`dsp`] into a spectrogram, the [`nn`] classifier turns
//! it into class posteriors, [`detect`] turns a stream of posteriors into
//! [`detect::HitEvent`]s, and [`game`] folds those events into HP/ATK/DEF match
//! state. [`train`] and [`eval`] cover model fitting and reporting.

pub mod audio;
pub mod detect;
pub mod dsp;
pub mod eval;
pub mod game;
pub mod nn;
pub mod train;

mod error;

pub use error::{Error, Result};

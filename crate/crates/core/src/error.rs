use thiserror::Error;

use crate::{audio::AudioError, detect::DetectError, dsp::DspError, eval::EvalError, game::GameError, nn::NnError, train::TrainError};

/// Any error raised by the pipeline, for callers that do not care which stage failed.
#[derive(Debug, Error)]
pub enum Error {
    #[error(transparent)]
    Audio(#[from] AudioError),
    #[error(transparent)]
    Dsp(#[from] DspError),
    #[error(transparent)]
    Nn(#[from] NnError),
    #[error(transparent)]
    Train(#[from] TrainError),
    #[error(transparent)]
    Eval(#[from] EvalError),
    #[error(transparent)]
    Detect(#[from] DetectError),
    #[error(transparent)]
    Game(#[from] GameError),
}

pub type Result<T, E = Error> = std::result::Result<T, E>;

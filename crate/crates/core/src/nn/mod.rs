//! Depthwise-conv → ReLU → fully-connected → softmax classifier with exact
//! analytic gradients. Everything runs in f64.

mod model;
mod params;
mod tensor;

pub use model::{
    depthwise_conv2d, forward, fully_connected, loss_and_gradients, predict, softmax, Forward,
};
pub use params::{Arch, ModelParams, Padding, TENSOR_NAMES};
pub use tensor::Tensor;

use thiserror::Error;

#[derive(Debug, Error, PartialEq)]
pub enum NnError {
    #[error("{what} shape mismatch: expected {expected:?}, got {got:?}")]
    ShapeMismatch {
        what: &'static str,
        expected: Vec<usize>,
        got: Vec<usize>,
    },
    #[error("tensor of shape {shape:?} needs {expected} values, got {got}")]
    DataLength {
        shape: Vec<usize>,
        expected: usize,
        got: usize,
    },
    #[error("non-finite value at flat index {0}")]
    NonFinite(usize),
    #[error("label {label} out of range for {classes} classes")]
    LabelOutOfRange { label: usize, classes: usize },
    #[error("empty batch")]
    EmptyBatch,
    #[error("invalid architecture: {0}")]
    InvalidArch(String),
}

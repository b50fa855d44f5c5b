use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use super::{NnError, Tensor};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Padding {
    /// Output extent `ceil(in / stride)`; zero padding split floor-before,
    /// ceil-after.
    Same,
}

/// Static description of the classifier's layer shapes.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct Arch {
    /// `(T, F)` of the spectrogram input; the channel count is 1.
    pub input_shape: (usize, usize),
    /// Depthwise kernel extent `(kh, kw)` along (time, frequency).
    pub kernel: (usize, usize),
    /// Depthwise channel multiplier.
    pub multiplier: usize,
    pub stride: (usize, usize),
    pub padding: Padding,
    pub beta: f64,
    pub classes: usize,
}

impl Arch {
    /// Default layer card: 10×1 kernel, 8 filters, stride 2×2, SAME, β = 1.
    pub fn new(input_shape: (usize, usize), classes: usize) -> Self {
        Self {
            input_shape,
            kernel: (10, 1),
            multiplier: 8,
            stride: (2, 2),
            padding: Padding::Same,
            beta: 1.0,
            classes,
        }
    }

    pub fn validate(&self) -> Result<(), NnError> {
        let bad = |m: &str| Err(NnError::InvalidArch(m.into()));
        if self.input_shape.0 == 0 || self.input_shape.1 == 0 {
            return bad("input extents must be positive");
        }
        if self.kernel.0 == 0 || self.kernel.1 == 0 || self.multiplier == 0 {
            return bad("kernel extents and multiplier must be positive");
        }
        if self.stride.0 == 0 || self.stride.1 == 0 {
            return bad("strides must be positive");
        }
        if !(self.beta.is_finite() && self.beta > 0.0) {
            return bad("softmax beta must be positive");
        }
        if self.classes < 2 {
            return bad("at least two classes are required");
        }
        Ok(())
    }

    /// `(out, pad_before)` along one axis under SAME padding.
    pub fn same_axis(input: usize, kernel: usize, stride: usize) -> (usize, usize) {
        let out = input.div_ceil(stride);
        let total = ((out - 1) * stride + kernel).saturating_sub(input);
        (out, total / 2)
    }

    /// `(⌈T/sh⌉, ⌈F/sw⌉, multiplier)`.
    pub fn conv_output_shape(&self) -> (usize, usize, usize) {
        let (oh, _) = Self::same_axis(self.input_shape.0, self.kernel.0, self.stride.0);
        let (ow, _) = Self::same_axis(self.input_shape.1, self.kernel.1, self.stride.1);
        (oh, ow, self.multiplier)
    }

    /// Flattened conv output length, the FC layer's input size `D`.
    pub fn fc_input_len(&self) -> usize {
        let (oh, ow, m) = self.conv_output_shape();
        oh * ow * m
    }
}

/// Learnable tensors plus the architecture they belong to.
///
/// Shapes: `dw_kernel [kh, kw, 1, m]`, `dw_bias [m]`, `fc_weights [C, D]`,
/// `fc_bias [C]`.
#[derive(Debug, Clone, PartialEq)]
pub struct ModelParams {
    pub arch: Arch,
    pub dw_kernel: Tensor,
    pub dw_bias: Tensor,
    pub fc_weights: Tensor,
    pub fc_bias: Tensor,
}

pub const TENSOR_NAMES: [&str; 4] = ["dw_kernel", "dw_bias", "fc_weights", "fc_bias"];

impl ModelParams {
    pub fn zeros(arch: Arch) -> Result<Self, NnError> {
        arch.validate()?;
        let (kh, kw) = arch.kernel;
        let m = arch.multiplier;
        let d = arch.fc_input_len();
        let c = arch.classes;
        Ok(Self {
            dw_kernel: Tensor::zeros(vec![kh, kw, 1, m]),
            dw_bias: Tensor::zeros(vec![m]),
            fc_weights: Tensor::zeros(vec![c, d]),
            fc_bias: Tensor::zeros(vec![c]),
            arch,
        })
    }

    /// Weights uniform in (−0.05, 0.05) from a seeded ChaCha8 stream (kernel
    /// first, then FC weights); biases zero.
    pub fn init(arch: Arch, seed: u64) -> Result<Self, NnError> {
        let mut p = Self::zeros(arch)?;
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        for w in p.dw_kernel.data_mut() {
            *w = rng.random_range(-0.05..0.05);
        }
        for w in p.fc_weights.data_mut() {
            *w = rng.random_range(-0.05..0.05);
        }
        Ok(p)
    }

    /// Assemble from raw tensors, checking every shape against `arch`.
    pub fn from_tensors(arch: Arch, tensors: [Tensor; 4]) -> Result<Self, NnError> {
        let reference = Self::zeros(arch.clone())?;
        for ((name, got), want) in TENSOR_NAMES.iter().zip(&tensors).zip(reference.tensors()) {
            if got.shape() != want.shape() {
                return Err(NnError::ShapeMismatch {
                    what: name,
                    expected: want.shape().to_vec(),
                    got: got.shape().to_vec(),
                });
            }
        }
        let [dw_kernel, dw_bias, fc_weights, fc_bias] = tensors;
        Ok(Self {
            arch,
            dw_kernel,
            dw_bias,
            fc_weights,
            fc_bias,
        })
    }

    /// Tensors in declaration order.
    pub fn tensors(&self) -> [&Tensor; 4] {
        [&self.dw_kernel, &self.dw_bias, &self.fc_weights, &self.fc_bias]
    }

    pub fn tensors_mut(&mut self) -> [&mut Tensor; 4] {
        [
            &mut self.dw_kernel,
            &mut self.dw_bias,
            &mut self.fc_weights,
            &mut self.fc_bias,
        ]
    }

    pub fn parameter_count(&self) -> usize {
        self.tensors().iter().map(|t| t.len()).sum()
    }

    /// `self += alpha · other`, tensor by tensor.
    pub fn add_scaled(&mut self, alpha: f64, other: &ModelParams) {
        for (dst, src) in self.tensors_mut().into_iter().zip(other.tensors()) {
            for (d, s) in dst.data_mut().iter_mut().zip(src.data()) {
                *d += alpha * s;
            }
        }
    }

    /// Plain gradient-descent step.
    pub fn sgd_step(&mut self, lr: f64, grads: &ModelParams) {
        self.add_scaled(-lr, grads);
    }
}

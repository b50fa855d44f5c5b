//! Binary checkpoint: `PMU1` magic, u16 version, u32 header length, JSON
//! header, then every tensor as little-endian f64 in declaration order.

use serde::{Deserialize, Serialize};
use thiserror::Error;

use super::LabelSet;
use crate::dsp::FrontEnd;
use crate::nn::{Arch, ModelParams, Tensor, TENSOR_NAMES};

pub const CHECKPOINT_MAGIC: &[u8; 4] = b"PMU1";
pub const CHECKPOINT_VERSION: u16 = 1;

#[derive(Debug, Error, PartialEq)]
pub enum CheckpointError {
    #[error("not a checkpoint (bad magic)")]
    BadMagic,
    #[error("checkpoint version {found} is not supported (expected {expected})")]
    Version { found: u16, expected: u16 },
    #[error("checkpoint truncated: {0}")]
    Truncated(String),
    #[error("corrupt checkpoint: {0}")]
    Corrupt(String),
}

#[derive(Debug, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
struct TensorEntry {
    name: String,
    shape: Vec<usize>,
}

#[derive(Debug, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
struct Header {
    classes: Vec<String>,
    background: Vec<String>,
    frontend: FrontEnd,
    arch: Arch,
    tensors: Vec<TensorEntry>,
}

/// A trained classifier with everything needed to featurize its input.
#[derive(Debug, Clone, PartialEq)]
pub struct Checkpoint {
    pub params: ModelParams,
    pub frontend: FrontEnd,
    pub labels: LabelSet,
}

impl Checkpoint {
    pub fn new(params: ModelParams, frontend: FrontEnd, labels: LabelSet) -> Result<Self, CheckpointError> {
        let c = Self {
            params,
            frontend,
            labels,
        };
        c.check_consistency()?;
        Ok(c)
    }

    fn check_consistency(&self) -> Result<(), CheckpointError> {
        let corrupt = |m: String| Err(CheckpointError::Corrupt(m));
        if self.params.arch.classes != self.labels.len() {
            return corrupt(format!(
                "model has {} outputs but {} class names",
                self.params.arch.classes,
                self.labels.len()
            ));
        }
        match self.frontend.input_shape() {
            Ok(shape) if shape == self.params.arch.input_shape => Ok(()),
            Ok(shape) => corrupt(format!(
                "front end produces {shape:?} but the model expects {:?}",
                self.params.arch.input_shape
            )),
            Err(e) => corrupt(format!("front end config: {e}")),
        }
    }

    pub fn save(&self) -> Vec<u8> {
        let header = Header {
            classes: self.labels.classes().to_vec(),
            background: self.labels.background().to_vec(),
            frontend: self.frontend.clone(),
            arch: self.params.arch.clone(),
            tensors: TENSOR_NAMES
                .iter()
                .zip(self.params.tensors())
                .map(|(name, t)| TensorEntry {
                    name: name.to_string(),
                    shape: t.shape().to_vec(),
                })
                .collect(),
        };
        let json = serde_json::to_vec(&header).expect("header serializes");
        let mut out = Vec::with_capacity(10 + json.len() + self.params.parameter_count() * 8);
        out.extend_from_slice(CHECKPOINT_MAGIC);
        out.extend_from_slice(&CHECKPOINT_VERSION.to_le_bytes());
        out.extend_from_slice(&(json.len() as u32).to_le_bytes());
        out.extend_from_slice(&json);
        for t in self.params.tensors() {
            for v in t.data() {
                out.extend_from_slice(&v.to_le_bytes());
            }
        }
        out
    }

    pub fn load(bytes: &[u8]) -> Result<Self, CheckpointError> {
        if bytes.len() < 4 || &bytes[..4] != CHECKPOINT_MAGIC {
            return Err(CheckpointError::BadMagic);
        }
        if bytes.len() < 10 {
            return Err(CheckpointError::Truncated("preamble".into()));
        }
        let version = u16::from_le_bytes([bytes[4], bytes[5]]);
        if version != CHECKPOINT_VERSION {
            return Err(CheckpointError::Version {
                found: version,
                expected: CHECKPOINT_VERSION,
            });
        }
        let header_len = u32::from_le_bytes(bytes[6..10].try_into().expect("4 bytes")) as usize;
        let body = &bytes[10..];
        if body.len() < header_len {
            return Err(CheckpointError::Truncated(format!(
                "header declares {header_len} bytes, {} present",
                body.len()
            )));
        }
        let header: Header = serde_json::from_slice(&body[..header_len])
            .map_err(|e| CheckpointError::Corrupt(format!("header: {e}")))?;
        let labels = LabelSet::new(header.classes, header.background)
            .map_err(|e| CheckpointError::Corrupt(e.to_string()))?;

        let names = TENSOR_NAMES;
        if header.tensors.len() != names.len()
            || header.tensors.iter().zip(names).any(|(t, n)| t.name != n)
        {
            return Err(CheckpointError::Corrupt(format!(
                "tensor table must list {names:?} in order"
            )));
        }
        let needed: usize = header
            .tensors
            .iter()
            .map(|t| t.shape.iter().product::<usize>() * 8)
            .sum();
        let data = &body[header_len..];
        if data.len() < needed {
            return Err(CheckpointError::Truncated(format!(
                "tensor data needs {needed} bytes, {} present",
                data.len()
            )));
        }
        if data.len() > needed {
            return Err(CheckpointError::Corrupt(format!(
                "{} trailing bytes after tensor data",
                data.len() - needed
            )));
        }

        let mut at = 0;
        let mut tensors = Vec::with_capacity(4);
        for entry in header.tensors {
            let n: usize = entry.shape.iter().product();
            let values = data[at..at + n * 8]
                .chunks_exact(8)
                .map(|b| f64::from_le_bytes(b.try_into().expect("8 bytes")))
                .collect();
            at += n * 8;
            tensors.push(
                Tensor::new(entry.shape, values)
                    .map_err(|e| CheckpointError::Corrupt(format!("{}: {e}", entry.name)))?,
            );
        }
        let tensors: [Tensor; 4] = tensors.try_into().expect("four tensors");
        let params = ModelParams::from_tensors(header.arch, tensors)
            .map_err(|e| CheckpointError::Corrupt(e.to_string()))?;
        Self::new(params, header.frontend, labels)
    }
}

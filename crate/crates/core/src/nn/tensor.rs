use super::NnError;

/// Dense row-major f64 array.
#[derive(Debug, Clone, PartialEq)]
pub struct Tensor {
    shape: Vec<usize>,
    data: Vec<f64>,
}

impl Tensor {
    pub fn new(shape: Vec<usize>, data: Vec<f64>) -> Result<Self, NnError> {
        let expected: usize = shape.iter().product();
        if shape.contains(&0) || expected != data.len() {
            return Err(NnError::DataLength {
                shape,
                expected,
                got: data.len(),
            });
        }
        if let Some(i) = data.iter().position(|v| !v.is_finite()) {
            return Err(NnError::NonFinite(i));
        }
        Ok(Self { shape, data })
    }

    pub fn zeros(shape: Vec<usize>) -> Self {
        let len = shape.iter().product();
        Self {
            shape,
            data: vec![0.0; len],
        }
    }

    pub fn shape(&self) -> &[usize] {
        &self.shape
    }

    pub fn data(&self) -> &[f64] {
        &self.data
    }

    pub fn data_mut(&mut self) -> &mut [f64] {
        &mut self.data
    }

    pub fn into_data(self) -> Vec<f64> {
        self.data
    }

    pub fn len(&self) -> usize {
        self.data.len()
    }

    pub fn is_empty(&self) -> bool {
        self.data.is_empty()
    }
}

impl From<&crate::dsp::Spectrogram> for Tensor {
    /// `T×F×1` input tensor.
    fn from(s: &crate::dsp::Spectrogram) -> Self {
        let (t, f) = s.shape();
        Self {
            shape: vec![t, f, 1],
            data: s.values().to_vec(),
        }
    }
}

impl From<crate::dsp::Spectrogram> for Tensor {
    fn from(s: crate::dsp::Spectrogram) -> Self {
        let (t, f) = s.shape();
        Self {
            shape: vec![t, f, 1],
            data: s.into_values(),
        }
    }
}

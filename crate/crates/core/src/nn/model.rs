use super::{Arch, ModelParams, NnError, Tensor};

/// Result of a forward pass, with the activations backprop needs.
#[derive(Debug, Clone, PartialEq)]
pub struct Forward {
    /// Conv output before ReLU, `(oh, ow, m)` row-major.
    pub pre_activation: Vec<f64>,
    /// Conv output after ReLU; the FC input.
    pub hidden: Vec<f64>,
    pub logits: Vec<f64>,
    pub probabilities: Vec<f64>,
}

fn check_input(input: &Tensor, arch: &Arch) -> Result<(), NnError> {
    let (t, f) = arch.input_shape;
    let ok = match input.shape() {
        [a, b] | [a, b, 1] => (*a, *b) == (t, f),
        _ => false,
    };
    if ok {
        Ok(())
    } else {
        Err(NnError::ShapeMismatch {
            what: "input",
            expected: vec![t, f, 1],
            got: input.shape().to_vec(),
        })
    }
}

/// Depthwise conv pre-activations (bias included, ReLU not applied).
fn conv_pre(x: &[f64], params: &ModelParams) -> Vec<f64> {
    let arch = &params.arch;
    let (ih, iw) = arch.input_shape;
    let (kh, kw) = arch.kernel;
    let (sh, sw) = arch.stride;
    let m = arch.multiplier;
    let (oh, pad_top) = Arch::same_axis(ih, kh, sh);
    let (ow, pad_left) = Arch::same_axis(iw, kw, sw);
    let kernel = params.dw_kernel.data();
    let bias = params.dw_bias.data();

    let mut out = vec![0.0; oh * ow * m];
    for r in 0..oh {
        for c in 0..ow {
            let cell = &mut out[(r * ow + c) * m..(r * ow + c + 1) * m];
            cell.copy_from_slice(bias);
            for i in 0..kh {
                let Some(y) = (r * sh + i).checked_sub(pad_top).filter(|&y| y < ih) else {
                    continue;
                };
                for j in 0..kw {
                    let Some(xc) = (c * sw + j).checked_sub(pad_left).filter(|&v| v < iw) else {
                        continue;
                    };
                    let v = x[y * iw + xc];
                    let taps = &kernel[(i * kw + j) * m..(i * kw + j + 1) * m];
                    for (o, k) in cell.iter_mut().zip(taps) {
                        *o += v * k;
                    }
                }
            }
        }
    }
    out
}

/// Depthwise convolution with ReLU: `T×F×1 → ⌈T/2⌉×⌈F/2⌉×8` for the default
/// layer card.
pub fn depthwise_conv2d(input: &Tensor, params: &ModelParams) -> Result<Tensor, NnError> {
    check_input(input, &params.arch)?;
    let (oh, ow, m) = params.arch.conv_output_shape();
    let mut out = conv_pre(input.data(), params);
    for v in &mut out {
        *v = v.max(0.0);
    }
    Tensor::new(vec![oh, ow, m], out)
}

/// `logits[c] = Σ_d W[c,d]·x[d] + b[c]`.
pub fn fully_connected(input: &[f64], params: &ModelParams) -> Result<Vec<f64>, NnError> {
    let d = params.arch.fc_input_len();
    if input.len() != d {
        return Err(NnError::ShapeMismatch {
            what: "fc input",
            expected: vec![d],
            got: vec![input.len()],
        });
    }
    Ok(params
        .fc_weights
        .data()
        .chunks_exact(d)
        .zip(params.fc_bias.data())
        .map(|(row, b)| row.iter().zip(input).map(|(w, x)| w * x).sum::<f64>() + b)
        .collect())
}

/// Max-shifted softmax of `beta · logits`.
pub fn softmax(logits: &[f64], beta: f64) -> Vec<f64> {
    let m = logits
        .iter()
        .map(|z| beta * z)
        .fold(f64::NEG_INFINITY, f64::max);
    let exps: Vec<f64> = logits.iter().map(|z| (beta * z - m).exp()).collect();
    let total: f64 = exps.iter().sum();
    exps.into_iter().map(|e| e / total).collect()
}

pub fn forward(input: &Tensor, params: &ModelParams) -> Result<Forward, NnError> {
    check_input(input, &params.arch)?;
    let pre_activation = conv_pre(input.data(), params);
    let hidden: Vec<f64> = pre_activation.iter().map(|v| v.max(0.0)).collect();
    let logits = fully_connected(&hidden, params)?;
    let probabilities = softmax(&logits, params.arch.beta);
    Ok(Forward {
        pre_activation,
        hidden,
        logits,
        probabilities,
    })
}

/// Index of the largest probability; ties go to the lowest index.
pub fn predict(probabilities: &[f64]) -> usize {
    let mut best = 0;
    for (i, &p) in probabilities.iter().enumerate() {
        if p > probabilities[best] {
            best = i;
        }
    }
    best
}

/// Mean cross-entropy over the batch and its exact gradient w.r.t. every
/// parameter tensor.
pub fn loss_and_gradients(
    batch: &[(&Tensor, usize)],
    params: &ModelParams,
) -> Result<(f64, ModelParams), NnError> {
    if batch.is_empty() {
        return Err(NnError::EmptyBatch);
    }
    let arch = &params.arch;
    let classes = arch.classes;
    let (ih, iw) = arch.input_shape;
    let (kh, kw) = arch.kernel;
    let (sh, sw) = arch.stride;
    let m = arch.multiplier;
    let (oh, pad_top) = Arch::same_axis(ih, kh, sh);
    let (ow, pad_left) = Arch::same_axis(iw, kw, sw);
    let d = arch.fc_input_len();
    let beta = arch.beta;
    let scale = 1.0 / batch.len() as f64;

    let mut grads = ModelParams::zeros(arch.clone())?;
    let mut loss = 0.0;
    let mut d_hidden = vec![0.0; d];

    for &(input, label) in batch {
        if label >= classes {
            return Err(NnError::LabelOutOfRange { label, classes });
        }
        let fwd = forward(input, params)?;

        // -log softmax(β z)_y, computed in log space
        let zmax = fwd
            .logits
            .iter()
            .map(|z| beta * z)
            .fold(f64::NEG_INFINITY, f64::max);
        let log_norm = fwd
            .logits
            .iter()
            .map(|z| (beta * z - zmax).exp())
            .sum::<f64>()
            .ln();
        loss += -(beta * fwd.logits[label] - zmax - log_norm);

        // dL/dz = β (p - onehot)
        let d_logits: Vec<f64> = fwd
            .probabilities
            .iter()
            .enumerate()
            .map(|(c, &p)| scale * beta * (p - f64::from(u8::from(c == label))))
            .collect();

        d_hidden.fill(0.0);
        let w = params.fc_weights.data();
        let gw = grads.fc_weights.data_mut();
        for (c, &dz) in d_logits.iter().enumerate() {
            let row = &w[c * d..(c + 1) * d];
            let grow = &mut gw[c * d..(c + 1) * d];
            for k in 0..d {
                grow[k] += dz * fwd.hidden[k];
                d_hidden[k] += row[k] * dz;
            }
        }
        for (gb, dz) in grads.fc_bias.data_mut().iter_mut().zip(&d_logits) {
            *gb += dz;
        }

        // ReLU gate: no gradient through non-positive pre-activations
        for (g, &pre) in d_hidden.iter_mut().zip(&fwd.pre_activation) {
            if pre <= 0.0 {
                *g = 0.0;
            }
        }

        let x = input.data();
        let gk = grads.dw_kernel.data_mut();
        let gbias = grads.dw_bias.data_mut();
        for r in 0..oh {
            for c in 0..ow {
                let cell = &d_hidden[(r * ow + c) * m..(r * ow + c + 1) * m];
                for (gb, g) in gbias.iter_mut().zip(cell) {
                    *gb += g;
                }
                for i in 0..kh {
                    let Some(y) = (r * sh + i).checked_sub(pad_top).filter(|&y| y < ih) else {
                        continue;
                    };
                    for j in 0..kw {
                        let Some(xc) = (c * sw + j).checked_sub(pad_left).filter(|&v| v < iw)
                        else {
                            continue;
                        };
                        let v = x[y * iw + xc];
                        let taps = &mut gk[(i * kw + j) * m..(i * kw + j + 1) * m];
                        for (t, g) in taps.iter_mut().zip(cell) {
                            *t += v * g;
                        }
                    }
                }
            }
        }
    }

    Ok((loss * scale, grads))
}

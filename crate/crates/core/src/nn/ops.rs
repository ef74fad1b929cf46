//! Forward and backward kernels for every layer kind, written against
//! `(batch, len, channels)` tensors.

use super::tensor::gemm;
use super::{NnError, Tensor};
use crate::rng::SplitMix64;

fn shape_err(msg: impl Into<String>) -> NnError {
    NnError::ShapeMismatch(msg.into())
}

// ---------------------------------------------------------------- conv1d

/// Rows of `kernel * c_in` taps per output position, zero outside the input.
fn im2col(input: &Tensor, kernel: usize) -> Result<Vec<f64>, NnError> {
    let (n, len, c_in) = input.dims3()?;
    let pad = kernel / 2;
    let row = kernel * c_in;
    let x = input.data();
    let mut cols = vec![0.0; n * len * row];
    for b in 0..n {
        for i in 0..len {
            let dst = &mut cols[(b * len + i) * row..(b * len + i + 1) * row];
            for k in 0..kernel {
                let pos = i + k;
                if pos < pad || pos - pad >= len {
                    continue;
                }
                let src = (b * len + pos - pad) * c_in;
                dst[k * c_in..(k + 1) * c_in].copy_from_slice(&x[src..src + c_in]);
            }
        }
    }
    Ok(cols)
}

fn check_conv(input: &Tensor, weight: &Tensor, bias: &Tensor) -> Result<(usize, usize, usize, usize, usize), NnError> {
    let (n, len, c_in) = input.dims3()?;
    let (kernel, w_in, c_out) = weight.dims3()?;
    if w_in != c_in {
        return Err(shape_err(format!("conv weight expects {w_in} input channels, got {c_in}")));
    }
    if kernel % 2 == 0 {
        return Err(shape_err(format!("conv kernel {kernel} must be odd")));
    }
    if bias.shape() != [c_out] {
        return Err(shape_err(format!("conv bias shape {:?} != [{c_out}]", bias.shape())));
    }
    Ok((n, len, c_in, kernel, c_out))
}

/// Stride-1 "same" convolution:
/// `Z[n,i,o] = sum_{k,c} X[n, i+k-kernel/2, c] * W[k,c,o] + b[o]`.
pub fn conv1d_forward(input: &Tensor, weight: &Tensor, bias: &Tensor) -> Result<Tensor, NnError> {
    let (n, len, c_in, kernel, c_out) = check_conv(input, weight, bias)?;
    let cols = im2col(input, kernel)?;
    let rows = n * len;
    let mut out = Vec::with_capacity(rows * c_out);
    for _ in 0..rows {
        out.extend_from_slice(bias.data());
    }
    gemm(rows, kernel * c_in, c_out, &cols, false, weight.data(), false, &mut out, 1.0);
    Tensor::new(vec![n, len, c_out], out)
}

pub struct ConvGrads {
    pub input: Option<Tensor>,
    pub weight: Tensor,
    pub bias: Tensor,
}

/// Gradients of [`conv1d_forward`]. `input` is the forward input; the input
/// gradient is skipped when `need_input_grad` is false.
pub fn conv1d_backward(
    grad_out: &Tensor,
    input: &Tensor,
    weight: &Tensor,
    need_input_grad: bool,
) -> Result<ConvGrads, NnError> {
    let (n, len, c_in) = input.dims3()?;
    let (kernel, w_in, c_out) = weight.dims3()?;
    if w_in != c_in || grad_out.shape() != [n, len, c_out] {
        return Err(shape_err(format!(
            "conv backward: grad {:?} vs input {:?} and weight {:?}",
            grad_out.shape(),
            input.shape(),
            weight.shape()
        )));
    }
    let rows = n * len;
    let taps = kernel * c_in;
    let g = grad_out.data();
    let cols = im2col(input, kernel)?;

    let mut grad_w = vec![0.0; taps * c_out];
    gemm(taps, rows, c_out, &cols, true, g, false, &mut grad_w, 0.0);

    let mut grad_b = vec![0.0; c_out];
    for row in g.chunks_exact(c_out) {
        for (acc, v) in grad_b.iter_mut().zip(row) {
            *acc += v;
        }
    }

    let grad_in = if need_input_grad {
        let mut grad_cols = vec![0.0; rows * taps];
        gemm(rows, c_out, taps, g, false, weight.data(), true, &mut grad_cols, 0.0);
        let pad = kernel / 2;
        let mut gx = vec![0.0; n * len * c_in];
        for b in 0..n {
            for i in 0..len {
                let src = &grad_cols[(b * len + i) * taps..(b * len + i + 1) * taps];
                for k in 0..kernel {
                    let pos = i + k;
                    if pos < pad || pos - pad >= len {
                        continue;
                    }
                    let dst = (b * len + pos - pad) * c_in;
                    for (d, s) in gx[dst..dst + c_in].iter_mut().zip(&src[k * c_in..(k + 1) * c_in]) {
                        *d += s;
                    }
                }
            }
        }
        Some(Tensor::new(vec![n, len, c_in], gx)?)
    } else {
        None
    };

    Ok(ConvGrads {
        input: grad_in,
        weight: Tensor::new(vec![kernel, c_in, c_out], grad_w)?,
        bias: Tensor::new(vec![c_out], grad_b)?,
    })
}

// ------------------------------------------------------------- batchnorm

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Mode {
    Train,
    Infer,
}

/// Per-channel statistics kept across batches.
#[derive(Debug, Clone, PartialEq)]
pub struct RunningStats {
    pub mean: Vec<f64>,
    pub var: Vec<f64>,
}

impl RunningStats {
    pub fn new(channels: usize) -> Self {
        Self { mean: vec![0.0; channels], var: vec![1.0; channels] }
    }
}

pub struct BatchNormCache {
    normalized: Vec<f64>,
    inv_std: Vec<f64>,
}

#[allow(clippy::too_many_arguments)]
pub fn batchnorm_forward(
    input: &Tensor,
    gamma: &Tensor,
    beta: &Tensor,
    running: &mut RunningStats,
    mode: Mode,
    momentum: f64,
    epsilon: f64,
) -> Result<(Tensor, Option<BatchNormCache>), NnError> {
    let (n, len, ch) = input.dims3()?;
    if gamma.shape() != [ch] || beta.shape() != [ch] || running.mean.len() != ch {
        return Err(shape_err(format!("batchnorm parameters do not match {ch} channels")));
    }
    let x = input.data();
    let count = (n * len) as f64;
    let (mean, var) = match mode {
        Mode::Train => {
            if n < 2 {
                return Err(NnError::DegenerateBatch(n));
            }
            let mut mean = vec![0.0; ch];
            for row in x.chunks_exact(ch) {
                for (m, v) in mean.iter_mut().zip(row) {
                    *m += v;
                }
            }
            mean.iter_mut().for_each(|m| *m /= count);
            let mut var = vec![0.0; ch];
            for row in x.chunks_exact(ch) {
                for c in 0..ch {
                    let d = row[c] - mean[c];
                    var[c] += d * d;
                }
            }
            var.iter_mut().for_each(|v| *v /= count);
            for c in 0..ch {
                running.mean[c] = momentum * running.mean[c] + (1.0 - momentum) * mean[c];
                running.var[c] = momentum * running.var[c] + (1.0 - momentum) * var[c];
            }
            (mean, var)
        }
        Mode::Infer => (running.mean.clone(), running.var.clone()),
    };
    let inv_std: Vec<f64> = var.iter().map(|v| 1.0 / (v + epsilon).sqrt()).collect();
    let mut normalized = vec![0.0; x.len()];
    let mut out = vec![0.0; x.len()];
    let (g, b) = (gamma.data(), beta.data());
    for (i, (&xi, (nrm, o))) in x.iter().zip(normalized.iter_mut().zip(out.iter_mut())).enumerate() {
        let c = i % ch;
        *nrm = (xi - mean[c]) * inv_std[c];
        *o = g[c] * *nrm + b[c];
    }
    let cache = (mode == Mode::Train).then_some(BatchNormCache { normalized, inv_std });
    Ok((Tensor::new(input.shape().to_vec(), out)?, cache))
}

/// Backward of train-mode batch normalization:
/// `(grad_input, grad_gamma, grad_beta)`.
pub fn batchnorm_backward(
    grad_out: &Tensor,
    cache: &BatchNormCache,
    gamma: &Tensor,
) -> Result<(Tensor, Tensor, Tensor), NnError> {
    let (n, len, ch) = grad_out.dims3()?;
    if cache.normalized.len() != grad_out.len() || gamma.shape() != [ch] {
        return Err(shape_err("batchnorm backward cache mismatch"));
    }
    let dy = grad_out.data();
    let xhat = &cache.normalized;
    let count = (n * len) as f64;
    let mut sum_dy = vec![0.0; ch];
    let mut sum_dy_xhat = vec![0.0; ch];
    for (i, (&d, &h)) in dy.iter().zip(xhat).enumerate() {
        let c = i % ch;
        sum_dy[c] += d;
        sum_dy_xhat[c] += d * h;
    }
    let g = gamma.data();
    let dx = dy
        .iter()
        .zip(xhat)
        .enumerate()
        .map(|(i, (&d, &h))| {
            let c = i % ch;
            g[c] * cache.inv_std[c] / count * (count * d - sum_dy[c] - h * sum_dy_xhat[c])
        })
        .collect();
    Ok((
        Tensor::new(grad_out.shape().to_vec(), dx)?,
        Tensor::new(vec![ch], sum_dy_xhat)?,
        Tensor::new(vec![ch], sum_dy)?,
    ))
}

// --------------------------------------------------------------- maxpool

pub fn pool_output_len(len: usize, stride: usize) -> usize {
    len.div_ceil(stride)
}

/// "Same" max pooling: output length `ceil(len / stride)`, windows padded
/// with negative infinity. Returns the flat input index of each maximum
/// (first index wins ties).
pub fn maxpool1d(input: &Tensor, pool: usize, stride: usize) -> Result<(Tensor, Vec<usize>), NnError> {
    let (n, len, ch) = input.dims3()?;
    if pool == 0 || stride == 0 {
        return Err(shape_err("pool and stride must be positive"));
    }
    let out_len = pool_output_len(len, stride);
    let pad_total = ((out_len - 1) * stride + pool).saturating_sub(len);
    let pad_left = pad_total / 2;
    let x = input.data();
    let mut out = Vec::with_capacity(n * out_len * ch);
    let mut argmax = Vec::with_capacity(n * out_len * ch);
    for b in 0..n {
        for o in 0..out_len {
            let start = (o * stride) as isize - pad_left as isize;
            let lo = start.max(0) as usize;
            let hi = ((start + pool as isize) as usize).min(len);
            for c in 0..ch {
                let mut best = f64::NEG_INFINITY;
                let mut best_idx = usize::MAX;
                for i in lo..hi {
                    let idx = (b * len + i) * ch + c;
                    if x[idx] > best || best_idx == usize::MAX {
                        best = x[idx];
                        best_idx = idx;
                    }
                }
                out.push(best);
                argmax.push(best_idx);
            }
        }
    }
    Ok((Tensor::new(vec![n, out_len, ch], out)?, argmax))
}

pub fn maxpool1d_backward(grad_out: &Tensor, argmax: &[usize], input_shape: &[usize]) -> Result<Tensor, NnError> {
    if grad_out.len() != argmax.len() {
        return Err(shape_err("maxpool backward: argmax does not match gradient"));
    }
    let mut gx = Tensor::zeros(input_shape);
    let data = gx.data_mut();
    for (&idx, &g) in argmax.iter().zip(grad_out.data()) {
        data[idx] += g;
    }
    Ok(gx)
}

// ------------------------------------------------------- elementwise ops

pub fn relu_forward(input: &Tensor) -> Tensor {
    let data = input.data().iter().map(|&x| x.max(0.0)).collect();
    Tensor::new(input.shape().to_vec(), data).expect("same shape")
}

pub fn relu_backward(grad_out: &Tensor, input: &Tensor) -> Result<Tensor, NnError> {
    if grad_out.shape() != input.shape() {
        return Err(shape_err("relu backward shape mismatch"));
    }
    let data = grad_out
        .data()
        .iter()
        .zip(input.data())
        .map(|(&g, &x)| if x > 0.0 { g } else { 0.0 })
        .collect();
    Tensor::new(input.shape().to_vec(), data)
}

/// Inverted-dropout mask: each entry is `0` with probability `rate`, else
/// `1 / (1 - rate)`.
pub fn dropout_mask(len: usize, rate: f64, rng: &mut SplitMix64) -> Vec<f64> {
    let keep_scale = 1.0 / (1.0 - rate);
    (0..len)
        .map(|_| if rng.next_f64() < rate { 0.0 } else { keep_scale })
        .collect()
}

/// Elementwise product with a mask; serves both dropout forward and
/// backward.
pub fn apply_mask(t: &Tensor, mask: &[f64]) -> Result<Tensor, NnError> {
    if t.len() != mask.len() {
        return Err(shape_err("dropout mask length mismatch"));
    }
    let data = t.data().iter().zip(mask).map(|(x, m)| x * m).collect();
    Tensor::new(t.shape().to_vec(), data)
}

/// `(n, len, ch) -> (n, 1, len * ch)`.
pub fn flatten(input: &Tensor) -> Result<Tensor, NnError> {
    let (n, len, ch) = input.dims3()?;
    input.clone().reshape(&[n, 1, len * ch])
}

// ----------------------------------------------------------------- dense

/// `y = x W + b` over the channel axis of a `(n, 1, in)` tensor.
pub fn dense_forward(input: &Tensor, weight: &Tensor, bias: &Tensor) -> Result<Tensor, NnError> {
    let (n, one, d_in) = input.dims3()?;
    match (weight.shape(), bias.shape()) {
        ([w_in, w_out], [b_out]) if one == 1 && *w_in == d_in && b_out == w_out => {
            let d_out = *w_out;
            let mut out = Vec::with_capacity(n * d_out);
            for _ in 0..n {
                out.extend_from_slice(bias.data());
            }
            gemm(n, d_in, d_out, input.data(), false, weight.data(), false, &mut out, 1.0);
            Tensor::new(vec![n, 1, d_out], out)
        }
        _ => Err(shape_err(format!(
            "dense: input {:?}, weight {:?}, bias {:?}",
            input.shape(),
            weight.shape(),
            bias.shape()
        ))),
    }
}

/// `(grad_input, grad_weight, grad_bias)` of [`dense_forward`].
pub fn dense_backward(grad_out: &Tensor, input: &Tensor, weight: &Tensor) -> Result<(Tensor, Tensor, Tensor), NnError> {
    let (n, _, d_in) = input.dims3()?;
    let d_out = match weight.shape() {
        [w_in, w_out] if *w_in == d_in => *w_out,
        s => return Err(shape_err(format!("dense backward weight {s:?}"))),
    };
    if grad_out.shape() != [n, 1, d_out] {
        return Err(shape_err("dense backward gradient shape"));
    }
    let g = grad_out.data();
    let mut gx = vec![0.0; n * d_in];
    gemm(n, d_out, d_in, g, false, weight.data(), true, &mut gx, 0.0);
    let mut gw = vec![0.0; d_in * d_out];
    gemm(d_in, n, d_out, input.data(), true, g, false, &mut gw, 0.0);
    let mut gb = vec![0.0; d_out];
    for row in g.chunks_exact(d_out) {
        for (acc, v) in gb.iter_mut().zip(row) {
            *acc += v;
        }
    }
    Ok((
        Tensor::new(vec![n, 1, d_in], gx)?,
        Tensor::new(vec![d_in, d_out], gw)?,
        Tensor::new(vec![d_out], gb)?,
    ))
}

// ------------------------------------------------------- softmax and loss

/// Softmax over the last axis.
pub fn softmax(input: &Tensor) -> Tensor {
    let ch = *input.shape().last().expect("non-empty shape");
    let mut out = input.data().to_vec();
    for row in out.chunks_exact_mut(ch) {
        let max = row.iter().cloned().fold(f64::NEG_INFINITY, f64::max);
        let mut sum = 0.0;
        for v in row.iter_mut() {
            *v = (*v - max).exp();
            sum += *v;
        }
        row.iter_mut().for_each(|v| *v /= sum);
    }
    Tensor::new(input.shape().to_vec(), out).expect("same shape")
}

/// Vector-Jacobian product of softmax given its output.
pub fn softmax_backward(grad_out: &Tensor, probs: &Tensor) -> Result<Tensor, NnError> {
    if grad_out.shape() != probs.shape() {
        return Err(shape_err("softmax backward shape mismatch"));
    }
    let ch = *probs.shape().last().expect("non-empty shape");
    let mut out = Vec::with_capacity(probs.len());
    for (g, p) in grad_out.data().chunks_exact(ch).zip(probs.data().chunks_exact(ch)) {
        let dot: f64 = g.iter().zip(p).map(|(a, b)| a * b).sum();
        out.extend(g.iter().zip(p).map(|(gi, pi)| pi * (gi - dot)));
    }
    Tensor::new(probs.shape().to_vec(), out)
}

const PROB_FLOOR: f64 = 1e-12;

/// Categorical cross-entropy averaged over the batch, with the gradient
/// taken with respect to the pre-softmax logits: `(p - y) / batch`.
pub fn cce_loss(probs: &Tensor, one_hot: &Tensor) -> Result<(f64, Tensor), NnError> {
    if probs.shape() != one_hot.shape() {
        return Err(shape_err(format!(
            "cce: probabilities {:?} vs targets {:?}",
            probs.shape(),
            one_hot.shape()
        )));
    }
    let ch = *probs.shape().last().expect("non-empty shape");
    let batch = probs.len() / ch;
    let mut loss = 0.0;
    for (p, y) in probs.data().chunks_exact(ch).zip(one_hot.data().chunks_exact(ch)) {
        loss -= p.iter().zip(y).map(|(pi, yi)| yi * pi.max(PROB_FLOOR).ln()).sum::<f64>();
    }
    let grad = probs
        .data()
        .iter()
        .zip(one_hot.data())
        .map(|(p, y)| (p - y) / batch as f64)
        .collect();
    Ok((loss / batch as f64, Tensor::new(probs.shape().to_vec(), grad)?))
}

#[cfg(test)]
mod tests {
    use super::*;

    fn t3(n: usize, l: usize, c: usize, data: Vec<f64>) -> Tensor {
        Tensor::new(vec![n, l, c], data).unwrap()
    }

    #[test]
    fn conv_hand_example() {
        let x = t3(1, 3, 1, vec![1.0, 2.0, 3.0]);
        let w = t3(3, 1, 1, vec![1.0, 1.0, 1.0]);
        let b = Tensor::zeros(&[1]);
        assert_eq!(conv1d_forward(&x, &w, &b).unwrap().data(), &[3.0, 6.0, 5.0]);
    }

    #[test]
    fn conv_zero_weights_yield_bias() {
        let x = t3(2, 4, 3, (0..24).map(|i| i as f64).collect());
        let w = Tensor::zeros(&[5, 3, 2]);
        let b = Tensor::new(vec![2], vec![0.5, -1.5]).unwrap();
        let z = conv1d_forward(&x, &w, &b).unwrap();
        assert_eq!(z.shape(), &[2, 4, 2]);
        for row in z.data().chunks_exact(2) {
            assert_eq!(row, &[0.5, -1.5]);
        }
    }

    #[test]
    fn conv_shape_errors() {
        let x = t3(1, 3, 2, vec![0.0; 6]);
        assert!(conv1d_forward(&x, &Tensor::zeros(&[3, 1, 1]), &Tensor::zeros(&[1])).is_err());
        assert!(conv1d_forward(&x, &Tensor::zeros(&[4, 2, 1]), &Tensor::zeros(&[1])).is_err());
        assert!(conv1d_forward(&x, &Tensor::zeros(&[3, 2, 1]), &Tensor::zeros(&[2])).is_err());
    }

    #[test]
    fn conv_backward_zero_grad() {
        let x = t3(1, 4, 2, (0..8).map(|i| i as f64).collect());
        let w = Tensor::filled(&[3, 2, 3], 0.3);
        let g = conv1d_backward(&Tensor::zeros(&[1, 4, 3]), &x, &w, true).unwrap();
        assert!(g.input.unwrap().data().iter().all(|&v| v == 0.0));
        assert!(g.weight.data().iter().all(|&v| v == 0.0));
        assert!(g.bias.data().iter().all(|&v| v == 0.0));
    }

    #[test]
    fn conv_single_element_product_rule() {
        let x = t3(1, 1, 1, vec![3.0]);
        let w = t3(1, 1, 1, vec![2.0]);
        let g = conv1d_backward(&t3(1, 1, 1, vec![0.5]), &x, &w, true).unwrap();
        assert_eq!(g.input.unwrap().data(), &[1.0]);
        assert_eq!(g.weight.data(), &[1.5]);
        assert_eq!(g.bias.data(), &[0.5]);
    }

    #[test]
    fn batchnorm_normalizes() {
        let x = t3(4, 3, 2, (0..24).map(|i| ((i * 7) % 11) as f64).collect());
        let mut stats = RunningStats::new(2);
        let (y, _) = batchnorm_forward(&x, &Tensor::filled(&[2], 1.0), &Tensor::zeros(&[2]), &mut stats, Mode::Train, 0.99, 1e-3).unwrap();
        for c in 0..2 {
            let vals: Vec<f64> = y.data().iter().skip(c).step_by(2).cloned().collect();
            let mean = vals.iter().sum::<f64>() / vals.len() as f64;
            let var = vals.iter().map(|v| (v - mean).powi(2)).sum::<f64>() / vals.len() as f64;
            assert!(mean.abs() < 1e-6);
            assert!((var - 1.0).abs() < 1e-3);
        }
        assert!(stats.mean.iter().any(|&m| m != 0.0));
    }

    #[test]
    fn batchnorm_constant_channel_gives_beta() {
        let x = t3(3, 2, 1, vec![4.0; 6]);
        let mut stats = RunningStats::new(1);
        let beta = Tensor::new(vec![1], vec![0.7]).unwrap();
        let (y, _) = batchnorm_forward(&x, &Tensor::filled(&[1], 2.0), &beta, &mut stats, Mode::Train, 0.99, 1e-3).unwrap();
        assert!(y.data().iter().all(|&v| v == 0.7));
    }

    #[test]
    fn batchnorm_degenerate_batch() {
        let x = t3(1, 2, 1, vec![1.0, 2.0]);
        let mut stats = RunningStats::new(1);
        let r = batchnorm_forward(&x, &Tensor::filled(&[1], 1.0), &Tensor::zeros(&[1]), &mut stats, Mode::Train, 0.99, 1e-3);
        assert!(matches!(r, Err(NnError::DegenerateBatch(1))));
        let r = batchnorm_forward(&x, &Tensor::filled(&[1], 1.0), &Tensor::zeros(&[1]), &mut stats, Mode::Infer, 0.99, 1e-3);
        assert!(r.is_ok());
    }

    #[test]
    fn maxpool_lengths() {
        let mut len = 22;
        let mut seen = vec![];
        for _ in 0..6 {
            let (y, _) = maxpool1d(&Tensor::zeros(&[1, len, 1]), 5, 2).unwrap();
            len = y.shape()[1];
            seen.push(len);
        }
        assert_eq!(seen, vec![11, 6, 3, 2, 1, 1]);
    }

    #[test]
    fn maxpool_increasing_takes_window_end() {
        let x = t3(1, 22, 1, (0..22).map(|i| i as f64).collect());
        let (y, idx) = maxpool1d(&x, 5, 2).unwrap();
        // window o covers [2o - 1, 2o + 3] clipped to the input
        for (o, (&v, &i)) in y.data().iter().zip(&idx).enumerate() {
            let last = (2 * o + 3).min(21);
            assert_eq!(v, last as f64);
            assert_eq!(i, last);
        }
    }

    #[test]
    fn maxpool_ties_pick_first() {
        let x = t3(1, 4, 1, vec![1.0, 1.0, 1.0, 1.0]);
        let (_, idx) = maxpool1d(&x, 5, 2).unwrap();
        // windows are [0, 4) and [1, 4)
        assert_eq!(idx, vec![0, 1]);
        let g = maxpool1d_backward(&t3(1, 2, 1, vec![1.0, 2.0]), &idx, &[1, 4, 1]).unwrap();
        assert_eq!(g.data(), &[1.0, 2.0, 0.0, 0.0]);
    }

    #[test]
    fn relu_values() {
        let x = t3(1, 1, 2, vec![-3.0, 3.0]);
        assert_eq!(relu_forward(&x).data(), &[0.0, 3.0]);
        let g = relu_backward(&t3(1, 1, 2, vec![1.0, 1.0]), &x).unwrap();
        assert_eq!(g.data(), &[0.0, 1.0]);
    }

    #[test]
    fn dropout_mask_statistics() {
        let mut rng = SplitMix64::new(1);
        let mask = dropout_mask(100_000, 0.2, &mut rng);
        let dropped = mask.iter().filter(|&&m| m == 0.0).count() as f64 / mask.len() as f64;
        assert!((dropped - 0.2).abs() < 0.01);
        assert!(mask.iter().all(|&m| m == 0.0 || (m - 1.25).abs() < 1e-15));
    }

    #[test]
    fn softmax_uniform_and_cce() {
        let z = t3(1, 1, 7, vec![0.0; 7]);
        let p = softmax(&z);
        assert!(p.data().iter().all(|&v| (v - 1.0 / 7.0).abs() < 1e-15));
        let mut y = vec![0.0; 7];
        y[2] = 1.0;
        let (loss, _) = cce_loss(&p, &t3(1, 1, 7, y.clone())).unwrap();
        assert!((loss - 7f64.ln()).abs() < 1e-12);
        let (loss, grad) = cce_loss(&t3(1, 1, 7, y.clone()), &t3(1, 1, 7, y)).unwrap();
        assert!(loss <= 1e-10);
        assert!(grad.data().iter().all(|&g| g == 0.0));
        assert!(cce_loss(&p, &Tensor::zeros(&[1, 1, 6])).is_err());
    }

    #[test]
    fn softmax_large_logits_stable() {
        let p = softmax(&t3(1, 1, 3, vec![1000.0, 0.0, -1000.0]));
        assert!(p.all_finite());
        assert!((p.data().iter().sum::<f64>() - 1.0).abs() < 1e-12);
    }
}

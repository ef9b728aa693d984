//! Stateless layer kernels: valid convolution, batch-norm arithmetic, ReLU,
//! 2×2 max pooling, the dense layer, softmax, arg-max classification and the
//! cross-entropy loss, together with the backward kernels training needs.

use rand::Rng;

use super::tensor::Tensor;
use crate::error::{Error, Result};

/// Floor applied to probabilities inside the loss logarithm.
pub const LOG_FLOOR: f64 = 1e-12;

pub(crate) fn dot(a: &[f64], b: &[f64]) -> f64 {
    debug_assert_eq!(a.len(), b.len());
    let mut acc = [0.0f64; 4];
    let ca = a.chunks_exact(4);
    let cb = b.chunks_exact(4);
    let (ra, rb) = (ca.remainder(), cb.remainder());
    for (x, y) in ca.zip(cb) {
        acc[0] += x[0] * y[0];
        acc[1] += x[1] * y[1];
        acc[2] += x[2] * y[2];
        acc[3] += x[3] * y[3];
    }
    let mut s = (acc[0] + acc[1]) + (acc[2] + acc[3]);
    for (x, y) in ra.iter().zip(rb) {
        s += x * y;
    }
    s
}

#[inline]
fn axpy(alpha: f64, x: &[f64], y: &mut [f64]) {
    for (yi, xi) in y.iter_mut().zip(x) {
        *yi += alpha * xi;
    }
}

/// Valid (no padding), stride-1 convolution of a single-channel input with
/// `filters` kernels of size `kf × kf`.
///
/// `weights` is laid out `[k][m][n]`; output `(i, j, k)` is
/// `Σ_{m,n} input(i+m, j+n) · W(m, n, k) + b_k`.
pub fn conv_forward(input: &Tensor, weights: &[f64], bias: &[f64], kf: usize) -> Result<Tensor> {
    let filters = bias.len();
    let (h, w, c) = input.shape();
    if c != 1 {
        return Err(Error::ShapeMismatch(format!(
            "convolution expects one input channel, got {c}"
        )));
    }
    if kf == 0 || h < kf || w < kf {
        return Err(Error::ShapeMismatch(format!(
            "{h}x{w} input is smaller than a {kf}x{kf} filter"
        )));
    }
    if weights.len() != filters * kf * kf {
        return Err(Error::ShapeMismatch(format!(
            "{} filter weights for {filters} filters of {kf}x{kf}",
            weights.len()
        )));
    }
    let (mh, mw) = (h - kf + 1, w - kf + 1);
    let src = input.plane(0);
    let mut out = Tensor::zeros(mh, mw, filters);
    for k in 0..filters {
        let kernel = &weights[k * kf * kf..(k + 1) * kf * kf];
        let plane = out.plane_mut(k);
        plane.fill(bias[k]);
        for m in 0..kf {
            for n in 0..kf {
                let wv = kernel[m * kf + n];
                for i in 0..mh {
                    let row_in = &src[(i + m) * w + n..(i + m) * w + n + mw];
                    axpy(wv, row_in, &mut plane[i * mw..(i + 1) * mw]);
                }
            }
        }
    }
    Ok(out)
}

/// Gradients of the convolution with respect to its weights and biases,
/// given the upstream gradient `dout` (shape of the convolution output).
pub fn conv_backward(input: &Tensor, dout: &Tensor, kf: usize) -> (Vec<f64>, Vec<f64>) {
    let (_, w, _) = input.shape();
    let (mh, mw, filters) = dout.shape();
    let src = input.plane(0);
    let mut dw = vec![0.0; filters * kf * kf];
    let mut db = vec![0.0; filters];
    for k in 0..filters {
        let g = dout.plane(k);
        db[k] = g.iter().sum();
        for m in 0..kf {
            for n in 0..kf {
                let mut s = 0.0;
                for i in 0..mh {
                    let row_in = &src[(i + m) * w + n..(i + m) * w + n + mw];
                    s += dot(row_in, &g[i * mw..(i + 1) * mw]);
                }
                dw[(k * kf + m) * kf + n] = s;
            }
        }
    }
    (dw, db)
}

/// Per-channel mean and (biased) variance over every sample and spatial
/// position of a batch.
pub fn channel_stats(batch: &[&Tensor]) -> (Vec<f64>, Vec<f64>) {
    let channels = batch.first().map_or(0, |t| t.channels());
    let per = batch.first().map_or(0, |t| t.height() * t.width());
    let count = (per * batch.len()) as f64;
    let mut mean = vec![0.0; channels];
    let mut var = vec![0.0; channels];
    for k in 0..channels {
        let s: f64 = batch.iter().map(|t| t.plane(k).iter().sum::<f64>()).sum();
        let mu = s / count;
        let q: f64 = batch
            .iter()
            .map(|t| t.plane(k).iter().map(|&x| (x - mu) * (x - mu)).sum::<f64>())
            .sum();
        mean[k] = mu;
        var[k] = q / count;
    }
    (mean, var)
}

/// `γ_k (x - μ_k) / sqrt(σ²_k + ε) + β_k`, channel by channel.
pub fn batchnorm_apply(
    input: &Tensor,
    mean: &[f64],
    var: &[f64],
    scale: &[f64],
    offset: &[f64],
    eps: f64,
) -> Result<Tensor> {
    let c = input.channels();
    if [mean.len(), var.len(), scale.len(), offset.len()]
        .iter()
        .any(|&l| l != c)
    {
        return Err(Error::ShapeMismatch(format!(
            "batch norm parameters do not match {c} channels"
        )));
    }
    let mut out = input.clone();
    for k in 0..c {
        let inv = 1.0 / (var[k] + eps).sqrt();
        let (g, b, mu) = (scale[k], offset[k], mean[k]);
        for v in out.plane_mut(k) {
            *v = g * ((*v - mu) * inv) + b;
        }
    }
    Ok(out)
}

pub fn relu(input: &Tensor) -> Tensor {
    input.map(|v| v.max(0.0))
}

/// Non-overlapping 2×2 max pooling with stride 2.
pub fn maxpool(input: &Tensor) -> Result<Tensor> {
    maxpool_with_argmax(input).map(|(t, _)| t)
}

/// Max pooling that also returns, per output entry, the in-plane index of
/// the winning input (first maximum in row-major block order).
pub fn maxpool_with_argmax(input: &Tensor) -> Result<(Tensor, Vec<u32>)> {
    let (h, w, c) = input.shape();
    if h % 2 != 0 || w % 2 != 0 {
        return Err(Error::ShapeMismatch(format!(
            "max pooling needs even sides, got {h}x{w}"
        )));
    }
    let (oh, ow) = (h / 2, w / 2);
    let mut out = Tensor::zeros(oh, ow, c);
    let mut arg = Vec::with_capacity(oh * ow * c);
    for k in 0..c {
        let src = input.plane(k);
        let dst = out.plane_mut(k);
        for i in 0..oh {
            for j in 0..ow {
                let mut best = (2 * i) * w + 2 * j;
                for (di, dj) in [(0, 1), (1, 0), (1, 1)] {
                    let idx = (2 * i + di) * w + 2 * j + dj;
                    if src[idx] > src[best] {
                        best = idx;
                    }
                }
                dst[i * ow + j] = src[best];
                arg.push(best as u32);
            }
        }
    }
    Ok((out, arg))
}

/// Dense layer on the `(i, j, k)`-ordered flattening of `input`.
/// `weights` is `classes × features`, row-major.
pub fn fc_forward(input: &Tensor, weights: &[f64], bias: &[f64]) -> Result<Vec<f64>> {
    fc_forward_flat(&input.flatten_hwc(), weights, bias)
}

pub(crate) fn fc_forward_flat(x: &[f64], weights: &[f64], bias: &[f64]) -> Result<Vec<f64>> {
    let f = x.len();
    if weights.len() != bias.len() * f {
        return Err(Error::ShapeMismatch(format!(
            "dense layer has {} weights for {} outputs and {f} inputs",
            weights.len(),
            bias.len()
        )));
    }
    Ok(bias
        .iter()
        .enumerate()
        .map(|(o, &b)| b + dot(&weights[o * f..(o + 1) * f], x))
        .collect())
}

/// Softmax with max-subtraction.
pub fn softmax(logits: &[f64]) -> Vec<f64> {
    let max = logits.iter().copied().fold(f64::NEG_INFINITY, f64::max);
    let exps: Vec<f64> = logits.iter().map(|&z| (z - max).exp()).collect();
    let total: f64 = exps.iter().sum();
    exps.into_iter().map(|e| e / total).collect()
}

/// 1-based class with the highest probability; ties are broken uniformly at
/// random with `rng`.
pub fn classify<R: Rng + ?Sized>(probs: &[f64], rng: &mut R) -> usize {
    let max = probs.iter().copied().fold(f64::NEG_INFINITY, f64::max);
    let tied: Vec<usize> = probs
        .iter()
        .enumerate()
        .filter(|(_, &p)| p == max)
        .map(|(i, _)| i)
        .collect();
    let pick = if tied.len() == 1 {
        tied[0]
    } else {
        tied[rng.gen_range(0..tied.len())]
    };
    pick + 1
}

/// Mean negative log-probability of the true (1-based) labels.
pub fn cross_entropy(probs: &[Vec<f64>], labels: &[usize]) -> f64 {
    if probs.is_empty() {
        return 0.0;
    }
    let total: f64 = probs
        .iter()
        .zip(labels)
        .map(|(p, &y)| -p[y - 1].max(LOG_FLOOR).ln())
        .sum();
    total / probs.len() as f64
}

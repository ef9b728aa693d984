use rand::Rng;
use rayon::prelude::*;

use super::layers::{
    batchnorm_apply, channel_stats, conv_backward, conv_forward, dot, fc_forward_flat, maxpool_with_argmax, relu,
    softmax, LOG_FLOOR,
};
use super::tensor::Tensor;
use crate::error::{invalid, Error, Result};
use crate::rng::seeded;

/// Momentum of the running batch-norm statistics.
pub const BN_MOMENTUM: f64 = 0.9;

/// Architecture hyperparameters.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Hyper {
    /// Side `P` of the square single-channel input.
    pub input_size: usize,
    /// Side `K_f` of the convolution filters.
    pub filter_size: usize,
    /// Number of filters `K`.
    pub filters: usize,
    /// Number of classes `O`.
    pub classes: usize,
    /// Batch-norm variance floor.
    pub bn_eps: f64,
}

impl Hyper {
    pub fn new(input_size: usize, filter_size: usize, filters: usize, classes: usize) -> Result<Self> {
        let h = Self {
            input_size,
            filter_size,
            filters,
            classes,
            bn_eps: f64::EPSILON,
        };
        h.validate()?;
        Ok(h)
    }

    /// `P = 100, K_f = 13, K = 1`.
    pub fn simulated(classes: usize) -> Result<Self> {
        Self::new(100, 13, 1, classes)
    }

    /// `P = 256, K_f = 13, K = 16, O = 8`.
    pub fn ice() -> Result<Self> {
        Self::new(256, 13, 16, 8)
    }

    pub fn validate(&self) -> Result<()> {
        if self.filter_size == 0 || self.input_size < self.filter_size {
            return Err(invalid(format!(
                "input size {} must be at least the filter size {}",
                self.input_size, self.filter_size
            )));
        }
        if !self.conv_size().is_multiple_of(2) {
            return Err(invalid(format!(
                "convolution output side {} must be even for 2x2 pooling",
                self.conv_size()
            )));
        }
        if self.filters == 0 {
            return Err(invalid("need at least one filter"));
        }
        if self.classes < 2 || self.classes > u8::MAX as usize {
            return Err(invalid(format!("class count must be in 2..=255, got {}", self.classes)));
        }
        if !(self.bn_eps > 0.0 && self.bn_eps.is_finite()) {
            return Err(invalid("batch-norm epsilon must be positive"));
        }
        Ok(())
    }

    /// `M = P - K_f + 1`.
    pub fn conv_size(&self) -> usize {
        self.input_size + 1 - self.filter_size
    }

    pub fn pooled_size(&self) -> usize {
        self.conv_size() / 2
    }

    /// `(M/2)² · K`.
    pub fn fc_inputs(&self) -> usize {
        self.pooled_size() * self.pooled_size() * self.filters
    }
}

/// The learnable parameter groups, in a fixed order.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Group {
    ConvWeights,
    ConvBias,
    BnScale,
    BnOffset,
    FcWeights,
    FcBias,
}

impl Group {
    pub const ALL: [Group; 6] = [
        Group::ConvWeights,
        Group::ConvBias,
        Group::BnScale,
        Group::BnOffset,
        Group::FcWeights,
        Group::FcBias,
    ];

    pub fn name(self) -> &'static str {
        match self {
            Group::ConvWeights => "conv.weights",
            Group::ConvBias => "conv.bias",
            Group::BnScale => "bn.scale",
            Group::BnOffset => "bn.offset",
            Group::FcWeights => "fc.weights",
            Group::FcBias => "fc.bias",
        }
    }

    fn index(self) -> usize {
        self as usize
    }
}

/// Batch-norm normalization source.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum BnMode {
    /// Statistics of the batch being processed.
    Train,
    /// Stored running statistics.
    Infer,
}

/// Full parameter set of the network plus batch-norm inference statistics.
///
/// Convolution weights are `[k][m][n]`; dense weights are `classes × features`
/// with feature index `(i * (M/2) + j) * K + k`.
#[derive(Debug, Clone, PartialEq)]
pub struct ModelParams {
    hyper: Hyper,
    groups: [Vec<f64>; 6],
    running_mean: Vec<f64>,
    running_var: Vec<f64>,
    stats_updates: u64,
}

impl ModelParams {
    /// Glorot-uniform weights, zero biases, unit scale and zero offset.
    pub fn init(hyper: Hyper, seed: u64) -> Result<Self> {
        hyper.validate()?;
        let mut rng = seeded(seed);
        let kf2 = hyper.filter_size * hyper.filter_size;
        let conv_bound = (6.0 / (kf2 + kf2 * hyper.filters) as f64).sqrt();
        let conv: Vec<f64> = (0..kf2 * hyper.filters)
            .map(|_| rng.gen_range(-conv_bound..conv_bound))
            .collect();
        let f = hyper.fc_inputs();
        let fc_bound = (6.0 / (f + hyper.classes) as f64).sqrt();
        let fc: Vec<f64> = (0..f * hyper.classes)
            .map(|_| rng.gen_range(-fc_bound..fc_bound))
            .collect();
        Ok(Self {
            hyper,
            groups: [
                conv,
                vec![0.0; hyper.filters],
                vec![1.0; hyper.filters],
                vec![0.0; hyper.filters],
                fc,
                vec![0.0; hyper.classes],
            ],
            running_mean: vec![0.0; hyper.filters],
            running_var: vec![1.0; hyper.filters],
            stats_updates: 0,
        })
    }

    /// Assembles parameters from stored parts, checking every size.
    pub fn from_parts(
        hyper: Hyper,
        groups: [Vec<f64>; 6],
        running_mean: Vec<f64>,
        running_var: Vec<f64>,
        stats_updates: u64,
    ) -> Result<Self> {
        hyper.validate()?;
        let p = Self {
            hyper,
            groups,
            running_mean,
            running_var,
            stats_updates,
        };
        for g in Group::ALL {
            if p.groups[g.index()].len() != p.group_len(g) {
                return Err(Error::ShapeMismatch(format!(
                    "{} has {} entries, expected {}",
                    g.name(),
                    p.groups[g.index()].len(),
                    p.group_len(g)
                )));
            }
        }
        if p.running_mean.len() != hyper.filters || p.running_var.len() != hyper.filters {
            return Err(Error::ShapeMismatch(
                "running statistics do not match filter count".into(),
            ));
        }
        if p.running_var.iter().any(|&v| !(v >= 0.0)) {
            return Err(invalid("running variance must be non-negative"));
        }
        Ok(p)
    }

    pub fn hyper(&self) -> &Hyper {
        &self.hyper
    }

    pub fn group(&self, g: Group) -> &[f64] {
        &self.groups[g.index()]
    }

    pub fn group_mut(&mut self, g: Group) -> &mut [f64] {
        &mut self.groups[g.index()]
    }

    pub fn group_len(&self, g: Group) -> usize {
        let h = &self.hyper;
        match g {
            Group::ConvWeights => h.filters * h.filter_size * h.filter_size,
            Group::ConvBias | Group::BnScale | Group::BnOffset => h.filters,
            Group::FcWeights => h.classes * h.fc_inputs(),
            Group::FcBias => h.classes,
        }
    }

    pub fn running_mean(&self) -> &[f64] {
        &self.running_mean
    }

    pub fn running_var(&self) -> &[f64] {
        &self.running_var
    }

    /// Number of batches folded into the running statistics (0 = none yet).
    pub fn stats_updates(&self) -> u64 {
        self.stats_updates
    }

    pub fn has_running_stats(&self) -> bool {
        self.stats_updates > 0
    }

    /// Folds one batch's statistics into the running estimates. The first
    /// batch initializes them directly.
    pub fn update_running_stats(&mut self, mean: &[f64], var: &[f64]) {
        if self.stats_updates == 0 {
            self.running_mean.copy_from_slice(mean);
            self.running_var.copy_from_slice(var);
        } else {
            for k in 0..self.hyper.filters {
                self.running_mean[k] = BN_MOMENTUM * self.running_mean[k] + (1.0 - BN_MOMENTUM) * mean[k];
                self.running_var[k] = BN_MOMENTUM * self.running_var[k] + (1.0 - BN_MOMENTUM) * var[k];
            }
        }
        self.stats_updates += 1;
    }

    /// Replaces the running statistics with exact values (population
    /// statistics of a dataset).
    pub fn set_running_stats(&mut self, mean: Vec<f64>, var: Vec<f64>) -> Result<()> {
        if mean.len() != self.hyper.filters || var.len() != self.hyper.filters {
            return Err(Error::ShapeMismatch("statistics do not match filter count".into()));
        }
        self.running_mean = mean;
        self.running_var = var.into_iter().map(|v| v.max(0.0)).collect();
        self.stats_updates = self.stats_updates.max(1);
        Ok(())
    }

    fn check_input(&self, input: &Tensor) -> Result<()> {
        let p = self.hyper.input_size;
        if input.shape() != (p, p, 1) {
            let (h, w, c) = input.shape();
            return Err(Error::ShapeMismatch(format!(
                "input is {h}x{w}x{c}, network expects {p}x{p}x1"
            )));
        }
        Ok(())
    }

    /// Layer 1.
    pub fn conv_forward(&self, input: &Tensor) -> Result<Tensor> {
        self.check_input(input)?;
        conv_forward(
            input,
            self.group(Group::ConvWeights),
            self.group(Group::ConvBias),
            self.hyper.filter_size,
        )
    }

    /// Layer 2 over a batch. Train mode normalizes with the batch statistics
    /// and folds them into the running estimates; infer mode uses the running
    /// estimates and fails if none exist.
    pub fn batchnorm_forward(&mut self, batch: &[Tensor], mode: BnMode) -> Result<Vec<Tensor>> {
        let refs: Vec<&Tensor> = batch.iter().collect();
        match mode {
            BnMode::Train => {
                if batch.is_empty() {
                    return Ok(Vec::new());
                }
                let (mean, var) = channel_stats(&refs);
                let out = refs
                    .iter()
                    .map(|t| self.bn_with(t, &mean, &var))
                    .collect::<Result<Vec<_>>>()?;
                self.update_running_stats(&mean, &var);
                Ok(out)
            }
            BnMode::Infer => refs.iter().map(|t| self.bn_infer(t)).collect(),
        }
    }

    fn bn_with(&self, t: &Tensor, mean: &[f64], var: &[f64]) -> Result<Tensor> {
        batchnorm_apply(
            t,
            mean,
            var,
            self.group(Group::BnScale),
            self.group(Group::BnOffset),
            self.hyper.bn_eps,
        )
    }

    fn bn_infer(&self, t: &Tensor) -> Result<Tensor> {
        if !self.has_running_stats() {
            return Err(Error::InvalidState(
                "batch norm has no running statistics yet; train first".into(),
            ));
        }
        self.bn_with(t, &self.running_mean, &self.running_var)
    }

    /// Class probabilities for one input, inference mode.
    pub fn predict_proba(&self, input: &Tensor) -> Result<Vec<f64>> {
        Ok(self.trace(input, BnMode::Infer)?.probabilities)
    }

    /// Every intermediate activation of one forward pass. In
    /// [`BnMode::Train`] the sample is normalized with its own statistics
    /// (a batch of one) and no running statistics are touched.
    pub fn trace(&self, input: &Tensor, mode: BnMode) -> Result<ForwardTrace> {
        let conv = self.conv_forward(input)?;
        let normalized = match mode {
            BnMode::Train => {
                let (mean, var) = channel_stats(&[&conv]);
                self.bn_with(&conv, &mean, &var)?
            }
            BnMode::Infer => self.bn_infer(&conv)?,
        };
        let rectified = relu(&normalized);
        let (pooled, _) = maxpool_with_argmax(&rectified)?;
        let logits = fc_forward_flat(
            &pooled.flatten_hwc(),
            self.group(Group::FcWeights),
            self.group(Group::FcBias),
        )?;
        let probabilities = softmax(&logits);
        Ok(ForwardTrace {
            conv,
            normalized,
            rectified,
            pooled,
            logits,
            probabilities,
        })
    }

    /// Train-mode forward and backward pass over one batch: mean
    /// cross-entropy, gradients of every learnable group, and the batch's
    /// batch-norm statistics. Parameters are not modified.
    pub fn loss_and_gradients(&self, batch: &[&Tensor], labels: &[usize]) -> Result<BatchPass> {
        if batch.is_empty() || batch.len() != labels.len() {
            return Err(invalid("batch must be non-empty with one label per input"));
        }
        let classes = self.hyper.classes;
        if let Some(&y) = labels.iter().find(|&&y| y == 0 || y > classes) {
            return Err(invalid(format!("label {y} outside 1..={classes}")));
        }
        let h = self.hyper;
        let n = batch.len();
        let eps = h.bn_eps;

        let mut convs = batch
            .par_iter()
            .map(|x| self.conv_forward(x))
            .collect::<Result<Vec<_>>>()?;
        let (mean, var) = channel_stats(&convs.iter().collect::<Vec<_>>());
        let inv_std: Vec<f64> = var.iter().map(|v| 1.0 / (v + eps).sqrt()).collect();
        // Normalize in place: `convs` now holds x̂.
        for x in convs.iter_mut() {
            for k in 0..h.filters {
                let (mu, is) = (mean[k], inv_std[k]);
                for v in x.plane_mut(k) {
                    *v = (*v - mu) * is;
                }
            }
        }
        let xhat = convs;

        let gamma = self.group(Group::BnScale);
        let beta = self.group(Group::BnOffset);
        let fc_w = self.group(Group::FcWeights);
        let fc_b = self.group(Group::FcBias);
        let f = h.fc_inputs();
        let m = h.conv_size();
        let q = h.pooled_size();

        // Head forward + backward down to the batch-norm output, per sample.
        let heads = xhat
            .par_iter()
            .zip(labels.par_iter())
            .map(|(xh, &y)| -> Result<Head> {
                let mut act = xh.clone();
                for k in 0..h.filters {
                    let (g, b) = (gamma[k], beta[k]);
                    for v in act.plane_mut(k) {
                        *v = (g * *v + b).max(0.0);
                    }
                }
                let (pooled, arg) = maxpool_with_argmax(&act)?;
                let flat = pooled.flatten_hwc();
                let probs = softmax(&fc_forward_flat(&flat, fc_w, fc_b)?);
                let loss = -probs[y - 1].max(LOG_FLOOR).ln();
                let mut dlogits = probs.clone();
                dlogits[y - 1] -= 1.0;
                for d in dlogits.iter_mut() {
                    *d /= n as f64;
                }
                // Back through the dense layer into the pooled features.
                let mut dflat = vec![0.0; f];
                for (o, &d) in dlogits.iter().enumerate() {
                    if d != 0.0 {
                        for (df, w) in dflat.iter_mut().zip(&fc_w[o * f..(o + 1) * f]) {
                            *df += d * w;
                        }
                    }
                }
                // Route through pooling and ReLU to dL/d(bn output).
                let mut dy = Tensor::zeros(m, m, h.filters);
                for k in 0..h.filters {
                    let plane_act = act.plane(k);
                    let dplane = dy.plane_mut(k);
                    for i in 0..q {
                        for j in 0..q {
                            let pos = arg[(k * q + i) * q + j] as usize;
                            if plane_act[pos] > 0.0 {
                                dplane[pos] += dflat[(i * q + j) * h.filters + k];
                            }
                        }
                    }
                }
                Ok(Head {
                    flat,
                    probs,
                    dlogits,
                    dy,
                    loss,
                })
            })
            .collect::<Result<Vec<_>>>()?;

        let mut grads = Gradients::zeros(self);
        let mut loss = 0.0;
        for head in &heads {
            loss += head.loss;
            let gw = &mut grads.groups[Group::FcWeights.index()];
            for (o, &d) in head.dlogits.iter().enumerate() {
                for (g, &x) in gw[o * f..(o + 1) * f].iter_mut().zip(&head.flat) {
                    *g += d * x;
                }
            }
            for (g, &d) in grads.groups[Group::FcBias.index()].iter_mut().zip(&head.dlogits) {
                *g += d;
            }
        }
        loss /= n as f64;

        // Batch-norm backward: sums over the whole batch per channel.
        let count = (n * m * m) as f64;
        let mut dgamma = vec![0.0; h.filters];
        let mut dbeta = vec![0.0; h.filters];
        for (head, xh) in heads.iter().zip(&xhat) {
            for k in 0..h.filters {
                dgamma[k] += dot(head.dy.plane(k), xh.plane(k));
                dbeta[k] += head.dy.plane(k).iter().sum::<f64>();
            }
        }

        let conv_grads = heads
            .par_iter()
            .zip(xhat.par_iter())
            .zip(batch.par_iter())
            .map(|((head, xh), x)| {
                let mut dx = head.dy.clone();
                for k in 0..h.filters {
                    let c = gamma[k] * inv_std[k] / count;
                    let (dg, db) = (dgamma[k], dbeta[k]);
                    for (d, &xv) in dx.plane_mut(k).iter_mut().zip(xh.plane(k)) {
                        *d = c * (count * *d - db - xv * dg);
                    }
                }
                conv_backward(x, &dx, h.filter_size)
            })
            .collect::<Vec<_>>();
        for (dw, db) in &conv_grads {
            for (g, v) in grads.groups[Group::ConvWeights.index()].iter_mut().zip(dw) {
                *g += v;
            }
            for (g, v) in grads.groups[Group::ConvBias.index()].iter_mut().zip(db) {
                *g += v;
            }
        }
        grads.groups[Group::BnScale.index()] = dgamma;
        grads.groups[Group::BnOffset.index()] = dbeta;

        Ok(BatchPass {
            loss,
            gradients: grads,
            batch_mean: mean,
            batch_var: var,
            probabilities: heads.into_iter().map(|hd| hd.probs).collect(),
        })
    }

    /// Train-mode loss only; used by gradient checks.
    pub fn batch_loss(&self, batch: &[&Tensor], labels: &[usize]) -> Result<f64> {
        let convs = batch.iter().map(|x| self.conv_forward(x)).collect::<Result<Vec<_>>>()?;
        let (mean, var) = channel_stats(&convs.iter().collect::<Vec<_>>());
        let mut probs = Vec::with_capacity(batch.len());
        for c in &convs {
            let y = relu(&self.bn_with(c, &mean, &var)?);
            let (p, _) = maxpool_with_argmax(&y)?;
            probs.push(softmax(&fc_forward_flat(
                &p.flatten_hwc(),
                self.group(Group::FcWeights),
                self.group(Group::FcBias),
            )?));
        }
        Ok(super::layers::cross_entropy(&probs, labels))
    }
}

struct Head {
    flat: Vec<f64>,
    probs: Vec<f64>,
    dlogits: Vec<f64>,
    dy: Tensor,
    loss: f64,
}

/// Activations of one forward pass, layer by layer.
#[derive(Debug, Clone)]
pub struct ForwardTrace {
    pub conv: Tensor,
    pub normalized: Tensor,
    pub rectified: Tensor,
    pub pooled: Tensor,
    pub logits: Vec<f64>,
    pub probabilities: Vec<f64>,
}

/// Gradients, one vector per learnable [`Group`].
#[derive(Debug, Clone, PartialEq)]
pub struct Gradients {
    groups: [Vec<f64>; 6],
}

impl Gradients {
    pub fn zeros(params: &ModelParams) -> Self {
        Self {
            groups: Group::ALL.map(|g| vec![0.0; params.group_len(g)]),
        }
    }

    pub fn group(&self, g: Group) -> &[f64] {
        &self.groups[g.index()]
    }

    pub fn group_mut(&mut self, g: Group) -> &mut [f64] {
        &mut self.groups[g.index()]
    }
}

/// Result of [`ModelParams::loss_and_gradients`].
#[derive(Debug, Clone)]
pub struct BatchPass {
    pub loss: f64,
    pub gradients: Gradients,
    pub batch_mean: Vec<f64>,
    pub batch_var: Vec<f64>,
    pub probabilities: Vec<Vec<f64>>,
}

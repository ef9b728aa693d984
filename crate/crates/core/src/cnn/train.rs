//! Mini-batch training loop and evaluation.

use rand::seq::SliceRandom;

use super::adam::{adam_step, AdamConfig, AdamState};
use super::confusion::ConfusionMatrix;
use super::layers::classify;
use super::model::{Hyper, ModelParams};
use super::tensor::Tensor;
use crate::datasets::LabeledDataset;
use crate::error::{invalid, Error, Result};
use crate::rng::{derive_seed, seeded};

#[derive(Debug, Clone, PartialEq)]
pub struct TrainConfig {
    pub learning_rate: f64,
    pub adam_beta1: f64,
    pub adam_beta2: f64,
    pub adam_epsilon: f64,
    pub batch_size: usize,
    pub max_epochs: usize,
    pub seed: u64,
    /// Validate every this many epochs (the last epoch is always validated).
    pub validate_every: usize,
    /// Return the parameters of the epoch with the best validation accuracy
    /// (latest on ties) instead of the last epoch's.
    pub keep_best: bool,
}

impl Default for TrainConfig {
    fn default() -> Self {
        let adam = AdamConfig::default();
        Self {
            learning_rate: adam.learning_rate,
            adam_beta1: adam.beta1,
            adam_beta2: adam.beta2,
            adam_epsilon: adam.epsilon,
            batch_size: 32,
            max_epochs: 30,
            seed: 0,
            validate_every: 1,
            keep_best: true,
        }
    }
}

impl TrainConfig {
    pub fn adam(&self) -> AdamConfig {
        AdamConfig {
            learning_rate: self.learning_rate,
            beta1: self.adam_beta1,
            beta2: self.adam_beta2,
            epsilon: self.adam_epsilon,
        }
    }

    pub fn validate(&self) -> Result<()> {
        if !(self.learning_rate >= 0.0 && self.learning_rate < 1.0) {
            return Err(invalid(format!(
                "learning rate must be in [0, 1), got {}",
                self.learning_rate
            )));
        }
        for (name, b) in [("beta1", self.adam_beta1), ("beta2", self.adam_beta2)] {
            if !(b > 0.0 && b < 1.0) {
                return Err(invalid(format!("adam {name} must be in (0, 1), got {b}")));
            }
        }
        if !(self.adam_epsilon > 0.0) {
            return Err(invalid("adam epsilon must be positive"));
        }
        if self.batch_size == 0 {
            return Err(invalid("batch size must be at least 1"));
        }
        if self.max_epochs == 0 {
            return Err(invalid("max epochs must be at least 1"));
        }
        Ok(())
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct EpochMetrics {
    pub epoch: usize,
    /// Mean train-mode cross-entropy over the epoch's batches.
    pub train_loss: f64,
    /// Fraction of training samples classified correctly in train mode.
    pub train_accuracy: f64,
    pub validation_accuracy: Option<f64>,
}

#[derive(Debug, Clone)]
pub struct TrainOutcome {
    pub params: ModelParams,
    pub initial: ModelParams,
    pub metrics: Vec<EpochMetrics>,
    pub best_epoch: usize,
}

fn check_compatible(dataset: &LabeledDataset, hyper: &Hyper) -> Result<()> {
    if dataset.input_size() != hyper.input_size {
        return Err(Error::ShapeMismatch(format!(
            "dataset inputs are {0}x{0}, network expects {1}x{1}",
            dataset.input_size(),
            hyper.input_size
        )));
    }
    if dataset.class_count() != hyper.classes {
        return Err(Error::ShapeMismatch(format!(
            "dataset has {} classes, network has {}",
            dataset.class_count(),
            hyper.classes
        )));
    }
    Ok(())
}

fn input_tensor(dataset: &LabeledDataset, idx: usize) -> Result<Tensor> {
    Tensor::from_image(dataset.input_size(), &dataset.samples()[idx].input)
}

/// Trains a fresh network on the dataset's training split.
pub fn train(dataset: &LabeledDataset, hyper: Hyper, cfg: &TrainConfig) -> Result<TrainOutcome> {
    cfg.validate()?;
    check_compatible(dataset, &hyper)?;
    let splits = dataset.splits();
    if splits.train.is_empty() {
        return Err(Error::Dataset("training split is empty".into()));
    }
    if splits.validation.is_empty() {
        return Err(Error::Dataset("validation split is empty".into()));
    }

    let mut params = ModelParams::init(hyper, derive_seed(cfg.seed, 0))?;
    let initial = params.clone();
    let mut adam = AdamState::for_model(&params);
    let adam_cfg = cfg.adam();
    let mut order_rng = seeded(derive_seed(cfg.seed, 1));
    let mut tie_rng = seeded(derive_seed(cfg.seed, 2));

    let mut order = splits.train.clone();
    let mut metrics = Vec::with_capacity(cfg.max_epochs);
    let mut best: Option<(f64, usize, ModelParams)> = None;

    for epoch in 1..=cfg.max_epochs {
        order.shuffle(&mut order_rng);
        let mut loss_sum = 0.0;
        let mut correct = 0usize;
        for chunk in order.chunks(cfg.batch_size) {
            let inputs = chunk
                .iter()
                .map(|&i| input_tensor(dataset, i))
                .collect::<Result<Vec<_>>>()?;
            let refs: Vec<&Tensor> = inputs.iter().collect();
            let labels: Vec<usize> = chunk.iter().map(|&i| dataset.samples()[i].label as usize).collect();
            let pass = params.loss_and_gradients(&refs, &labels)?;
            loss_sum += pass.loss * chunk.len() as f64;
            for (p, &y) in pass.probabilities.iter().zip(&labels) {
                if classify(p, &mut tie_rng) == y {
                    correct += 1;
                }
            }
            params.update_running_stats(&pass.batch_mean, &pass.batch_var);
            adam_step(&mut params, &pass.gradients, &mut adam, &adam_cfg);
        }
        let validate = epoch == cfg.max_epochs || (cfg.validate_every > 0 && epoch % cfg.validate_every == 0);
        let validation_accuracy = if validate {
            let cm = evaluate_indices(&params, dataset, &splits.validation, derive_seed(cfg.seed, 3))?;
            Some(cm.accuracy())
        } else {
            None
        };
        let n = order.len() as f64;
        let m = EpochMetrics {
            epoch,
            train_loss: loss_sum / n,
            train_accuracy: correct as f64 / n,
            validation_accuracy,
        };
        log::debug!(
            "epoch {epoch}: loss {:.5} train {:.4} val {:?}",
            m.train_loss,
            m.train_accuracy,
            m.validation_accuracy
        );
        metrics.push(m);
        if let (true, Some(acc)) = (cfg.keep_best, validation_accuracy) {
            if best.as_ref().is_none_or(|(b, _, _)| acc >= *b) {
                best = Some((acc, epoch, params.clone()));
            }
        }
    }

    let (best_epoch, mut params) = match best {
        Some((_, e, p)) => (e, p),
        None => (cfg.max_epochs, params),
    };
    finalize_batchnorm(&mut params, dataset, &splits.train)?;
    Ok(TrainOutcome {
        params,
        initial,
        metrics,
        best_epoch,
    })
}

/// Replaces the running batch-norm statistics with the exact population
/// statistics of the convolution outputs over `indices`.
pub fn finalize_batchnorm(params: &mut ModelParams, dataset: &LabeledDataset, indices: &[usize]) -> Result<()> {
    let k = params.hyper().filters;
    // Per-channel (count, mean, M2), merged sample by sample in index order.
    let mut count = 0.0f64;
    let mut mean = vec![0.0; k];
    let mut m2 = vec![0.0; k];
    for &i in indices {
        let conv = params.conv_forward(&input_tensor(dataset, i)?)?;
        let nb = (conv.height() * conv.width()) as f64;
        for c in 0..k {
            let plane = conv.plane(c);
            let mb = plane.iter().sum::<f64>() / nb;
            let m2b: f64 = plane.iter().map(|&x| (x - mb) * (x - mb)).sum();
            let total = count + nb;
            let delta = mb - mean[c];
            mean[c] += delta * nb / total;
            m2[c] += m2b + delta * delta * count * nb / total;
        }
        count += nb;
    }
    if count == 0.0 {
        return Ok(());
    }
    let var = m2.into_iter().map(|v| v / count).collect();
    params.set_running_stats(mean, var)
}

/// Inference-mode evaluation of the dataset's test split.
pub fn evaluate(params: &ModelParams, dataset: &LabeledDataset, seed: u64) -> Result<ConfusionMatrix> {
    evaluate_indices(params, dataset, &dataset.splits().test, seed)
}

/// Inference-mode evaluation of the given samples. `seed` drives tie-breaking.
pub fn evaluate_indices(
    params: &ModelParams,
    dataset: &LabeledDataset,
    indices: &[usize],
    seed: u64,
) -> Result<ConfusionMatrix> {
    check_compatible(dataset, params.hyper())?;
    let classes = params.hyper().classes;
    let mut rng = seeded(seed);
    let mut cm = ConfusionMatrix::new(classes);
    for &i in indices {
        let sample = dataset
            .samples()
            .get(i)
            .ok_or_else(|| Error::Dataset(format!("sample index {i} out of range")))?;
        let label = sample.label as usize;
        if label == 0 || label > classes {
            return Err(invalid(format!("label {label} outside 1..={classes}")));
        }
        let probs = params.predict_proba(&input_tensor(dataset, i)?)?;
        cm.record(label, classify(&probs, &mut rng))?;
    }
    Ok(cm)
}

//! The seven-layer classifier: convolution, batch normalization, ReLU,
//! 2×2 max pooling, dense layer, softmax, arg-max.
//!
//! Everything is computed in `f64`. Gradients are derived by hand for each
//! layer; see [`ModelParams::loss_and_gradients`].

mod adam;
mod confusion;
pub mod layers;
mod model;
mod tensor;
mod train;

pub use adam::{adam_step, AdamConfig, AdamState};
pub use confusion::ConfusionMatrix;
pub use layers::{classify, conv_backward, conv_forward, cross_entropy, fc_forward, maxpool, relu, softmax};
pub use model::{BatchPass, BnMode, ForwardTrace, Gradients, Group, Hyper, ModelParams, BN_MOMENTUM};
pub use tensor::Tensor;
pub use train::{evaluate, evaluate_indices, finalize_batchnorm, train, EpochMetrics, TrainConfig, TrainOutcome};

//! The forward-only training loop.
//!
//! Each step runs one forward pass with frozen weights, then lets every layer
//! update itself from its own recorded state alone: the layer's knowledge
//! gradient is turned into a weight gradient through the layer's own input
//! (the previous layer's decisions, or the data for the first layer), and all
//! layers apply their updates simultaneously. No error signal ever travels
//! backwards, and labels are never consulted by the update; they only
//! stratify the reported probabilities.
//!
//! Removing layers above layer `l` therefore leaves layer `l`'s entire update
//! trajectory bit-identical, which the test suite checks by truncation.

use std::borrow::Cow;

use thiserror::Error;

use crate::entropy::{entropy_gradient_z, layer_step_entropy, PROBABILITY_CLAMP};
use crate::metrics::{
    class_mean_probabilities, cosine_alignment, LayerStepMetrics, MetricsError, StepMetrics,
    TrainingHistory,
};
use crate::model::{LayerState, ModelError, Network};
use crate::tensor::{Matrix, TensorError};

/// Forward passes abort once any knowledge entry exceeds this magnitude.
pub const DIVERGENCE_LIMIT: f64 = 1e6;

/// How each step picks its batch.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum BatchMode {
    /// Every step sees the whole dataset.
    Full,
    /// Fixed-size windows rotating through the dataset, wrapping around.
    Minibatch(usize),
}

/// Everything a training run needs to be reproducible.
#[derive(Debug, Clone, PartialEq)]
pub struct NetworkConfig {
    /// Input dimension first, then one entry per layer.
    pub layer_sizes: Vec<usize>,
    /// Number of learning steps; at least 2, since decision shifts need two.
    pub steps: usize,
    pub learning_rate: f64,
    pub seed: u64,
    pub batch_mode: BatchMode,
    /// Decision probabilities are clamped this far inside (0, 1).
    pub clamp_eps: f64,
    /// Divide step entropies and gradients by the batch size.
    pub batch_average: bool,
    /// Move biases along the column-mean knowledge gradient.
    pub update_bias: bool,
}

impl NetworkConfig {
    pub fn new(layer_sizes: Vec<usize>) -> Self {
        Self {
            layer_sizes,
            steps: 50,
            learning_rate: 1.0,
            seed: 42,
            batch_mode: BatchMode::Full,
            clamp_eps: PROBABILITY_CLAMP,
            batch_average: true,
            update_bias: true,
        }
    }

    /// Checks the config against its invariants. A zero learning rate is
    /// accepted so no-op runs can be used as diagnostics.
    pub fn validate(&self) -> Result<(), TrainError> {
        if self.layer_sizes.len() < 2 {
            return Err(TrainError::InvalidConfig(format!(
                "layer_sizes needs an input size plus at least one layer, got {:?}",
                self.layer_sizes
            )));
        }
        if self.layer_sizes.contains(&0) {
            return Err(TrainError::InvalidConfig(format!(
                "layer sizes must be at least 1, got {:?}",
                self.layer_sizes
            )));
        }
        if self.steps < 2 {
            return Err(TrainError::InvalidConfig(format!(
                "steps must be at least 2 so decision shifts exist, got {}",
                self.steps
            )));
        }
        if !self.learning_rate.is_finite() || self.learning_rate < 0.0 {
            return Err(TrainError::InvalidConfig(format!(
                "learning_rate must be finite and non-negative, got {}",
                self.learning_rate
            )));
        }
        if !(self.clamp_eps > 0.0 && self.clamp_eps < 0.5) {
            return Err(TrainError::InvalidConfig(format!(
                "clamp_eps must lie in (0, 0.5), got {}",
                self.clamp_eps
            )));
        }
        if let BatchMode::Minibatch(size) = self.batch_mode {
            if size == 0 {
                return Err(TrainError::InvalidConfig(
                    "minibatch size must be at least 1".into(),
                ));
            }
        }
        Ok(())
    }
}

#[derive(Debug, Error)]
pub enum TrainError {
    #[error("invalid configuration: {0}")]
    InvalidConfig(String),
    #[error("non-finite gradient at layer {layer}, step {step}")]
    NonFiniteGradient { layer: usize, step: usize },
    #[error(
        "knowledge diverged at layer {layer}, step {step}: max |z| = {max_abs:.3e} exceeds {limit:.0e}"
    )]
    Diverged {
        layer: usize,
        step: usize,
        max_abs: f64,
        limit: f64,
    },
    #[error(transparent)]
    Model(#[from] ModelError),
    #[error(transparent)]
    Tensor(#[from] TensorError),
    #[error(transparent)]
    Metrics(#[from] MetricsError),
}

/// Weight gradient of a layer's step entropy: the knowledge gradient pulled
/// through the layer's own affine map, `grad_z^T * input / batch`, with the
/// layer input treated as a constant.
pub fn weight_entropy_gradient(
    layer: &LayerState,
    layer_input: &Matrix,
    batch: usize,
) -> Result<Matrix, TrainError> {
    let grad_z = entropy_gradient_z(layer.knowledge(), layer.decisions(), layer.decision_shift())?;
    Ok(weight_gradient_from(&grad_z, layer_input, batch)?)
}

fn weight_gradient_from(
    grad_z: &Matrix,
    layer_input: &Matrix,
    batch: usize,
) -> Result<Matrix, TensorError> {
    assert!(batch >= 1, "batch divisor must be at least 1");
    Ok(grad_z
        .transpose()
        .matmul(layer_input)?
        .scale(1.0 / batch as f64))
}

/// Column sums of the knowledge gradient divided by the batch divisor; the
/// bias sees a constant input of 1.
fn bias_gradient_from(grad_z: &Matrix, batch: usize) -> Vec<f64> {
    let mut sums = vec![0.0; grad_z.cols()];
    for row in 0..grad_z.rows() {
        for (col, sum) in sums.iter_mut().enumerate() {
            *sum += grad_z.get(row, col);
        }
    }
    let divisor = batch as f64;
    sums.iter_mut().for_each(|s| *s /= divisor);
    sums
}

/// Runs one learning step and returns the metrics of the pre-update state.
///
/// `cumulative` carries each layer's running entropy total across steps; the
/// caller owns it so that cumulative sums telescope in one fixed order.
pub fn ska_step(
    net: &mut Network,
    input: &Matrix,
    labels: &[usize],
    n_classes: usize,
    config: &NetworkConfig,
    step: usize,
    cumulative: &mut [f64],
) -> Result<StepMetrics, TrainError> {
    assert!(step >= 1, "steps are 1-based");
    assert_eq!(
        cumulative.len(),
        net.num_layers(),
        "one cumulative entropy slot per layer"
    );

    // (a) Forward pass with frozen weights.
    let output = net.forward(input)?;

    for (layer_index, layer) in net.layers().iter().enumerate() {
        let max_abs = layer.knowledge().max_abs();
        if !max_abs.is_finite() || max_abs > DIVERGENCE_LIMIT {
            return Err(TrainError::Diverged {
                layer: layer_index,
                step,
                max_abs,
                limit: DIVERGENCE_LIMIT,
            });
        }
    }

    let batch = input.rows();
    let divisor = if config.batch_average { batch } else { 1 };

    // (b) Layer-local gradients, all from the frozen forward state. Any
    // failure aborts before bookkeeping or weights are touched.
    let mut weight_grads = Vec::with_capacity(net.num_layers());
    let mut bias_grads = Vec::with_capacity(net.num_layers());
    for (layer_index, layer) in net.layers().iter().enumerate() {
        let layer_input = if layer_index == 0 {
            input
        } else {
            net.layers()[layer_index - 1].decisions()
        };
        let grad_z =
            entropy_gradient_z(layer.knowledge(), layer.decisions(), layer.decision_shift())?;
        let weight_grad = match weight_gradient_from(&grad_z, layer_input, divisor) {
            Ok(grad) => grad,
            Err(TensorError::NonFinite { .. }) => {
                return Err(TrainError::NonFiniteGradient {
                    layer: layer_index,
                    step,
                })
            }
            Err(other) => return Err(other.into()),
        };
        weight_grads.push(weight_grad);
        bias_grads.push(bias_gradient_from(&grad_z, divisor));
    }

    // Metrics describe the pre-update state.
    let mut layer_metrics = Vec::with_capacity(net.num_layers());
    for (layer_index, layer) in net.layers().iter().enumerate() {
        let entropy_delta =
            layer_step_entropy(layer.knowledge(), layer.decision_shift(), divisor)?;
        cumulative[layer_index] += entropy_delta;
        layer_metrics.push(LayerStepMetrics {
            entropy_delta,
            entropy_cum: cumulative[layer_index],
            cos_alignment: cosine_alignment(layer.knowledge(), layer.decision_shift())?,
            frob_norm: layer.knowledge().frobenius_norm(),
        });
    }

    let class_mean_probs = class_mean_probabilities(&output, labels, n_classes)?;
    let network_entropy = cumulative.iter().sum();

    // (c) Simultaneous update, after every gradient is in hand.
    for ((layer, weight_grad), bias_grad) in net
        .layers_mut()
        .iter_mut()
        .zip(&weight_grads)
        .zip(&bias_grads)
    {
        layer.apply_update(weight_grad, bias_grad, config.learning_rate, config.update_bias)?;
    }

    Ok(StepMetrics {
        step,
        layers: layer_metrics,
        class_mean_probs,
        network_entropy,
    })
}

/// Runs the configured number of learning steps and collects the history.
///
/// Deterministic given the config: the same seed, data, and settings produce
/// a bit-identical history.
pub fn train(
    net: &mut Network,
    features: &Matrix,
    labels: &[usize],
    n_classes: usize,
    config: &NetworkConfig,
) -> Result<TrainingHistory, TrainError> {
    config.validate()?;
    if features.rows() == 0 {
        return Err(TrainError::InvalidConfig("training data is empty".into()));
    }
    if labels.len() != features.rows() {
        return Err(TrainError::InvalidConfig(format!(
            "{} labels for {} samples",
            labels.len(),
            features.rows()
        )));
    }
    if let BatchMode::Minibatch(size) = config.batch_mode {
        if size > features.rows() {
            return Err(TrainError::InvalidConfig(format!(
                "minibatch size {size} exceeds the {} available samples",
                features.rows()
            )));
        }
    }

    let mut cumulative = vec![0.0; net.num_layers()];
    let mut history = TrainingHistory::new(net.num_layers(), n_classes);
    for step in 1..=config.steps {
        let (batch, batch_labels) = select_batch(features, labels, config, step);
        let metrics = ska_step(
            net,
            batch.as_ref(),
            &batch_labels,
            n_classes,
            config,
            step,
            &mut cumulative,
        )?;
        history.push(metrics);
    }
    Ok(history)
}

/// Full mode borrows the dataset; minibatch mode copies a rotating window,
/// wrapping around the end.
fn select_batch<'a>(
    features: &'a Matrix,
    labels: &'a [usize],
    config: &NetworkConfig,
    step: usize,
) -> (Cow<'a, Matrix>, Cow<'a, [usize]>) {
    match config.batch_mode {
        BatchMode::Full => (Cow::Borrowed(features), Cow::Borrowed(labels)),
        BatchMode::Minibatch(size) => {
            let n = features.rows();
            let cols = features.cols();
            let start = ((step - 1) * size) % n;
            let mut data = Vec::with_capacity(size * cols);
            let mut batch_labels = Vec::with_capacity(size);
            for offset in 0..size {
                let row = (start + offset) % n;
                data.extend_from_slice(&features.data()[row * cols..(row + 1) * cols]);
                batch_labels.push(labels[row]);
            }
            (
                Cow::Owned(Matrix::from_raw(size, cols, data)),
                Cow::Owned(batch_labels),
            )
        }
    }
}

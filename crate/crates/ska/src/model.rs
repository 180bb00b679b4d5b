//! Network structure and the forward pass.
//!
//! A [`Network`] owns a stack of [`LayerState`]s. Each forward pass computes
//! per layer `z = x * W^T + b` (bias broadcast across rows) and
//! `d = sigmoid(z)`, feeds `d` to the next layer, and records the
//! step-over-step decision shift `d - d_prev` that the learner and the
//! metrics consume. The shift is defined as all-zero on a layer's first
//! forward pass, when no previous decisions exist.

use std::fs;
use std::path::Path;

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, Normal};
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::learner::NetworkConfig;
use crate::tensor::{Matrix, TensorError};

const CHECKPOINT_VERSION: u32 = 1;

#[derive(Debug, Error)]
pub enum ModelError {
    #[error("architecture needs an input size plus at least one layer; got {got} sizes")]
    BadArchitecture { got: usize },
    #[error("layer sizes must be at least 1; found {size} at position {index}")]
    ZeroSize { index: usize, size: usize },
    #[error("input has {got} columns but the network expects {expected}")]
    InputDimMismatch { expected: usize, got: usize },
    #[error("no forward pass has run yet")]
    NoForward,
    #[error("weights shape {got:?} does not match layer shape {expected:?}")]
    WeightShape {
        expected: (usize, usize),
        got: (usize, usize),
    },
    #[error("bias length {got} does not match layer output size {expected}")]
    BiasLen { expected: usize, got: usize },
    #[error("checkpoint version {found} is not supported (expected {expected})")]
    CheckpointVersion { found: u32, expected: u32 },
    #[error("checkpoint is inconsistent: {0}")]
    CheckpointShape(String),
    #[error("checkpoint i/o on {path}: {source}")]
    Io {
        path: std::path::PathBuf,
        #[source]
        source: std::io::Error,
    },
    #[error("checkpoint encoding: {0}")]
    Encoding(#[from] serde_json::Error),
    #[error(transparent)]
    Tensor(#[from] TensorError),
}

/// Weights, bias, and the per-step state matrices of one layer.
///
/// State matrices are empty until the first forward pass; afterwards they are
/// `batch x out_dim`. `decisions_prev` always holds the previous step's
/// decisions bit for bit.
#[derive(Debug, Clone)]
pub struct LayerState {
    weights: Matrix, // out_dim x in_dim
    bias: Vec<f64>,  // out_dim
    knowledge: Matrix,
    decisions: Matrix,
    decisions_prev: Matrix,
    decision_shift: Matrix,
}

impl LayerState {
    fn new(weights: Matrix, bias: Vec<f64>) -> Self {
        Self {
            weights,
            bias,
            knowledge: Matrix::zeros(0, 0),
            decisions: Matrix::zeros(0, 0),
            decisions_prev: Matrix::zeros(0, 0),
            decision_shift: Matrix::zeros(0, 0),
        }
    }

    pub fn out_dim(&self) -> usize {
        self.weights.rows()
    }

    pub fn in_dim(&self) -> usize {
        self.weights.cols()
    }

    pub fn weights(&self) -> &Matrix {
        &self.weights
    }

    pub fn bias(&self) -> &[f64] {
        &self.bias
    }

    /// Pre-activation matrix `z` from the latest forward pass.
    pub fn knowledge(&self) -> &Matrix {
        &self.knowledge
    }

    /// Decision probabilities `sigmoid(z)` from the latest forward pass.
    pub fn decisions(&self) -> &Matrix {
        &self.decisions
    }

    /// Decision probabilities from the forward pass before the latest one.
    pub fn decisions_prev(&self) -> &Matrix {
        &self.decisions_prev
    }

    /// Step-over-step decision shift; all-zero on the first pass.
    pub fn decision_shift(&self) -> &Matrix {
        &self.decision_shift
    }

    /// Replaces the weight matrix, keeping the layer shape.
    pub fn set_weights(&mut self, weights: Matrix) -> Result<(), ModelError> {
        if weights.shape() != self.weights.shape() {
            return Err(ModelError::WeightShape {
                expected: self.weights.shape(),
                got: weights.shape(),
            });
        }
        self.weights = weights;
        Ok(())
    }

    pub fn set_bias(&mut self, bias: Vec<f64>) -> Result<(), ModelError> {
        if bias.len() != self.bias.len() {
            return Err(ModelError::BiasLen {
                expected: self.bias.len(),
                got: bias.len(),
            });
        }
        self.bias = bias;
        Ok(())
    }

    pub(crate) fn apply_update(
        &mut self,
        weight_grad: &Matrix,
        bias_grad: &[f64],
        learning_rate: f64,
        update_bias: bool,
    ) -> Result<(), TensorError> {
        self.weights = self.weights.sub(&weight_grad.scale(learning_rate))?;
        if update_bias {
            for (b, g) in self.bias.iter_mut().zip(bias_grad) {
                *b -= learning_rate * g;
            }
        }
        Ok(())
    }
}

/// A fully connected stack of sigmoid layers.
#[derive(Debug, Clone)]
pub struct Network {
    layers: Vec<LayerState>,
    layer_sizes: Vec<usize>,
    clamp_eps: f64,
}

impl Network {
    /// Builds a network from the configured architecture.
    ///
    /// Weights are Gaussian with standard deviation `1/sqrt(in_dim)` and zero
    /// mean; biases start at zero. Each layer draws from its own seeded
    /// stream, so a layer's initial weights do not depend on how many layers
    /// sit above it.
    pub fn new(config: &NetworkConfig) -> Result<Self, ModelError> {
        let sizes = &config.layer_sizes;
        if sizes.len() < 2 {
            return Err(ModelError::BadArchitecture { got: sizes.len() });
        }
        for (index, &size) in sizes.iter().enumerate() {
            if size == 0 {
                return Err(ModelError::ZeroSize { index, size });
            }
        }

        let mut layers = Vec::with_capacity(sizes.len() - 1);
        for (index, pair) in sizes.windows(2).enumerate() {
            let (in_dim, out_dim) = (pair[0], pair[1]);
            let mut rng = ChaCha8Rng::seed_from_u64(config.seed);
            rng.set_stream(index as u64 + 1);
            let std = 1.0 / (in_dim as f64).sqrt();
            let normal = Normal::new(0.0, std).expect("finite std");
            let data = (0..out_dim * in_dim)
                .map(|_| normal.sample(&mut rng))
                .collect();
            let weights = Matrix::from_vec(out_dim, in_dim, data)?;
            layers.push(LayerState::new(weights, vec![0.0; out_dim]));
        }

        Ok(Self {
            layers,
            layer_sizes: sizes.clone(),
            clamp_eps: config.clamp_eps,
        })
    }

    pub fn layer_sizes(&self) -> &[usize] {
        &self.layer_sizes
    }

    pub fn input_dim(&self) -> usize {
        self.layer_sizes[0]
    }

    pub fn output_dim(&self) -> usize {
        *self.layer_sizes.last().expect("validated architecture")
    }

    pub fn num_layers(&self) -> usize {
        self.layers.len()
    }

    pub fn layers(&self) -> &[LayerState] {
        &self.layers
    }

    pub fn layers_mut(&mut self) -> &mut [LayerState] {
        &mut self.layers
    }

    /// Runs one forward pass, updating every layer's recorded state, and
    /// returns the final layer's decision probabilities.
    pub fn forward(&mut self, input: &Matrix) -> Result<Matrix, ModelError> {
        if input.cols() != self.input_dim() {
            return Err(ModelError::InputDimMismatch {
                expected: self.input_dim(),
                got: input.cols(),
            });
        }

        let eps = self.clamp_eps;
        let mut current = input.clone();
        for layer in &mut self.layers {
            let z = affine(&current, &layer.weights, &layer.bias)?;
            let d = z.sigmoid().map(|v| v.clamp(eps, 1.0 - eps));

            let first = layer.decisions.shape() != d.shape();
            let shift = if first {
                Matrix::zeros(d.rows(), d.cols())
            } else {
                d.sub(&layer.decisions)?
            };
            layer.decisions_prev = if first {
                Matrix::zeros(d.rows(), d.cols())
            } else {
                std::mem::replace(&mut layer.decisions, Matrix::zeros(0, 0))
            };
            layer.knowledge = z;
            layer.decision_shift = shift;
            layer.decisions = d;
            current = layer.decisions.clone();
        }
        Ok(current)
    }

    /// Per-layer Frobenius norm of the knowledge matrices recorded by the
    /// latest forward pass.
    pub fn snapshot_norms(&self) -> Result<Vec<f64>, ModelError> {
        if self.layers[0].knowledge.rows() == 0 {
            return Err(ModelError::NoForward);
        }
        Ok(self
            .layers
            .iter()
            .map(|l| l.knowledge.frobenius_norm())
            .collect())
    }

    pub fn to_checkpoint(&self) -> NetworkCheckpoint {
        NetworkCheckpoint {
            version: CHECKPOINT_VERSION,
            layer_sizes: self.layer_sizes.clone(),
            layers: self
                .layers
                .iter()
                .map(|l| LayerCheckpoint {
                    out_dim: l.out_dim(),
                    in_dim: l.in_dim(),
                    weights: l.weights.data().to_vec(),
                    bias: l.bias.clone(),
                })
                .collect(),
        }
    }

    /// Rebuilds a network from a checkpoint. State matrices start empty and
    /// the probability clamp reverts to its default.
    pub fn from_checkpoint(checkpoint: &NetworkCheckpoint) -> Result<Self, ModelError> {
        if checkpoint.version != CHECKPOINT_VERSION {
            return Err(ModelError::CheckpointVersion {
                found: checkpoint.version,
                expected: CHECKPOINT_VERSION,
            });
        }
        if checkpoint.layer_sizes.len() != checkpoint.layers.len() + 1 {
            return Err(ModelError::CheckpointShape(format!(
                "{} sizes for {} layers",
                checkpoint.layer_sizes.len(),
                checkpoint.layers.len()
            )));
        }
        let mut layers = Vec::with_capacity(checkpoint.layers.len());
        for (index, layer) in checkpoint.layers.iter().enumerate() {
            let expected_in = checkpoint.layer_sizes[index];
            let expected_out = checkpoint.layer_sizes[index + 1];
            if layer.in_dim != expected_in || layer.out_dim != expected_out {
                return Err(ModelError::CheckpointShape(format!(
                    "layer {index} is {}x{} but sizes say {expected_out}x{expected_in}",
                    layer.out_dim, layer.in_dim
                )));
            }
            if layer.bias.len() != layer.out_dim {
                return Err(ModelError::CheckpointShape(format!(
                    "layer {index} bias has length {}",
                    layer.bias.len()
                )));
            }
            let weights = Matrix::from_vec(layer.out_dim, layer.in_dim, layer.weights.clone())?;
            layers.push(LayerState::new(weights, layer.bias.clone()));
        }
        Ok(Self {
            layers,
            layer_sizes: checkpoint.layer_sizes.clone(),
            clamp_eps: crate::entropy::PROBABILITY_CLAMP,
        })
    }

    /// Writes a versioned JSON checkpoint of layer sizes, weights, and
    /// biases. Per-step state matrices are not persisted.
    pub fn save_checkpoint(&self, path: &Path) -> Result<(), ModelError> {
        let json = serde_json::to_string_pretty(&self.to_checkpoint())?;
        fs::write(path, json).map_err(|source| ModelError::Io {
            path: path.to_path_buf(),
            source,
        })
    }

    pub fn load_checkpoint(path: &Path) -> Result<Self, ModelError> {
        let bytes = fs::read(path).map_err(|source| ModelError::Io {
            path: path.to_path_buf(),
            source,
        })?;
        let checkpoint: NetworkCheckpoint = serde_json::from_slice(&bytes)?;
        Self::from_checkpoint(&checkpoint)
    }
}

/// Serialized form of a network: layer sizes, weights, and biases only.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct NetworkCheckpoint {
    pub version: u32,
    pub layer_sizes: Vec<usize>,
    pub layers: Vec<LayerCheckpoint>,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct LayerCheckpoint {
    pub out_dim: usize,
    pub in_dim: usize,
    /// Row-major `out_dim x in_dim` weight entries.
    pub weights: Vec<f64>,
    pub bias: Vec<f64>,
}

/// `input * weights^T` with the bias added to every row.
fn affine(input: &Matrix, weights: &Matrix, bias: &[f64]) -> Result<Matrix, TensorError> {
    let product = input.matmul(&weights.transpose())?;
    let cols = product.cols();
    let data = product
        .data()
        .iter()
        .enumerate()
        .map(|(i, &v)| v + bias[i % cols])
        .collect();
    Ok(Matrix::from_raw(product.rows(), cols, data))
}

//! # SKA: forward-only learning by layer-local entropy minimization
//!
//! Structured knowledge accumulation (SKA) trains a multilayer sigmoid
//! network without backpropagation. Each layer treats its pre-activations as
//! accumulated knowledge `z`, its sigmoid outputs as decision probabilities
//! `D`, and descends the entropy `-(1/ln 2) * sum_k z_k . dD_k` built from
//! the step-over-step decision shifts `dD`. Every update is local: a layer
//! reads only its own state and its own input, so layers above it can be
//! added or removed without changing its trajectory.
//!
//! ## Structure
//!
//! - [`tensor`]: dense `f64` matrices and the handful of shape-checked
//!   operations the rest builds on
//! - [`entropy`]: Shannon entropy, its closed-form counterpart, step
//!   entropies, gradients, and the governing identity
//! - [`model`]: layers, the network, the forward pass, and checkpoints
//! - [`learner`]: the forward-only training loop and its configuration
//! - [`metrics`]: alignment, entropy, norm, and class-probability recording
//! - [`data`]: IDX file ingestion and a seeded synthetic generator
//!
//! ## Determinism
//!
//! Runs are reproducible bit for bit: initialization and data generation use
//! seeded counter-based RNG streams (one stream per layer), training is
//! sequential, and metrics sum in a fixed order.

pub mod data;
pub mod entropy;
pub mod learner;
pub mod metrics;
pub mod model;
pub mod tensor;

pub use data::{load_idx, synthetic_blobs, write_idx_images, write_idx_labels, DataError, Dataset};
pub use entropy::{
    clamp_probability, continuous_entropy_rate, entropy_gradient_z, governing_residual,
    interlayer_entropy_change, knowledge_from_probability, layer_step_entropy, shannon_derivative,
    shannon_entropy, ska_entropy_closed_form, EntropyRecord, PROBABILITY_CLAMP,
};
pub use learner::{
    ska_step, train, weight_entropy_gradient, BatchMode, NetworkConfig, TrainError,
    DIVERGENCE_LIMIT,
};
pub use metrics::{
    class_mean_probabilities, cosine_alignment, entropy_vs_norm_series, LayerStepMetrics,
    MetricsError, StepMetrics, TrainingHistory,
};
pub use model::{LayerState, ModelError, Network, NetworkCheckpoint};
pub use tensor::{sigmoid_scalar, ElemOp, Matrix, TensorError};

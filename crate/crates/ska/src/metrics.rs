//! Every quantity the training loop records: cosine alignment between
//! knowledge and decision shift, entropy trajectories, Frobenius norms, and
//! label-stratified mean output probabilities.
//!
//! [`TrainingHistory`] is the serialization unit: ordered [`StepMetrics`],
//! one per learning step, each holding per-layer figures plus the total
//! network entropy (the sum of the layers' cumulative entropies, in layer
//! order).

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::entropy::EntropyRecord;
use crate::tensor::{Matrix, TensorError};

/// Vectors with Frobenius norm below this are treated as directionless and
/// give a cosine alignment of 0.
pub const DEGENERATE_NORM_EPS: f64 = 1e-15;

#[derive(Debug, Error)]
pub enum MetricsError {
    #[error("expected {expected} labels for {expected} samples, got {got}")]
    LabelCount { expected: usize, got: usize },
    #[error("label {label} at sample {index} is out of range for {n_classes} classes")]
    LabelOutOfRange {
        index: usize,
        label: usize,
        n_classes: usize,
    },
    #[error("{n_classes} classes need at least that many output columns, got {outputs}")]
    OutputTooNarrow { n_classes: usize, outputs: usize },
    #[error("layer {layer} out of range ({layers} layers)")]
    LayerOutOfRange { layer: usize, layers: usize },
    #[error(transparent)]
    Tensor(#[from] TensorError),
}

/// Per-layer figures for one learning step.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct LayerStepMetrics {
    /// Step entropy contribution in bits.
    pub entropy_delta: f64,
    /// Cumulative entropy in bits, telescoped over the run.
    pub entropy_cum: f64,
    /// Cosine between flattened knowledge and decision shift, in [-1, 1].
    pub cos_alignment: f64,
    /// Frobenius norm of the knowledge matrix.
    pub frob_norm: f64,
}

/// Everything recorded about one learning step, pre-update state.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct StepMetrics {
    /// 1-based step index.
    pub step: usize,
    pub layers: Vec<LayerStepMetrics>,
    /// Mean output probability per true class; `None` marks a class with no
    /// samples in the step's batch.
    pub class_mean_probs: Vec<Option<f64>>,
    /// Sum over layers of cumulative entropy, in bits.
    pub network_entropy: f64,
}

/// Ordered collection of step metrics for one training run.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TrainingHistory {
    n_layers: usize,
    n_classes: usize,
    steps: Vec<StepMetrics>,
}

impl TrainingHistory {
    pub fn new(n_layers: usize, n_classes: usize) -> Self {
        Self {
            n_layers,
            n_classes,
            steps: Vec::new(),
        }
    }

    pub(crate) fn push(&mut self, metrics: StepMetrics) {
        debug_assert_eq!(metrics.layers.len(), self.n_layers);
        self.steps.push(metrics);
    }

    pub fn steps(&self) -> &[StepMetrics] {
        &self.steps
    }

    pub fn n_layers(&self) -> usize {
        self.n_layers
    }

    pub fn n_classes(&self) -> usize {
        self.n_classes
    }

    pub fn is_empty(&self) -> bool {
        self.steps.is_empty()
    }

    /// Flattens the history into per-(step, layer) entropy records, ordered
    /// by step then layer.
    pub fn entropy_records(&self) -> Vec<EntropyRecord> {
        self.steps
            .iter()
            .flat_map(|s| {
                s.layers.iter().enumerate().map(|(layer, l)| EntropyRecord {
                    layer,
                    step: s.step,
                    delta_h: l.entropy_delta,
                    cumulative_h: l.entropy_cum,
                })
            })
            .collect()
    }
}

/// Cosine between the flattened knowledge and decision-shift matrices.
///
/// Defined as 0 when either norm falls below [`DEGENERATE_NORM_EPS`]; the
/// result is clamped into [-1, 1] against rounding overshoot.
pub fn cosine_alignment(knowledge: &Matrix, shift: &Matrix) -> Result<f64, TensorError> {
    let dot = knowledge.flat_dot(shift)?;
    let norm_k = knowledge.frobenius_norm();
    let norm_s = shift.frobenius_norm();
    if norm_k < DEGENERATE_NORM_EPS || norm_s < DEGENERATE_NORM_EPS {
        return Ok(0.0);
    }
    Ok((dot / (norm_k * norm_s)).clamp(-1.0, 1.0))
}

/// For each class, the mean over samples of that true class of the output
/// column with the class's index. Classes absent from the batch yield `None`.
pub fn class_mean_probabilities(
    output: &Matrix,
    labels: &[usize],
    n_classes: usize,
) -> Result<Vec<Option<f64>>, MetricsError> {
    if labels.len() != output.rows() {
        return Err(MetricsError::LabelCount {
            expected: output.rows(),
            got: labels.len(),
        });
    }
    if n_classes > output.cols() {
        return Err(MetricsError::OutputTooNarrow {
            n_classes,
            outputs: output.cols(),
        });
    }
    for (index, &label) in labels.iter().enumerate() {
        if label >= n_classes {
            return Err(MetricsError::LabelOutOfRange {
                index,
                label,
                n_classes,
            });
        }
    }

    let mut sums = vec![0.0; n_classes];
    let mut counts = vec![0usize; n_classes];
    for (row, &label) in labels.iter().enumerate() {
        sums[label] += output.get(row, label);
        counts[label] += 1;
    }
    Ok(sums
        .iter()
        .zip(&counts)
        .map(|(&sum, &count)| (count > 0).then(|| sum / count as f64))
        .collect())
}

/// Plot-ready `(frob_norm, entropy_cum)` pairs for one layer, in step order.
pub fn entropy_vs_norm_series(
    history: &TrainingHistory,
    layer: usize,
) -> Result<Vec<(f64, f64)>, MetricsError> {
    if layer >= history.n_layers() {
        return Err(MetricsError::LayerOutOfRange {
            layer,
            layers: history.n_layers(),
        });
    }
    Ok(history
        .steps()
        .iter()
        .map(|s| (s.layers[layer].frob_norm, s.layers[layer].entropy_cum))
        .collect())
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;

    fn seeded(rows: usize, cols: usize, seed: u64) -> Matrix {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let data = (0..rows * cols).map(|_| rng.random_range(-1.0..1.0)).collect();
        Matrix::from_raw(rows, cols, data)
    }

    #[test]
    fn parallel_vectors_align_perfectly() {
        let z = seeded(2, 3, 1);
        let shift = z.scale(2.5);
        let cos = cosine_alignment(&z, &shift).unwrap();
        assert!((cos - 1.0).abs() < 1e-12);
    }

    #[test]
    fn orthogonal_vectors_give_zero() {
        let z = Matrix::from_rows(&[vec![1.0, 0.0]]).unwrap();
        let shift = Matrix::from_rows(&[vec![0.0, 1.0]]).unwrap();
        assert_eq!(cosine_alignment(&z, &shift).unwrap(), 0.0);
    }

    #[test]
    fn degenerate_norm_gives_zero() {
        let z = seeded(2, 2, 2);
        let zero = Matrix::zeros(2, 2);
        assert_eq!(cosine_alignment(&z, &zero).unwrap(), 0.0);
        assert_eq!(cosine_alignment(&zero, &z).unwrap(), 0.0);
    }

    #[test]
    fn cosine_matches_flatten_and_normalize_oracle() {
        let z = seeded(3, 4, 3);
        let shift = seeded(3, 4, 4);
        let mut dot = 0.0;
        let mut nz = 0.0;
        let mut ns = 0.0;
        for (a, b) in z.data().iter().zip(shift.data()) {
            dot += a * b;
            nz += a * a;
            ns += b * b;
        }
        let oracle = dot / (nz.sqrt() * ns.sqrt());
        let got = cosine_alignment(&z, &shift).unwrap();
        assert!((got - oracle).abs() < 1e-12);
    }

    #[test]
    fn class_means_of_uniform_output() {
        let output = Matrix::from_vec(4, 3, vec![0.5; 12]).unwrap();
        let labels = [0, 1, 2, 1];
        let means = class_mean_probabilities(&output, &labels, 3).unwrap();
        assert_eq!(means, vec![Some(0.5); 3]);
    }

    #[test]
    fn class_means_read_off_identity_rows() {
        let output = Matrix::from_rows(&[
            vec![0.9, 0.1, 0.2],
            vec![0.3, 0.8, 0.1],
            vec![0.2, 0.4, 0.7],
        ])
        .unwrap();
        let means = class_mean_probabilities(&output, &[0, 1, 2], 3).unwrap();
        assert_eq!(means, vec![Some(0.9), Some(0.8), Some(0.7)]);
    }

    #[test]
    fn class_means_match_group_by_oracle() {
        let mut rng = ChaCha8Rng::seed_from_u64(5);
        let rows = 20;
        let n_classes = 4;
        let output = Matrix::from_raw(
            rows,
            n_classes,
            (0..rows * n_classes).map(|_| rng.random_range(0.0..1.0)).collect(),
        );
        let labels: Vec<usize> = (0..rows).map(|_| rng.random_range(0..n_classes)).collect();

        let got = class_mean_probabilities(&output, &labels, n_classes).unwrap();
        for (class, mean) in got.iter().enumerate() {
            let members: Vec<f64> = labels
                .iter()
                .enumerate()
                .filter(|(_, &l)| l == class)
                .map(|(row, _)| output.get(row, class))
                .collect();
            match mean {
                Some(mean) => {
                    let oracle = members.iter().sum::<f64>() / members.len() as f64;
                    assert!((mean - oracle).abs() < 1e-12);
                }
                None => assert!(members.is_empty()),
            }
        }
    }

    #[test]
    fn empty_class_marked_missing_not_error() {
        let output = Matrix::from_vec(2, 3, vec![0.4; 6]).unwrap();
        let means = class_mean_probabilities(&output, &[0, 0], 3).unwrap();
        assert_eq!(means[0], Some(0.4));
        assert_eq!(means[1], None);
        assert_eq!(means[2], None);
    }

    #[test]
    fn class_means_validate_inputs() {
        let output = Matrix::zeros(2, 2);
        assert!(matches!(
            class_mean_probabilities(&output, &[0], 2),
            Err(MetricsError::LabelCount { .. })
        ));
        assert!(matches!(
            class_mean_probabilities(&output, &[0, 5], 2),
            Err(MetricsError::LabelOutOfRange { label: 5, .. })
        ));
        assert!(matches!(
            class_mean_probabilities(&output, &[0, 1], 3),
            Err(MetricsError::OutputTooNarrow { .. })
        ));
    }

    fn toy_history() -> TrainingHistory {
        let mut history = TrainingHistory::new(2, 2);
        for step in 1..=3usize {
            let layers = (0..2)
                .map(|l| LayerStepMetrics {
                    entropy_delta: -(step as f64) * 0.1,
                    entropy_cum: -((step * (step + 1)) as f64) * 0.05,
                    cos_alignment: 0.5,
                    frob_norm: step as f64 + l as f64,
                })
                .collect();
            history.push(StepMetrics {
                step,
                layers,
                class_mean_probs: vec![Some(0.5), Some(0.5)],
                network_entropy: 0.0,
            });
        }
        history
    }

    #[test]
    fn entropy_vs_norm_series_mirrors_fields() {
        let history = toy_history();
        let series = entropy_vs_norm_series(&history, 1).unwrap();
        assert_eq!(series.len(), history.steps().len());
        for (pair, step) in series.iter().zip(history.steps()) {
            assert_eq!(pair.0, step.layers[1].frob_norm);
            assert_eq!(pair.1, step.layers[1].entropy_cum);
        }
        assert!(matches!(
            entropy_vs_norm_series(&history, 2),
            Err(MetricsError::LayerOutOfRange { layer: 2, .. })
        ));
    }

    #[test]
    fn single_step_history_gives_single_pair() {
        let mut history = TrainingHistory::new(1, 1);
        history.push(StepMetrics {
            step: 1,
            layers: vec![LayerStepMetrics {
                entropy_delta: 0.0,
                entropy_cum: 0.0,
                cos_alignment: 0.0,
                frob_norm: 2.0,
            }],
            class_mean_probs: vec![Some(0.5)],
            network_entropy: 0.0,
        });
        let series = entropy_vs_norm_series(&history, 0).unwrap();
        assert_eq!(series, vec![(2.0, 0.0)]);
    }

    proptest! {
        #[test]
        fn prop_cosine_invariant_to_positive_rescaling(
            seed in 0u64..200,
            a in 0.1f64..10.0,
            b in 0.1f64..10.0,
        ) {
            let z = seeded(2, 3, seed);
            let shift = seeded(2, 3, seed.wrapping_add(1000));
            let base = cosine_alignment(&z, &shift).unwrap();
            let scaled = cosine_alignment(&z.scale(a), &shift.scale(b)).unwrap();
            prop_assert!((base - scaled).abs() <= 1e-12);
            prop_assert!((-1.0..=1.0).contains(&scaled));
        }
    }
}

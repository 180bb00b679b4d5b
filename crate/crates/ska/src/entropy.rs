//! Information-theoretic quantities for forward-only learning.
//!
//! The central object is the per-step, per-layer entropy contribution
//! `-(1/ln 2) * sum(z * dD) / batch`, where `z` is a layer's knowledge
//! (pre-activation) matrix and `dD` the shift of its decision probabilities
//! between consecutive learning steps. This module provides:
//!
//! - the binary Shannon entropy and its closed-form twin obtained by
//!   integrating knowledge against decision probability, which agree exactly
//!   when decisions come from the sigmoid (an identity the verification
//!   suite checks on a dense grid);
//! - the discrete step entropy and its exact gradient with respect to
//!   knowledge, plus the governing identity tying the two together;
//! - the continuous rate of entropy change and the inter-layer entropy
//!   difference.
//!
//! All entropies are reported in bits. Scalar probability arguments are
//! clamped to `[PROBABILITY_CLAMP, 1 - PROBABILITY_CLAMP]` before any
//! logarithm, so the scalar functions are total over finite input.
//!
//! One wrinkle is worth spelling out: the exact derivative of the step
//! entropy with respect to knowledge places the decision-shift term inside
//! the `1/ln 2` factor,
//!
//! ```text
//! dH/dz = -(1/ln 2) * (z * D * (1 - D) + dD)
//! ```
//!
//! and that is the form implemented here. The matching governing identity is
//! `grad + (1/ln 2) * (z * D * (1 - D) + dD) = 0`. Centered finite
//! differences of [`layer_step_entropy`] confirm the placement; see the
//! gradient tests.

use std::f64::consts::LN_2;

use serde::{Deserialize, Serialize};

use crate::tensor::{Matrix, TensorError};

/// Probabilities are clamped this far away from 0 and 1 before logarithms.
pub const PROBABILITY_CLAMP: f64 = 1e-12;

/// Pulls a probability into the closed interval
/// `[PROBABILITY_CLAMP, 1 - PROBABILITY_CLAMP]`.
pub fn clamp_probability(d: f64) -> f64 {
    d.clamp(PROBABILITY_CLAMP, 1.0 - PROBABILITY_CLAMP)
}

/// One step's entropy bookkeeping for one layer.
///
/// `cumulative_h` telescopes: at step `k` it is the ordered sum of `delta_h`
/// over steps `1..=k`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct EntropyRecord {
    pub layer: usize,
    pub step: usize,
    /// Step entropy contribution in bits.
    pub delta_h: f64,
    /// Running sum of contributions in bits, same summation order as the run.
    pub cumulative_h: f64,
}

/// Binary Shannon entropy in bits: `-d log2 d - (1-d) log2 (1-d)`.
pub fn shannon_entropy(d: f64) -> f64 {
    let d = clamp_probability(d);
    -(d * d.log2() + (1.0 - d) * (1.0 - d).log2())
}

/// Derivative of the binary Shannon entropy: `log2((1-d)/d)`.
pub fn shannon_derivative(d: f64) -> f64 {
    let d = clamp_probability(d);
    ((1.0 - d) / d).log2()
}

/// Closed form of the knowledge-against-decision entropy integral,
/// `-(1/ln 2) * [d * ln(d/(1-d)) + ln(1-d)]`.
///
/// Kept in this pre-factored shape on purpose: its agreement with
/// [`shannon_entropy`] is an identity the test suite checks numerically, so
/// the two functions must not share a code path.
pub fn ska_entropy_closed_form(d: f64) -> f64 {
    let d = clamp_probability(d);
    -(d * (d / (1.0 - d)).ln() + (1.0 - d).ln()) / LN_2
}

/// Logit: recovers knowledge from a decision probability, the exact inverse
/// of the scalar sigmoid.
pub fn knowledge_from_probability(d: f64) -> f64 {
    let d = clamp_probability(d);
    (d / (1.0 - d)).ln()
}

/// One step's entropy contribution for one layer, in bits:
/// `-(1/ln 2) * sum(z * shift) / batch`.
///
/// `batch` is the averaging divisor; pass 1 to keep the raw sum.
pub fn layer_step_entropy(
    knowledge: &Matrix,
    shift: &Matrix,
    batch: usize,
) -> Result<f64, TensorError> {
    assert!(batch >= 1, "batch divisor must be at least 1");
    let value = -(knowledge.flat_dot(shift)?) / LN_2 / batch as f64;
    // A zero shift gives -0.0; report it as plain zero.
    Ok(value + 0.0)
}

/// Gradient of the step entropy with respect to knowledge:
/// `-(1/ln 2) * (z * d * (1 - d) + shift)`, entry-wise.
///
/// This is the exact derivative of [`layer_step_entropy`] (without the batch
/// divisor) when the previous step's decisions are held fixed.
pub fn entropy_gradient_z(
    knowledge: &Matrix,
    decisions: &Matrix,
    shift: &Matrix,
) -> Result<Matrix, TensorError> {
    check_same_shape("entropy_gradient_z", knowledge, decisions)?;
    check_same_shape("entropy_gradient_z", knowledge, shift)?;
    let inv_ln2 = 1.0 / LN_2;
    let data = knowledge
        .data()
        .iter()
        .zip(decisions.data())
        .zip(shift.data())
        .map(|((&z, &d), &dd)| -(z * d * (1.0 - d) + dd) * inv_ln2)
        .collect();
    Ok(Matrix::from_raw(knowledge.rows(), knowledge.cols(), data))
}

/// Continuous rate of entropy change with respect to knowledge for a single
/// neuron: `-(1/ln 2) * z * d * (1 - d)`.
///
/// With `d = sigmoid(z)` this equals the derivative of
/// `shannon_entropy(sigmoid(z))` in `z`.
pub fn continuous_entropy_rate(z: f64, d: f64) -> f64 {
    -(z * d * (1.0 - d)) / LN_2
}

/// Frobenius norm of `grad + (1/ln 2) * (z * d * (1 - d) + shift)`.
///
/// Zero (up to rounding) exactly when `grad` came from
/// [`entropy_gradient_z`]; deliberately recomputed through a scalar loop
/// with division rather than reusing the gradient code.
pub fn governing_residual(
    grad: &Matrix,
    knowledge: &Matrix,
    decisions: &Matrix,
    shift: &Matrix,
) -> Result<f64, TensorError> {
    check_same_shape("governing_residual", grad, knowledge)?;
    check_same_shape("governing_residual", grad, decisions)?;
    check_same_shape("governing_residual", grad, shift)?;
    let mut acc = 0.0;
    for (((&g, &z), &d), &dd) in grad
        .data()
        .iter()
        .zip(knowledge.data())
        .zip(decisions.data())
        .zip(shift.data())
    {
        let r = g + (z * d * (1.0 - d) + dd) / LN_2;
        acc += r * r;
    }
    Ok(acc.sqrt())
}

/// Entropy change between one layer and the next at the same step, in bits:
/// `-(1/ln 2) * [sum(z_next * shift_next) - sum(z * shift)] / batch`.
pub fn interlayer_entropy_change(
    knowledge: &Matrix,
    shift: &Matrix,
    knowledge_next: &Matrix,
    shift_next: &Matrix,
    batch: usize,
) -> Result<f64, TensorError> {
    assert!(batch >= 1, "batch divisor must be at least 1");
    let lower = knowledge.flat_dot(shift)?;
    let upper = knowledge_next.flat_dot(shift_next)?;
    Ok(-(upper - lower) / LN_2 / batch as f64 + 0.0)
}

fn check_same_shape(op: &'static str, a: &Matrix, b: &Matrix) -> Result<(), TensorError> {
    if a.shape() != b.shape() {
        return Err(TensorError::ShapeMismatch {
            op,
            left: a.shape(),
            right: b.shape(),
        });
    }
    Ok(())
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::tensor::sigmoid_scalar;
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;

    fn centered_diff(f: impl Fn(f64) -> f64, x: f64, h: f64) -> f64 {
        (f(x + h) - f(x - h)) / (2.0 * h)
    }

    fn seeded_open01(rows: usize, cols: usize, seed: u64) -> Matrix {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let data = (0..rows * cols)
            .map(|_| rng.random_range(0.05..0.95))
            .collect();
        Matrix::from_raw(rows, cols, data)
    }

    fn seeded_knowledge(rows: usize, cols: usize, seed: u64) -> Matrix {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let data = (0..rows * cols)
            .map(|_| rng.random_range(-3.0..3.0))
            .collect();
        Matrix::from_raw(rows, cols, data)
    }

    #[test]
    fn shannon_entropy_known_points() {
        assert_eq!(shannon_entropy(0.5), 1.0);
        assert!(shannon_entropy(1e-12).abs() < 1e-9);
        // Independent route through natural logarithms.
        let oracle = -(0.25f64.ln() * 0.25 + 0.75f64.ln() * 0.75) / LN_2;
        assert!((shannon_entropy(0.25) - oracle).abs() < 1e-15);
        assert!((shannon_entropy(0.25) - 0.8112781244591328).abs() < 1e-15);
    }

    #[test]
    fn shannon_derivative_symmetry_and_fd() {
        assert_eq!(shannon_derivative(0.5), 0.0);
        for d in [0.1, 0.3, 0.42] {
            let a = shannon_derivative(d);
            let b = shannon_derivative(1.0 - d);
            assert!((a + b).abs() < 1e-12, "d = {d}");
        }
        let fd = centered_diff(shannon_entropy, 0.3, 1e-6);
        assert!((shannon_derivative(0.3) - fd).abs() < 1e-6);
    }

    #[test]
    fn closed_form_equals_shannon_everywhere() {
        assert!((ska_entropy_closed_form(0.5) - 1.0).abs() < 1e-15);
        for i in 0..1000 {
            let d = 1e-6 + (1.0 - 2e-6) * i as f64 / 999.0;
            let diff = (ska_entropy_closed_form(d) - shannon_entropy(d)).abs();
            assert!(diff <= 1e-12, "d = {d}, diff = {diff:e}");
        }
    }

    #[test]
    fn closed_form_matches_factored_route_at_0_9() {
        // Factored variant: -(1/ln 2) * [d ln d - d ln(1-d) + ln(1-d)].
        let d: f64 = 0.9;
        let oracle = -(d * d.ln() - d * (1.0 - d).ln() + (1.0 - d).ln()) / LN_2;
        assert!((ska_entropy_closed_form(d) - oracle).abs() < 1e-14);
    }

    #[test]
    fn logit_inverts_sigmoid() {
        assert_eq!(knowledge_from_probability(0.5), 0.0);
        for d in [0.001, 0.2, 0.5, 0.77, 0.999] {
            let z = knowledge_from_probability(d);
            assert!((sigmoid_scalar(z) - d).abs() < 1e-12, "d = {d}");
        }
        assert!((knowledge_from_probability(0.7310585786300049) - 1.0).abs() < 1e-12);
    }

    #[test]
    fn step_entropy_zero_shift_and_cancellation() {
        let z = seeded_knowledge(2, 3, 5);
        let zero = Matrix::zeros(2, 3);
        assert_eq!(layer_step_entropy(&z, &zero, 2).unwrap(), 0.0);

        let z = Matrix::from_rows(&[vec![1.0, -1.0]]).unwrap();
        let dd = Matrix::from_rows(&[vec![0.1, 0.1]]).unwrap();
        assert_eq!(layer_step_entropy(&z, &dd, 1).unwrap(), 0.0);
    }

    #[test]
    fn step_entropy_matches_scalar_loop() {
        let z = seeded_knowledge(4, 3, 6);
        let dd = seeded_knowledge(4, 3, 7).scale(0.1);
        let batch = 4;
        let mut acc = 0.0;
        for r in 0..4 {
            for c in 0..3 {
                acc += z.get(r, c) * dd.get(r, c);
            }
        }
        let oracle = -acc / LN_2 / batch as f64;
        let got = layer_step_entropy(&z, &dd, batch).unwrap();
        assert!((got - oracle).abs() < 1e-12);
    }

    #[test]
    fn gradient_zero_at_origin() {
        let zero = Matrix::zeros(2, 2);
        let half = Matrix::from_vec(2, 2, vec![0.5; 4]).unwrap();
        let g = entropy_gradient_z(&zero, &half, &zero).unwrap();
        assert!(g.data().iter().all(|&v| v == 0.0));
    }

    #[test]
    fn gradient_at_zero_knowledge_point() {
        // z = 0 kills the sigmoid-derivative term; the shift term survives
        // scaled by 1/ln 2 because it sits inside the prefactored bracket.
        let z = Matrix::zeros(1, 1);
        let d = Matrix::from_vec(1, 1, vec![0.5]).unwrap();
        let dd = Matrix::from_vec(1, 1, vec![0.1]).unwrap();
        let g = entropy_gradient_z(&z, &d, &dd).unwrap();
        assert!((g.get(0, 0) - (-0.1 / LN_2)).abs() < 1e-15);
    }

    #[test]
    fn gradient_matches_finite_difference_of_step_entropy() {
        for seed in 0..5u64 {
            let z = seeded_knowledge(3, 4, 100 + seed);
            let prev = seeded_open01(3, 4, 200 + seed);
            let d = z.sigmoid();
            let shift = d.sub(&prev).unwrap();
            let grad = entropy_gradient_z(&z, &d, &shift).unwrap();

            let h = 1e-6;
            for r in 0..3 {
                for c in 0..4 {
                    let eval = |delta: f64| {
                        let mut zp = z.clone();
                        zp.set(r, c, z.get(r, c) + delta);
                        let dp = zp.sigmoid();
                        let sp = dp.sub(&prev).unwrap();
                        layer_step_entropy(&zp, &sp, 1).unwrap()
                    };
                    let fd = (eval(h) - eval(-h)) / (2.0 * h);
                    assert!(
                        (grad.get(r, c) - fd).abs() < 1e-5,
                        "seed {seed} entry ({r},{c}): {} vs {fd}",
                        grad.get(r, c)
                    );
                }
            }
        }
    }

    #[test]
    fn continuous_rate_chain_rule() {
        assert_eq!(continuous_entropy_rate(0.0, 0.5), 0.0);
        for i in 0..50 {
            let z = -6.0 + 12.0 * i as f64 / 49.0;
            let rate = continuous_entropy_rate(z, sigmoid_scalar(z));
            let fd = centered_diff(|x| shannon_entropy(sigmoid_scalar(x)), z, 1e-6);
            assert!((rate - fd).abs() < 1e-6, "z = {z}");
        }
        let d2 = sigmoid_scalar(2.0);
        assert!(continuous_entropy_rate(2.0, d2) < 0.0);
    }

    #[test]
    fn residual_vanishes_for_produced_gradients() {
        for seed in 0..10u64 {
            let z = seeded_knowledge(3, 4, 300 + seed);
            let d = z.sigmoid();
            let shift = d.sub(&seeded_open01(3, 4, 400 + seed)).unwrap();
            let grad = entropy_gradient_z(&z, &d, &shift).unwrap();
            let res = governing_residual(&grad, &z, &d, &shift).unwrap();
            assert!(res <= 1e-12, "seed {seed}: residual {res:e}");
        }
    }

    #[test]
    fn residual_positive_for_zero_gradient() {
        let z = seeded_knowledge(2, 2, 9);
        let d = z.sigmoid();
        let shift = Matrix::zeros(2, 2);
        let res = governing_residual(&Matrix::zeros(2, 2), &z, &d, &shift).unwrap();
        assert!(res > 0.0);
    }

    #[test]
    fn residual_tracks_single_entry_perturbation() {
        let z = seeded_knowledge(2, 3, 10);
        let d = z.sigmoid();
        let shift = d.sub(&seeded_open01(2, 3, 11)).unwrap();
        let mut grad = entropy_gradient_z(&z, &d, &shift).unwrap();
        grad.set(0, 0, grad.get(0, 0) + 1e-3);
        let res = governing_residual(&grad, &z, &d, &shift).unwrap();
        assert!((res - 1e-3).abs() < 1e-9, "residual {res:e}");
    }

    #[test]
    fn interlayer_change_identities() {
        let z = seeded_knowledge(3, 2, 12);
        let dd = seeded_knowledge(3, 2, 13).scale(0.05);
        assert_eq!(
            interlayer_entropy_change(&z, &dd, &z, &dd, 3).unwrap(),
            0.0
        );

        let z2 = seeded_knowledge(3, 5, 14);
        let dd2 = seeded_knowledge(3, 5, 15).scale(0.05);
        let composed = layer_step_entropy(&z2, &dd2, 3).unwrap()
            - layer_step_entropy(&z, &dd, 3).unwrap();
        let direct = interlayer_entropy_change(&z, &dd, &z2, &dd2, 3).unwrap();
        assert!((direct - composed).abs() < 1e-12);
    }

    #[test]
    fn entropy_record_telescopes() {
        let deltas = [-0.5, -0.25, 0.125, -0.0625];
        let mut cumulative = 0.0;
        let mut records = Vec::new();
        for (i, &dh) in deltas.iter().enumerate() {
            cumulative += dh;
            records.push(EntropyRecord {
                layer: 0,
                step: i + 1,
                delta_h: dh,
                cumulative_h: cumulative,
            });
        }
        for (k, rec) in records.iter().enumerate() {
            let sum: f64 = deltas[..=k].iter().sum();
            assert_eq!(rec.cumulative_h, sum);
        }
    }
}

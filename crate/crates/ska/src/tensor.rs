//! Dense row-major matrices and the small set of operations everything else
//! is built on.
//!
//! Values are `f64` throughout; rows index samples, columns index neurons or
//! features. Every operation returns a freshly allocated matrix, and every
//! shape-checked operation verifies that its result is finite, so a `Matrix`
//! obtained through the public API never carries NaN or infinity.

use thiserror::Error;

/// Largest `f64` strictly below 1.0.
const ONE_BELOW: f64 = 1.0 - f64::EPSILON / 2.0;

/// Errors from shape-checked matrix operations.
#[derive(Debug, Clone, PartialEq, Eq, Error)]
pub enum TensorError {
    #[error("matrix product needs left.cols == right.rows; left is {left:?}, right is {right:?}")]
    InnerDimMismatch {
        left: (usize, usize),
        right: (usize, usize),
    },
    #[error("{op} needs equal shapes; left is {left:?}, right is {right:?}")]
    ShapeMismatch {
        op: &'static str,
        left: (usize, usize),
        right: (usize, usize),
    },
    #[error("data length {len} does not fill a {rows}x{cols} matrix")]
    LengthMismatch { rows: usize, cols: usize, len: usize },
    #[error("{op} produced or received a non-finite value at ({row}, {col})")]
    NonFinite {
        op: &'static str,
        row: usize,
        col: usize,
    },
}

/// Entry-wise combination selector for [`Matrix::elementwise`].
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum ElemOp {
    Add,
    Sub,
    Mul,
}

/// Dense 2-D real matrix in row-major order.
#[derive(Debug, Clone, PartialEq)]
pub struct Matrix {
    rows: usize,
    cols: usize,
    data: Vec<f64>,
}

impl Matrix {
    /// All-zero matrix.
    pub fn zeros(rows: usize, cols: usize) -> Self {
        Self {
            rows,
            cols,
            data: vec![0.0; rows * cols],
        }
    }

    /// Square identity matrix.
    pub fn identity(n: usize) -> Self {
        let mut m = Self::zeros(n, n);
        for i in 0..n {
            m.data[i * n + i] = 1.0;
        }
        m
    }

    /// Builds a matrix from row-major data, rejecting wrong lengths and
    /// non-finite entries.
    pub fn from_vec(rows: usize, cols: usize, data: Vec<f64>) -> Result<Self, TensorError> {
        if data.len() != rows * cols {
            return Err(TensorError::LengthMismatch {
                rows,
                cols,
                len: data.len(),
            });
        }
        let m = Self { rows, cols, data };
        m.ensure_finite("from_vec")?;
        Ok(m)
    }

    /// Builds a matrix from a slice of equally long rows.
    pub fn from_rows(rows: &[Vec<f64>]) -> Result<Self, TensorError> {
        let n_rows = rows.len();
        let n_cols = rows.first().map_or(0, Vec::len);
        let mut data = Vec::with_capacity(n_rows * n_cols);
        for row in rows {
            if row.len() != n_cols {
                return Err(TensorError::LengthMismatch {
                    rows: n_rows,
                    cols: n_cols,
                    len: row.len(),
                });
            }
            data.extend_from_slice(row);
        }
        Self::from_vec(n_rows, n_cols, data)
    }

    /// Internal constructor for values already known to be finite.
    pub(crate) fn from_raw(rows: usize, cols: usize, data: Vec<f64>) -> Self {
        debug_assert_eq!(data.len(), rows * cols);
        Self { rows, cols, data }
    }

    pub fn rows(&self) -> usize {
        self.rows
    }

    pub fn cols(&self) -> usize {
        self.cols
    }

    pub fn shape(&self) -> (usize, usize) {
        (self.rows, self.cols)
    }

    /// Row-major backing slice.
    pub fn data(&self) -> &[f64] {
        &self.data
    }

    /// Entry at (row, col). Panics when out of bounds.
    pub fn get(&self, row: usize, col: usize) -> f64 {
        assert!(row < self.rows && col < self.cols, "index out of bounds");
        self.data[row * self.cols + col]
    }

    /// Overwrites the entry at (row, col). Panics when out of bounds.
    pub fn set(&mut self, row: usize, col: usize, value: f64) {
        assert!(row < self.rows && col < self.cols, "index out of bounds");
        self.data[row * self.cols + col] = value;
    }

    pub(crate) fn map(&self, f: impl Fn(f64) -> f64) -> Self {
        Self::from_raw(self.rows, self.cols, self.data.iter().map(|&v| f(v)).collect())
    }

    pub(crate) fn max_abs(&self) -> f64 {
        self.data.iter().fold(0.0, |m, v| m.max(v.abs()))
    }

    /// Multiplies every entry by a constant.
    pub(crate) fn scale(&self, factor: f64) -> Self {
        self.map(|v| v * factor)
    }

    pub fn transpose(&self) -> Self {
        let mut out = Self::zeros(self.cols, self.rows);
        for r in 0..self.rows {
            for c in 0..self.cols {
                out.data[c * self.rows + r] = self.data[r * self.cols + c];
            }
        }
        out
    }

    fn ensure_finite(&self, op: &'static str) -> Result<(), TensorError> {
        for (i, v) in self.data.iter().enumerate() {
            if !v.is_finite() {
                return Err(TensorError::NonFinite {
                    op,
                    row: i / self.cols.max(1),
                    col: i % self.cols.max(1),
                });
            }
        }
        Ok(())
    }

    /// Standard matrix product.
    pub fn matmul(&self, rhs: &Matrix) -> Result<Matrix, TensorError> {
        if self.cols != rhs.rows {
            return Err(TensorError::InnerDimMismatch {
                left: self.shape(),
                right: rhs.shape(),
            });
        }
        let mut out = Matrix::zeros(self.rows, rhs.cols);
        for i in 0..self.rows {
            for k in 0..self.cols {
                let a = self.data[i * self.cols + k];
                if a == 0.0 {
                    continue;
                }
                let row_out = &mut out.data[i * rhs.cols..(i + 1) * rhs.cols];
                let row_rhs = &rhs.data[k * rhs.cols..(k + 1) * rhs.cols];
                for (o, b) in row_out.iter_mut().zip(row_rhs) {
                    *o += a * b;
                }
            }
        }
        out.ensure_finite("matmul")?;
        Ok(out)
    }

    /// Entry-wise combination of two equally shaped matrices.
    pub fn elementwise(&self, rhs: &Matrix, op: ElemOp) -> Result<Matrix, TensorError> {
        if self.shape() != rhs.shape() {
            return Err(TensorError::ShapeMismatch {
                op: match op {
                    ElemOp::Add => "add",
                    ElemOp::Sub => "sub",
                    ElemOp::Mul => "mul",
                },
                left: self.shape(),
                right: rhs.shape(),
            });
        }

        let data = self
            .data
            .iter()
            .zip(&rhs.data)
            .map(|(&a, &b)| match op {
                ElemOp::Add => a + b,
                ElemOp::Sub => a - b,
                ElemOp::Mul => a * b,
            })
            .collect();
        let out = Matrix::from_raw(self.rows, self.cols, data);
        out.ensure_finite("elementwise")?;
        Ok(out)
    }

    pub fn add(&self, rhs: &Matrix) -> Result<Matrix, TensorError> {
        self.elementwise(rhs, ElemOp::Add)
    }

    pub fn sub(&self, rhs: &Matrix) -> Result<Matrix, TensorError> {
        self.elementwise(rhs, ElemOp::Sub)
    }

    /// Entry-wise product.
    pub fn hadamard(&self, rhs: &Matrix) -> Result<Matrix, TensorError> {
        self.elementwise(rhs, ElemOp::Mul)
    }

    /// Entry-wise sigmoid. Output is strictly inside (0, 1) for every finite
    /// input; saturated values are pulled to the nearest representable
    /// interior point.
    pub fn sigmoid(&self) -> Matrix {
        self.map(sigmoid_scalar)
    }

    /// Square root of the sum of squared entries.
    pub fn frobenius_norm(&self) -> f64 {
        self.data.iter().map(|v| v * v).sum::<f64>().sqrt()
    }

    /// Sum over all entries of the entry-wise product, contracting both the
    /// sample and neuron axes into one scalar.
    pub fn flat_dot(&self, rhs: &Matrix) -> Result<f64, TensorError> {
        if self.shape() != rhs.shape() {
            return Err(TensorError::ShapeMismatch {
                op: "flat_dot",
                left: self.shape(),
                right: rhs.shape(),
            });
        }
        Ok(self.data.iter().zip(&rhs.data).map(|(&a, &b)| a * b).sum())
    }
}

/// Numerically stable scalar sigmoid, clamped to the open interval (0, 1).
pub fn sigmoid_scalar(x: f64) -> f64 {
    let s = if x >= 0.0 {
        1.0 / (1.0 + (-x).exp())
    } else {
        let e = x.exp();
        e / (1.0 + e)
    };
    s.clamp(f64::MIN_POSITIVE, ONE_BELOW)
}

//! Dense linear algebra and numeric primitives used by the models.
//!
//! Everything is `f64` and row-major. The routines here are deliberately
//! loop-based: the gradient code in [`crate::model`] mirrors these loops
//! term by term, and keeping both sides explicit makes the correspondence
//! auditable.

use crate::error::{Error, Result};

/// Step size for [`finite_diff_grad`] when callers have no reason to pick
/// their own.
pub const DEFAULT_FD_STEP: f64 = 1e-5;

/// Dense row-major matrix.
#[derive(Debug, Clone, PartialEq)]
pub struct Matrix {
    rows: usize,
    cols: usize,
    data: Vec<f64>,
}

impl Matrix {
    /// All-zero matrix of the given shape.
    pub fn zeros(rows: usize, cols: usize) -> Self {
        Matrix {
            rows,
            cols,
            data: vec![0.0; rows * cols],
        }
    }

    /// Build from a closure over (row, col).
    pub fn from_fn(rows: usize, cols: usize, mut f: impl FnMut(usize, usize) -> f64) -> Self {
        let mut m = Matrix::zeros(rows, cols);
        for r in 0..rows {
            for c in 0..cols {
                m.data[r * cols + c] = f(r, c);
            }
        }
        m
    }

    /// Build from explicit rows. All rows must have equal length.
    pub fn from_rows(rows: &[Vec<f64>]) -> Result<Self> {
        let nrows = rows.len();
        let ncols = rows.first().map_or(0, |r| r.len());
        let mut data = Vec::with_capacity(nrows * ncols);
        for (i, row) in rows.iter().enumerate() {
            if row.len() != ncols {
                return Err(Error::DimensionMismatch {
                    op: "Matrix::from_rows",
                    left: format!("row 0 has {ncols} columns"),
                    right: format!("row {i} has {} columns", row.len()),
                });
            }
            data.extend_from_slice(row);
        }
        Ok(Matrix {
            rows: nrows,
            cols: ncols,
            data,
        })
    }

    pub fn rows(&self) -> usize {
        self.rows
    }

    pub fn cols(&self) -> usize {
        self.cols
    }

    pub fn get(&self, r: usize, c: usize) -> f64 {
        self.data[r * self.cols + c]
    }

    pub fn set(&mut self, r: usize, c: usize, v: f64) {
        self.data[r * self.cols + c] = v;
    }

    pub fn row(&self, r: usize) -> &[f64] {
        &self.data[r * self.cols..(r + 1) * self.cols]
    }

    pub fn row_mut(&mut self, r: usize) -> &mut [f64] {
        &mut self.data[r * self.cols..(r + 1) * self.cols]
    }

    /// Flat row-major view of the contents.
    pub fn data(&self) -> &[f64] {
        &self.data
    }

    pub fn data_mut(&mut self) -> &mut [f64] {
        &mut self.data
    }

    /// `y = A x`.
    pub fn matvec(&self, x: &[f64]) -> Result<Vec<f64>> {
        if x.len() != self.cols {
            return Err(Error::DimensionMismatch {
                op: "matvec",
                left: format!("matrix {}x{}", self.rows, self.cols),
                right: format!("vector of length {}", x.len()),
            });
        }
        let mut y = vec![0.0; self.rows];
        for r in 0..self.rows {
            let row = self.row(r);
            let mut acc = 0.0;
            for c in 0..self.cols {
                acc += row[c] * x[c];
            }
            y[r] = acc;
        }
        Ok(y)
    }

    /// `y = A^T x`.
    pub fn matvec_transpose(&self, x: &[f64]) -> Result<Vec<f64>> {
        if x.len() != self.rows {
            return Err(Error::DimensionMismatch {
                op: "matvec_transpose",
                left: format!("matrix {}x{}", self.rows, self.cols),
                right: format!("vector of length {}", x.len()),
            });
        }
        let mut y = vec![0.0; self.cols];
        for r in 0..self.rows {
            let row = self.row(r);
            let xr = x[r];
            for c in 0..self.cols {
                y[c] += row[c] * xr;
            }
        }
        Ok(y)
    }

    /// Rank-one update `A += scale * u v^T`. Shapes are asserted because
    /// every call site passes vectors whose lengths are fixed by the model
    /// configuration.
    pub fn add_outer(&mut self, scale: f64, u: &[f64], v: &[f64]) {
        assert_eq!(u.len(), self.rows, "add_outer: u length vs rows");
        assert_eq!(v.len(), self.cols, "add_outer: v length vs cols");
        for r in 0..self.rows {
            let ur = scale * u[r];
            let row = self.row_mut(r);
            for c in 0..v.len() {
                row[c] += ur * v[c];
            }
        }
    }
}

/// Inner product with a shape check.
pub fn dot(a: &[f64], b: &[f64]) -> Result<f64> {
    if a.len() != b.len() {
        return Err(Error::DimensionMismatch {
            op: "dot",
            left: format!("vector of length {}", a.len()),
            right: format!("vector of length {}", b.len()),
        });
    }
    Ok(a.iter().zip(b).map(|(x, y)| x * y).sum())
}

/// Elementwise `max(0, x)`.
pub fn relu(x: &[f64]) -> Vec<f64> {
    x.iter().map(|&v| if v > 0.0 { v } else { 0.0 }).collect()
}

/// Subgradient mask for [`relu`]: 1 where the input is strictly positive,
/// 0 elsewhere. The derivative at exactly 0 is taken to be 0.
pub fn relu_grad_mask(x: &[f64]) -> Vec<f64> {
    x.iter().map(|&v| if v > 0.0 { 1.0 } else { 0.0 }).collect()
}

/// Numerically stable softmax.
///
/// The maximum is subtracted before exponentiation, and entries that
/// underflow to zero are clamped to the smallest positive subnormal so the
/// result is a strictly positive probability vector even for inputs with
/// magnitude around 1e3.
pub fn softmax(x: &[f64]) -> Result<Vec<f64>> {
    if x.is_empty() {
        return Err(Error::EmptyInput("softmax"));
    }
    let m = x.iter().cloned().fold(f64::NEG_INFINITY, f64::max);
    if !m.is_finite() {
        return Err(Error::NonFinite("softmax input".to_string()));
    }
    let mut e: Vec<f64> = x.iter().map(|&v| (v - m).exp()).collect();
    let sum: f64 = e.iter().sum();
    const TINY: f64 = f64::MIN_POSITIVE; // smallest positive normal; still > 0
    for v in e.iter_mut() {
        *v /= sum;
        if *v <= 0.0 {
            *v = TINY;
        }
    }
    Ok(e)
}

/// Cross-entropy loss of a logit vector against a class index, together
/// with the gradient with respect to the logits.
///
/// The loss is `logsumexp(logits) - logits[label]`, evaluated as
/// `m + ln_1p(rest)` around the maximum so that tiny losses keep full
/// relative precision. The gradient is `softmax(logits) - onehot(label)`.
pub fn cross_entropy_with_grad(logits: &[f64], label: usize) -> Result<(f64, Vec<f64>)> {
    if logits.is_empty() {
        return Err(Error::EmptyInput("cross_entropy_with_grad"));
    }
    if label >= logits.len() {
        return Err(Error::ClassOutOfRange {
            index: label,
            len: logits.len(),
        });
    }
    if logits.iter().any(|v| !v.is_finite()) {
        return Err(Error::NonFinite("cross_entropy logits".to_string()));
    }
    let mut arg = 0;
    for (i, &v) in logits.iter().enumerate() {
        if v > logits[arg] {
            arg = i;
        }
    }
    let m = logits[arg];
    let mut rest = 0.0;
    for (i, &v) in logits.iter().enumerate() {
        if i != arg {
            rest += (v - m).exp();
        }
    }
    // Grouping (m - label logit) before adding ln_1p keeps full relative
    // precision when the label is the maximum and the loss is tiny.
    let loss = (m - logits[label]) + rest.ln_1p();
    let mut grad = softmax(logits)?;
    grad[label] -= 1.0;
    Ok((loss, grad))
}

/// Central-difference gradient estimate of a scalar function.
///
/// Each coordinate is perturbed by `±h` in turn; the input slice is
/// restored between evaluations.
pub fn finite_diff_grad(f: &mut dyn FnMut(&[f64]) -> f64, x: &[f64], h: f64) -> Vec<f64> {
    let mut xs = x.to_vec();
    let mut g = vec![0.0; x.len()];
    for i in 0..x.len() {
        let orig = xs[i];
        xs[i] = orig + h;
        let fp = f(&xs);
        xs[i] = orig - h;
        let fm = f(&xs);
        xs[i] = orig;
        g[i] = (fp - fm) / (2.0 * h);
    }
    g
}

/// Relative error between an analytic and a numeric value, with an absolute
/// floor of 1e-3 in the denominator so near-zero gradients do not blow up
/// the ratio.
pub fn rel_error(analytic: f64, numeric: f64) -> f64 {
    let denom = analytic.abs().max(numeric.abs()).max(1e-3);
    (analytic - numeric).abs() / denom
}

/// Largest per-coordinate [`rel_error`] between two gradients.
pub fn max_rel_error(analytic: &[f64], numeric: &[f64]) -> Result<f64> {
    if analytic.len() != numeric.len() {
        return Err(Error::DimensionMismatch {
            op: "max_rel_error",
            left: format!("vector of length {}", analytic.len()),
            right: format!("vector of length {}", numeric.len()),
        });
    }
    Ok(analytic
        .iter()
        .zip(numeric)
        .map(|(&a, &n)| rel_error(a, n))
        .fold(0.0, f64::max))
}

/// Index of the largest entry; the first such index on ties.
pub fn argmax(xs: &[f64]) -> Option<usize> {
    if xs.is_empty() {
        return None;
    }
    let mut arg = 0;
    for (i, &v) in xs.iter().enumerate() {
        if v > xs[arg] {
            arg = i;
        }
    }
    Some(arg)
}

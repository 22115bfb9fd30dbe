//! Training objectives of sparse retrieval models, with analytic gradients.
//!
//! * in-batch negatives: softmax cross-entropy over each query's row of the
//!   query-by-document score matrix, the diagonal being the positive
//! * FLOPS regularizer: squared norm of the mean representation
//! * joint FLOPS: inner product of the query-side and document-side mean
//!   representations
//!
//! Representations are dense `N x V` matrices of non-negative activations.

use ndarray::{Array1, Array2, ArrayView2, Axis};
use thiserror::Error;

#[derive(Debug, Clone, PartialEq, Error)]
pub enum LossError {
    #[error("score matrix must be square, got {rows}x{cols}")]
    NonSquare { rows: usize, cols: usize },
    #[error("vocabulary dimensions differ: {left} vs {right}")]
    DimensionMismatch { left: usize, right: usize },
    #[error("batch shapes differ: {left:?} vs {right:?}")]
    ShapeMismatch {
        left: (usize, usize),
        right: (usize, usize),
    },
    #[error("matrix has no rows or no columns")]
    Empty,
    #[error("matrix contains a non-finite entry")]
    NonFinite,
    #[error("representations must be non-negative")]
    Negative,
}

/// Paired query and positive-document representations.
#[derive(Debug, Clone, PartialEq)]
pub struct Batch {
    q_reps: Array2<f64>,
    d_reps: Array2<f64>,
}

fn check_reps(m: ArrayView2<f64>) -> Result<(), LossError> {
    if m.nrows() == 0 || m.ncols() == 0 {
        return Err(LossError::Empty);
    }
    if m.iter().any(|x| !x.is_finite()) {
        return Err(LossError::NonFinite);
    }
    if m.iter().any(|&x| x < 0.0) {
        return Err(LossError::Negative);
    }
    Ok(())
}

impl Batch {
    pub fn new(q_reps: Array2<f64>, d_reps: Array2<f64>) -> Result<Self, LossError> {
        check_reps(q_reps.view())?;
        check_reps(d_reps.view())?;
        if q_reps.dim() != d_reps.dim() {
            return Err(LossError::ShapeMismatch {
                left: q_reps.dim(),
                right: d_reps.dim(),
            });
        }
        Ok(Self { q_reps, d_reps })
    }

    pub fn q_reps(&self) -> &Array2<f64> {
        &self.q_reps
    }

    pub fn d_reps(&self) -> &Array2<f64> {
        &self.d_reps
    }

    pub fn size(&self) -> usize {
        self.q_reps.nrows()
    }

    pub fn vocab_size(&self) -> usize {
        self.q_reps.ncols()
    }
}

/// `S[i][j] = q_i . d_j`
pub fn score_matrix(batch: &Batch) -> Array2<f64> {
    batch.q_reps.dot(&batch.d_reps.t())
}

fn check_square(scores: ArrayView2<f64>) -> Result<usize, LossError> {
    let (rows, cols) = scores.dim();
    if rows != cols {
        return Err(LossError::NonSquare { rows, cols });
    }
    if rows == 0 {
        return Err(LossError::Empty);
    }
    if scores.iter().any(|x| !x.is_finite()) {
        return Err(LossError::NonFinite);
    }
    Ok(rows)
}

fn log_sum_exp(row: impl Iterator<Item = f64> + Clone) -> f64 {
    let max = row.clone().fold(f64::NEG_INFINITY, f64::max);
    max + row.map(|x| (x - max).exp()).sum::<f64>().ln()
}

/// Mean over rows of `logsumexp(S[i]) - S[i][i]`.
pub fn in_batch_loss(scores: ArrayView2<f64>) -> Result<f64, LossError> {
    let n = check_square(scores)?;
    let total: f64 = scores
        .outer_iter()
        .enumerate()
        .map(|(i, row)| log_sum_exp(row.iter().copied()) - row[i])
        .sum();
    // each row term is >= 0 analytically; rounding can leave a tiny negative
    Ok((total / n as f64).max(0.0))
}

/// `(softmax(S[i]) - e_i) / N` per row.
pub fn in_batch_loss_grad(scores: ArrayView2<f64>) -> Result<Array2<f64>, LossError> {
    let n = check_square(scores)?;
    let mut grad = Array2::zeros((n, n));
    for (i, row) in scores.outer_iter().enumerate() {
        let lse = log_sum_exp(row.iter().copied());
        for (j, &s) in row.iter().enumerate() {
            let p = (s - lse).exp();
            grad[[i, j]] = (p - if i == j { 1.0 } else { 0.0 }) / n as f64;
        }
    }
    Ok(grad)
}

fn column_means(reps: ArrayView2<f64>) -> Result<Array1<f64>, LossError> {
    if reps.nrows() == 0 || reps.ncols() == 0 {
        return Err(LossError::Empty);
    }
    Ok(reps.mean_axis(Axis(0)).expect("non-empty"))
}

/// `w . w` where `w` is the column mean of `reps`.
pub fn flops_loss(reps: ArrayView2<f64>) -> Result<f64, LossError> {
    let mean = column_means(reps)?;
    Ok(mean.dot(&mean))
}

/// `d/d reps[i][j] = 2 w_j / N`
pub fn flops_loss_grad(reps: ArrayView2<f64>) -> Result<Array2<f64>, LossError> {
    let mean = column_means(reps)?;
    let n = reps.nrows() as f64;
    let row = mean.mapv(|w| 2.0 * w / n);
    Ok(row.broadcast(reps.dim()).expect("same width").to_owned())
}

fn check_same_vocab(q: ArrayView2<f64>, d: ArrayView2<f64>) -> Result<(), LossError> {
    if q.ncols() != d.ncols() {
        return Err(LossError::DimensionMismatch {
            left: q.ncols(),
            right: d.ncols(),
        });
    }
    Ok(())
}

/// `w_Q . w_D` with per-side column means; the sides may have different row counts.
pub fn joint_flops_loss(
    q_reps: ArrayView2<f64>,
    d_reps: ArrayView2<f64>,
) -> Result<f64, LossError> {
    check_same_vocab(q_reps, d_reps)?;
    Ok(column_means(q_reps)?.dot(&column_means(d_reps)?))
}

/// Gradients with respect to the query side and the document side.
pub fn joint_flops_grad(
    q_reps: ArrayView2<f64>,
    d_reps: ArrayView2<f64>,
) -> Result<(Array2<f64>, Array2<f64>), LossError> {
    check_same_vocab(q_reps, d_reps)?;
    let q_mean = column_means(q_reps)?;
    let d_mean = column_means(d_reps)?;
    let dq = (&d_mean / q_reps.nrows() as f64)
        .broadcast(q_reps.dim())
        .expect("same width")
        .to_owned();
    let dd = (&q_mean / d_reps.nrows() as f64)
        .broadcast(d_reps.dim())
        .expect("same width")
        .to_owned();
    Ok((dq, dd))
}

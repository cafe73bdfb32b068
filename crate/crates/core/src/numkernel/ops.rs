//! Elementwise activations, dropout and Gaussian sampling, each with its
//! backward rule where one exists.

use super::{DenseMatrix, KernelError, Rng};

#[inline]
pub fn relu_scalar(x: f64) -> f64 {
    x.max(0.0)
}

/// Sign-branched logistic function; never evaluates `exp` of a positive argument.
#[inline]
pub fn sigmoid_scalar(x: f64) -> f64 {
    if x >= 0.0 {
        1.0 / (1.0 + (-x).exp())
    } else {
        let e = x.exp();
        e / (1.0 + e)
    }
}

/// `ln σ(x)`, stable for large `|x|`.
#[inline]
pub fn log_sigmoid(x: f64) -> f64 {
    if x >= 0.0 {
        -(-x).exp().ln_1p()
    } else {
        x - x.exp().ln_1p()
    }
}

pub fn relu(m: &DenseMatrix) -> DenseMatrix {
    m.map(relu_scalar)
}

/// Routes `grad` through ReLU given the pre-activation input.
pub fn relu_backward(grad: &DenseMatrix, pre: &DenseMatrix) -> Result<DenseMatrix, KernelError> {
    grad.zip_map(pre, "relu_backward", |g, x| if x > 0.0 { g } else { 0.0 })
}

pub fn sigmoid(m: &DenseMatrix) -> DenseMatrix {
    m.map(sigmoid_scalar)
}

/// Gradient through the sigmoid given its output `s`.
pub fn sigmoid_backward(grad: &DenseMatrix, out: &DenseMatrix) -> Result<DenseMatrix, KernelError> {
    grad.zip_map(out, "sigmoid_backward", |g, s| g * s * (1.0 - s))
}

/// Inverted-dropout mask: each entry is `1/keep_p` with probability `keep_p`, else 0.
pub fn dropout_mask(
    rows: usize,
    cols: usize,
    keep_p: f64,
    rng: &mut Rng,
) -> Result<DenseMatrix, KernelError> {
    if !(keep_p > 0.0 && keep_p <= 1.0) {
        return Err(KernelError::InvalidKeepProb(keep_p));
    }
    if keep_p == 1.0 {
        return Ok(DenseMatrix::filled(rows, cols, 1.0));
    }
    let scale = 1.0 / keep_p;
    Ok(DenseMatrix::from_fn(rows, cols, |_, _| {
        if rng.uniform() < keep_p {
            scale
        } else {
            0.0
        }
    }))
}

/// Applies inverted dropout; returns the output and the mask needed by the
/// backward pass (`grad_in = grad_out ⊙ mask`). `keep_p = 1` is the identity
/// and draws nothing from `rng`.
pub fn dropout(
    m: &DenseMatrix,
    keep_p: f64,
    rng: &mut Rng,
) -> Result<(DenseMatrix, DenseMatrix), KernelError> {
    let mask = dropout_mask(m.rows(), m.cols(), keep_p, rng)?;
    Ok((m.hadamard(&mask)?, mask))
}

pub fn sample_standard_normal(rows: usize, cols: usize, rng: &mut Rng) -> DenseMatrix {
    DenseMatrix::from_fn(rows, cols, |_, _| rng.standard_normal())
}

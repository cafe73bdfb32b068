use serde::{Deserialize, Serialize};

use super::{DenseMatrix, KernelError};

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct AdamConfig {
    pub step_size: f64,
    pub beta1: f64,
    pub beta2: f64,
    pub eps: f64,
}

impl Default for AdamConfig {
    fn default() -> Self {
        Self {
            step_size: 0.05,
            beta1: 0.9,
            beta2: 0.999,
            eps: 1e-8,
        }
    }
}

/// Moment accumulators for one parameter matrix.
#[derive(Debug, Clone, PartialEq)]
pub struct AdamState {
    pub config: AdamConfig,
    m: DenseMatrix,
    v: DenseMatrix,
    t: u64,
}

impl AdamState {
    pub fn new(rows: usize, cols: usize, config: AdamConfig) -> Self {
        Self {
            config,
            m: DenseMatrix::zeros(rows, cols),
            v: DenseMatrix::zeros(rows, cols),
            t: 0,
        }
    }

    pub fn step_count(&self) -> u64 {
        self.t
    }

    pub fn first_moment(&self) -> &DenseMatrix {
        &self.m
    }

    pub fn second_moment(&self) -> &DenseMatrix {
        &self.v
    }
}

/// One bias-corrected Adam update of `params` in place. On error neither
/// `params` nor `state` is modified.
pub fn adam_step(
    params: &mut DenseMatrix,
    grads: &DenseMatrix,
    state: &mut AdamState,
) -> Result<(), KernelError> {
    if params.shape() != grads.shape() || params.shape() != state.m.shape() {
        return Err(KernelError::ShapeMismatch {
            op: "adam_step",
            left: params.shape(),
            right: grads.shape(),
        });
    }
    if !grads.is_finite() {
        return Err(KernelError::NonFiniteGradient);
    }
    let AdamConfig {
        step_size,
        beta1,
        beta2,
        eps,
    } = state.config;
    state.t += 1;
    let t = state.t as i32;
    let bc1 = 1.0 - beta1.powi(t);
    let bc2 = 1.0 - beta2.powi(t);
    let m = state.m.data_mut();
    let v = state.v.data_mut();
    for (((p, &g), m), v) in params
        .data_mut()
        .iter_mut()
        .zip(grads.data())
        .zip(m.iter_mut())
        .zip(v.iter_mut())
    {
        *m = beta1 * *m + (1.0 - beta1) * g;
        *v = beta2 * *v + (1.0 - beta2) * g * g;
        let m_hat = *m / bc1;
        let v_hat = *v / bc2;
        *p -= step_size * m_hat / (v_hat.sqrt() + eps);
    }
    Ok(())
}

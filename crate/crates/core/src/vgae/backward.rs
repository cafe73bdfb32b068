use crate::graph::NormalizedAdjacency;
use crate::numkernel::{relu_backward, DenseMatrix};

use super::{
    encode_with_noise, kl_gaussian, reconstruction_with_grad, Forward, LatentSample, LossBreakdown,
    LossWeights, ModelError, Noise, ReconTargets, VgaeParams,
};

#[derive(Debug, Clone, PartialEq)]
pub struct Gradients {
    pub w0: DenseMatrix,
    pub w1_mu: DenseMatrix,
    pub w1_sigma: DenseMatrix,
}

impl Gradients {
    pub fn is_finite(&self) -> bool {
        self.w0.is_finite() && self.w1_mu.is_finite() && self.w1_sigma.is_finite()
    }
}

/// Reverse pass from `dL/dz` (reconstruction only) to the three weight
/// matrices. The KL term's derivatives are added at µ and log σ here.
pub fn backward(
    adj: &NormalizedAdjacency,
    params: &VgaeParams,
    fwd: &Forward,
    grad_z: &DenseMatrix,
    kl_weight: f64,
) -> Result<Gradients, ModelError> {
    let LatentSample {
        mu,
        log_sigma,
        epsilon,
        ..
    } = &fwd.latent;

    // z = µ + exp(log σ) ⊙ ε ; KL = ½ Σ (e^{2 log σ} + µ² − 1 − 2 log σ)
    let grad_mu = {
        let mut g = grad_z.clone();
        g.axpy(kl_weight, mu)?;
        g
    };
    let mut grad_log_sigma = DenseMatrix::zeros(log_sigma.rows(), log_sigma.cols());
    for (((out, &gz), &ls), &e) in grad_log_sigma
        .data_mut()
        .iter_mut()
        .zip(grad_z.data())
        .zip(log_sigma.data())
        .zip(epsilon.data())
    {
        let sigma = ls.exp();
        *out = gz * sigma * e + kl_weight * (sigma * sigma - 1.0);
    }

    // µ = M·W1µ, log σ = M·W1σ with M = Ã·H
    let w1_mu = fwd.aggregated.matmul_tn(&grad_mu)?;
    let w1_sigma = fwd.aggregated.matmul_tn(&grad_log_sigma)?;
    let mut grad_agg = grad_mu.matmul_nt(&params.w1_mu)?;
    grad_agg.axpy(1.0, &grad_log_sigma.matmul_nt(&params.w1_sigma)?)?;

    let a = adj.matrix();
    let mut grad_hidden = a.spmm_backward(&grad_agg)?;
    if let Some(mask) = &fwd.dropout_mask {
        grad_hidden = grad_hidden.hadamard(mask)?;
    }
    let grad_pre = relu_backward(&grad_hidden, &fwd.pre_hidden)?;
    let w0 = a.spmm_backward(&grad_pre)?;
    Ok(Gradients {
        w0,
        w1_mu,
        w1_sigma,
    })
}

/// Forward pass, loss and exact gradients for fixed noise.
pub fn loss_and_gradients(
    adj: &NormalizedAdjacency,
    params: &VgaeParams,
    targets: &ReconTargets,
    weights: &LossWeights,
    noise: &Noise,
) -> Result<(LossBreakdown, Gradients, Forward), ModelError> {
    let fwd = encode_with_noise(adj, params, noise)?;
    let (reconstruction, grad_z) =
        reconstruction_with_grad(&fwd.latent.z, targets, weights.pos_weight, true)?;
    let grad_z = grad_z.expect("gradient requested");
    let kl = kl_gaussian(&fwd.latent.mu, &fwd.latent.log_sigma)?;
    let grads = backward(adj, params, &fwd, &grad_z, weights.kl_weight)?;
    let breakdown = LossBreakdown {
        total: reconstruction + weights.kl_weight * kl,
        reconstruction,
        kl,
    };
    Ok((breakdown, grads, fwd))
}

//! Variational graph auto-encoder with a two-layer GCN encoder and an
//! inner-product decoder, plus the constrained objective that reconstructs
//! only the disease × gene block of the adjacency.

mod backward;
mod encoder;
mod loss;
mod train;

pub use backward::{backward, loss_and_gradients, Gradients};
pub use encoder::{
    decode_logits, decode_probabilities, encode, encode_with_noise, kl_gaussian, reparametrize,
    reparametrize_with, Forward, LatentSample, Noise,
};
pub use loss::{
    loss, loss_cvgae, loss_vgae, reconstruction_with_grad, LossBreakdown, LossWeights, ReconTargets,
};
pub use train::{embed, train, EpochRecord, TrainOutcome};

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::graph::GraphError;
use crate::numkernel::{AdamConfig, DenseMatrix, KernelError, Rng};

#[derive(Debug, Error)]
pub enum ModelError {
    #[error(transparent)]
    Kernel(#[from] KernelError),
    #[error("pair ({0}, {1}) is outside the embedding table")]
    IndexOutOfRange(usize, usize),
    #[error("constrained objective needs a heterogeneous graph and a bipartite split")]
    PolicyMismatch,
    #[error("invalid model configuration: {0}")]
    InvalidConfig(String),
    #[error("numerical failure: {0}")]
    NumericalFailure(String),
    #[error(transparent)]
    Graph(#[from] GraphError),
}

/// Which reconstruction target the loss covers.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Objective {
    /// Every entry of the self-looped N × N adjacency.
    Vgae,
    /// Only the disease × gene block.
    Cvgae,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum PosWeight {
    /// `(#targets − #positives) / #positives`.
    Auto,
    Fixed(f64),
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct VgaeConfig {
    pub hidden_dim: usize,
    pub latent_dim: usize,
    pub keep_prob: f64,
    pub step_size: f64,
    /// Full-batch epochs. Very short schedules (e.g. 2) are allowed.
    pub epochs: usize,
    /// Multiplier on the KL term; `None` means `1/N`.
    pub kl_weight: Option<f64>,
    pub pos_weight: PosWeight,
    pub adam_beta1: f64,
    pub adam_beta2: f64,
    pub adam_eps: f64,
    pub seed: u64,
}

impl Default for VgaeConfig {
    fn default() -> Self {
        Self {
            hidden_dim: 200,
            latent_dim: 20,
            keep_prob: 0.5,
            step_size: 0.05,
            epochs: 200,
            kl_weight: None,
            pos_weight: PosWeight::Auto,
            adam_beta1: 0.9,
            adam_beta2: 0.999,
            adam_eps: 1e-8,
            seed: 0,
        }
    }
}

impl VgaeConfig {
    pub fn validate(&self) -> Result<(), ModelError> {
        let bad = |m: &str| Err(ModelError::InvalidConfig(m.to_owned()));
        if self.hidden_dim == 0 || self.latent_dim == 0 {
            return bad("dimensions must be at least 1");
        }
        if !(self.keep_prob > 0.0 && self.keep_prob <= 1.0) {
            return bad("keep_prob must lie in (0, 1]");
        }
        if !(self.step_size > 0.0 && self.step_size.is_finite()) {
            return bad("step_size must be positive");
        }
        if let Some(w) = self.kl_weight {
            if !(w >= 0.0 && w.is_finite()) {
                return bad("kl_weight must be non-negative");
            }
        }
        if let PosWeight::Fixed(w) = self.pos_weight {
            if !(w > 0.0 && w.is_finite()) {
                return bad("fixed pos_weight must be positive");
            }
        }
        Ok(())
    }

    pub fn adam(&self) -> AdamConfig {
        AdamConfig {
            step_size: self.step_size,
            beta1: self.adam_beta1,
            beta2: self.adam_beta2,
            eps: self.adam_eps,
        }
    }

    /// Effective KL multiplier for a graph of `num_nodes` nodes.
    pub fn effective_kl_weight(&self, num_nodes: usize) -> f64 {
        self.kl_weight.unwrap_or(1.0 / num_nodes as f64)
    }
}

/// Encoder weights. With identity node features `w0` has one row per node.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct VgaeParams {
    pub w0: DenseMatrix,
    pub w1_mu: DenseMatrix,
    pub w1_sigma: DenseMatrix,
}

fn glorot(rows: usize, cols: usize, rng: &mut Rng) -> DenseMatrix {
    let limit = (6.0 / (rows + cols) as f64).sqrt();
    DenseMatrix::from_fn(rows, cols, |_, _| rng.uniform_range(-limit, limit))
}

impl VgaeParams {
    /// Glorot-uniform initialization; draws `w0`, then `w1_mu`, then `w1_sigma`.
    pub fn init(num_nodes: usize, hidden: usize, latent: usize, rng: &mut Rng) -> Self {
        let w0 = glorot(num_nodes, hidden, rng);
        let w1_mu = glorot(hidden, latent, rng);
        let w1_sigma = glorot(hidden, latent, rng);
        Self {
            w0,
            w1_mu,
            w1_sigma,
        }
    }

    pub fn zeros(num_nodes: usize, hidden: usize, latent: usize) -> Self {
        Self {
            w0: DenseMatrix::zeros(num_nodes, hidden),
            w1_mu: DenseMatrix::zeros(hidden, latent),
            w1_sigma: DenseMatrix::zeros(hidden, latent),
        }
    }

    pub fn num_nodes(&self) -> usize {
        self.w0.rows()
    }

    pub fn hidden_dim(&self) -> usize {
        self.w0.cols()
    }

    pub fn latent_dim(&self) -> usize {
        self.w1_mu.cols()
    }

    pub fn is_finite(&self) -> bool {
        self.w0.is_finite() && self.w1_mu.is_finite() && self.w1_sigma.is_finite()
    }
}

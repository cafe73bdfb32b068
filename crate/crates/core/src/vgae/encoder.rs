use crate::graph::{NodeId, NormalizedAdjacency};
use crate::numkernel::{
    dot, dropout_mask, relu, sample_standard_normal, sigmoid_scalar, DenseMatrix, KernelError, Rng,
};

use super::{ModelError, VgaeConfig, VgaeParams};

/// Per-node Gaussian posterior and the sample drawn from it.
#[derive(Debug, Clone, PartialEq)]
pub struct LatentSample {
    pub mu: DenseMatrix,
    pub log_sigma: DenseMatrix,
    pub z: DenseMatrix,
    pub epsilon: DenseMatrix,
}

/// Stochastic inputs of one forward pass. `None` disables the corresponding
/// source: no dropout, and `z = mu`.
#[derive(Debug, Clone, Default, PartialEq)]
pub struct Noise {
    pub dropout_mask: Option<DenseMatrix>,
    pub epsilon: Option<DenseMatrix>,
}

impl Noise {
    /// Dropout mask over the hidden layer, then the reparametrization noise.
    pub fn draw(num_nodes: usize, config: &VgaeConfig, rng: &mut Rng) -> Result<Self, ModelError> {
        let dropout_mask = if config.keep_prob < 1.0 {
            Some(dropout_mask(
                num_nodes,
                config.hidden_dim,
                config.keep_prob,
                rng,
            )?)
        } else {
            None
        };
        let epsilon = sample_standard_normal(num_nodes, config.latent_dim, rng);
        Ok(Self {
            dropout_mask,
            epsilon: Some(epsilon),
        })
    }
}

/// Intermediates of the encoder kept for the backward pass.
#[derive(Debug, Clone)]
pub struct Forward {
    /// `Ã·W0` (identity features reduce `Ã·X·W0` to this).
    pub pre_hidden: DenseMatrix,
    /// ReLU output after dropout.
    pub hidden: DenseMatrix,
    pub dropout_mask: Option<DenseMatrix>,
    /// `Ã·hidden`, shared by the µ and log σ heads.
    pub aggregated: DenseMatrix,
    pub latent: LatentSample,
}

/// `z = mu + exp(log_sigma) ⊙ epsilon`.
pub fn reparametrize_with(
    mu: &DenseMatrix,
    log_sigma: &DenseMatrix,
    epsilon: &DenseMatrix,
) -> Result<DenseMatrix, ModelError> {
    if mu.shape() != log_sigma.shape() || mu.shape() != epsilon.shape() {
        return Err(KernelError::ShapeMismatch {
            op: "reparametrize",
            left: mu.shape(),
            right: log_sigma.shape(),
        }
        .into());
    }
    let mut z = mu.clone();
    for ((zv, &ls), &e) in z
        .data_mut()
        .iter_mut()
        .zip(log_sigma.data())
        .zip(epsilon.data())
    {
        *zv += ls.exp() * e;
    }
    Ok(z)
}

/// Draws `epsilon` and returns `(z, epsilon)`.
pub fn reparametrize(
    mu: &DenseMatrix,
    log_sigma: &DenseMatrix,
    rng: &mut Rng,
) -> Result<(DenseMatrix, DenseMatrix), ModelError> {
    if mu.shape() != log_sigma.shape() {
        return Err(KernelError::ShapeMismatch {
            op: "reparametrize",
            left: mu.shape(),
            right: log_sigma.shape(),
        }
        .into());
    }
    let eps = sample_standard_normal(mu.rows(), mu.cols(), rng);
    let z = reparametrize_with(mu, log_sigma, &eps)?;
    Ok((z, eps))
}

/// Encoder forward pass with explicit noise.
pub fn encode_with_noise(
    adj: &NormalizedAdjacency,
    params: &VgaeParams,
    noise: &Noise,
) -> Result<Forward, ModelError> {
    let a = adj.matrix();
    let pre_hidden = a.spmm(&params.w0)?;
    let activated = relu(&pre_hidden);
    let hidden = match &noise.dropout_mask {
        Some(mask) => activated.hadamard(mask)?,
        None => activated,
    };
    let aggregated = a.spmm(&hidden)?;
    let mu = aggregated.matmul(&params.w1_mu)?;
    let log_sigma = aggregated.matmul(&params.w1_sigma)?;
    let (z, epsilon) = match &noise.epsilon {
        Some(eps) => (reparametrize_with(&mu, &log_sigma, eps)?, eps.clone()),
        None => (mu.clone(), DenseMatrix::zeros(mu.rows(), mu.cols())),
    };
    Ok(Forward {
        pre_hidden,
        hidden,
        dropout_mask: noise.dropout_mask.clone(),
        aggregated,
        latent: LatentSample {
            mu,
            log_sigma,
            z,
            epsilon,
        },
    })
}

/// Two-layer GCN encoder. In train mode hidden-layer dropout and the
/// reparametrized sample are drawn from `rng`; otherwise `z = mu` and `rng`
/// is untouched.
pub fn encode(
    adj: &NormalizedAdjacency,
    params: &VgaeParams,
    config: &VgaeConfig,
    rng: &mut Rng,
    train_mode: bool,
) -> Result<LatentSample, ModelError> {
    let noise = if train_mode {
        Noise::draw(adj.num_nodes(), config, rng)?
    } else {
        Noise::default()
    };
    Ok(encode_with_noise(adj, params, &noise)?.latent)
}

/// Inner-product logits `z_i · z_j` for the requested pairs.
pub fn decode_logits(z: &DenseMatrix, pairs: &[(NodeId, NodeId)]) -> Result<Vec<f64>, ModelError> {
    pairs
        .iter()
        .map(|&(i, j)| {
            let (i, j) = (i.index(), j.index());
            if i >= z.rows() || j >= z.rows() {
                return Err(ModelError::IndexOutOfRange(i, j));
            }
            Ok(dot(z.row(i), z.row(j)))
        })
        .collect()
}

pub fn decode_probabilities(
    z: &DenseMatrix,
    pairs: &[(NodeId, NodeId)],
) -> Result<Vec<f64>, ModelError> {
    Ok(decode_logits(z, pairs)?
        .into_iter()
        .map(sigmoid_scalar)
        .collect())
}

/// `KL(q ‖ N(0, I))` summed over nodes and latent dimensions.
pub fn kl_gaussian(mu: &DenseMatrix, log_sigma: &DenseMatrix) -> Result<f64, ModelError> {
    if mu.shape() != log_sigma.shape() {
        return Err(KernelError::ShapeMismatch {
            op: "kl_gaussian",
            left: mu.shape(),
            right: log_sigma.shape(),
        }
        .into());
    }
    Ok(mu
        .data()
        .iter()
        .zip(log_sigma.data())
        .map(|(&m, &ls)| 0.5 * ((2.0 * ls).exp() + m * m - 1.0 - 2.0 * ls))
        .sum())
}

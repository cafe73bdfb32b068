use crate::graph::{add_self_loops, bipartite_index, BipartiteIndex, Graph};
use crate::numkernel::{dot, log_sigmoid, sigmoid_scalar, DenseMatrix, KernelError};

use super::{kl_gaussian, LatentSample, ModelError, PosWeight, VgaeConfig};

/// Binary targets the decoder is asked to reproduce.
#[derive(Debug, Clone)]
pub enum ReconTargets {
    /// All N² ordered pairs of the self-looped adjacency.
    Full { adjacency: Graph },
    /// The disease × gene block only, one entry per (disease, gene) pair.
    Bipartite { graph: Graph, index: BipartiteIndex },
}

impl ReconTargets {
    pub fn full(graph: &Graph) -> Self {
        ReconTargets::Full {
            adjacency: add_self_loops(graph),
        }
    }

    pub fn bipartite(graph: &Graph) -> Result<Self, ModelError> {
        let index = bipartite_index(graph).map_err(|_| ModelError::PolicyMismatch)?;
        Ok(ReconTargets::Bipartite {
            graph: graph.clone(),
            index,
        })
    }

    pub fn num_nodes(&self) -> usize {
        match self {
            ReconTargets::Full { adjacency } => adjacency.num_nodes(),
            ReconTargets::Bipartite { graph, .. } => graph.num_nodes(),
        }
    }

    pub fn num_targets(&self) -> usize {
        match self {
            ReconTargets::Full { adjacency } => adjacency.num_nodes().pow(2),
            ReconTargets::Bipartite { index, .. } => {
                let (a, b) = index.shape();
                a * b
            }
        }
    }

    pub fn num_positive(&self) -> usize {
        match self {
            ReconTargets::Full { adjacency } => adjacency.adjacency().nnz(),
            ReconTargets::Bipartite { graph, .. } => graph
                .non_loop_edges()
                .filter(|&(a, b)| graph.is_cross_type(a, b))
                .count(),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct LossWeights {
    pub pos_weight: f64,
    pub kl_weight: f64,
}

impl LossWeights {
    /// Auto positive weight is the negative:positive ratio of the targets,
    /// or 1 when there are no positives.
    pub fn resolve(config: &VgaeConfig, targets: &ReconTargets) -> Self {
        let pos_weight = match config.pos_weight {
            PosWeight::Fixed(w) => w,
            PosWeight::Auto => {
                let total = targets.num_targets();
                let pos = targets.num_positive();
                if pos == 0 {
                    1.0
                } else {
                    (total - pos) as f64 / pos as f64
                }
            }
        };
        Self {
            pos_weight,
            kl_weight: config.effective_kl_weight(targets.num_nodes()),
        }
    }
}

/// Negative ELBO split into its parts; `total = reconstruction + kl_weight·kl`.
#[derive(Debug, Clone, Copy, PartialEq, serde::Serialize, serde::Deserialize)]
pub struct LossBreakdown {
    pub total: f64,
    pub reconstruction: f64,
    pub kl: f64,
}

/// Weighted BCE of one logit and its derivative with respect to the logit.
#[inline]
fn bce(x: f64, positive: bool, pos_weight: f64) -> (f64, f64) {
    if positive {
        (
            -pos_weight * log_sigmoid(x),
            pos_weight * (sigmoid_scalar(x) - 1.0),
        )
    } else {
        (-log_sigmoid(-x), sigmoid_scalar(x))
    }
}

#[inline]
fn add_scaled(dst: &mut [f64], alpha: f64, src: &[f64]) {
    for (d, &s) in dst.iter_mut().zip(src) {
        *d += alpha * s;
    }
}

/// Mean weighted BCE over the targets and, when `want_grad`, its gradient
/// with respect to `z`. Logits are streamed pair by pair; the N × N logit
/// matrix is never materialized.
pub fn reconstruction_with_grad(
    z: &DenseMatrix,
    targets: &ReconTargets,
    pos_weight: f64,
    want_grad: bool,
) -> Result<(f64, Option<DenseMatrix>), ModelError> {
    let n = targets.num_nodes();
    if z.rows() != n {
        return Err(KernelError::ShapeMismatch {
            op: "reconstruction",
            left: z.shape(),
            right: (n, n),
        }
        .into());
    }
    let total = targets.num_targets();
    if total == 0 {
        return Ok((
            0.0,
            want_grad.then(|| DenseMatrix::zeros(z.rows(), z.cols())),
        ));
    }
    let mut grad = want_grad.then(|| DenseMatrix::zeros(z.rows(), z.cols()));
    let mut sum = 0.0;
    match targets {
        ReconTargets::Full { adjacency } => {
            // symmetric: visit i ≤ j and count off-diagonal pairs twice
            for i in 0..n {
                let nbrs = adjacency.neighbors(i);
                let mut cursor = nbrs.partition_point(|&c| c < i);
                for j in i..n {
                    let positive = cursor < nbrs.len() && nbrs[cursor] == j;
                    if positive {
                        cursor += 1;
                    }
                    let x = dot(z.row(i), z.row(j));
                    let (l, g) = bce(x, positive, pos_weight);
                    if i == j {
                        sum += l;
                    } else {
                        sum += 2.0 * l;
                    }
                    if let Some(grad) = grad.as_mut() {
                        if i == j {
                            let zi = z.row(i).to_vec();
                            add_scaled(grad.row_mut(i), 2.0 * g, &zi);
                        } else {
                            add_scaled(grad.row_mut(i), 2.0 * g, z.row(j));
                            add_scaled(grad.row_mut(j), 2.0 * g, z.row(i));
                        }
                    }
                }
            }
        }
        ReconTargets::Bipartite { graph, index } => {
            for &d in &index.disease_ids {
                let di = d.index();
                let nbrs = graph.neighbors(di);
                for &g_id in &index.gene_ids {
                    let gi = g_id.index();
                    let positive = nbrs.binary_search(&gi).is_ok();
                    let x = dot(z.row(di), z.row(gi));
                    let (l, g) = bce(x, positive, pos_weight);
                    sum += l;
                    if let Some(grad) = grad.as_mut() {
                        add_scaled(grad.row_mut(di), g, z.row(gi));
                        add_scaled(grad.row_mut(gi), g, z.row(di));
                    }
                }
            }
        }
    }
    let scale = 1.0 / total as f64;
    if let Some(g) = grad.as_mut() {
        g.data_mut().iter_mut().for_each(|v| *v *= scale);
    }
    Ok((sum * scale, grad))
}

/// Loss of a latent sample against the given targets.
pub fn loss(
    sample: &LatentSample,
    targets: &ReconTargets,
    weights: &LossWeights,
) -> Result<LossBreakdown, ModelError> {
    let (reconstruction, _) =
        reconstruction_with_grad(&sample.z, targets, weights.pos_weight, false)?;
    let kl = kl_gaussian(&sample.mu, &sample.log_sigma)?;
    Ok(LossBreakdown {
        total: reconstruction + weights.kl_weight * kl,
        reconstruction,
        kl,
    })
}

/// Negative ELBO reconstructing the full self-looped adjacency of `graph`.
pub fn loss_vgae(
    sample: &LatentSample,
    graph: &Graph,
    config: &VgaeConfig,
) -> Result<LossBreakdown, ModelError> {
    let targets = ReconTargets::full(graph);
    loss(sample, &targets, &LossWeights::resolve(config, &targets))
}

/// Negative ELBO reconstructing only the disease × gene block of `graph`.
pub fn loss_cvgae(
    sample: &LatentSample,
    graph: &Graph,
    config: &VgaeConfig,
) -> Result<LossBreakdown, ModelError> {
    let targets = ReconTargets::bipartite(graph)?;
    loss(sample, &targets, &LossWeights::resolve(config, &targets))
}

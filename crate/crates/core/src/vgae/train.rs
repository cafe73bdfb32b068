use serde::{Deserialize, Serialize};

use crate::graph::{normalize_symmetric, Graph, NormalizedAdjacency};
use crate::metrics::{average_precision, roc_auc, ScoredPairs};
use crate::numkernel::{adam_step, AdamState, DenseMatrix, Rng};
use crate::split::{EdgeSplit, SplitPolicy};

use super::{
    decode_logits, encode_with_noise, loss_and_gradients, LossBreakdown, LossWeights, ModelError,
    Noise, Objective, ReconTargets, VgaeConfig, VgaeParams,
};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EpochRecord {
    pub epoch: usize,
    pub loss: LossBreakdown,
    pub val_auc: Option<f64>,
    pub val_ap: Option<f64>,
}

#[derive(Debug, Clone)]
pub struct TrainOutcome {
    /// Parameters from the epoch with the best validation AUC (final epoch
    /// when there is no validation set; initial parameters when `epochs = 0`).
    pub params: VgaeParams,
    pub history: Vec<EpochRecord>,
    /// 1-based epoch the returned parameters come from.
    pub best_epoch: Option<usize>,
    pub weights: LossWeights,
}

/// Deterministic embedding: µ from the encoder with dropout and sampling off.
pub fn embed(adj: &NormalizedAdjacency, params: &VgaeParams) -> Result<DenseMatrix, ModelError> {
    Ok(encode_with_noise(adj, params, &Noise::default())?.latent.mu)
}

fn validation_scores(
    mu: &DenseMatrix,
    split: &EdgeSplit,
) -> Result<Option<(f64, f64)>, ModelError> {
    if split.val_pos.is_empty() || split.val_neg.is_empty() {
        return Ok(None);
    }
    let pairs = ScoredPairs::new(
        decode_logits(mu, &split.val_pos)?,
        decode_logits(mu, &split.val_neg)?,
    );
    let metric_err = |e| ModelError::NumericalFailure(format!("validation metric: {e}"));
    Ok(Some((
        roc_auc(&pairs).map_err(metric_err)?,
        average_precision(&pairs).map_err(metric_err)?,
    )))
}

/// Full-batch training on the split's training edges. The encoder and the
/// reconstruction targets both see only `split.train_edges`.
pub fn train(
    graph: &Graph,
    split: &EdgeSplit,
    config: &VgaeConfig,
    objective: Objective,
) -> Result<TrainOutcome, ModelError> {
    config.validate()?;
    if objective == Objective::Cvgae
        && (split.policy != SplitPolicy::Bipartite || !graph.is_heterogeneous())
    {
        return Err(ModelError::PolicyMismatch);
    }
    let train_graph = split.train_graph(graph);
    let adj = normalize_symmetric(&train_graph);
    let targets = match objective {
        Objective::Vgae => ReconTargets::full(&train_graph),
        Objective::Cvgae => ReconTargets::bipartite(&train_graph)?,
    };
    let weights = LossWeights::resolve(config, &targets);
    let n = graph.num_nodes();

    let mut rng = Rng::seed_from_u64(config.seed);
    let mut params = VgaeParams::init(n, config.hidden_dim, config.latent_dim, &mut rng);
    let adam = config.adam();
    let mut states = [
        AdamState::new(n, config.hidden_dim, adam),
        AdamState::new(config.hidden_dim, config.latent_dim, adam),
        AdamState::new(config.hidden_dim, config.latent_dim, adam),
    ];

    let mut history = Vec::with_capacity(config.epochs);
    let mut best: Option<(f64, usize, VgaeParams)> = None;
    for epoch in 1..=config.epochs {
        let noise = Noise::draw(n, config, &mut rng)?;
        let (loss, grads, _) = loss_and_gradients(&adj, &params, &targets, &weights, &noise)?;
        if !loss.total.is_finite() || !grads.is_finite() {
            return Err(ModelError::NumericalFailure(format!(
                "non-finite loss or gradient at epoch {epoch}"
            )));
        }
        let [s0, s1, s2] = &mut states;
        adam_step(&mut params.w0, &grads.w0, s0)?;
        adam_step(&mut params.w1_mu, &grads.w1_mu, s1)?;
        adam_step(&mut params.w1_sigma, &grads.w1_sigma, s2)?;

        let mu = embed(&adj, &params)?;
        let val = validation_scores(&mu, split)?;
        if let Some((auc, _)) = val {
            if best.as_ref().is_none_or(|(b, _, _)| auc > *b) {
                best = Some((auc, epoch, params.clone()));
            }
        }
        log::debug!(
            "epoch {epoch}: loss {:.6} (recon {:.6}, kl {:.4}) val {:?}",
            loss.total,
            loss.reconstruction,
            loss.kl,
            val
        );
        history.push(EpochRecord {
            epoch,
            loss,
            val_auc: val.map(|v| v.0),
            val_ap: val.map(|v| v.1),
        });
    }

    let (params, best_epoch) = match best {
        Some((_, epoch, p)) => (p, Some(epoch)),
        None if config.epochs > 0 => (params, Some(config.epochs)),
        None => (params, None),
    };
    Ok(TrainOutcome {
        params,
        history,
        best_epoch,
        weights,
    })
}

//! Random-walk embedding baselines: DeepWalk and node2vec walks, skip-gram
//! with negative sampling, and sigmoid inner-product scoring.

mod alias;
mod sgns;
mod walks;

pub use alias::AliasTable;
pub use sgns::{score_pair, train_sgns, Embeddings, SgnsConfig};
pub use walks::{generate_walks, transition_weight, Node2VecSampler, WalkConfig, WalkCorpus};

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::graph::Graph;
use crate::numkernel::Rng;

#[derive(Debug, Error)]
pub enum BaselineError {
    #[error("walk corpus is empty")]
    EmptyCorpus,
    #[error("pair ({0}, {1}) is outside the embedding table")]
    IndexOutOfRange(usize, usize),
    #[error("invalid baseline configuration: {0}")]
    InvalidConfig(String),
    #[error("embedding training produced non-finite values")]
    NumericalFailure,
    #[error("malformed embedding file: {0}")]
    Format(String),
    #[error(transparent)]
    Io(#[from] std::io::Error),
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum BaselineKind {
    DeepWalk,
    Node2Vec,
}

/// Walks on `train_graph`, then skip-gram. DeepWalk ignores `walk.p` and
/// `walk.q` and walks uniformly. The walk generator and the skip-gram
/// trainer draw from separate streams of `walk.seed`.
pub fn fit_baseline(
    train_graph: &Graph,
    kind: BaselineKind,
    walk: &WalkConfig,
    sgns: &SgnsConfig,
) -> Result<(WalkCorpus, Embeddings), BaselineError> {
    let walk = match kind {
        BaselineKind::DeepWalk => WalkConfig {
            p: 1.0,
            q: 1.0,
            ..walk.clone()
        },
        BaselineKind::Node2Vec => walk.clone(),
    };
    walk.validate()?;
    let corpus = generate_walks(train_graph, &walk, &mut Rng::with_stream(walk.seed, 0));
    let sgns = SgnsConfig {
        window: walk.window,
        ..sgns.clone()
    };
    let emb = train_sgns(
        &corpus,
        train_graph.num_nodes(),
        &sgns,
        &mut Rng::with_stream(walk.seed, 1),
    )?;
    Ok((corpus, emb))
}

#[cfg(test)]
mod tests;

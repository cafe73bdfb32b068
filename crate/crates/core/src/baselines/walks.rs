use std::io::Write;

use serde::{Deserialize, Serialize};

use crate::graph::{Graph, NodeId};
use crate::ingest::IdMap;
use crate::numkernel::Rng;

use super::alias::AliasTable;
use super::BaselineError;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct WalkConfig {
    pub num_walks: usize,
    pub walk_length: usize,
    pub window: usize,
    /// Return parameter.
    pub p: f64,
    /// In-out parameter.
    pub q: f64,
    pub seed: u64,
}

impl Default for WalkConfig {
    fn default() -> Self {
        Self {
            num_walks: 10,
            walk_length: 80,
            window: 10,
            p: 1.0,
            q: 1.0,
            seed: 0,
        }
    }
}

impl WalkConfig {
    pub fn validate(&self) -> Result<(), BaselineError> {
        if self.num_walks == 0 || self.walk_length == 0 || self.window == 0 {
            return Err(BaselineError::InvalidConfig(
                "walk counts, length and window must be at least 1".into(),
            ));
        }
        if !(self.p > 0.0 && self.q > 0.0 && self.p.is_finite() && self.q.is_finite()) {
            return Err(BaselineError::InvalidConfig(
                "p and q must be positive".into(),
            ));
        }
        Ok(())
    }

    /// With `p = q = 1` every second-order weight is 1 and the walk is a
    /// plain uniform random walk.
    pub fn is_first_order(&self) -> bool {
        self.p == 1.0 && self.q == 1.0
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Default)]
pub struct WalkCorpus {
    pub walks: Vec<Vec<NodeId>>,
}

impl WalkCorpus {
    pub fn num_tokens(&self) -> usize {
        self.walks.iter().map(Vec::len).sum()
    }

    pub fn is_empty(&self) -> bool {
        self.num_tokens() == 0
    }

    /// One walk per line, node labels separated by single spaces.
    pub fn write_labels<W: Write>(&self, ids: &IdMap, mut out: W) -> std::io::Result<()> {
        for walk in &self.walks {
            let line: Vec<&str> = walk.iter().map(|&n| ids.label(n)).collect();
            writeln!(out, "{}", line.join(" "))?;
        }
        Ok(())
    }
}

/// Neighbor lists with self-loops removed.
fn neighbor_lists(graph: &Graph) -> Vec<Vec<usize>> {
    (0..graph.num_nodes())
        .map(|i| {
            graph
                .neighbors(i)
                .iter()
                .copied()
                .filter(|&j| j != i)
                .collect()
        })
        .collect()
}

/// Second-order node2vec transition sampler with one alias table per
/// directed edge `prev → cur`, over the neighbors of `cur`.
#[derive(Debug, Clone)]
pub struct Node2VecSampler {
    neighbors: Vec<Vec<usize>>,
    offsets: Vec<usize>,
    tables: Vec<AliasTable>,
}

impl Node2VecSampler {
    pub fn new(graph: &Graph, p: f64, q: f64) -> Self {
        let neighbors = neighbor_lists(graph);
        let mut offsets = Vec::with_capacity(neighbors.len() + 1);
        offsets.push(0);
        for nb in &neighbors {
            offsets.push(offsets.last().copied().unwrap_or(0) + nb.len());
        }
        let mut tables = Vec::with_capacity(*offsets.last().unwrap_or(&0));
        for (prev, prev_nbrs) in neighbors.iter().enumerate() {
            for &cur in prev_nbrs {
                let weights: Vec<f64> = neighbors[cur]
                    .iter()
                    .map(|&x| transition_weight(prev, prev_nbrs, x, p, q))
                    .collect();
                // cur always has prev as a neighbor, so weights are non-empty
                tables.push(AliasTable::new(&weights));
            }
        }
        Self {
            neighbors,
            offsets,
            tables,
        }
    }

    pub fn neighbors(&self, node: usize) -> &[usize] {
        &self.neighbors[node]
    }

    fn table(&self, prev: usize, cur: usize) -> &AliasTable {
        let pos = self.neighbors[prev]
            .binary_search(&cur)
            .expect("walk moved along an edge");
        &self.tables[self.offsets[prev] + pos]
    }

    /// Next node after stepping `prev → cur`.
    #[inline]
    pub fn next(&self, prev: usize, cur: usize, rng: &mut Rng) -> usize {
        self.neighbors[cur][self.table(prev, cur).sample(rng)]
    }

    /// Exact transition distribution over `neighbors(cur)` after `prev → cur`.
    pub fn transition_probabilities(&self, prev: usize, cur: usize) -> Vec<f64> {
        self.table(prev, cur).probabilities()
    }
}

/// Unnormalized node2vec weight of moving to `next` when the walk came from
/// `prev`: `1/p` for a return, 1 for a neighbor of `prev`, `1/q` otherwise.
#[inline]
pub fn transition_weight(prev: usize, prev_nbrs: &[usize], next: usize, p: f64, q: f64) -> f64 {
    if next == prev {
        1.0 / p
    } else if prev_nbrs.binary_search(&next).is_ok() {
        1.0
    } else {
        1.0 / q
    }
}

enum Stepper {
    Uniform(Vec<Vec<usize>>),
    SecondOrder(Node2VecSampler),
}

impl Stepper {
    fn neighbors(&self, node: usize) -> &[usize] {
        match self {
            Stepper::Uniform(nb) => &nb[node],
            Stepper::SecondOrder(s) => s.neighbors(node),
        }
    }
}

/// `num_walks` rounds; each round visits every node once in a freshly
/// shuffled order and starts a walk of at most `walk_length` nodes there.
/// The first step is uniform; later steps follow the node2vec weights.
/// A walk stops early at a node without neighbors.
pub fn generate_walks(graph: &Graph, cfg: &WalkConfig, rng: &mut Rng) -> WalkCorpus {
    let stepper = if cfg.is_first_order() {
        Stepper::Uniform(neighbor_lists(graph))
    } else {
        Stepper::SecondOrder(Node2VecSampler::new(graph, cfg.p, cfg.q))
    };
    let n = graph.num_nodes();
    let mut walks = Vec::with_capacity(n * cfg.num_walks);
    let mut order: Vec<usize> = (0..n).collect();
    for _ in 0..cfg.num_walks {
        rng.shuffle(&mut order);
        for &start in &order {
            let mut walk = Vec::with_capacity(cfg.walk_length);
            walk.push(start);
            while walk.len() < cfg.walk_length {
                let cur = *walk.last().expect("walk is non-empty");
                let nbrs = stepper.neighbors(cur);
                if nbrs.is_empty() {
                    break;
                }
                let next = match (&stepper, walk.len()) {
                    (Stepper::SecondOrder(s), len) if len >= 2 => s.next(walk[len - 2], cur, rng),
                    _ => nbrs[rng.below(nbrs.len())],
                };
                walk.push(next);
            }
            walks.push(walk.into_iter().map(NodeId::from_index).collect());
        }
    }
    WalkCorpus { walks }
}

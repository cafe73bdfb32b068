//! Reproducible train/validation/test edge splits with sampled negatives.

use std::collections::HashSet;
use std::io::{Read, Write};

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::graph::{bipartite_index, canonical, Edge, Graph, GraphError, NodeId};
use crate::numkernel::Rng;

/// Fill fraction of the candidate space above which negatives are drawn by
/// enumerating non-edges instead of rejection sampling.
const DENSE_FILL: f64 = 0.9;

const MIN_ELIGIBLE_EDGES: usize = 10;

#[derive(Debug, Error)]
pub enum SplitError {
    #[error("only {found} eligible edges; at least {MIN_ELIGIBLE_EDGES} are required")]
    TooFewEdges { found: usize },
    #[error("bipartite policy requires both disease and gene nodes")]
    PolicyMismatch,
    #[error("split ratios must be non-negative and sum to 1, got {0:?}")]
    InvalidRatios([f64; 3]),
    #[error("requested {requested} negatives but only {available} candidate pairs remain")]
    ExhaustedSpace { requested: usize, available: usize },
    #[error("split does not match graph: {0}")]
    Inconsistent(String),
    #[error(transparent)]
    Json(#[from] serde_json::Error),
    #[error(transparent)]
    Io(#[from] std::io::Error),
}

impl From<GraphError> for SplitError {
    fn from(_: GraphError) -> Self {
        SplitError::PolicyMismatch
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum SplitPolicy {
    /// Every edge is eligible for val/test; negatives are any non-edge.
    General,
    /// Only Disease–Gene edges and pairs are held out.
    Bipartite,
}

/// Train edges plus held-out positive and negative pairs. All lists are
/// sorted canonical pairs.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EdgeSplit {
    pub num_nodes: usize,
    pub policy: SplitPolicy,
    pub seed: u64,
    pub ratios: [f64; 3],
    pub train_edges: Vec<Edge>,
    pub val_pos: Vec<Edge>,
    pub val_neg: Vec<Edge>,
    pub test_pos: Vec<Edge>,
    pub test_neg: Vec<Edge>,
}

impl EdgeSplit {
    /// Graph over the same nodes containing only the training edges.
    pub fn train_graph(&self, graph: &Graph) -> Graph {
        graph
            .with_edges(self.train_edges.iter().copied())
            .expect("split edges come from the graph")
    }

    pub fn write_json<W: Write>(&self, out: W) -> Result<(), SplitError> {
        serde_json::to_writer_pretty(out, self)?;
        Ok(())
    }

    pub fn read_json<R: Read>(input: R) -> Result<Self, SplitError> {
        Ok(serde_json::from_reader(input)?)
    }

    /// Checks the split's invariants against `graph`: disjoint positives
    /// drawn from the edge set, negatives outside it, and cross-type
    /// held-out pairs under the bipartite policy.
    pub fn check_against(&self, graph: &Graph) -> Result<(), SplitError> {
        let fail = |m: &str| Err(SplitError::Inconsistent(m.to_owned()));
        if self.num_nodes != graph.num_nodes() {
            return fail("node count differs");
        }
        let n = graph.num_nodes();
        let in_range = |e: &Edge| e.0.index() < n && e.1.index() < n && e.0 < e.1;
        let all = [
            &self.train_edges,
            &self.val_pos,
            &self.val_neg,
            &self.test_pos,
            &self.test_neg,
        ];
        if !all.iter().all(|l| l.iter().all(in_range)) {
            return fail("pair out of range or not canonical");
        }
        let mut seen = HashSet::new();
        for e in self
            .train_edges
            .iter()
            .chain(&self.val_pos)
            .chain(&self.test_pos)
        {
            if !graph.has_edge(e.0, e.1) {
                return fail("positive pair is not an edge");
            }
            if !seen.insert(*e) {
                return fail("positive sets overlap");
            }
        }
        let mut neg_seen = HashSet::new();
        for e in self.val_neg.iter().chain(&self.test_neg) {
            if graph.has_edge(e.0, e.1) {
                return fail("negative pair is an edge");
            }
            if !neg_seen.insert(*e) {
                return fail("negative sets overlap");
            }
        }
        if self.policy == SplitPolicy::Bipartite {
            let held_out = self
                .val_pos
                .iter()
                .chain(&self.val_neg)
                .chain(&self.test_pos)
                .chain(&self.test_neg);
            if !held_out.clone().all(|e| graph.is_cross_type(e.0, e.1)) {
                return fail("held-out pair is not disease-gene");
            }
        }
        Ok(())
    }
}

fn check_ratios(ratios: [f64; 3]) -> Result<(), SplitError> {
    let ok = ratios.iter().all(|r| r.is_finite() && *r >= 0.0)
        && (ratios.iter().sum::<f64>() - 1.0).abs() <= 1e-9;
    if ok {
        Ok(())
    } else {
        Err(SplitError::InvalidRatios(ratios))
    }
}

/// Splits the graph's non-loop edges. Held-out positives are a uniform
/// shuffle of the eligible edges: train takes `floor(r₀·E)`, validation
/// `floor(r₁·E)`, test the remainder. Under [`SplitPolicy::Bipartite`] only
/// cross-type edges are eligible and same-type edges all stay in train.
/// Each held-out set gets as many negatives as positives.
pub fn split_edges(
    graph: &Graph,
    ratios: [f64; 3],
    policy: SplitPolicy,
    seed: u64,
) -> Result<EdgeSplit, SplitError> {
    check_ratios(ratios)?;
    if policy == SplitPolicy::Bipartite && !graph.is_heterogeneous() {
        return Err(SplitError::PolicyMismatch);
    }
    let (mut eligible, mut train): (Vec<Edge>, Vec<Edge>) = graph
        .non_loop_edges()
        .partition(|&(a, b)| policy == SplitPolicy::General || graph.is_cross_type(a, b));
    if eligible.len() < MIN_ELIGIBLE_EDGES {
        return Err(SplitError::TooFewEdges {
            found: eligible.len(),
        });
    }

    let total = eligible.len();
    let n_train = ((ratios[0] * total as f64 + 1e-9).floor() as usize).min(total);
    let n_val = ((ratios[1] * total as f64 + 1e-9).floor() as usize).min(total - n_train);

    let mut rng = Rng::with_stream(seed, 0);
    rng.shuffle(&mut eligible);
    let mut test_pos = eligible.split_off(n_train + n_val);
    let mut val_pos = eligible.split_off(n_train);
    train.extend(eligible);
    train.sort_unstable();
    val_pos.sort_unstable();
    test_pos.sort_unstable();

    let none = HashSet::new();
    let val_neg = sample_negatives_with(
        graph,
        val_pos.len(),
        policy,
        &none,
        &mut Rng::with_stream(seed, 1),
    )?;
    let exclude: HashSet<Edge> = val_neg.iter().copied().collect();
    let test_neg = sample_negatives_with(
        graph,
        test_pos.len(),
        policy,
        &exclude,
        &mut Rng::with_stream(seed, 2),
    )?;

    Ok(EdgeSplit {
        num_nodes: graph.num_nodes(),
        policy,
        seed,
        ratios,
        train_edges: train,
        val_pos,
        val_neg,
        test_pos,
        test_neg,
    })
}

/// Uniformly samples `count` distinct unordered non-edges that are not
/// self-pairs and not in `exclude`. Under the bipartite policy only
/// Disease–Gene pairs are candidates.
pub fn sample_negatives(
    graph: &Graph,
    count: usize,
    policy: SplitPolicy,
    exclude: &HashSet<Edge>,
    seed: u64,
) -> Result<Vec<Edge>, SplitError> {
    sample_negatives_with(graph, count, policy, exclude, &mut Rng::seed_from_u64(seed))
}

fn sample_negatives_with(
    graph: &Graph,
    count: usize,
    policy: SplitPolicy,
    exclude: &HashSet<Edge>,
    rng: &mut Rng,
) -> Result<Vec<Edge>, SplitError> {
    let n = graph.num_nodes();
    let candidate =
        |e: &Edge| e.0 != e.1 && (policy == SplitPolicy::General || graph.is_cross_type(e.0, e.1));
    let (space, side) = match policy {
        SplitPolicy::General => (n * n.saturating_sub(1) / 2, None),
        SplitPolicy::Bipartite => {
            let idx = bipartite_index(graph)?;
            let (a, b) = idx.shape();
            (a * b, Some(idx))
        }
    };
    let edges_in_space = graph.non_loop_edges().filter(candidate).count();
    let excluded_in_space = exclude
        .iter()
        .filter(|e| candidate(e) && !graph.has_edge(e.0, e.1))
        .count();
    let available = space - edges_in_space - excluded_in_space;
    if count > available {
        return Err(SplitError::ExhaustedSpace {
            requested: count,
            available,
        });
    }
    if count == 0 {
        return Ok(Vec::new());
    }
    let blocked = |e: &Edge| graph.has_edge(e.0, e.1) || exclude.contains(e);

    let fill = (edges_in_space + excluded_in_space + count) as f64 / space as f64;
    let mut out: Vec<Edge> = if fill > DENSE_FILL {
        let mut pool: Vec<Edge> = match &side {
            None => (0..n)
                .flat_map(|i| {
                    (i + 1..n).map(move |j| (NodeId::from_index(i), NodeId::from_index(j)))
                })
                .filter(|e| !blocked(e))
                .collect(),
            Some(idx) => idx
                .disease_ids
                .iter()
                .flat_map(|&d| idx.gene_ids.iter().map(move |&g| canonical(d, g)))
                .filter(|e| !blocked(e))
                .collect(),
        };
        // partial Fisher-Yates: the first `count` slots end up a uniform sample
        for i in 0..count {
            let j = i + rng.below(pool.len() - i);
            pool.swap(i, j);
        }
        pool.truncate(count);
        pool
    } else {
        let mut chosen: HashSet<Edge> = HashSet::with_capacity(count);
        let mut picked = Vec::with_capacity(count);
        while picked.len() < count {
            let e = match &side {
                None => {
                    let a = rng.below(n);
                    let b = rng.below(n);
                    if a == b {
                        continue;
                    }
                    canonical(NodeId::from_index(a), NodeId::from_index(b))
                }
                Some(idx) => {
                    let d = idx.disease_ids[rng.below(idx.disease_ids.len())];
                    let g = idx.gene_ids[rng.below(idx.gene_ids.len())];
                    canonical(d, g)
                }
            };
            if blocked(&e) || !chosen.insert(e) {
                continue;
            }
            picked.push(e);
        }
        picked
    };
    out.sort_unstable();
    Ok(out)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::graph::NodeKind;
    use crate::ingest::{synth_bipartite_sbm, SbmParams};
    use proptest::prelude::{any, prop_assert, prop_assert_eq, proptest};

    fn n(i: u32) -> NodeId {
        NodeId(i)
    }

    fn ring(count: u32) -> Graph {
        Graph::new(
            vec![NodeKind::Generic; count as usize],
            (0..count).map(|i| (n(i), n((i + 1) % count))),
        )
        .unwrap()
    }

    fn toy_bipartite() -> Graph {
        use NodeKind::*;
        // diseases 0, 1; genes 2, 3, 4; edges leave (0,4) and (1,2) open
        Graph::new(
            vec![Disease, Disease, Gene, Gene, Gene],
            [(n(0), n(2)), (n(0), n(3)), (n(1), n(3)), (n(1), n(4))],
        )
        .unwrap()
    }

    #[test]
    fn hundred_edges_split_80_10_10() {
        let s = split_edges(&ring(100), [0.8, 0.1, 0.1], SplitPolicy::General, 5).unwrap();
        assert_eq!(s.train_edges.len(), 80);
        assert_eq!(s.val_pos.len(), 10);
        assert_eq!(s.test_pos.len(), 10);
        assert_eq!(s.val_neg.len(), 10);
        assert_eq!(s.test_neg.len(), 10);
        s.check_against(&ring(100)).unwrap();
    }

    #[test]
    fn all_train_ratio() {
        let s = split_edges(&ring(30), [1.0, 0.0, 0.0], SplitPolicy::General, 1).unwrap();
        assert_eq!(s.train_edges.len(), 30);
        assert!(s.val_pos.is_empty() && s.test_pos.is_empty());
        assert!(s.val_neg.is_empty() && s.test_neg.is_empty());
    }

    #[test]
    fn deterministic_per_seed() {
        let g = ring(50);
        let a = split_edges(&g, [0.8, 0.1, 0.1], SplitPolicy::General, 42).unwrap();
        let b = split_edges(&g, [0.8, 0.1, 0.1], SplitPolicy::General, 42).unwrap();
        assert_eq!(a, b);
        let c = split_edges(&g, [0.8, 0.1, 0.1], SplitPolicy::General, 43).unwrap();
        assert_ne!(a.test_pos, c.test_pos);
    }

    #[test]
    fn split_errors() {
        assert!(matches!(
            split_edges(&ring(9), [0.8, 0.1, 0.1], SplitPolicy::General, 0),
            Err(SplitError::TooFewEdges { found: 9 })
        ));
        assert!(matches!(
            split_edges(&ring(20), [0.8, 0.1, 0.1], SplitPolicy::Bipartite, 0),
            Err(SplitError::PolicyMismatch)
        ));
        assert!(matches!(
            split_edges(&ring(20), [0.8, 0.1, 0.2], SplitPolicy::General, 0),
            Err(SplitError::InvalidRatios(_))
        ));
        assert!(matches!(
            split_edges(&ring(20), [1.1, -0.1, 0.0], SplitPolicy::General, 0),
            Err(SplitError::InvalidRatios(_))
        ));
    }

    #[test]
    fn negatives_on_complete_graph_exhaust() {
        let k4 = Graph::new(
            vec![NodeKind::Generic; 4],
            (0..4u32).flat_map(|i| (i + 1..4).map(move |j| (n(i), n(j)))),
        )
        .unwrap();
        assert!(matches!(
            sample_negatives(&k4, 1, SplitPolicy::General, &HashSet::new(), 0),
            Err(SplitError::ExhaustedSpace {
                requested: 1,
                available: 0
            })
        ));
    }

    #[test]
    fn negatives_on_empty_graph_cover_all_pairs() {
        let empty = Graph::new(vec![NodeKind::Generic; 4], []).unwrap();
        let got = sample_negatives(&empty, 6, SplitPolicy::General, &HashSet::new(), 3).unwrap();
        let all: Vec<Edge> = (0..4u32)
            .flat_map(|i| (i + 1..4).map(move |j| (n(i), n(j))))
            .collect();
        assert_eq!(got, all);
    }

    #[test]
    fn bipartite_negatives_take_remaining_cross_pairs() {
        let g = toy_bipartite();
        let got = sample_negatives(&g, 2, SplitPolicy::Bipartite, &HashSet::new(), 8).unwrap();
        assert_eq!(got, vec![(n(0), n(4)), (n(1), n(2))]);
        let exclude: HashSet<Edge> = [(n(0), n(4))].into_iter().collect();
        assert!(matches!(
            sample_negatives(&g, 2, SplitPolicy::Bipartite, &exclude, 8),
            Err(SplitError::ExhaustedSpace { available: 1, .. })
        ));
    }

    #[test]
    fn bipartite_split_keeps_same_type_edges_in_train() {
        let mut g = synth_bipartite_sbm(&SbmParams {
            n_disease: 12,
            n_gene: 12,
            blocks: 2,
            p_in: 0.6,
            p_out: 0.05,
            seed: 1,
        })
        .unwrap();
        // add disease-disease and gene-gene edges
        let extra = [(n(0), n(1)), (n(2), n(3)), (n(12), n(13))];
        g = g
            .with_edges(g.edges().iter().copied().chain(extra))
            .unwrap();
        let s = split_edges(&g, [0.8, 0.1, 0.1], SplitPolicy::Bipartite, 9).unwrap();
        s.check_against(&g).unwrap();
        for e in extra {
            assert!(s.train_edges.contains(&e));
        }
    }

    #[test]
    fn json_round_trip() {
        let s = split_edges(&ring(40), [0.8, 0.1, 0.1], SplitPolicy::General, 2).unwrap();
        let mut buf = Vec::new();
        s.write_json(&mut buf).unwrap();
        assert_eq!(EdgeSplit::read_json(buf.as_slice()).unwrap(), s);
    }

    proptest! {
        #![proptest_config(proptest::prelude::ProptestConfig::with_cases(48))]
        #[test]
        fn split_partitions_edges(seed in any::<u64>(), p_in in 0.3f64..0.9, bip in any::<bool>()) {
            let g = synth_bipartite_sbm(&SbmParams {
                n_disease: 10,
                n_gene: 14,
                blocks: 2,
                p_in,
                p_out: 0.05,
                seed,
            })
            .unwrap();
            let policy = if bip { SplitPolicy::Bipartite } else { SplitPolicy::General };
            let s = split_edges(&g, [0.8, 0.1, 0.1], policy, seed).unwrap();
            s.check_against(&g).unwrap();

            let mut union: Vec<Edge> = s.train_edges.iter()
                .chain(&s.val_pos)
                .chain(&s.test_pos)
                .copied()
                .collect();
            union.sort_unstable();
            let expected: Vec<Edge> = g.non_loop_edges().collect();
            prop_assert_eq!(union, expected);
            prop_assert_eq!(s.val_neg.len(), s.val_pos.len());
            prop_assert_eq!(s.test_neg.len(), s.test_pos.len());

            let train = s.train_graph(&g);
            for e in s.val_pos.iter().chain(&s.test_pos) {
                prop_assert!(!train.has_edge(e.0, e.1));
            }
        }
    }
}

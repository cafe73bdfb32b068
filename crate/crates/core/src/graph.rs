//! Immutable undirected graphs with typed nodes, self-loop handling and
//! symmetric normalization.

use std::fmt;

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::numkernel::SparseCsr;

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(transparent)]
pub struct NodeId(pub u32);

impl NodeId {
    #[inline]
    pub fn index(self) -> usize {
        self.0 as usize
    }

    #[inline]
    pub fn from_index(i: usize) -> Self {
        NodeId(u32::try_from(i).expect("node index exceeds u32"))
    }
}

impl fmt::Display for NodeId {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{}", self.0)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum NodeKind {
    Disease,
    Gene,
    Generic,
}

/// Unordered node pair stored with the smaller id first.
pub type Edge = (NodeId, NodeId);

#[inline]
pub fn canonical(a: NodeId, b: NodeId) -> Edge {
    if a <= b {
        (a, b)
    } else {
        (b, a)
    }
}

#[derive(Debug, Error, Clone, PartialEq, Eq)]
pub enum GraphError {
    #[error("edge ({0}, {1}) references a node outside the graph")]
    NodeOutOfRange(NodeId, NodeId),
    #[error("graph has no disease/gene partition")]
    HomogeneousGraph,
}

/// Undirected, unweighted graph. Edges are deduplicated at construction and
/// mirrored into a binary CSR adjacency.
#[derive(Debug, Clone, PartialEq)]
pub struct Graph {
    kinds: Vec<NodeKind>,
    edges: Vec<Edge>,
    adjacency: SparseCsr,
}

impl Graph {
    /// Builds a graph over `kinds.len()` nodes. Repeated pairs (in either
    /// orientation) collapse to one edge.
    pub fn new(
        kinds: Vec<NodeKind>,
        edges: impl IntoIterator<Item = Edge>,
    ) -> Result<Self, GraphError> {
        let n = kinds.len();
        let mut canon: Vec<Edge> = Vec::new();
        for (a, b) in edges {
            if a.index() >= n || b.index() >= n {
                return Err(GraphError::NodeOutOfRange(a, b));
            }
            canon.push(canonical(a, b));
        }
        canon.sort_unstable();
        canon.dedup();

        let mut triplets = Vec::with_capacity(canon.len() * 2);
        for &(a, b) in &canon {
            triplets.push((a.index(), b.index(), 1.0));
            if a != b {
                triplets.push((b.index(), a.index(), 1.0));
            }
        }
        let adjacency =
            SparseCsr::from_triplets(n, n, triplets).expect("edges validated against node count");
        Ok(Self {
            kinds,
            edges: canon,
            adjacency,
        })
    }

    /// Graph with the same nodes and a different edge set.
    pub fn with_edges(&self, edges: impl IntoIterator<Item = Edge>) -> Result<Self, GraphError> {
        Self::new(self.kinds.clone(), edges)
    }

    #[inline]
    pub fn num_nodes(&self) -> usize {
        self.kinds.len()
    }

    /// Undirected edge count, self-loops included.
    #[inline]
    pub fn num_edges(&self) -> usize {
        self.edges.len()
    }

    /// Sorted canonical edges.
    pub fn edges(&self) -> &[Edge] {
        &self.edges
    }

    pub fn non_loop_edges(&self) -> impl Iterator<Item = Edge> + '_ {
        self.edges.iter().copied().filter(|(a, b)| a != b)
    }

    pub fn kinds(&self) -> &[NodeKind] {
        &self.kinds
    }

    #[inline]
    pub fn kind(&self, id: NodeId) -> NodeKind {
        self.kinds[id.index()]
    }

    /// Binary adjacency (unit weights, symmetric).
    pub fn adjacency(&self) -> &SparseCsr {
        &self.adjacency
    }

    /// Neighbor indices of `i` in ascending order; includes `i` when it has a self-loop.
    pub fn neighbors(&self, i: usize) -> &[usize] {
        let ptr = self.adjacency.row_ptr();
        &self.adjacency.col_idx()[ptr[i]..ptr[i + 1]]
    }

    pub fn has_edge(&self, a: NodeId, b: NodeId) -> bool {
        self.neighbors(a.index()).binary_search(&b.index()).is_ok()
    }

    pub fn has_all_self_loops(&self) -> bool {
        (0..self.num_nodes()).all(|i| self.neighbors(i).binary_search(&i).is_ok())
    }

    pub fn count_kind(&self, kind: NodeKind) -> usize {
        self.kinds.iter().filter(|&&k| k == kind).count()
    }

    pub fn is_heterogeneous(&self) -> bool {
        self.count_kind(NodeKind::Disease) > 0 && self.count_kind(NodeKind::Gene) > 0
    }

    /// True for Disease–Gene pairs in either orientation.
    #[inline]
    pub fn is_cross_type(&self, a: NodeId, b: NodeId) -> bool {
        matches!(
            (self.kind(a), self.kind(b)),
            (NodeKind::Disease, NodeKind::Gene) | (NodeKind::Gene, NodeKind::Disease)
        )
    }
}

/// Same graph with an edge `(i, i)` on every node. Idempotent.
pub fn add_self_loops(graph: &Graph) -> Graph {
    let loops = (0..graph.num_nodes()).map(|i| (NodeId::from_index(i), NodeId::from_index(i)));
    Graph::new(
        graph.kinds.clone(),
        graph.edges.iter().copied().chain(loops),
    )
    .expect("self-loops stay in range")
}

/// Neighbor counts; a self-loop counts once.
pub fn degree_vector(graph: &Graph) -> Vec<f64> {
    (0..graph.num_nodes())
        .map(|i| graph.neighbors(i).len() as f64)
        .collect()
}

/// `D^{-1/2} A D^{-1/2}` over the self-looped adjacency.
#[derive(Debug, Clone, PartialEq)]
pub struct NormalizedAdjacency {
    matrix: SparseCsr,
}

impl NormalizedAdjacency {
    pub fn matrix(&self) -> &SparseCsr {
        &self.matrix
    }

    pub fn num_nodes(&self) -> usize {
        self.matrix.rows()
    }
}

/// Symmetric normalization. Self-loops are added here when missing so every
/// degree is at least one.
pub fn normalize_symmetric(graph: &Graph) -> NormalizedAdjacency {
    let looped;
    let g = if graph.has_all_self_loops() {
        graph
    } else {
        looped = add_self_loops(graph);
        &looped
    };
    let inv_sqrt: Vec<f64> = degree_vector(g).iter().map(|d| 1.0 / d.sqrt()).collect();
    let adj = g.adjacency();
    let mut values = Vec::with_capacity(adj.nnz());
    for r in 0..adj.rows() {
        for (c, a) in adj.row(r) {
            // multiply in index order on both sides so (r, c) and (c, r) agree bitwise
            let (lo, hi) = if r <= c { (r, c) } else { (c, r) };
            values.push(a * inv_sqrt[lo] * inv_sqrt[hi]);
        }
    }
    let matrix = SparseCsr::try_new(
        adj.rows(),
        adj.cols(),
        adj.row_ptr().to_vec(),
        adj.col_idx().to_vec(),
        values,
    )
    .expect("same structure as the adjacency");
    NormalizedAdjacency { matrix }
}

/// Row (disease) and column (gene) orderings of the cross-type submatrix.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct BipartiteIndex {
    pub disease_ids: Vec<NodeId>,
    pub gene_ids: Vec<NodeId>,
}

impl BipartiteIndex {
    pub fn shape(&self) -> (usize, usize) {
        (self.disease_ids.len(), self.gene_ids.len())
    }
}

/// Ascending NodeId within each kind. Fails when either kind is absent.
pub fn bipartite_index(graph: &Graph) -> Result<BipartiteIndex, GraphError> {
    let pick = |kind| {
        (0..graph.num_nodes())
            .filter(|&i| graph.kinds[i] == kind)
            .map(NodeId::from_index)
            .collect::<Vec<_>>()
    };
    let disease_ids = pick(NodeKind::Disease);
    let gene_ids = pick(NodeKind::Gene);
    if disease_ids.is_empty() || gene_ids.is_empty() {
        return Err(GraphError::HomogeneousGraph);
    }
    Ok(BipartiteIndex {
        disease_ids,
        gene_ids,
    })
}

//! Edge-list parsing (generic TSV/CSV and the BioSNAP disease–gene layout)
//! and a planted-partition generator for bipartite test graphs.

use std::collections::HashMap;
use std::io::{BufRead, Write};

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::graph::{Edge, Graph, NodeId, NodeKind};
use crate::numkernel::Rng;

#[derive(Debug, Error)]
pub enum IngestError {
    #[error("malformed record on line {line}")]
    MalformedLine { line: usize },
    #[error("input contains no edge records")]
    EmptyInput,
    #[error("label {label:?} on line {line} was already seen with a different node kind")]
    KindConflict { line: usize, label: String },
    #[error("invalid generator parameters: {0}")]
    InvalidParams(String),
    #[error(transparent)]
    Io(#[from] std::io::Error),
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct EdgeListRecord {
    pub source_label: String,
    pub target_label: String,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum Delimiter {
    Tab,
    Comma,
    /// Tab when the line contains one, comma otherwise.
    Auto,
}

/// Which two fields of a line hold the endpoints.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct ColumnSpec {
    pub source: usize,
    pub target: usize,
    pub delimiter: Delimiter,
}

impl Default for ColumnSpec {
    fn default() -> Self {
        Self {
            source: 0,
            target: 1,
            delimiter: Delimiter::Auto,
        }
    }
}

/// How a label's [`NodeKind`] is decided.
#[derive(Debug, Clone, PartialEq, Eq)]
pub enum KindRule {
    /// Kind fixed by the column the label appears in.
    ByColumn { source: NodeKind, target: NodeKind },
    /// First matching prefix wins; `default` otherwise.
    ByPrefix {
        prefixes: Vec<(String, NodeKind)>,
        default: NodeKind,
    },
    /// Every node gets the same kind.
    Uniform(NodeKind),
}

impl KindRule {
    fn kind_of(&self, label: &str, is_source: bool) -> NodeKind {
        match self {
            KindRule::ByColumn { source, target } => {
                if is_source {
                    *source
                } else {
                    *target
                }
            }
            KindRule::ByPrefix { prefixes, default } => prefixes
                .iter()
                .find(|(p, _)| label.starts_with(p.as_str()))
                .map_or(*default, |(_, k)| *k),
            KindRule::Uniform(k) => *k,
        }
    }
}

/// Bijection between labels and dense node ids, in first-appearance order.
#[derive(Debug, Clone, Default, PartialEq, Eq)]
pub struct IdMap {
    labels: Vec<String>,
    kinds: Vec<NodeKind>,
    index: HashMap<String, NodeId>,
}

impl IdMap {
    pub fn from_labels(labels: Vec<String>, kinds: Vec<NodeKind>) -> Self {
        assert_eq!(labels.len(), kinds.len());
        let index = labels
            .iter()
            .enumerate()
            .map(|(i, l)| (l.clone(), NodeId::from_index(i)))
            .collect();
        Self {
            labels,
            kinds,
            index,
        }
    }

    /// Labels `D<i>`, `G<i>` and `N<i>` by kind, numbered by node id.
    pub fn synthetic(graph: &Graph) -> Self {
        let labels = graph
            .kinds()
            .iter()
            .enumerate()
            .map(|(i, k)| match k {
                NodeKind::Disease => format!("D{i}"),
                NodeKind::Gene => format!("G{i}"),
                NodeKind::Generic => format!("N{i}"),
            })
            .collect();
        Self::from_labels(labels, graph.kinds().to_vec())
    }

    pub fn len(&self) -> usize {
        self.labels.len()
    }

    pub fn is_empty(&self) -> bool {
        self.labels.is_empty()
    }

    pub fn id(&self, label: &str) -> Option<NodeId> {
        self.index.get(label).copied()
    }

    pub fn label(&self, id: NodeId) -> &str {
        &self.labels[id.index()]
    }

    pub fn labels(&self) -> &[String] {
        &self.labels
    }

    pub fn kinds(&self) -> &[NodeKind] {
        &self.kinds
    }

    fn intern(&mut self, label: &str, kind: NodeKind, line: usize) -> Result<NodeId, IngestError> {
        if let Some(&id) = self.index.get(label) {
            if self.kinds[id.index()] != kind {
                return Err(IngestError::KindConflict {
                    line,
                    label: label.to_owned(),
                });
            }
            return Ok(id);
        }
        let id = NodeId::from_index(self.labels.len());
        self.labels.push(label.to_owned());
        self.kinds.push(kind);
        self.index.insert(label.to_owned(), id);
        Ok(id)
    }
}

/// Splits one non-comment line into a record; `line_no` is 1-based.
pub fn parse_record(
    line: &str,
    line_no: usize,
    columns: &ColumnSpec,
) -> Result<EdgeListRecord, IngestError> {
    let delim = match columns.delimiter {
        Delimiter::Tab => '\t',
        Delimiter::Comma => ',',
        Delimiter::Auto if line.contains('\t') => '\t',
        Delimiter::Auto => ',',
    };
    let fields: Vec<&str> = line.split(delim).map(str::trim).collect();
    let get = |i: usize| {
        fields
            .get(i)
            .copied()
            .filter(|s| !s.is_empty())
            .ok_or(IngestError::MalformedLine { line: line_no })
    };
    Ok(EdgeListRecord {
        source_label: get(columns.source)?.to_owned(),
        target_label: get(columns.target)?.to_owned(),
    })
}

/// Parses a line-oriented edge list. Blank lines and lines starting with `#`
/// are skipped; repeated pairs collapse to one edge.
pub fn parse_edge_list<R: BufRead>(
    reader: R,
    columns: &ColumnSpec,
    kinds: &KindRule,
) -> Result<(Graph, IdMap), IngestError> {
    let mut ids = IdMap::default();
    let mut edges: Vec<Edge> = Vec::new();
    for (i, line) in reader.lines().enumerate() {
        let line = line?;
        let line_no = i + 1;
        let trimmed = line.trim();
        if trimmed.is_empty() || trimmed.starts_with('#') {
            continue;
        }
        let rec = parse_record(trimmed, line_no, columns)?;
        let s = ids.intern(
            &rec.source_label,
            kinds.kind_of(&rec.source_label, true),
            line_no,
        )?;
        let t = ids.intern(
            &rec.target_label,
            kinds.kind_of(&rec.target_label, false),
            line_no,
        )?;
        edges.push((s, t));
    }
    if edges.is_empty() {
        return Err(IngestError::EmptyInput);
    }
    let graph = Graph::new(ids.kinds.clone(), edges).expect("ids are dense by construction");
    Ok((graph, ids))
}

/// Reads the BioSNAP disease–gene association TSV: `#` header, disease
/// identifier in the first column, gene identifier in the last column (the
/// distributed file carries the disease name in between). `swap_columns`
/// reads the mirror layout with genes first.
pub fn load_biosnap_dg_with<R: BufRead>(
    reader: R,
    swap_columns: bool,
) -> Result<(Graph, IdMap), IngestError> {
    let (first, last) = if swap_columns {
        (NodeKind::Gene, NodeKind::Disease)
    } else {
        (NodeKind::Disease, NodeKind::Gene)
    };
    let mut ids = IdMap::default();
    let mut edges: Vec<Edge> = Vec::new();
    for (i, line) in reader.lines().enumerate() {
        let line = line?;
        let line_no = i + 1;
        let trimmed = line.trim();
        if trimmed.is_empty() || trimmed.starts_with('#') {
            continue;
        }
        let fields: Vec<&str> = trimmed.split('\t').map(str::trim).collect();
        if fields.len() < 2 {
            return Err(IngestError::MalformedLine { line: line_no });
        }
        let (a, b) = (fields[0], fields[fields.len() - 1]);
        if a.is_empty() || b.is_empty() {
            return Err(IngestError::MalformedLine { line: line_no });
        }
        let s = ids.intern(a, first, line_no)?;
        let t = ids.intern(b, last, line_no)?;
        edges.push((s, t));
    }
    if edges.is_empty() {
        return Err(IngestError::EmptyInput);
    }
    let graph = Graph::new(ids.kinds.clone(), edges).expect("ids are dense by construction");
    log::info!(
        "loaded {} nodes ({} diseases, {} genes), {} edges",
        graph.num_nodes(),
        graph.count_kind(NodeKind::Disease),
        graph.count_kind(NodeKind::Gene),
        graph.num_edges()
    );
    Ok((graph, ids))
}

pub fn load_biosnap_dg<R: BufRead>(reader: R) -> Result<(Graph, IdMap), IngestError> {
    load_biosnap_dg_with(reader, false)
}

/// Writes `source<TAB>target` lines using the labels of `ids`.
pub fn write_edge_list<W: Write>(graph: &Graph, ids: &IdMap, mut out: W) -> std::io::Result<()> {
    for &(a, b) in graph.edges() {
        writeln!(out, "{}\t{}", ids.label(a), ids.label(b))?;
    }
    Ok(())
}

/// Planted-partition bipartite generator parameters.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct SbmParams {
    pub n_disease: usize,
    pub n_gene: usize,
    pub blocks: usize,
    pub p_in: f64,
    pub p_out: f64,
    pub seed: u64,
}

impl SbmParams {
    pub fn validate(&self) -> Result<(), IngestError> {
        let bad = |m: &str| Err(IngestError::InvalidParams(m.to_owned()));
        if self.blocks == 0 {
            return bad("blocks must be at least 1");
        }
        if self.n_disease < self.blocks || self.n_gene < self.blocks {
            return bad("each side needs at least one node per block");
        }
        if !(0.0..=1.0).contains(&self.p_in) || !(0.0..=1.0).contains(&self.p_out) {
            return bad("probabilities must lie in [0, 1]");
        }
        // p_in = p_out = 0 is the empty-graph corner case
        if self.p_out >= self.p_in && !(self.p_in == 0.0 && self.p_out == 0.0) {
            return bad("p_out must be below p_in");
        }
        Ok(())
    }
}

/// Contiguous block assignment: index `i` of `n` lands in block `i·blocks/n`.
#[inline]
pub fn block_of(i: usize, n: usize, blocks: usize) -> usize {
    i * blocks / n
}

/// Diseases take ids `0..n_disease`, genes follow. Each Disease–Gene pair is
/// joined with probability `p_in` when both sit in the same block, `p_out`
/// otherwise. Pairs are visited disease-major so the output depends only on
/// the parameters.
pub fn synth_bipartite_sbm(params: &SbmParams) -> Result<Graph, IngestError> {
    params.validate()?;
    let SbmParams {
        n_disease,
        n_gene,
        blocks,
        p_in,
        p_out,
        seed,
    } = *params;
    let mut kinds = vec![NodeKind::Disease; n_disease];
    kinds.extend(std::iter::repeat_n(NodeKind::Gene, n_gene));
    let mut rng = Rng::seed_from_u64(seed);
    let mut edges = Vec::new();
    for d in 0..n_disease {
        let bd = block_of(d, n_disease, blocks);
        for g in 0..n_gene {
            let p = if bd == block_of(g, n_gene, blocks) {
                p_in
            } else {
                p_out
            };
            if rng.uniform() < p {
                edges.push((NodeId::from_index(d), NodeId::from_index(n_disease + g)));
            }
        }
    }
    Ok(Graph::new(kinds, edges).expect("generator ids in range"))
}

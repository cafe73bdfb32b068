//! Experiment pipeline: load data, split, fit a model, score the held-out
//! pairs, aggregate over runs. Also the saved-model artifact and candidate
//! ranking used for prediction.

use std::fs::File;
use std::io::{BufReader, Read, Write};
use std::path::PathBuf;

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::baselines::{fit_baseline, BaselineError, BaselineKind, SgnsConfig, WalkConfig};
use crate::graph::{normalize_symmetric, Graph, NodeId, NodeKind};
use crate::ingest::{
    load_biosnap_dg_with, parse_edge_list, synth_bipartite_sbm, ColumnSpec, IdMap, IngestError,
    KindRule, SbmParams,
};
use crate::metrics::{
    aggregate_runs, average_precision, roc_auc, MetricError, RunMetrics, RunSummary, ScoredPairs,
};
use crate::numkernel::{dot, sigmoid_scalar, DenseMatrix, KernelError};
use crate::split::{split_edges, EdgeSplit, SplitError, SplitPolicy};
use crate::vgae::{embed, train, ModelError, Objective, VgaeConfig, VgaeParams};

pub const ARTIFACT_VERSION: u32 = 1;

#[derive(Debug, Error)]
pub enum ExperimentError {
    #[error(transparent)]
    Ingest(#[from] IngestError),
    #[error(transparent)]
    Split(#[from] SplitError),
    #[error(transparent)]
    Model(#[from] ModelError),
    #[error(transparent)]
    Baseline(#[from] BaselineError),
    #[error(transparent)]
    Metric(#[from] MetricError),
    #[error("unknown node label {0:?}")]
    UnknownLabel(String),
    #[error("model file does not match the dataset: {0}")]
    DataMismatch(String),
    #[error("invalid experiment configuration: {0}")]
    InvalidConfig(String),
    #[error("{path}: {source}")]
    File {
        path: PathBuf,
        source: std::io::Error,
    },
    #[error(transparent)]
    Io(#[from] std::io::Error),
    #[error(transparent)]
    Json(#[from] serde_json::Error),
}

/// Coarse failure class, used for process exit codes.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum FailureClass {
    Usage,
    Data,
    Numerical,
}

impl ExperimentError {
    pub fn class(&self) -> FailureClass {
        match self {
            ExperimentError::InvalidConfig(_) => FailureClass::Usage,
            ExperimentError::Model(ModelError::InvalidConfig(_))
            | ExperimentError::Baseline(BaselineError::InvalidConfig(_)) => FailureClass::Usage,
            ExperimentError::Model(
                ModelError::NumericalFailure(_)
                | ModelError::Kernel(KernelError::NonFiniteGradient | KernelError::NonFinite(_)),
            )
            | ExperimentError::Baseline(BaselineError::NumericalFailure)
            | ExperimentError::Metric(MetricError::NonFinite) => FailureClass::Numerical,
            _ => FailureClass::Data,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "lowercase")]
pub enum DataSource {
    /// BioSNAP disease–gene TSV.
    Biosnap {
        path: PathBuf,
        #[serde(default)]
        swap_columns: bool,
    },
    /// Two-column edge list; every node is untyped.
    Edgelist {
        path: PathBuf,
    },
    Synthetic(SbmParams),
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum ModelKind {
    Vgae,
    Cvgae,
    DeepWalk,
    Node2Vec,
}

impl ModelKind {
    pub fn name(self) -> &'static str {
        match self {
            ModelKind::Vgae => "vgae",
            ModelKind::Cvgae => "cvgae",
            ModelKind::DeepWalk => "deepwalk",
            ModelKind::Node2Vec => "node2vec",
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ExperimentConfig {
    pub data: DataSource,
    pub ratios: [f64; 3],
    pub policy: SplitPolicy,
    /// Run `k` uses `seed + k` for both its split and its model.
    pub seed: u64,
    /// Fixed split shared by every run instead of per-run splits.
    #[serde(default)]
    pub split_file: Option<PathBuf>,
    pub model: ModelKind,
    pub vgae: VgaeConfig,
    pub walk: WalkConfig,
    pub sgns: SgnsConfig,
    pub runs: usize,
}

impl Default for ExperimentConfig {
    fn default() -> Self {
        Self {
            data: DataSource::Synthetic(SbmParams {
                n_disease: 40,
                n_gene: 40,
                blocks: 2,
                p_in: 0.5,
                p_out: 0.05,
                seed: 0,
            }),
            ratios: [0.8, 0.1, 0.1],
            policy: SplitPolicy::General,
            seed: 0,
            split_file: None,
            model: ModelKind::Vgae,
            vgae: VgaeConfig::default(),
            walk: WalkConfig::default(),
            sgns: SgnsConfig::default(),
            runs: 10,
        }
    }
}

impl ExperimentConfig {
    pub fn validate(&self) -> Result<(), ExperimentError> {
        if self.runs == 0 {
            return Err(ExperimentError::InvalidConfig(
                "runs must be at least 1".into(),
            ));
        }
        if self.model == ModelKind::Cvgae && self.policy != SplitPolicy::Bipartite {
            return Err(ExperimentError::Model(ModelError::PolicyMismatch));
        }
        let missing = |p: &PathBuf| {
            Err(ExperimentError::File {
                path: p.clone(),
                source: std::io::Error::new(std::io::ErrorKind::NotFound, "file not found"),
            })
        };
        match &self.data {
            DataSource::Biosnap { path, .. } | DataSource::Edgelist { path } if !path.exists() => {
                return missing(path)
            }
            _ => {}
        }
        if let Some(p) = &self.split_file {
            if !p.exists() {
                return missing(p);
            }
        }
        self.vgae.validate()?;
        self.walk.validate()?;
        Ok(())
    }
}

fn open(path: &PathBuf) -> Result<BufReader<File>, ExperimentError> {
    File::open(path)
        .map(BufReader::new)
        .map_err(|source| ExperimentError::File {
            path: path.clone(),
            source,
        })
}

pub fn load_dataset(source: &DataSource) -> Result<(Graph, IdMap), ExperimentError> {
    Ok(match source {
        DataSource::Biosnap { path, swap_columns } => {
            load_biosnap_dg_with(open(path)?, *swap_columns)?
        }
        DataSource::Edgelist { path } => parse_edge_list(
            open(path)?,
            &ColumnSpec::default(),
            &KindRule::Uniform(NodeKind::Generic),
        )?,
        DataSource::Synthetic(params) => {
            let g = synth_bipartite_sbm(params)?;
            let ids = IdMap::synthetic(&g);
            (g, ids)
        }
    })
}

/// A fitted model: the node embedding used for scoring, plus encoder
/// weights for the graph auto-encoders.
#[derive(Debug, Clone, PartialEq)]
pub struct FittedModel {
    pub embedding: DenseMatrix,
    pub params: Option<VgaeParams>,
    pub best_epoch: Option<usize>,
}

/// Fits `model` on the split's training graph with all randomness drawn
/// from `seed`.
pub fn fit_model(
    graph: &Graph,
    split: &EdgeSplit,
    cfg: &ExperimentConfig,
    seed: u64,
) -> Result<FittedModel, ExperimentError> {
    match cfg.model {
        ModelKind::Vgae | ModelKind::Cvgae => {
            let objective = if cfg.model == ModelKind::Vgae {
                Objective::Vgae
            } else {
                Objective::Cvgae
            };
            let vcfg = VgaeConfig {
                seed,
                ..cfg.vgae.clone()
            };
            let out = train(graph, split, &vcfg, objective)?;
            let adj = normalize_symmetric(&split.train_graph(graph));
            let embedding = embed(&adj, &out.params)?;
            Ok(FittedModel {
                embedding,
                params: Some(out.params),
                best_epoch: out.best_epoch,
            })
        }
        ModelKind::DeepWalk | ModelKind::Node2Vec => {
            let kind = if cfg.model == ModelKind::DeepWalk {
                BaselineKind::DeepWalk
            } else {
                BaselineKind::Node2Vec
            };
            let wcfg = WalkConfig {
                seed,
                ..cfg.walk.clone()
            };
            let (_, emb) = fit_baseline(&split.train_graph(graph), kind, &wcfg, &cfg.sgns)?;
            Ok(FittedModel {
                embedding: emb.table,
                params: None,
                best_epoch: None,
            })
        }
    }
}

/// Test-set AUC and AP. Pairs are ranked by the inner product, which orders
/// them exactly as the sigmoid probability does without saturating to ties.
pub fn evaluate(embedding: &DenseMatrix, split: &EdgeSplit) -> Result<RunMetrics, ExperimentError> {
    let score = |pairs: &[(NodeId, NodeId)]| -> Vec<f64> {
        pairs
            .iter()
            .map(|&(a, b)| dot(embedding.row(a.index()), embedding.row(b.index())))
            .collect()
    };
    let pairs = ScoredPairs::new(score(&split.test_pos), score(&split.test_neg));
    Ok(RunMetrics {
        auc: roc_auc(&pairs)?,
        ap: average_precision(&pairs)?,
    })
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RunRecord {
    pub run: usize,
    pub seed: u64,
    pub split_seed: u64,
    pub test_pairs: usize,
    pub auc: f64,
    pub ap: f64,
    pub best_epoch: Option<usize>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RunFailure {
    pub run: usize,
    pub message: String,
    pub numerical: bool,
}

/// Protocol choices not carried by the configuration itself.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ProtocolNotes {
    pub negatives_per_positive: usize,
    pub vgae_param_selection: String,
    pub baseline_training_graph: String,
    pub ranking_score: String,
}

impl Default for ProtocolNotes {
    fn default() -> Self {
        Self {
            negatives_per_positive: 1,
            vgae_param_selection: "epoch with best validation AUC".into(),
            baseline_training_graph: "training edges only".into(),
            ranking_score: "inner product of embeddings (sigmoid-monotone)".into(),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ExperimentReport {
    pub method: String,
    pub status: String,
    pub config: ExperimentConfig,
    pub protocol: ProtocolNotes,
    pub runs: Vec<RunRecord>,
    pub summary: Option<RunSummary>,
    pub failure: Option<RunFailure>,
}

impl ExperimentReport {
    pub fn is_complete(&self) -> bool {
        self.failure.is_none()
    }

    pub fn write_json<W: Write>(&self, out: W) -> Result<(), ExperimentError> {
        serde_json::to_writer_pretty(out, self)?;
        Ok(())
    }

    pub fn read_json<R: Read>(input: R) -> Result<Self, ExperimentError> {
        Ok(serde_json::from_reader(input)?)
    }

    /// Fixed column order `method,run,auc,ap`; `mean` and `stderr` rows close
    /// the table. The effective configuration rides along as a `#` comment.
    pub fn write_csv<W: Write>(&self, mut out: W) -> Result<(), ExperimentError> {
        writeln!(out, "# config: {}", serde_json::to_string(&self.config)?)?;
        writeln!(
            out,
            "# protocol: {}",
            serde_json::to_string(&self.protocol)?
        )?;
        writeln!(out, "method,run,auc,ap")?;
        for r in &self.runs {
            writeln!(out, "{},{},{:?},{:?}", self.method, r.run, r.auc, r.ap)?;
        }
        if let Some(s) = &self.summary {
            writeln!(out, "{},mean,{:?},{:?}", self.method, s.auc.mean, s.ap.mean)?;
            writeln!(
                out,
                "{},stderr,{:?},{:?}",
                self.method, s.auc.stderr, s.ap.stderr
            )?;
        }
        if let Some(f) = &self.failure {
            writeln!(out, "# status: failed at run {}: {}", f.run, f.message)?;
        }
        Ok(())
    }
}

/// Runs `cfg.runs` independent repetitions. Errors before the first run
/// (configuration, data loading) are returned; a failing run stops the loop
/// and is recorded in the report next to the completed runs.
pub fn run_experiment(cfg: &ExperimentConfig) -> Result<ExperimentReport, ExperimentError> {
    cfg.validate()?;
    let (graph, _) = load_dataset(&cfg.data)?;
    let fixed_split = match &cfg.split_file {
        Some(p) => {
            let s = EdgeSplit::read_json(open(p)?)?;
            s.check_against(&graph)?;
            if cfg.model == ModelKind::Cvgae && s.policy != SplitPolicy::Bipartite {
                return Err(ModelError::PolicyMismatch.into());
            }
            Some(s)
        }
        None => None,
    };

    let mut report = ExperimentReport {
        method: cfg.model.name().to_owned(),
        status: "complete".into(),
        config: cfg.clone(),
        protocol: ProtocolNotes::default(),
        runs: Vec::with_capacity(cfg.runs),
        summary: None,
        failure: None,
    };
    for run in 0..cfg.runs {
        let seed = cfg.seed.wrapping_add(run as u64);
        let outcome = (|| -> Result<RunRecord, ExperimentError> {
            let split = match &fixed_split {
                Some(s) => s.clone(),
                None => split_edges(&graph, cfg.ratios, cfg.policy, seed)?,
            };
            let fitted = fit_model(&graph, &split, cfg, seed)?;
            let m = evaluate(&fitted.embedding, &split)?;
            Ok(RunRecord {
                run,
                seed,
                split_seed: split.seed,
                test_pairs: split.test_pos.len() + split.test_neg.len(),
                auc: m.auc,
                ap: m.ap,
                best_epoch: fitted.best_epoch,
            })
        })();
        match outcome {
            Ok(rec) => {
                log::info!(
                    "{} run {run}: auc {:.4} ap {:.4}",
                    report.method,
                    rec.auc,
                    rec.ap
                );
                report.runs.push(rec);
            }
            Err(e) => {
                if run == 0 && e.class() != FailureClass::Numerical {
                    return Err(e);
                }
                report.status = "failed".into();
                report.failure = Some(RunFailure {
                    run,
                    numerical: e.class() == FailureClass::Numerical,
                    message: e.to_string(),
                });
                break;
            }
        }
    }
    if !report.runs.is_empty() {
        let metrics: Vec<RunMetrics> = report
            .runs
            .iter()
            .map(|r| RunMetrics {
                auc: r.auc,
                ap: r.ap,
            })
            .collect();
        report.summary = Some(aggregate_runs(&metrics));
    }
    Ok(report)
}

/// Saved model: labels pin the node order the embedding was computed for.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ModelArtifact {
    pub format_version: u32,
    pub model: ModelKind,
    pub config: ExperimentConfig,
    pub node_labels: Vec<String>,
    pub embedding: DenseMatrix,
    pub params: Option<VgaeParams>,
}

impl ModelArtifact {
    pub fn write_json<W: Write>(&self, out: W) -> Result<(), ExperimentError> {
        serde_json::to_writer(out, self)?;
        Ok(())
    }

    pub fn read_json<R: Read>(input: R) -> Result<Self, ExperimentError> {
        let a: Self = serde_json::from_reader(input)?;
        if a.format_version != ARTIFACT_VERSION {
            return Err(ExperimentError::DataMismatch(format!(
                "unsupported model format version {}",
                a.format_version
            )));
        }
        if a.embedding.rows() != a.node_labels.len() {
            return Err(ExperimentError::DataMismatch(
                "embedding rows differ from label count".into(),
            ));
        }
        Ok(a)
    }
}

/// Fits one model on a split drawn with `cfg.seed` and packages it.
pub fn train_artifact(cfg: &ExperimentConfig) -> Result<ModelArtifact, ExperimentError> {
    cfg.validate()?;
    let (graph, ids) = load_dataset(&cfg.data)?;
    let split = match &cfg.split_file {
        Some(p) => {
            let s = EdgeSplit::read_json(open(p)?)?;
            s.check_against(&graph)?;
            s
        }
        None => split_edges(&graph, cfg.ratios, cfg.policy, cfg.seed)?,
    };
    let fitted = fit_model(&graph, &split, cfg, cfg.seed)?;
    Ok(ModelArtifact {
        format_version: ARTIFACT_VERSION,
        model: cfg.model,
        config: cfg.clone(),
        node_labels: ids.labels().to_vec(),
        embedding: fitted.embedding,
        params: fitted.params,
    })
}

/// Candidates for `query` that are not yet linked to it, best first. A
/// disease is scored against genes, a gene against diseases, an untyped node
/// against untyped nodes. Ties keep ascending node order.
pub fn rank_candidates(
    artifact: &ModelArtifact,
    graph: &Graph,
    ids: &IdMap,
    query: &str,
) -> Result<Vec<(NodeId, f64)>, ExperimentError> {
    if ids.labels() != artifact.node_labels.as_slice() {
        return Err(ExperimentError::DataMismatch(
            "node labels differ from the model's".into(),
        ));
    }
    let q = ids
        .id(query)
        .ok_or_else(|| ExperimentError::UnknownLabel(query.to_owned()))?;
    let want = match graph.kind(q) {
        NodeKind::Disease => NodeKind::Gene,
        NodeKind::Gene => NodeKind::Disease,
        NodeKind::Generic => NodeKind::Generic,
    };
    let emb = &artifact.embedding;
    let mut out: Vec<(NodeId, f64)> = (0..graph.num_nodes())
        .map(NodeId::from_index)
        .filter(|&c| c != q && graph.kind(c) == want && !graph.has_edge(q, c))
        .map(|c| (c, dot(emb.row(q.index()), emb.row(c.index()))))
        .collect();
    out.sort_by(|a, b| b.1.total_cmp(&a.1).then(a.0.cmp(&b.0)));
    Ok(out
        .into_iter()
        .map(|(c, logit)| (c, sigmoid_scalar(logit)))
        .collect())
}

/// `label<TAB>probability` lines.
pub fn write_ranking<W: Write>(
    ranking: &[(NodeId, f64)],
    ids: &IdMap,
    mut out: W,
) -> std::io::Result<()> {
    for &(c, p) in ranking {
        writeln!(out, "{}\t{:?}", ids.label(c), p)?;
    }
    Ok(())
}

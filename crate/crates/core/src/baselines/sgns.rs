use std::io::{BufRead, Write};

use serde::{Deserialize, Serialize};

use crate::numkernel::{dot, sigmoid_scalar, DenseMatrix, Rng};

use super::alias::AliasTable;
use super::{BaselineError, WalkCorpus};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SgnsConfig {
    pub dim: usize,
    pub negatives: usize,
    pub epochs: usize,
    /// Linearly decayed towards zero over all training pairs.
    pub initial_step: f64,
    pub window: usize,
}

impl Default for SgnsConfig {
    fn default() -> Self {
        Self {
            dim: 128,
            negatives: 5,
            epochs: 1,
            initial_step: 0.025,
            window: 10,
        }
    }
}

/// Node embedding table, one row per node.
#[derive(Debug, Clone, PartialEq)]
pub struct Embeddings {
    pub table: DenseMatrix,
}

impl Embeddings {
    pub fn num_nodes(&self) -> usize {
        self.table.rows()
    }

    pub fn dim(&self) -> usize {
        self.table.cols()
    }

    /// Text format: a `rows cols` header line, then one line of values per node.
    pub fn write_text<W: Write>(&self, mut out: W) -> std::io::Result<()> {
        writeln!(out, "{} {}", self.table.rows(), self.table.cols())?;
        for i in 0..self.table.rows() {
            let row: Vec<String> = self.table.row(i).iter().map(|v| format!("{v:?}")).collect();
            writeln!(out, "{}", row.join(" "))?;
        }
        Ok(())
    }

    pub fn read_text<R: BufRead>(input: R) -> Result<Self, BaselineError> {
        let bad = |m: &str| BaselineError::Format(m.to_owned());
        let mut lines = input.lines();
        let header = lines.next().ok_or_else(|| bad("missing header"))??;
        let dims: Vec<usize> = header
            .split_whitespace()
            .map(|t| t.parse().map_err(|_| bad("bad header")))
            .collect::<Result<_, _>>()?;
        let [rows, cols] = dims[..] else {
            return Err(bad("header must be `rows cols`"));
        };
        let mut data = Vec::with_capacity(rows * cols);
        for line in lines.take(rows) {
            let line = line?;
            let vals: Vec<f64> = line
                .split_whitespace()
                .map(|t| t.parse().map_err(|_| bad("bad value")))
                .collect::<Result<_, _>>()?;
            if vals.len() != cols {
                return Err(bad("row length differs from header"));
            }
            data.extend(vals);
        }
        let table = DenseMatrix::new(rows, cols, data).map_err(|_| bad("too few rows"))?;
        Ok(Self { table })
    }
}

/// Skip-gram with negative sampling over the walk corpus, plain SGD.
/// Every (center, context) pair within `window` positions is one update;
/// negatives come from the unigram distribution raised to 3/4. Returns the
/// input-side vectors.
pub fn train_sgns(
    corpus: &WalkCorpus,
    num_nodes: usize,
    cfg: &SgnsConfig,
    rng: &mut Rng,
) -> Result<Embeddings, BaselineError> {
    if corpus.is_empty() {
        return Err(BaselineError::EmptyCorpus);
    }
    if cfg.dim == 0 || cfg.window == 0 {
        return Err(BaselineError::InvalidConfig(
            "dimension and window must be at least 1".into(),
        ));
    }
    let d = cfg.dim;
    let half = 0.5 / d as f64;
    let mut input = DenseMatrix::from_fn(num_nodes, d, |_, _| rng.uniform_range(-half, half));
    let mut output = DenseMatrix::zeros(num_nodes, d);
    if cfg.epochs == 0 {
        return Ok(Embeddings { table: input });
    }

    let mut counts = vec![0f64; num_nodes];
    for walk in &corpus.walks {
        for n in walk {
            counts[n.index()] += 1.0;
        }
    }
    let noise = AliasTable::new(&counts.iter().map(|c| c.powf(0.75)).collect::<Vec<_>>());

    let pairs_per_epoch: usize = corpus
        .walks
        .iter()
        .map(|w| {
            let len = w.len();
            (0..len)
                .map(|i| i.min(cfg.window) + (len - 1 - i).min(cfg.window))
                .sum::<usize>()
        })
        .sum();
    let total_pairs = (pairs_per_epoch * cfg.epochs).max(1) as f64;
    let mut processed = 0usize;
    let mut grad_in = vec![0f64; d];

    for _ in 0..cfg.epochs {
        for walk in &corpus.walks {
            for (i, center) in walk.iter().enumerate() {
                let lo = i.saturating_sub(cfg.window);
                let hi = (i + cfg.window).min(walk.len() - 1);
                for (j, context) in walk.iter().enumerate().take(hi + 1).skip(lo) {
                    if j == i {
                        continue;
                    }
                    let step = cfg.initial_step * (1.0 - processed as f64 / total_pairs).max(1e-4);
                    processed += 1;
                    let c = center.index();
                    let o = context.index();
                    grad_in.iter_mut().for_each(|g| *g = 0.0);
                    for k in 0..=cfg.negatives {
                        let (target, label) = if k == 0 {
                            (o, 1.0)
                        } else {
                            let t = noise.sample(rng);
                            if t == o {
                                continue;
                            }
                            (t, 0.0)
                        };
                        let score = sigmoid_scalar(dot(input.row(c), output.row(target)));
                        let g = step * (label - score);
                        for (gi, &w) in grad_in.iter_mut().zip(output.row(target)) {
                            *gi += g * w;
                        }
                        let u = input.row(c).to_vec();
                        for (w, &ui) in output.row_mut(target).iter_mut().zip(&u) {
                            *w += g * ui;
                        }
                    }
                    for (w, &gi) in input.row_mut(c).iter_mut().zip(&grad_in) {
                        *w += gi;
                    }
                }
            }
        }
    }
    if !input.is_finite() {
        return Err(BaselineError::NumericalFailure);
    }
    Ok(Embeddings { table: input })
}

/// `σ(e_i · e_j)`.
pub fn score_pair(emb: &Embeddings, i: usize, j: usize) -> Result<f64, BaselineError> {
    let n = emb.num_nodes();
    if i >= n || j >= n {
        return Err(BaselineError::IndexOutOfRange(i, j));
    }
    Ok(sigmoid_scalar(dot(emb.table.row(i), emb.table.row(j))))
}

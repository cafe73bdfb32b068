use std::fs::File;
use std::io::{self, BufReader, BufWriter, Write};
use std::path::{Path, PathBuf};
use std::process::ExitCode;

use anyhow::Context;
use clap::{Args, Parser, Subcommand, ValueEnum};

use cvgae::experiment::{
    load_dataset, rank_candidates, run_experiment, train_artifact, write_ranking, DataSource,
    ExperimentConfig, ExperimentError, ExperimentReport, FailureClass, ModelArtifact, ModelKind,
};
use cvgae::ingest::SbmParams;
use cvgae::split::{split_edges, SplitPolicy};

const EXIT_USAGE: u8 = 1;
const EXIT_DATA: u8 = 2;
const EXIT_NUMERICAL: u8 = 3;

#[derive(Parser)]
#[command(
    name = "cvgae",
    version,
    about = "Disease-gene link prediction with graph auto-encoders"
)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Split edges into train/validation/test and write the split as JSON.
    Split {
        #[command(flatten)]
        data: DataArgs,
        #[command(flatten)]
        split: SplitArgs,
        /// Output file; stdout when omitted.
        #[arg(long)]
        out: Option<PathBuf>,
    },
    /// Run repeated train/evaluate cycles and report AUC and AP.
    Experiment {
        #[command(flatten)]
        data: DataArgs,
        #[command(flatten)]
        split: SplitArgs,
        #[command(flatten)]
        model: ModelArgs,
        #[arg(long, default_value_t = 10)]
        runs: usize,
        /// Reuse this split for every run instead of drawing one per run.
        #[arg(long)]
        split_file: Option<PathBuf>,
        /// Re-run exactly the configuration recorded in an earlier report.
        #[arg(long, conflicts_with_all = ["data", "synthetic", "split_file"])]
        from_metadata: Option<PathBuf>,
        #[command(flatten)]
        output: OutputArgs,
    },
    /// Fit one model and save it for `predict`.
    Train {
        #[command(flatten)]
        data: DataArgs,
        #[command(flatten)]
        split: SplitArgs,
        #[command(flatten)]
        model: ModelArgs,
        #[arg(long)]
        split_file: Option<PathBuf>,
        #[arg(long)]
        out: PathBuf,
    },
    /// Rank unlinked candidates for one node of a saved model.
    Predict {
        #[arg(long = "model-file")]
        model_file: PathBuf,
        /// Label of the query node (usually a disease).
        #[arg(long)]
        disease: String,
        /// Dataset override; defaults to the one the model was trained on.
        #[command(flatten)]
        data: DataArgs,
        #[arg(long)]
        out: Option<PathBuf>,
    },
}

#[derive(Args)]
struct DataArgs {
    /// Edge-list file.
    #[arg(long, group = "source")]
    data: Option<PathBuf>,
    /// Layout of the --data file.
    #[arg(long, value_enum, default_value_t = DataKind::Biosnap)]
    data_kind: DataKind,
    /// Read the gene from the first column and the disease from the last.
    #[arg(long)]
    swap_columns: bool,
    /// Planted bipartite graph: DISEASES,GENES,BLOCKS,P_IN,P_OUT[,SEED].
    #[arg(long, group = "source")]
    synthetic: Option<String>,
}

#[derive(Clone, Copy, ValueEnum)]
enum DataKind {
    Biosnap,
    Edgelist,
}

#[derive(Args)]
struct SplitArgs {
    /// Defaults to bipartite for cvgae and general otherwise.
    #[arg(long, value_enum)]
    policy: Option<PolicyArg>,
    #[arg(long, value_delimiter = ',', num_args = 3, default_values_t = [0.8, 0.1, 0.1])]
    ratios: Vec<f64>,
    #[arg(long, default_value_t = 0)]
    seed: u64,
}

#[derive(Clone, Copy, PartialEq, Eq, ValueEnum)]
enum PolicyArg {
    General,
    Bipartite,
}

#[derive(Args)]
struct ModelArgs {
    #[arg(long, value_enum, default_value_t = ModelArg::Vgae)]
    model: ModelArg,
    #[arg(long)]
    epochs: Option<usize>,
    #[arg(long)]
    hidden: Option<usize>,
    #[arg(long)]
    latent: Option<usize>,
    #[arg(long)]
    keep_prob: Option<f64>,
    /// Adam step size for the auto-encoders, initial SGD step for the walk models.
    #[arg(long)]
    lr: Option<f64>,
    #[arg(long)]
    kl_weight: Option<f64>,
    /// Embedding dimension of the walk models.
    #[arg(long)]
    dim: Option<usize>,
    #[arg(long)]
    walks: Option<usize>,
    #[arg(long)]
    walk_length: Option<usize>,
    #[arg(long)]
    window: Option<usize>,
    #[arg(long)]
    p: Option<f64>,
    #[arg(long)]
    q: Option<f64>,
}

#[derive(Clone, Copy, PartialEq, Eq, ValueEnum)]
enum ModelArg {
    Vgae,
    Cvgae,
    Deepwalk,
    Node2vec,
}

#[derive(Args)]
struct OutputArgs {
    #[arg(long)]
    out: Option<PathBuf>,
    /// Defaults to json for a .json output path and csv otherwise.
    #[arg(long, value_enum)]
    format: Option<Format>,
}

#[derive(Clone, Copy, PartialEq, Eq, ValueEnum)]
enum Format {
    Csv,
    Json,
}

/// Error with the exit code it maps to.
struct Failure {
    code: u8,
    error: anyhow::Error,
}

impl From<ExperimentError> for Failure {
    fn from(e: ExperimentError) -> Self {
        let code = match e.class() {
            FailureClass::Usage => EXIT_USAGE,
            FailureClass::Data => EXIT_DATA,
            FailureClass::Numerical => EXIT_NUMERICAL,
        };
        Failure {
            code,
            error: e.into(),
        }
    }
}

fn usage(msg: impl Into<String>) -> Failure {
    Failure {
        code: EXIT_USAGE,
        error: anyhow::anyhow!(msg.into()),
    }
}

fn data_err(e: impl Into<anyhow::Error>) -> Failure {
    Failure {
        code: EXIT_DATA,
        error: e.into(),
    }
}

fn parse_synthetic(spec: &str, default_seed: u64) -> Result<SbmParams, Failure> {
    let parts: Vec<&str> = spec.split(',').map(str::trim).collect();
    if !(5..=6).contains(&parts.len()) {
        return Err(usage(format!(
            "--synthetic expects DISEASES,GENES,BLOCKS,P_IN,P_OUT[,SEED], got {spec:?}"
        )));
    }
    let bad = |what: &str| usage(format!("--synthetic: invalid {what} in {spec:?}"));
    Ok(SbmParams {
        n_disease: parts[0].parse().map_err(|_| bad("disease count"))?,
        n_gene: parts[1].parse().map_err(|_| bad("gene count"))?,
        blocks: parts[2].parse().map_err(|_| bad("block count"))?,
        p_in: parts[3].parse().map_err(|_| bad("p_in"))?,
        p_out: parts[4].parse().map_err(|_| bad("p_out"))?,
        seed: match parts.get(5) {
            Some(s) => s.parse().map_err(|_| bad("seed"))?,
            None => default_seed,
        },
    })
}

impl DataArgs {
    fn source(&self, seed: u64) -> Result<Option<DataSource>, Failure> {
        match (&self.data, &self.synthetic) {
            (Some(path), None) => Ok(Some(match self.data_kind {
                DataKind::Biosnap => DataSource::Biosnap {
                    path: path.clone(),
                    swap_columns: self.swap_columns,
                },
                DataKind::Edgelist => DataSource::Edgelist { path: path.clone() },
            })),
            (None, Some(spec)) => Ok(Some(DataSource::Synthetic(parse_synthetic(spec, seed)?))),
            _ => Ok(None),
        }
    }

    fn required_source(&self, seed: u64) -> Result<DataSource, Failure> {
        self.source(seed)?
            .ok_or_else(|| usage("one of --data or --synthetic is required"))
    }
}

fn ratios(v: &[f64]) -> [f64; 3] {
    [v[0], v[1], v[2]]
}

fn build_config(
    data: &DataArgs,
    split: &SplitArgs,
    m: &ModelArgs,
    runs: usize,
    split_file: Option<PathBuf>,
) -> Result<ExperimentConfig, Failure> {
    let mut cfg = ExperimentConfig {
        data: data.required_source(split.seed)?,
        ratios: ratios(&split.ratios),
        seed: split.seed,
        split_file,
        runs,
        model: match m.model {
            ModelArg::Vgae => ModelKind::Vgae,
            ModelArg::Cvgae => ModelKind::Cvgae,
            ModelArg::Deepwalk => ModelKind::DeepWalk,
            ModelArg::Node2vec => ModelKind::Node2Vec,
        },
        ..ExperimentConfig::default()
    };
    cfg.policy = match split.policy {
        Some(PolicyArg::General) => SplitPolicy::General,
        Some(PolicyArg::Bipartite) => SplitPolicy::Bipartite,
        None if cfg.model == ModelKind::Cvgae => SplitPolicy::Bipartite,
        None => SplitPolicy::General,
    };
    let v = &mut cfg.vgae;
    v.seed = split.seed;
    if let Some(x) = m.epochs {
        v.epochs = x;
        cfg.sgns.epochs = x.max(1);
    }
    if let Some(x) = m.hidden {
        v.hidden_dim = x;
    }
    if let Some(x) = m.latent {
        v.latent_dim = x;
    }
    if let Some(x) = m.keep_prob {
        v.keep_prob = x;
    }
    if let Some(x) = m.kl_weight {
        v.kl_weight = Some(x);
    }
    if let Some(x) = m.lr {
        v.step_size = x;
        cfg.sgns.initial_step = x;
    }
    let w = &mut cfg.walk;
    w.seed = split.seed;
    if let Some(x) = m.walks {
        w.num_walks = x;
    }
    if let Some(x) = m.walk_length {
        w.walk_length = x;
    }
    if let Some(x) = m.window {
        w.window = x;
        cfg.sgns.window = x;
    }
    if let Some(x) = m.p {
        w.p = x;
    }
    if let Some(x) = m.q {
        w.q = x;
    }
    if let Some(x) = m.dim {
        cfg.sgns.dim = x;
    }
    if matches!(m.model, ModelArg::Deepwalk) && (m.p.is_some() || m.q.is_some()) {
        log::warn!("--p/--q are ignored for deepwalk");
    }
    Ok(cfg)
}

/// File or stdout, buffered.
fn sink(path: Option<&Path>) -> Result<Box<dyn Write>, Failure> {
    Ok(match path {
        Some(p) => Box::new(BufWriter::new(
            File::create(p)
                .with_context(|| format!("cannot create {}", p.display()))
                .map_err(data_err)?,
        )),
        None => Box::new(BufWriter::new(io::stdout().lock())),
    })
}

fn open(path: &Path) -> Result<BufReader<File>, Failure> {
    File::open(path)
        .map(BufReader::new)
        .with_context(|| format!("cannot open {}", path.display()))
        .map_err(data_err)
}

/// Reads the configuration back from a JSON report or from the `# config:`
/// line of a CSV report.
fn config_from_metadata(path: &Path) -> Result<ExperimentConfig, Failure> {
    let text = std::fs::read_to_string(path)
        .with_context(|| format!("cannot read {}", path.display()))
        .map_err(data_err)?;
    if let Some(line) = text.lines().find_map(|l| l.strip_prefix("# config: ")) {
        return serde_json::from_str(line)
            .context("malformed configuration line")
            .map_err(data_err);
    }
    let report: ExperimentReport = serde_json::from_str(&text)
        .context("not an experiment report")
        .map_err(data_err)?;
    Ok(report.config)
}

fn cmd_split(data: DataArgs, split: SplitArgs, out: Option<PathBuf>) -> Result<(), Failure> {
    let source = data.required_source(split.seed)?;
    let (graph, _) = load_dataset(&source)?;
    let policy = match split.policy {
        Some(PolicyArg::Bipartite) => SplitPolicy::Bipartite,
        _ => SplitPolicy::General,
    };
    let s = split_edges(&graph, ratios(&split.ratios), policy, split.seed)
        .map_err(ExperimentError::from)?;
    let mut w = sink(out.as_deref())?;
    s.write_json(&mut w).map_err(ExperimentError::from)?;
    writeln!(w).and_then(|_| w.flush()).map_err(data_err)?;
    let counts = format!(
        "nodes {} train {} val_pos {} val_neg {} test_pos {} test_neg {}",
        s.num_nodes,
        s.train_edges.len(),
        s.val_pos.len(),
        s.val_neg.len(),
        s.test_pos.len(),
        s.test_neg.len()
    );
    if out.is_some() {
        println!("{counts}");
    } else {
        eprintln!("{counts}");
    }
    Ok(())
}

fn cmd_experiment(cfg: ExperimentConfig, output: OutputArgs) -> Result<(), Failure> {
    let report = run_experiment(&cfg)?;
    let format = output.format.unwrap_or_else(|| match &output.out {
        Some(p) if p.extension().is_some_and(|e| e == "json") => Format::Json,
        _ => Format::Csv,
    });
    let mut w = sink(output.out.as_deref())?;
    match format {
        Format::Json => {
            report.write_json(&mut w)?;
            writeln!(w).map_err(data_err)?;
        }
        Format::Csv => report.write_csv(&mut w)?,
    }
    w.flush().map_err(data_err)?;
    match &report.failure {
        None => Ok(()),
        Some(f) => Err(Failure {
            code: if f.numerical {
                EXIT_NUMERICAL
            } else {
                EXIT_DATA
            },
            error: anyhow::anyhow!("run {} failed: {}", f.run, f.message),
        }),
    }
}

fn cmd_train(cfg: ExperimentConfig, out: PathBuf) -> Result<(), Failure> {
    let artifact = train_artifact(&cfg)?;
    let mut w = sink(Some(&out))?;
    artifact.write_json(&mut w)?;
    w.flush().map_err(data_err)?;
    Ok(())
}

fn cmd_predict(
    model_file: PathBuf,
    query: String,
    data: DataArgs,
    out: Option<PathBuf>,
) -> Result<(), Failure> {
    let artifact = ModelArtifact::read_json(open(&model_file)?)?;
    let source = data
        .source(artifact.config.seed)?
        .unwrap_or_else(|| artifact.config.data.clone());
    let (graph, ids) = load_dataset(&source)?;
    let ranking = rank_candidates(&artifact, &graph, &ids, &query)?;
    let mut w = sink(out.as_deref())?;
    write_ranking(&ranking, &ids, &mut w)
        .and_then(|_| w.flush())
        .map_err(data_err)?;
    Ok(())
}

fn run(cli: Cli) -> Result<(), Failure> {
    match cli.command {
        Command::Split { data, split, out } => cmd_split(data, split, out),
        Command::Experiment {
            data,
            split,
            model,
            runs,
            split_file,
            from_metadata,
            output,
        } => {
            let cfg = match from_metadata {
                Some(p) => config_from_metadata(&p)?,
                None => build_config(&data, &split, &model, runs, split_file)?,
            };
            cmd_experiment(cfg, output)
        }
        Command::Train {
            data,
            split,
            model,
            split_file,
            out,
        } => cmd_train(build_config(&data, &split, &model, 1, split_file)?, out),
        Command::Predict {
            model_file,
            disease,
            data,
            out,
        } => cmd_predict(model_file, disease, data, out),
    }
}

fn main() -> ExitCode {
    env_logger::Builder::from_env(env_logger::Env::default().default_filter_or("warn")).init();
    let cli = match Cli::try_parse() {
        Ok(c) => c,
        Err(e) => {
            let code = if e.use_stderr() { EXIT_USAGE } else { 0 };
            let _ = e.print();
            return ExitCode::from(code);
        }
    };
    match run(cli) {
        Ok(()) => ExitCode::SUCCESS,
        Err(f) => {
            eprintln!("error: {:#}", f.error);
            ExitCode::from(f.code)
        }
    }
}

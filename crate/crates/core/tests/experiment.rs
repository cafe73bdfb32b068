use cvgae::experiment::{
    load_dataset, rank_candidates, run_experiment, DataSource, ExperimentConfig, ExperimentError,
    ExperimentReport, FailureClass, ModelArtifact, ModelKind, ARTIFACT_VERSION,
};
use cvgae::ingest::SbmParams;
use cvgae::metrics::{aggregate_runs, RunMetrics};
use cvgae::numkernel::DenseMatrix;
use cvgae::split::SplitPolicy;
use cvgae::vgae::ModelError;

fn quick(model: ModelKind) -> ExperimentConfig {
    let mut cfg = ExperimentConfig {
        data: DataSource::Synthetic(SbmParams {
            n_disease: 20,
            n_gene: 20,
            blocks: 2,
            p_in: 0.6,
            p_out: 0.05,
            seed: 1,
        }),
        model,
        runs: 2,
        ..ExperimentConfig::default()
    };
    if model == ModelKind::Cvgae {
        cfg.policy = SplitPolicy::Bipartite;
    }
    cfg.vgae.epochs = 10;
    cfg.vgae.hidden_dim = 16;
    cfg.vgae.latent_dim = 4;
    cfg.walk.num_walks = 2;
    cfg.walk.walk_length = 10;
    cfg.sgns.dim = 8;
    cfg
}

#[test]
fn report_round_trips_through_json() {
    let report = run_experiment(&quick(ModelKind::Cvgae)).unwrap();
    assert!(report.is_complete());
    assert_eq!(report.runs.len(), 2);
    assert_eq!(report.runs[1].seed, 1);
    let mut buf = Vec::new();
    report.write_json(&mut buf).unwrap();
    assert_eq!(ExperimentReport::read_json(buf.as_slice()).unwrap(), report);
}

#[test]
fn summary_matches_aggregation_of_runs() {
    let report = run_experiment(&quick(ModelKind::Node2Vec)).unwrap();
    let per_run: Vec<RunMetrics> = report
        .runs
        .iter()
        .map(|r| RunMetrics {
            auc: r.auc,
            ap: r.ap,
        })
        .collect();
    assert_eq!(report.summary.unwrap(), aggregate_runs(&per_run));
}

#[test]
fn csv_has_fixed_columns_and_summary_rows() {
    let report = run_experiment(&quick(ModelKind::DeepWalk)).unwrap();
    let mut buf = Vec::new();
    report.write_csv(&mut buf).unwrap();
    let text = String::from_utf8(buf).unwrap();
    let body: Vec<&str> = text.lines().filter(|l| !l.starts_with('#')).collect();
    assert_eq!(body[0], "method,run,auc,ap");
    assert!(body[1].starts_with("deepwalk,0,"));
    assert!(body[3].starts_with("deepwalk,mean,"));
    assert!(body[4].starts_with("deepwalk,stderr,"));
}

#[test]
fn configuration_errors() {
    let mut cfg = quick(ModelKind::Vgae);
    cfg.runs = 0;
    let e = run_experiment(&cfg).unwrap_err();
    assert_eq!(e.class(), FailureClass::Usage);

    let mut cfg = quick(ModelKind::Cvgae);
    cfg.policy = SplitPolicy::General;
    assert!(matches!(
        run_experiment(&cfg),
        Err(ExperimentError::Model(ModelError::PolicyMismatch))
    ));

    let mut cfg = quick(ModelKind::Vgae);
    cfg.data = DataSource::Edgelist {
        path: "/nonexistent/edges.tsv".into(),
    };
    let e = run_experiment(&cfg).unwrap_err();
    assert_eq!(e.class(), FailureClass::Data);
}

#[test]
fn ranking_requires_matching_labels() {
    let cfg = quick(ModelKind::Vgae);
    let (graph, ids) = load_dataset(&cfg.data).unwrap();
    let mut artifact = ModelArtifact {
        format_version: ARTIFACT_VERSION,
        model: ModelKind::Vgae,
        config: cfg,
        node_labels: ids.labels().to_vec(),
        embedding: DenseMatrix::zeros(ids.len(), 3),
        params: None,
    };
    let ranked = rank_candidates(&artifact, &graph, &ids, "D0").unwrap();
    assert_eq!(ranked.len(), 20 - graph.neighbors(0).len());
    assert!(ranked.iter().all(|&(_, p)| p == 0.5));
    assert!(matches!(
        rank_candidates(&artifact, &graph, &ids, "nope"),
        Err(ExperimentError::UnknownLabel(_))
    ));

    artifact.node_labels.swap(0, 1);
    assert!(matches!(
        rank_candidates(&artifact, &graph, &ids, "D0"),
        Err(ExperimentError::DataMismatch(_))
    ));
}

use super::*;
use crate::graph::{Graph, NodeId, NodeKind};
use crate::ingest::{synth_bipartite_sbm, SbmParams};
use crate::numkernel::{dot, DenseMatrix, Rng};

fn n(i: u32) -> NodeId {
    NodeId(i)
}

fn generic(count: usize, edges: &[(u32, u32)]) -> Graph {
    Graph::new(
        vec![NodeKind::Generic; count],
        edges.iter().map(|&(a, b)| (n(a), n(b))),
    )
    .unwrap()
}

fn star(leaves: u32) -> Graph {
    let edges: Vec<(u32, u32)> = (1..=leaves).map(|l| (0, l)).collect();
    generic(leaves as usize + 1, &edges)
}

fn cliques(size: u32) -> Graph {
    let mut edges = Vec::new();
    for base in [0, size] {
        for i in 0..size {
            for j in i + 1..size {
                edges.push((base + i, base + j));
            }
        }
    }
    generic(2 * size as usize, &edges)
}

#[test]
fn unit_parameters_give_uniform_transitions() {
    let g = synth_bipartite_sbm(&SbmParams {
        n_disease: 6,
        n_gene: 6,
        blocks: 2,
        p_in: 0.8,
        p_out: 0.2,
        seed: 3,
    })
    .unwrap();
    let s = Node2VecSampler::new(&g, 1.0, 1.0);
    for &(a, b) in g.edges() {
        let probs = s.transition_probabilities(a.index(), b.index());
        let k = probs.len() as f64;
        assert!(probs.iter().all(|p| (p - 1.0 / k).abs() < 1e-12));
    }
}

#[test]
fn two_node_walks_alternate() {
    let g = generic(2, &[(0, 1)]);
    for cfg in [
        WalkConfig::default(),
        WalkConfig {
            p: 0.5,
            q: 2.0,
            ..WalkConfig::default()
        },
    ] {
        let corpus = generate_walks(&g, &cfg, &mut Rng::seed_from_u64(1));
        assert_eq!(corpus.walks.len(), 20);
        for w in &corpus.walks {
            assert_eq!(w.len(), 80);
            assert!(w.windows(2).all(|p| p[0] != p[1]));
        }
    }
}

#[test]
fn isolated_nodes_stop_walks() {
    let g = generic(3, &[(0, 1)]);
    let corpus = generate_walks(&g, &WalkConfig::default(), &mut Rng::seed_from_u64(2));
    let from_isolated: Vec<_> = corpus.walks.iter().filter(|w| w[0] == n(2)).collect();
    assert_eq!(from_isolated.len(), 10);
    assert!(from_isolated.iter().all(|w| w.len() == 1));
}

#[test]
fn walks_follow_edges() {
    let g = synth_bipartite_sbm(&SbmParams {
        n_disease: 10,
        n_gene: 12,
        blocks: 2,
        p_in: 0.5,
        p_out: 0.1,
        seed: 8,
    })
    .unwrap();
    for (p, q) in [(1.0, 1.0), (0.25, 4.0), (4.0, 0.25)] {
        let cfg = WalkConfig {
            p,
            q,
            walk_length: 30,
            num_walks: 3,
            ..WalkConfig::default()
        };
        let corpus = generate_walks(&g, &cfg, &mut Rng::seed_from_u64(5));
        for w in &corpus.walks {
            assert!(w.len() <= 30);
            assert!(w.windows(2).all(|s| g.has_edge(s[0], s[1])));
        }
    }
}

#[test]
fn star_transitions_match_weight_formula() {
    // center 0 with five leaves; after leaf → center, returning to the same
    // leaf has weight 1/p = 1, every other leaf 1/q = 1000
    let g = star(5);
    let q = 0.001;
    let s = Node2VecSampler::new(&g, 1.0, q);
    let mut rng = Rng::seed_from_u64(99);
    let steps = 100_000;
    let mut counts = [0usize; 6];
    for t in 0..steps {
        let prev = 1 + t % 5;
        let next = s.next(prev, 0, &mut rng);
        let slot = if next == prev {
            0
        } else {
            1 + (next - 1 + 5 - (prev - 1)) % 5
        };
        counts[slot] += 1;
    }
    let total_w = 1.0 + 4.0 / q;
    let expected = [1.0 / total_w, 1000.0 / total_w];
    let n = steps as f64;
    let check = |count: usize, p: f64| {
        let sd = (n * p * (1.0 - p)).sqrt();
        assert!(
            (count as f64 - n * p).abs() <= 3.0 * sd.max(1.0),
            "count {count}, expected {}",
            n * p
        );
    };
    check(counts[0], expected[0]);
    for &c in &counts[2..6] {
        check(c, expected[1]);
    }
    assert_eq!(counts[1], 0, "slot 1 is the return leaf itself");
}

#[test]
fn center_started_walks_on_star_avoid_returns() {
    let g = star(5);
    let cfg = WalkConfig {
        q: 0.001,
        walk_length: 3,
        num_walks: 2_000,
        ..WalkConfig::default()
    };
    let corpus = generate_walks(&g, &cfg, &mut Rng::seed_from_u64(4));
    let center: Vec<_> = corpus.walks.iter().filter(|w| w[0] == n(0)).collect();
    assert_eq!(center.len(), 2_000);
    // every center walk is center → leaf → center
    assert!(center.iter().all(|w| w.len() == 3 && w[2] == n(0)));
    let leaf_started: Vec<_> = corpus.walks.iter().filter(|w| w[0] != n(0)).collect();
    let returns = leaf_started.iter().filter(|w| w[2] == w[0]).count();
    // P(return) = 1/4001 per walk
    assert!(returns < 10, "returns {returns}");
}

#[test]
fn deepwalk_and_unit_node2vec_agree() {
    let g = cliques(5);
    let walk = WalkConfig {
        num_walks: 2,
        walk_length: 10,
        window: 3,
        seed: 17,
        ..WalkConfig::default()
    };
    let sg = SgnsConfig {
        dim: 8,
        ..SgnsConfig::default()
    };
    let (c1, e1) = fit_baseline(&g, BaselineKind::DeepWalk, &walk, &sg).unwrap();
    let (c2, e2) = fit_baseline(&g, BaselineKind::Node2Vec, &walk, &sg).unwrap();
    assert_eq!(c1, c2);
    assert_eq!(e1, e2);
}

#[test]
fn sgns_zero_epochs_and_errors() {
    let corpus = WalkCorpus {
        walks: vec![vec![n(0), n(1), n(2)]],
    };
    let cfg = SgnsConfig {
        dim: 4,
        epochs: 0,
        ..SgnsConfig::default()
    };
    let emb = train_sgns(&corpus, 3, &cfg, &mut Rng::seed_from_u64(1)).unwrap();
    let mut rng = Rng::seed_from_u64(1);
    let init = DenseMatrix::from_fn(3, 4, |_, _| rng.uniform_range(-0.125, 0.125));
    assert_eq!(emb.table, init);
    assert!(matches!(
        train_sgns(&WalkCorpus::default(), 3, &cfg, &mut Rng::seed_from_u64(1)),
        Err(BaselineError::EmptyCorpus)
    ));
}

#[test]
fn sgns_is_deterministic() {
    let g = cliques(4);
    let walk = WalkConfig {
        num_walks: 3,
        walk_length: 12,
        window: 3,
        seed: 2,
        ..WalkConfig::default()
    };
    let sg = SgnsConfig {
        dim: 8,
        ..SgnsConfig::default()
    };
    let a = fit_baseline(&g, BaselineKind::Node2Vec, &walk, &sg).unwrap();
    let b = fit_baseline(&g, BaselineKind::Node2Vec, &walk, &sg).unwrap();
    assert_eq!(a.1, b.1);
}

#[test]
fn cliques_separate_after_training() {
    let size = 6;
    let g = cliques(size);
    let walk = WalkConfig {
        num_walks: 10,
        walk_length: 20,
        window: 3,
        seed: 5,
        ..WalkConfig::default()
    };
    let sg = SgnsConfig {
        dim: 16,
        epochs: 5,
        ..SgnsConfig::default()
    };
    let (_, emb) = fit_baseline(&g, BaselineKind::DeepWalk, &walk, &sg).unwrap();
    let (mut intra, mut inter, mut ni, mut nx) = (0.0, 0.0, 0, 0);
    let total = 2 * size as usize;
    for i in 0..total {
        for j in i + 1..total {
            let v = dot(emb.table.row(i), emb.table.row(j));
            if (i < size as usize) == (j < size as usize) {
                intra += v;
                ni += 1;
            } else {
                inter += v;
                nx += 1;
            }
        }
    }
    let (intra, inter) = (intra / ni as f64, inter / nx as f64);
    assert!(intra > inter, "intra {intra} inter {inter}");
}

#[test]
fn scoring_examples() {
    let table = DenseMatrix::from_rows(&[
        vec![0.0, 0.0],
        vec![1.0, 0.0],
        vec![0.0, 1.0],
        vec![1.0, 0.0],
    ])
    .unwrap();
    let emb = Embeddings { table };
    assert_eq!(score_pair(&emb, 0, 1).unwrap(), 0.5);
    assert_eq!(score_pair(&emb, 1, 2).unwrap(), 0.5);
    let p = score_pair(&emb, 1, 3).unwrap();
    assert!((p - 0.731_058_578_630_004_9).abs() < 1e-15);
    assert_eq!(
        score_pair(&emb, 2, 1).unwrap(),
        score_pair(&emb, 1, 2).unwrap()
    );
    assert!(matches!(
        score_pair(&emb, 0, 4),
        Err(BaselineError::IndexOutOfRange(0, 4))
    ));
}

#[test]
fn embeddings_text_round_trip() {
    let mut rng = Rng::seed_from_u64(6);
    let table = DenseMatrix::from_fn(3, 2, |_, _| rng.standard_normal());
    let emb = Embeddings { table };
    let mut buf = Vec::new();
    emb.write_text(&mut buf).unwrap();
    assert!(buf.starts_with(b"3 2\n"));
    assert_eq!(Embeddings::read_text(buf.as_slice()).unwrap(), emb);
    assert!(Embeddings::read_text("2 2\n1 2\n".as_bytes()).is_err());
}

#[test]
fn corpus_dump_uses_labels() {
    let g = generic(2, &[(0, 1)]);
    let ids = crate::ingest::IdMap::synthetic(&g);
    let corpus = WalkCorpus {
        walks: vec![vec![n(0), n(1), n(0)]],
    };
    let mut buf = Vec::new();
    corpus.write_labels(&ids, &mut buf).unwrap();
    assert_eq!(String::from_utf8(buf).unwrap(), "N0 N1 N0\n");
}

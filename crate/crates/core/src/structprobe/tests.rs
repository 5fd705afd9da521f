use super::*;
use crate::corpus::ConlluWord;
use proptest::prelude::*;
use rand::Rng;

/// Decodes a Prüfer sequence over `n = seq.len() + 2` nodes.
fn prufer_tree(seq: &[usize]) -> DepTree {
    let n = seq.len() + 2;
    let mut degree = vec![1usize; n];
    for &s in seq {
        degree[s] += 1;
    }
    let mut edges = Vec::new();
    for &s in seq {
        let leaf = (0..n).find(|&v| degree[v] == 1).unwrap();
        edges.push((leaf, s));
        degree[leaf] -= 1;
        degree[s] -= 1;
    }
    let rest: Vec<usize> = (0..n).filter(|&v| degree[v] == 1).collect();
    edges.push((rest[0], rest[1]));
    DepTree::from_edges(n, edges).unwrap()
}

fn all_trees(n: usize) -> Vec<DepTree> {
    if n == 1 {
        return vec![DepTree::from_edges(1, []).unwrap()];
    }
    if n == 2 {
        return vec![DepTree::from_edges(2, [(0, 1)]).unwrap()];
    }
    let mut out = Vec::new();
    let total = n.pow(n as u32 - 2);
    for mut code in 0..total {
        let mut seq = vec![0; n - 2];
        for s in seq.iter_mut() {
            *s = code % n;
            code /= n;
        }
        out.push(prufer_tree(&seq));
    }
    out
}

fn tree_weight(t: &DepTree, d: &DistanceMatrix) -> f64 {
    t.edges().iter().map(|&(a, b)| d.get(a, b)).sum()
}

/// Vectors whose squared distances equal the tree distances: every node is
/// the sum of one orthonormal direction per edge on its path to node 0.
fn path_vectors(tree: &DepTree, dim: usize) -> Vec<Vec<f64>> {
    let adj = tree.adjacency();
    let mut vecs = vec![vec![0.0; dim]; tree.n()];
    let mut seen = vec![false; tree.n()];
    seen[0] = true;
    let mut stack = vec![0];
    while let Some(u) = stack.pop() {
        for &v in &adj[u] {
            if !seen[v] {
                seen[v] = true;
                let mut h = vecs[u].clone();
                h[v - 1] += 1.0;
                vecs[v] = h;
                stack.push(v);
            }
        }
    }
    vecs
}

fn random_sentence(rng: &mut crate::SeededRng, n: usize, dim: usize) -> ProbeSentence {
    let tree = if n == 2 {
        DepTree::from_edges(2, [(0, 1)]).unwrap()
    } else {
        let seq: Vec<usize> = (0..n - 2).map(|_| rng.random_range(0..n)).collect();
        prufer_tree(&seq)
    };
    let vecs = (0..n)
        .map(|_| (0..dim).map(|_| rng.random_range(-1.0..1.0)).collect())
        .collect();
    ProbeSentence::new("s", vecs, tree).unwrap()
}

#[test]
fn identity_probe_recovers_path_geometry() {
    let tree = DepTree::from_heads(&[2, 0, 2, 3, 3]).unwrap();
    let vecs = path_vectors(&tree, 6);
    let probe = StructuralProbe::identity(6);
    let pred = predicted_distances(&probe, &vecs).unwrap();
    assert_eq!(pred, tree.distances());
    assert_eq!(mst_parse(&pred).unwrap(), tree);
    let s = ProbeSentence::new("x", vecs, tree).unwrap();
    assert_eq!(sentence_loss(&probe, &s).unwrap(), 0.0);
}

#[test]
fn gradient_matches_finite_differences() {
    let mut rng = seeded_rng(11);
    for _ in 0..20 {
        let n = rng.random_range(2..=5);
        let dim = rng.random_range(2..=8);
        let k = rng.random_range(1..=dim);
        let s = random_sentence(&mut rng, n, dim);
        let b: Vec<f64> = (0..k * dim).map(|_| rng.random_range(-1.0..1.0)).collect();
        let (_, g) = loss_and_gradient(&b, k, dim, &[&s]);
        let h = 1e-5;
        let mut fd = vec![0.0; b.len()];
        for i in 0..b.len() {
            let mut bp = b.clone();
            bp[i] += h;
            let mut bm = b.clone();
            bm[i] -= h;
            fd[i] = (loss_and_gradient(&bp, k, dim, &[&s]).0 - loss_and_gradient(&bm, k, dim, &[&s]).0) / (2.0 * h);
        }
        let diff: f64 = g.iter().zip(&fd).map(|(a, b)| (a - b).powi(2)).sum::<f64>().sqrt();
        let scale = g.iter().map(|a| a * a).sum::<f64>().sqrt().max(fd.iter().map(|a| a * a).sum::<f64>().sqrt());
        assert!(diff <= 1e-4 * scale.max(1e-12), "relative error {}", diff / scale);
    }
}

#[test]
fn mst_is_minimal_over_all_trees() {
    let mut rng = seeded_rng(3);
    for n in 2..=6 {
        let trees = all_trees(n);
        for _ in 0..30 {
            let mut d = DistanceMatrix::zeros(n);
            for i in 0..n {
                for j in i + 1..n {
                    // small integers force ties
                    d.set(i, j, f64::from(rng.random_range(1..4u8)));
                }
            }
            let mst = mst_parse(&d).unwrap();
            let best = trees.iter().map(|t| tree_weight(t, &d)).fold(f64::INFINITY, f64::min);
            assert_eq!(tree_weight(&mst, &d), best);
        }
    }
}

#[test]
fn mst_tie_break_is_deterministic() {
    let mut d = DistanceMatrix::zeros(4);
    for i in 0..4 {
        for j in i + 1..4 {
            d.set(i, j, 1.0);
        }
    }
    // All weights equal: Prim from node 0 takes the smallest pairs.
    let t = mst_parse(&d).unwrap();
    assert_eq!(t, DepTree::from_edges(4, [(0, 1), (0, 2), (0, 3)]).unwrap());
}

#[test]
fn mst_rejects_bad_input() {
    assert!(mst_parse(&DistanceMatrix::zeros(1)).is_err());
    let mut d = DistanceMatrix::zeros(3);
    d.set(0, 1, f64::NAN);
    assert!(mst_parse(&d).is_err());
}

#[test]
fn uuas_counts_shared_edges() {
    let gold = DepTree::from_edges(4, [(0, 1), (1, 2), (2, 3)]).unwrap();
    let pred = DepTree::from_edges(4, [(0, 1), (1, 2), (1, 3)]).unwrap();
    assert!((uuas(&pred, &gold).unwrap() - 2.0 / 3.0).abs() < 1e-15);
    assert_eq!(uuas(&gold, &gold).unwrap(), 1.0);
    let other = DepTree::from_edges(3, [(0, 1), (1, 2)]).unwrap();
    assert!(uuas(&other, &gold).is_err());
}

#[test]
fn dspr_window_and_perfect_score() {
    let short = DepTree::from_heads(&[0, 1, 2]).unwrap().distances();
    let long = DepTree::from_heads(&[0, 1, 2, 3, 4, 5]).unwrap().distances();
    let r = distance_spearman(&[(short.clone(), short), (long.clone(), long)], DSPR_WINDOW).unwrap();
    assert_eq!(r.n_sentences, 1);
    assert_eq!(r.n_excluded, 1);
    assert!((r.mean - 1.0).abs() < 1e-12);
    let tiny = DepTree::from_heads(&[0, 1]).unwrap().distances();
    assert!(distance_spearman(&[(tiny.clone(), tiny)], (2, 50)).is_err());
}

#[test]
fn punct_words_are_bypassed() {
    // "A , B ." with the comma heading B (1-based heads 0, 1, 2, 1)
    let words = [("A", "NOUN", 0), (",", "PUNCT", 1), ("B", "NOUN", 2), (".", "PUNCT", 1)];
    let sentence = ConlluSentence {
        sent_id: "p".into(),
        words: words
            .iter()
            .enumerate()
            .map(|(i, &(form, upos, head))| ConlluWord {
                index: i + 1,
                form: form.into(),
                lemma: "_".into(),
                upos: upos.into(),
                head,
                deprel: "dep".into(),
            })
            .collect(),
    };
    let m = Matrix::new(4, 2, (0..8).map(|v| v as f32).collect()).unwrap();
    let s = ProbeSentence::from_conllu(&sentence, &m, true).unwrap().unwrap();
    assert_eq!(s.len(), 2);
    assert_eq!(s.vectors[1], vec![4.0, 5.0]);
    assert!(s.tree.has_edge(0, 1));
    let full = ProbeSentence::from_conllu(&sentence, &m, false).unwrap().unwrap();
    assert_eq!(full.len(), 4);
}

#[test]
fn reattaches_when_root_is_removed() {
    // word 2 is the removed root; words 1 and 3 become siblings of it
    assert_eq!(reattach_heads(&[2, 0, 2], &[0, 2]), vec![0, 1]);
    assert_eq!(reattach_heads(&[0, 1, 2, 3], &[0, 3]), vec![0, 1]);
}

#[test]
fn training_recovers_realizable_trees() {
    let mut rng = seeded_rng(5);
    let dim = 10;
    let make = |rng: &mut crate::SeededRng, count: usize| -> Vec<ProbeSentence> {
        (0..count)
            .map(|i| {
                let n = rng.random_range(5..=10);
                let seq: Vec<usize> = (0..n - 2).map(|_| rng.random_range(0..n)).collect();
                let tree = prufer_tree(&seq);
                ProbeSentence::new(format!("s{i}"), path_vectors(&tree, dim), tree).unwrap()
            })
            .collect()
    };
    let train = make(&mut rng, 200);
    let dev = make(&mut rng, 20);
    let test = make(&mut rng, 20);
    let cfg = ProbeTrainConfig {
        max_epochs: 200,
        learning_rate: 1e-2,
        ..default_train_config()
    };
    let out = train_structural_probe(&train, &dev, dim, 7, "synthetic", &cfg).unwrap();
    let eval = evaluate_probe(&out.probe, &test, DSPR_WINDOW).unwrap();
    assert!(out.best_dev_loss <= 0.05, "{}", out.best_dev_loss);
    assert_eq!(eval.uuas, 1.0);
    assert!(eval.dspr.unwrap().mean > 0.95);
}

#[test]
fn zero_learning_rate_keeps_initial_loss() {
    let mut rng = seeded_rng(1);
    let train: Vec<_> = (0..5).map(|_| random_sentence(&mut rng, 4, 3)).collect();
    let cfg = ProbeTrainConfig {
        learning_rate: 0.0,
        max_epochs: 4,
        ..default_train_config()
    };
    let out = train_structural_probe(&train, &[], 2, 0, "m", &cfg).unwrap();
    assert!(out.dev_losses.windows(2).all(|w| w[0] == w[1]));
}

#[test]
fn rank_above_dim_is_rejected() {
    let mut rng = seeded_rng(1);
    let train = vec![random_sentence(&mut rng, 4, 3)];
    assert!(train_structural_probe(&train, &[], 4, 0, "m", &default_train_config()).is_err());
}

#[test]
fn checkpoint_round_trip() {
    let dir = tempfile::tempdir().unwrap();
    let path = dir.path().join("probe.csem");
    let probe = StructuralProbe::new(vec![0.5, -0.25, 1.0, 2.0, 0.0, 0.125], 2, 3, 7, "m").unwrap();
    probe.save(&path).unwrap();
    assert_eq!(StructuralProbe::load(&path).unwrap(), probe);
}

#[test]
fn parses_round_trip_through_jsonl() {
    let dir = tempfile::tempdir().unwrap();
    let path = dir.path().join("parses.jsonl");
    let parses = vec![ParsedSentence {
        id: "a".into(),
        tree: DepTree::from_edges(3, [(0, 1), (1, 2)]).unwrap(),
    }];
    write_parses(&parses, &path).unwrap();
    let text = std::fs::read_to_string(&path).unwrap();
    assert_eq!(text, "{\"id\":\"a\",\"n\":3,\"edges\":[[0,1],[1,2]]}\n");
    assert_eq!(read_parses(&path).unwrap(), parses);
}

proptest! {
    #[test]
    fn mst_of_tree_distances_is_the_tree(seq in prop::collection::vec(0usize..8, 0..6)) {
        let n = seq.len() + 2;
        let seq: Vec<usize> = seq.into_iter().map(|s| s % n).collect();
        let tree = prufer_tree(&seq);
        prop_assert_eq!(mst_parse(&tree.distances()).unwrap(), tree);
    }

    #[test]
    fn loss_is_non_negative(seed in 0u64..1000) {
        let mut rng = seeded_rng(seed);
        let s = random_sentence(&mut rng, 4, 3);
        let b: Vec<f64> = (0..6).map(|_| rng.random_range(-1.0..1.0)).collect();
        let (loss, g) = loss_and_gradient(&b, 2, 3, &[&s]);
        prop_assert!(loss >= 0.0);
        prop_assert!(g.iter().all(|v| v.is_finite()));
    }
}

#[test]
fn broken_ties_cap_distance_spearman() {
    // Gold path lengths are small integers with many ties. A prediction
    // that keeps the order between distance classes but breaks ties inside
    // them cannot reach a Spearman of 1.
    let mut rng = seeded_rng(5);
    let mut pairs = Vec::new();
    for _ in 0..50 {
        let n = rng.random_range(5..=10);
        let seq: Vec<usize> = (0..n - 2).map(|_| rng.random_range(0..n)).collect();
        let gold = prufer_tree(&seq).distances();
        let mut pred = gold.clone();
        for i in 0..n {
            for j in i + 1..n {
                pred.set(i, j, gold.get(i, j) + rng.random_range(-1e-9..1e-9));
            }
        }
        pairs.push((pred, gold));
    }
    let r = distance_spearman(&pairs, DSPR_WINDOW).unwrap();
    assert!(r.mean < 0.99 && r.mean > 0.9, "{r:?}");
}

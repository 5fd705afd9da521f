//! Structural distance probe.
//!
//! A rank-`k` matrix `B` is trained so that the squared projected distance
//! `||B(h_i - h_j)||^2` between two word vectors approximates the path
//! length between the words in the gold dependency tree. Parses are
//! recovered as minimum spanning trees of the predicted distances.

mod parse;

use log::warn;
use rand::seq::SliceRandom;
use rand::Rng;

pub use parse::{parse_corpus, read_parses, write_parses, ParsedSentence};

use crate::corpus::ConlluSentence;
use crate::embedstore::{read_container, write_container, EmbeddingKind, EmbeddingSet, Matrix};
use crate::optim::Adam;
use crate::probe::ProbeTrainConfig;
use crate::stats::spearman;
use crate::tree::{DepTree, DistanceMatrix};
use crate::{seeded_rng, Error, Result};

/// Factor applied to the learning rate after an epoch without dev-loss
/// improvement.
pub const LR_DECAY_ON_PLATEAU: f64 = 0.1;

/// Half-width of the uniform initialization range of `B`.
pub const INIT_RANGE: f64 = 0.05;

/// Sentence-length window (inclusive) for distance Spearman.
pub const DSPR_WINDOW: (usize, usize) = (5, 50);

/// Training defaults: Adam at 1e-3 over batches of 20 sentences, stopping
/// after 3 epochs without dev-loss improvement.
pub fn default_train_config() -> ProbeTrainConfig {
    ProbeTrainConfig {
        batch_size: 20,
        learning_rate: 1e-3,
        max_epochs: 40,
        patience: 3,
        seed: 0,
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct StructuralProbe {
    /// Row-major `k x dim`.
    b: Vec<f64>,
    k: usize,
    dim: usize,
    pub layer: u32,
    pub model_name: String,
}

impl StructuralProbe {
    pub fn new(b: Vec<f64>, k: usize, dim: usize, layer: u32, model_name: impl Into<String>) -> Result<Self> {
        if k == 0 || k > dim {
            return Err(Error::Config(format!("probe rank {k} must be in 1..={dim}")));
        }
        if b.len() != k * dim {
            return Err(Error::LengthMismatch(format!(
                "{} entries for a {k}x{dim} probe",
                b.len()
            )));
        }
        if b.iter().any(|v| !v.is_finite()) {
            return Err(Error::Validation("probe matrix has non-finite entries".into()));
        }
        Ok(StructuralProbe {
            b,
            k,
            dim,
            layer,
            model_name: model_name.into(),
        })
    }

    pub fn identity(dim: usize) -> Self {
        let mut b = vec![0.0; dim * dim];
        for i in 0..dim {
            b[i * dim + i] = 1.0;
        }
        StructuralProbe {
            b,
            k: dim,
            dim,
            layer: 0,
            model_name: String::new(),
        }
    }

    pub fn k(&self) -> usize {
        self.k
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    pub fn matrix(&self) -> &[f64] {
        &self.b
    }

    /// Projects every word vector: row `i` of the result is `B h_i`.
    fn project(&self, h: &[Vec<f64>]) -> Vec<Vec<f64>> {
        project(&self.b, self.k, self.dim, h)
    }

    pub fn save(&self, path: impl AsRef<std::path::Path>) -> Result<()> {
        let mut set = EmbeddingSet::new(self.model_name.clone(), self.layer, EmbeddingKind::ProbeMatrix, self.dim);
        let data = self.b.iter().map(|&v| v as f32).collect();
        set.insert("B", Matrix::new(self.k, self.dim, data)?)?;
        write_container(&set, path)
    }

    pub fn load(path: impl AsRef<std::path::Path>) -> Result<Self> {
        let set = read_container(path)?;
        if set.kind != EmbeddingKind::ProbeMatrix {
            return Err(Error::Header(format!("expected a probe_matrix container, found {}", set.kind)));
        }
        let m = set
            .get("B")
            .ok_or_else(|| Error::Header("probe container has no 'B' record".into()))?;
        let b = m.data().iter().map(|&v| f64::from(v)).collect();
        StructuralProbe::new(b, m.n_rows(), set.dim, set.layer, set.model_name)
    }
}

fn project(b: &[f64], k: usize, dim: usize, h: &[Vec<f64>]) -> Vec<Vec<f64>> {
    h.iter()
        .map(|x| {
            b.chunks_exact(dim)
                .take(k)
                .map(|row| row.iter().zip(x).map(|(a, c)| a * c).sum())
                .collect()
        })
        .collect()
}

fn squared_distance(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| (x - y) * (x - y)).sum()
}

/// Squared projected distances `||B(h_i - h_j)||^2` for all word pairs.
pub fn predicted_distances(probe: &StructuralProbe, h: &[Vec<f64>]) -> Result<DistanceMatrix> {
    if let Some(row) = h.iter().find(|r| r.len() != probe.dim) {
        return Err(Error::DimensionMismatch {
            expected: probe.dim,
            found: row.len(),
        });
    }
    let p = probe.project(h);
    let mut d = DistanceMatrix::zeros(h.len());
    for i in 0..h.len() {
        for j in i + 1..h.len() {
            d.set(i, j, squared_distance(&p[i], &p[j]));
        }
    }
    Ok(d)
}

/// Path-length distances of a tree.
pub fn tree_distances(tree: &DepTree) -> DistanceMatrix {
    tree.distances()
}

/// A training or evaluation sentence: word vectors plus the gold tree.
#[derive(Debug, Clone, PartialEq)]
pub struct ProbeSentence {
    pub id: String,
    pub vectors: Vec<Vec<f64>>,
    pub tree: DepTree,
    pub gold: DistanceMatrix,
}

impl ProbeSentence {
    pub fn new(id: impl Into<String>, vectors: Vec<Vec<f64>>, tree: DepTree) -> Result<Self> {
        let id = id.into();
        if vectors.len() != tree.n() {
            return Err(Error::LengthMismatch(format!(
                "sentence '{id}' has {} words but {} vectors",
                tree.n(),
                vectors.len()
            )));
        }
        let gold = tree.distances();
        Ok(ProbeSentence {
            id,
            vectors,
            tree,
            gold,
        })
    }

    pub fn len(&self) -> usize {
        self.vectors.len()
    }

    pub fn is_empty(&self) -> bool {
        self.vectors.is_empty()
    }

    /// Pairs a treebank sentence with its word vectors. With `drop_punct`,
    /// PUNCT words are removed and their dependents reattached to the
    /// nearest kept ancestor. Returns `None` for sentences left with fewer
    /// than two words.
    pub fn from_conllu(sentence: &ConlluSentence, words: &Matrix, drop_punct: bool) -> Result<Option<Self>> {
        if words.n_rows() != sentence.len() {
            return Err(Error::LengthMismatch(format!(
                "sentence '{}' has {} words but {} vectors",
                sentence.sent_id,
                sentence.len(),
                words.n_rows()
            )));
        }
        let keep: Vec<usize> = (0..sentence.len())
            .filter(|&i| !(drop_punct && sentence.words[i].upos == "PUNCT"))
            .collect();
        if keep.len() < 2 {
            return Ok(None);
        }
        let heads = reattach_heads(&sentence.heads(), &keep);
        let tree = DepTree::from_heads(&heads).map_err(|e| Error::InvalidTree {
            sent_id: sentence.sent_id.clone(),
            reason: e.to_string(),
        })?;
        let vectors = keep
            .iter()
            .map(|&i| words.row(i).iter().map(|&v| f64::from(v)).collect())
            .collect();
        ProbeSentence::new(sentence.sent_id.clone(), vectors, tree).map(Some)
    }
}

/// Restricts 1-based `heads` to the 0-based positions in `keep`, returning
/// 1-based heads over the kept words. Removed words are bypassed; if the
/// root itself is removed, the first orphaned word becomes the root and the
/// other orphans attach to it.
fn reattach_heads(heads: &[usize], keep: &[usize]) -> Vec<usize> {
    let mut new_pos = vec![0usize; heads.len() + 1];
    for (k, &i) in keep.iter().enumerate() {
        new_pos[i + 1] = k + 1;
    }
    let mut out: Vec<usize> = keep
        .iter()
        .map(|&i| {
            let mut h = heads[i];
            while h != 0 && new_pos[h] == 0 {
                h = heads[h - 1];
            }
            if h == 0 {
                0
            } else {
                new_pos[h]
            }
        })
        .collect();
    let mut roots = (0..out.len()).filter(|&k| out[k] == 0);
    if let Some(first) = roots.next() {
        let rest: Vec<usize> = roots.collect();
        for k in rest {
            out[k] = first + 1;
        }
    }
    out
}

/// Per-sentence loss `(1/n^2) * sum_{i<j} |d_T(i,j) - d_B(i,j)|`.
pub fn sentence_loss(probe: &StructuralProbe, s: &ProbeSentence) -> Result<f64> {
    let pred = predicted_distances(probe, &s.vectors)?;
    let n = s.len();
    let mut total = 0.0;
    for i in 0..n {
        for j in i + 1..n {
            total += (s.gold.get(i, j) - pred.get(i, j)).abs();
        }
    }
    Ok(total / (n * n) as f64)
}

/// Mean loss over sentences and its gradient with respect to the row-major
/// `k x dim` matrix `b`.
///
/// With `p_i = B h_i` and `w_ij = sign(d_B(i,j) - d_T(i,j)) / n^2`, the
/// gradient of one sentence is `2 * P^T (D - W) H`, where `D` is the
/// diagonal of row sums of `W`.
pub fn loss_and_gradient(b: &[f64], k: usize, dim: usize, sentences: &[&ProbeSentence]) -> (f64, Vec<f64>) {
    let mut grad = vec![0.0; k * dim];
    let mut loss = 0.0;
    for s in sentences {
        let n = s.len();
        let norm = 1.0 / (n * n) as f64;
        let p = project(b, k, dim, &s.vectors);
        let mut w = vec![0.0; n * n];
        for i in 0..n {
            for j in i + 1..n {
                let diff = squared_distance(&p[i], &p[j]) - s.gold.get(i, j);
                loss += diff.abs() * norm;
                let sgn = if diff > 0.0 {
                    norm
                } else if diff < 0.0 {
                    -norm
                } else {
                    0.0
                };
                w[i * n + j] = sgn;
                w[j * n + i] = sgn;
            }
        }
        // lh = (D - W) H
        let mut lh = vec![vec![0.0; dim]; n];
        for i in 0..n {
            let row_sum: f64 = w[i * n..(i + 1) * n].iter().sum();
            for (c, v) in lh[i].iter_mut().enumerate() {
                *v = row_sum * s.vectors[i][c];
            }
            for j in 0..n {
                let wij = w[i * n + j];
                if wij != 0.0 {
                    for (c, v) in lh[i].iter_mut().enumerate() {
                        *v -= wij * s.vectors[j][c];
                    }
                }
            }
        }
        for r in 0..k {
            let g = &mut grad[r * dim..(r + 1) * dim];
            for i in 0..n {
                let coef = 2.0 * p[i][r];
                if coef != 0.0 {
                    for (gc, l) in g.iter_mut().zip(&lh[i]) {
                        *gc += coef * l;
                    }
                }
            }
        }
    }
    let m = sentences.len().max(1) as f64;
    grad.iter_mut().for_each(|g| *g /= m);
    (loss / m, grad)
}

pub fn mean_loss(probe: &StructuralProbe, sentences: &[ProbeSentence]) -> Result<f64> {
    if sentences.is_empty() {
        return Err(Error::Empty("no sentences".into()));
    }
    let mut total = 0.0;
    for s in sentences {
        total += sentence_loss(probe, s)?;
    }
    Ok(total / sentences.len() as f64)
}

#[derive(Debug, Clone)]
pub struct StructuralTrainOutcome {
    pub probe: StructuralProbe,
    pub best_epoch: usize,
    pub best_dev_loss: f64,
    pub train_losses: Vec<f64>,
    pub dev_losses: Vec<f64>,
}

/// Trains `B` from a seeded uniform initialization. Keeps the snapshot with
/// the lowest dev loss (train loss when `dev` is empty); every epoch without
/// improvement scales the learning rate by [`LR_DECAY_ON_PLATEAU`], and
/// `cfg.patience` such epochs in a row end training.
pub fn train_structural_probe(
    train: &[ProbeSentence],
    dev: &[ProbeSentence],
    k: usize,
    layer: u32,
    model_name: &str,
    cfg: &ProbeTrainConfig,
) -> Result<StructuralTrainOutcome> {
    cfg.validate()?;
    let first = train.first().ok_or_else(|| Error::Empty("treebank".into()))?;
    let dim = first.vectors.first().map_or(0, Vec::len);
    if k == 0 || k > dim {
        return Err(Error::Config(format!("probe rank {k} exceeds embedding dim {dim}")));
    }
    for s in train.iter().chain(dev) {
        if s.len() < 2 {
            return Err(Error::Validation(format!("sentence '{}' has fewer than 2 words", s.id)));
        }
        if let Some(v) = s.vectors.iter().find(|v| v.len() != dim) {
            return Err(Error::DimensionMismatch {
                expected: dim,
                found: v.len(),
            });
        }
    }

    let mut rng = seeded_rng(cfg.seed);
    let mut b: Vec<f64> = (0..k * dim).map(|_| rng.random_range(-INIT_RANGE..=INIT_RANGE)).collect();
    let mut adam = Adam::new(b.len(), cfg.learning_rate);
    let mut order: Vec<usize> = (0..train.len()).collect();
    let monitor: Vec<&ProbeSentence> = if dev.is_empty() { train.iter().collect() } else { dev.iter().collect() };

    let mut best = (f64::INFINITY, b.clone(), 0usize);
    let mut stale = 0;
    let mut train_losses = Vec::new();
    let mut dev_losses = Vec::new();

    for epoch in 1..=cfg.max_epochs {
        order.shuffle(&mut rng);
        let mut epoch_loss = 0.0;
        let mut batches = 0;
        for chunk in order.chunks(cfg.batch_size) {
            let batch: Vec<&ProbeSentence> = chunk.iter().map(|&i| &train[i]).collect();
            let (loss, grad) = loss_and_gradient(&b, k, dim, &batch);
            adam.step(&mut b, &grad);
            epoch_loss += loss;
            batches += 1;
        }
        train_losses.push(epoch_loss / batches as f64);
        let (dev_loss, _) = loss_and_gradient(&b, k, dim, &monitor);
        dev_losses.push(dev_loss);
        if dev_loss < best.0 {
            best = (dev_loss, b.clone(), epoch);
            stale = 0;
        } else {
            stale += 1;
            adam.learning_rate *= LR_DECAY_ON_PLATEAU;
            if stale >= cfg.patience {
                break;
            }
        }
    }

    let (best_dev_loss, best_b, best_epoch) = if best.2 == 0 {
        let (l, _) = loss_and_gradient(&b, k, dim, &monitor);
        (l, b, 0)
    } else {
        best
    };
    Ok(StructuralTrainOutcome {
        probe: StructuralProbe::new(best_b, k, dim, layer, model_name)?,
        best_epoch,
        best_dev_loss,
        train_losses,
        dev_losses,
    })
}

/// Minimum spanning tree of the complete graph weighted by `d`, via Prim's
/// algorithm from node 0. Among equal-weight candidate edges the
/// lexicographically smallest `(min, max)` pair wins.
pub fn mst_parse(d: &DistanceMatrix) -> Result<DepTree> {
    let n = d.n();
    if n < 2 {
        return Err(Error::Validation(format!("MST needs at least 2 nodes, got {n}")));
    }
    for i in 0..n {
        for j in 0..n {
            if !d.get(i, j).is_finite() {
                return Err(Error::Validation(format!("non-finite distance at ({i}, {j})")));
            }
        }
    }
    let mut in_tree = vec![false; n];
    in_tree[0] = true;
    // best crossing edge for each outside node: (weight, (min, max))
    let mut best: Vec<(f64, (usize, usize))> = (0..n).map(|v| (d.get(0, v), (0, v))).collect();
    let mut edges = Vec::with_capacity(n - 1);
    for _ in 1..n {
        let mut pick: Option<usize> = None;
        for v in 0..n {
            if in_tree[v] {
                continue;
            }
            pick = match pick {
                None => Some(v),
                Some(u) if better(best[v], best[u]) => Some(v),
                keep => keep,
            };
        }
        let v = pick.unwrap_or(0);
        in_tree[v] = true;
        edges.push(best[v].1);
        for u in 0..n {
            if !in_tree[u] {
                let cand = (d.get(v, u), (v.min(u), v.max(u)));
                if better(cand, best[u]) {
                    best[u] = cand;
                }
            }
        }
    }
    DepTree::from_edges(n, edges)
}

fn better(a: (f64, (usize, usize)), b: (f64, (usize, usize))) -> bool {
    a.0 < b.0 || (a.0 == b.0 && a.1 < b.1)
}

/// Fraction of gold edges present in the prediction, ignoring direction.
pub fn uuas(pred: &DepTree, gold: &DepTree) -> Result<f64> {
    if pred.n() != gold.n() {
        return Err(Error::LengthMismatch(format!(
            "predicted tree has {} nodes, gold has {}",
            pred.n(),
            gold.n()
        )));
    }
    if gold.edges().is_empty() {
        return Ok(1.0);
    }
    let shared = gold.edges().intersection(pred.edges()).count();
    Ok(shared as f64 / gold.edges().len() as f64)
}

#[derive(Debug, Clone, Copy, PartialEq, serde::Serialize)]
pub struct DistanceSpearman {
    pub mean: f64,
    pub n_sentences: usize,
    pub n_excluded: usize,
}

/// Spearman correlation between predicted and gold pair distances over the
/// upper triangle of each sentence, averaged over sentences whose length is
/// within `window` (inclusive).
pub fn distance_spearman(
    pairs: &[(DistanceMatrix, DistanceMatrix)],
    window: (usize, usize),
) -> Result<DistanceSpearman> {
    let mut total = 0.0;
    let mut used = 0;
    for (pred, gold) in pairs {
        if pred.n() != gold.n() {
            return Err(Error::LengthMismatch(format!(
                "distance matrices of size {} and {}",
                pred.n(),
                gold.n()
            )));
        }
        let n = gold.n();
        if n < window.0 || n > window.1 {
            continue;
        }
        let pairs_count = n * n.saturating_sub(1) / 2;
        if pairs_count < 2 {
            return Err(Error::Validation(format!(
                "a sentence of {n} words has fewer than 2 word pairs"
            )));
        }
        total += spearman(&pred.upper_triangle(), &gold.upper_triangle())?;
        used += 1;
    }
    if used == 0 {
        return Err(Error::Empty(format!(
            "no sentence with length in {}..={}",
            window.0, window.1
        )));
    }
    Ok(DistanceSpearman {
        mean: total / used as f64,
        n_sentences: used,
        n_excluded: pairs.len() - used,
    })
}

/// UUAS and distance Spearman of a probe on held-out sentences.
#[derive(Debug, Clone, Copy, PartialEq, serde::Serialize)]
pub struct StructuralEval {
    /// Mean of per-sentence UUAS.
    pub uuas: f64,
    pub dspr: Option<DistanceSpearman>,
    pub n_sentences: usize,
}

pub fn evaluate_probe(probe: &StructuralProbe, sentences: &[ProbeSentence], window: (usize, usize)) -> Result<StructuralEval> {
    if sentences.is_empty() {
        return Err(Error::Empty("evaluation set".into()));
    }
    let mut uuas_total = 0.0;
    let mut pairs = Vec::with_capacity(sentences.len());
    for s in sentences {
        let pred = predicted_distances(probe, &s.vectors)?;
        uuas_total += uuas(&mst_parse(&pred)?, &s.tree)?;
        pairs.push((pred, s.gold.clone()));
    }
    let dspr = match distance_spearman(&pairs, window) {
        Ok(d) => Some(d),
        Err(Error::Empty(msg)) => {
            warn!("distance Spearman not computed: {msg}");
            None
        }
        Err(e) => return Err(e),
    };
    Ok(StructuralEval {
        uuas: uuas_total / sentences.len() as f64,
        dspr,
        n_sentences: sentences.len(),
    })
}

#[cfg(test)]
mod tests;

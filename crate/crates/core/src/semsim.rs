//! Consistency of sentence similarities across languages.
//!
//! For two embedding sets `A` and `B` indexed by the same sentence ids, a
//! similarity vector holds `cos(A_i, B_j)` over a fixed set of index pairs.
//! Two such vectors are compared with Spearman's rank correlation: a high
//! value means the model ranks sentence pairs the same way regardless of
//! the languages involved.

use std::collections::BTreeMap;
use std::fmt::Write as _;

use log::warn;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::csgen::SyntheticRecord;
use crate::embedstore::EmbeddingSet;
use crate::stats::spearman;
use crate::{Error, Result};

/// Cosine similarity, clamped to [-1, 1] against rounding.
pub fn cosine(u: &[f64], v: &[f64]) -> Result<f64> {
    if u.len() != v.len() {
        return Err(Error::DimensionMismatch {
            expected: u.len(),
            found: v.len(),
        });
    }
    let dot: f64 = u.iter().zip(v).map(|(a, b)| a * b).sum();
    let nu = u.iter().map(|a| a * a).sum::<f64>().sqrt();
    let nv = v.iter().map(|a| a * a).sum::<f64>().sqrt();
    if nu == 0.0 || nv == 0.0 {
        return Err(Error::Validation("cosine of a zero vector".into()));
    }
    let c = dot / (nu * nv);
    if !c.is_finite() {
        return Err(Error::Validation("cosine is not finite".into()));
    }
    Ok(c.clamp(-1.0, 1.0))
}

/// Which `(i, j)` index pairs a similarity vector covers.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum PairPolicy {
    /// `i < j`: for a set compared with itself.
    Unordered,
    /// `i != j`, plus `i == j` when `include_diagonal` is set. The diagonal
    /// pairs a sentence with its own translation.
    Ordered { include_diagonal: bool },
}

impl PairPolicy {
    /// Unordered for a set against itself, ordered otherwise.
    pub fn for_sets(set_a: &str, set_b: &str, include_diagonal: bool) -> Self {
        if set_a == set_b {
            PairPolicy::Unordered
        } else {
            PairPolicy::Ordered { include_diagonal }
        }
    }

    pub fn pairs(self, n: usize) -> Vec<(usize, usize)> {
        let mut out = Vec::new();
        for i in 0..n {
            for j in 0..n {
                let keep = match self {
                    PairPolicy::Unordered => i < j,
                    PairPolicy::Ordered { include_diagonal } => i != j || include_diagonal,
                };
                if keep {
                    out.push((i, j));
                }
            }
        }
        out
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct SimVector {
    pub set_a: String,
    pub set_b: String,
    /// Sentence ids in canonical (sorted) order; pair indices refer to it.
    pub ids: Vec<String>,
    pub pairs: Vec<(usize, usize)>,
    pub values: Vec<f64>,
}

impl SimVector {
    /// `set_a-set_b`, as used in report rows.
    pub fn label(&self) -> String {
        format!("{}-{}", self.set_a, self.set_b)
    }

    /// `i,j,id_i,id_j,cosine` rows for auditing.
    pub fn to_csv(&self) -> String {
        let mut out = String::from("i,j,id_i,id_j,cosine\n");
        for (&(i, j), v) in self.pairs.iter().zip(&self.values) {
            let _ = writeln!(out, "{i},{j},{},{},{v}", self.ids[i], self.ids[j]);
        }
        out
    }
}

/// Cosine similarity for every pair under `policy`, with sentence vectors
/// taken from each set (word-level sets are mean-pooled).
pub fn build_sim_vector(
    set_a: &str,
    emb_a: &EmbeddingSet,
    set_b: &str,
    emb_b: &EmbeddingSet,
    policy: PairPolicy,
) -> Result<SimVector> {
    let ids: Vec<String> = emb_a.records.keys().cloned().collect();
    if !emb_b.records.keys().eq(ids.iter()) {
        return Err(Error::Validation(format!(
            "sets '{set_a}' and '{set_b}' do not cover the same sentence ids"
        )));
    }
    if emb_a.dim != emb_b.dim {
        return Err(Error::DimensionMismatch {
            expected: emb_a.dim,
            found: emb_b.dim,
        });
    }
    let va = ids.iter().map(|id| emb_a.sentence_vector(id)).collect::<Result<Vec<_>>>()?;
    let vb = ids.iter().map(|id| emb_b.sentence_vector(id)).collect::<Result<Vec<_>>>()?;
    let pairs = policy.pairs(ids.len());
    let values = pairs
        .par_iter()
        .map(|&(i, j)| {
            cosine(&va[i], &vb[j]).map_err(|e| Error::Validation(format!("pair ({}, {}): {e}", ids[i], ids[j])))
        })
        .collect::<Result<Vec<_>>>()?;
    Ok(SimVector {
        set_a: set_a.into(),
        set_b: set_b.into(),
        ids,
        pairs,
        values,
    })
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct ConsistencyResult {
    pub l_pair_1: String,
    pub l_pair_2: String,
    pub model: String,
    pub spearman: f64,
}

/// Spearman correlation of two similarity vectors over the same pairs.
pub fn consistency(v1: &SimVector, v2: &SimVector, model: &str) -> Result<ConsistencyResult> {
    if v1.ids != v2.ids || v1.pairs != v2.pairs {
        return Err(Error::Validation(format!(
            "similarity vectors {} and {} cover different index pairs",
            v1.label(),
            v2.label()
        )));
    }
    if v1.values.len() < 3 {
        return Err(Error::Validation(format!(
            "{} pairs; at least 3 are needed",
            v1.values.len()
        )));
    }
    Ok(ConsistencyResult {
        l_pair_1: v1.label(),
        l_pair_2: v2.label(),
        model: model.into(),
        spearman: spearman(&v1.values, &v2.values)?,
    })
}

/// One report row: two `(set, set)` pairs to compare.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct PlanRow {
    pub pair_1: (String, String),
    pub pair_2: (String, String),
}

impl PlanRow {
    pub fn new(a: (&str, &str), b: (&str, &str)) -> Self {
        PlanRow {
            pair_1: (a.0.into(), a.1.into()),
            pair_2: (b.0.into(), b.1.into()),
        }
    }
}

/// Rows comparing monolingual and code-switched similarities.
pub fn real_plan() -> Vec<PlanRow> {
    vec![
        PlanRow::new(("en", "en"), ("cs", "cs")),
        PlanRow::new(("es", "es"), ("cs", "cs")),
        PlanRow::new(("en", "es"), ("cs", "en")),
        PlanRow::new(("en", "es"), ("cs", "es")),
    ]
}

/// The same comparisons for synthetic sets (for example `randCS`,
/// `NPesCS`, `NPenCS`).
pub fn synthetic_plan(names: &[&str]) -> Vec<PlanRow> {
    let mut self_rows = Vec::new();
    let mut cross_rows = Vec::new();
    for &s in names {
        self_rows.push(PlanRow::new((s, s), ("en", "en")));
        self_rows.push(PlanRow::new((s, s), ("es", "es")));
        cross_rows.push(PlanRow::new(("en", "es"), (s, "en")));
        cross_rows.push(PlanRow::new(("en", "es"), (s, "es")));
    }
    self_rows.extend(cross_rows);
    self_rows
}

pub const SYNTHETIC_SET_NAMES: [&str; 3] = ["randCS", "NPesCS", "NPenCS"];

#[derive(Debug, Clone, PartialEq, Default)]
pub struct ConsistencyReport {
    pub results: Vec<ConsistencyResult>,
    /// Similarity vectors used, keyed by label, for audit dumps.
    pub vectors: BTreeMap<String, SimVector>,
    pub skipped_rows: Vec<PlanRow>,
}

pub const CONSISTENCY_CSV_HEADER: &str = "l_pair_1,l_pair_2,model,spearman";

impl ConsistencyReport {
    pub fn to_csv(&self) -> String {
        let mut out = format!("{CONSISTENCY_CSV_HEADER}\n");
        for r in &self.results {
            let _ = writeln!(out, "{},{},{},{}", r.l_pair_1, r.l_pair_2, r.model, r.spearman);
        }
        out
    }
}

/// Evaluates every plan row whose sets are all present; rows naming a
/// missing set are skipped with a warning.
pub fn consistency_report(
    sets: &BTreeMap<String, EmbeddingSet>,
    plan: &[PlanRow],
    model: &str,
    include_diagonal: bool,
) -> Result<ConsistencyReport> {
    let mut report = ConsistencyReport::default();
    for row in plan {
        let names = [&row.pair_1.0, &row.pair_1.1, &row.pair_2.0, &row.pair_2.1];
        if let Some(missing) = names.iter().find(|n| !sets.contains_key(n.as_str())) {
            warn!("skipping row {:?}: no embeddings for set '{missing}'", row);
            report.skipped_rows.push(row.clone());
            continue;
        }
        let mut vector = |(a, b): &(String, String)| -> Result<SimVector> {
            let label = format!("{a}-{b}");
            if let Some(v) = report.vectors.get(&label) {
                return Ok(v.clone());
            }
            let v = build_sim_vector(a, &sets[a], b, &sets[b], PairPolicy::for_sets(a, b, include_diagonal))?;
            report.vectors.insert(label, v.clone());
            Ok(v)
        };
        let v1 = vector(&row.pair_1)?;
        let v2 = vector(&row.pair_2)?;
        report.results.push(consistency(&v1, &v2, model)?);
    }
    Ok(report)
}

/// Renames the records of a synthetic-sentence embedding set to the ids of
/// the parallel records they were generated from, so the set lines up with
/// the original sets.
pub fn rekey_by_source(set: &EmbeddingSet, synthetic: &[SyntheticRecord]) -> Result<EmbeddingSet> {
    let mut out = EmbeddingSet::new(set.model_name.clone(), set.layer, set.kind, set.dim);
    for r in synthetic {
        let m = set.get(&r.id).ok_or_else(|| Error::MissingRecord(r.id.clone()))?;
        if out.records.contains_key(&r.source_id) {
            return Err(Error::Validation(format!(
                "two synthetic records share source '{}'",
                r.source_id
            )));
        }
        out.insert(r.source_id.clone(), m.clone())?;
    }
    Ok(out)
}

use std::fs;
use std::io::Write;
use std::path::Path;

use log::warn;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use super::{mst_parse, predicted_distances, StructuralProbe};
use crate::embedstore::{EmbeddingKind, EmbeddingSet};
use crate::tree::DepTree;
use crate::{Error, Result};

/// One induced parse, serialized as `{"id", "n", "edges"}`.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct ParsedSentence {
    pub id: String,
    pub tree: DepTree,
}

#[derive(Serialize, Deserialize)]
struct ParseLine {
    id: String,
    n: usize,
    edges: Vec<[usize; 2]>,
}

/// Parses every record of a word-level embedding set (or only `ids`, when
/// given). Single-word records have no edges to predict and are returned in
/// the skipped list.
pub fn parse_corpus(
    probe: &StructuralProbe,
    words: &EmbeddingSet,
    ids: Option<&[String]>,
) -> Result<(Vec<ParsedSentence>, Vec<String>)> {
    if words.kind != EmbeddingKind::Word {
        return Err(Error::Header(format!("expected word embeddings, found {}", words.kind)));
    }
    if words.dim != probe.dim() {
        return Err(Error::DimensionMismatch {
            expected: probe.dim(),
            found: words.dim,
        });
    }
    let ids: Vec<String> = match ids {
        Some(ids) => ids.to_vec(),
        None => words.records.keys().cloned().collect(),
    };
    let results: Vec<Result<Option<ParsedSentence>>> = ids
        .par_iter()
        .map(|id| {
            let m = words.get(id).ok_or_else(|| Error::MissingRecord(id.clone()))?;
            if m.n_rows() < 2 {
                return Ok(None);
            }
            let d = predicted_distances(probe, &m.to_f64_rows())?;
            Ok(Some(ParsedSentence {
                id: id.clone(),
                tree: mst_parse(&d)?,
            }))
        })
        .collect();
    let mut parsed = Vec::new();
    let mut skipped = Vec::new();
    for (id, r) in ids.iter().zip(results) {
        match r? {
            Some(p) => parsed.push(p),
            None => {
                warn!("skipping single-word sentence '{id}'");
                skipped.push(id.clone());
            }
        }
    }
    Ok((parsed, skipped))
}

pub fn write_parses(parses: &[ParsedSentence], path: impl AsRef<Path>) -> Result<()> {
    let path = path.as_ref();
    let mut out = Vec::new();
    for p in parses {
        let line = ParseLine {
            id: p.id.clone(),
            n: p.tree.n(),
            edges: p.tree.edges().iter().map(|&(a, b)| [a, b]).collect(),
        };
        serde_json::to_writer(&mut out, &line)?;
        out.push(b'\n');
    }
    let mut f = fs::File::create(path).map_err(|e| Error::io(path, e))?;
    f.write_all(&out).map_err(|e| Error::io(path, e))
}

pub fn read_parses(path: impl AsRef<Path>) -> Result<Vec<ParsedSentence>> {
    let path = path.as_ref();
    let text = fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
    let mut out = Vec::new();
    for (i, line) in text.lines().enumerate() {
        if line.trim().is_empty() {
            continue;
        }
        let pl: ParseLine = serde_json::from_str(line).map_err(|e| Error::parse(path, i + 1, e.to_string()))?;
        let tree = DepTree::from_edges(pl.n, pl.edges.iter().map(|e| (e[0], e[1])))
            .map_err(|e| Error::parse(path, i + 1, format!("sentence '{}': {e}", pl.id)))?;
        out.push(ParsedSentence { id: pl.id, tree });
    }
    Ok(out)
}

//! The CSEM embedding container.
//!
//! Layout, little-endian throughout:
//!
//! ```text
//! magic        4 bytes  "CSEM"
//! version      u16      1
//! reserved     u16      0
//! header_len   u32
//! header       header_len bytes of UTF-8 JSON {"model","layer","kind","dim","count"}
//! count records, each:
//!   id_len     u32
//!   id         id_len bytes UTF-8
//!   n_rows     u32
//!   data       n_rows * dim f32, row-major
//! ```
//!
//! One file holds one (model, layer, kind) triple. Records are written sorted
//! by id, and the header JSON is written compactly with keys in the order
//! shown, so writing is canonical: equal sets produce identical bytes.

use std::collections::BTreeMap;
use std::fmt;
use std::fs;
use std::path::Path;
use std::str::FromStr;

use serde::{Deserialize, Serialize};

use crate::{Error, Result};

pub const MAGIC: &[u8; 4] = b"CSEM";
pub const VERSION: u16 = 1;

/// Bytes before the JSON header: magic, version, reserved, header_len.
pub const PREAMBLE_LEN: usize = 12;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum EmbeddingKind {
    /// One row per word.
    Word,
    /// One row per sentence, taken from the first special token.
    SentenceCls,
    /// One row per sentence, averaged over the input sequence.
    SentenceMean,
    /// A structural-probe projection matrix stored as a single record.
    ProbeMatrix,
}

impl EmbeddingKind {
    pub fn as_str(self) -> &'static str {
        match self {
            EmbeddingKind::Word => "word",
            EmbeddingKind::SentenceCls => "sentence_cls",
            EmbeddingKind::SentenceMean => "sentence_mean",
            EmbeddingKind::ProbeMatrix => "probe_matrix",
        }
    }

    pub fn is_sentence_level(self) -> bool {
        matches!(self, EmbeddingKind::SentenceCls | EmbeddingKind::SentenceMean)
    }
}

impl fmt::Display for EmbeddingKind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

impl FromStr for EmbeddingKind {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "word" => Ok(EmbeddingKind::Word),
            "sentence_cls" => Ok(EmbeddingKind::SentenceCls),
            "sentence_mean" => Ok(EmbeddingKind::SentenceMean),
            "probe_matrix" => Ok(EmbeddingKind::ProbeMatrix),
            other => Err(Error::Config(format!("unknown embedding kind '{other}'"))),
        }
    }
}

/// Row-major `n_rows x dim` block of 32-bit floats.
#[derive(Debug, Clone, PartialEq)]
pub struct Matrix {
    n_rows: usize,
    dim: usize,
    data: Vec<f32>,
}

impl Matrix {
    pub fn new(n_rows: usize, dim: usize, data: Vec<f32>) -> Result<Self> {
        if data.len() != n_rows * dim {
            return Err(Error::LengthMismatch(format!(
                "{} values for a {n_rows}x{dim} matrix",
                data.len()
            )));
        }
        Ok(Matrix { n_rows, dim, data })
    }

    pub fn from_rows(rows: &[Vec<f32>]) -> Result<Self> {
        let dim = rows.first().map_or(0, Vec::len);
        let mut data = Vec::with_capacity(rows.len() * dim);
        for r in rows {
            if r.len() != dim {
                return Err(Error::DimensionMismatch {
                    expected: dim,
                    found: r.len(),
                });
            }
            data.extend_from_slice(r);
        }
        Ok(Matrix {
            n_rows: rows.len(),
            dim,
            data,
        })
    }

    pub fn n_rows(&self) -> usize {
        self.n_rows
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    pub fn data(&self) -> &[f32] {
        &self.data
    }

    pub fn row(&self, i: usize) -> &[f32] {
        &self.data[i * self.dim..(i + 1) * self.dim]
    }

    pub fn rows(&self) -> impl Iterator<Item = &[f32]> {
        // chunks_exact(0) panics; a zero-width matrix has no data anyway.
        self.data.chunks_exact(self.dim.max(1)).take(self.n_rows)
    }

    /// Rows widened to f64.
    pub fn to_f64_rows(&self) -> Vec<Vec<f64>> {
        self.rows().map(|r| r.iter().map(|&v| f64::from(v)).collect()).collect()
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct EmbeddingSet {
    pub model_name: String,
    pub layer: u32,
    pub kind: EmbeddingKind,
    pub dim: usize,
    pub records: BTreeMap<String, Matrix>,
}

impl EmbeddingSet {
    pub fn new(model_name: impl Into<String>, layer: u32, kind: EmbeddingKind, dim: usize) -> Self {
        EmbeddingSet {
            model_name: model_name.into(),
            layer,
            kind,
            dim,
            records: BTreeMap::new(),
        }
    }

    /// Adds a record, enforcing the set invariants.
    pub fn insert(&mut self, id: impl Into<String>, matrix: Matrix) -> Result<()> {
        let id = id.into();
        check_record(self.kind, self.dim, &id, &matrix)?;
        self.records.insert(id, matrix);
        Ok(())
    }

    pub fn get(&self, id: &str) -> Option<&Matrix> {
        self.records.get(id)
    }

    pub fn len(&self) -> usize {
        self.records.len()
    }

    pub fn is_empty(&self) -> bool {
        self.records.is_empty()
    }

    pub fn validate(&self) -> Result<()> {
        if self.dim == 0 {
            return Err(Error::Header("dim must be positive".into()));
        }
        for (id, m) in &self.records {
            check_record(self.kind, self.dim, id, m)?;
        }
        Ok(())
    }

    /// The single vector of a sentence-level record, widened to f64. Word
    /// records are mean-pooled.
    pub fn sentence_vector(&self, id: &str) -> Result<Vec<f64>> {
        let m = self.get(id).ok_or_else(|| Error::MissingRecord(id.to_string()))?;
        if self.kind.is_sentence_level() {
            Ok(m.row(0).iter().map(|&v| f64::from(v)).collect())
        } else {
            mean_pool(m)
        }
    }
}

fn check_record(kind: EmbeddingKind, dim: usize, id: &str, m: &Matrix) -> Result<()> {
    if m.dim != dim {
        return Err(Error::DimensionMismatch {
            expected: dim,
            found: m.dim,
        });
    }
    if kind.is_sentence_level() && m.n_rows != 1 {
        return Err(Error::Validation(format!(
            "sentence-level record '{id}' has {} rows",
            m.n_rows
        )));
    }
    if let Some(pos) = m.data.iter().position(|v| !v.is_finite()) {
        return Err(Error::NonFinite {
            id: id.to_string(),
            row: pos / dim,
            col: pos % dim,
        });
    }
    Ok(())
}

#[derive(Serialize, Deserialize)]
struct Header {
    model: String,
    layer: u32,
    kind: EmbeddingKind,
    dim: usize,
    count: usize,
}

/// Serializes a set into container bytes.
pub fn encode(set: &EmbeddingSet) -> Result<Vec<u8>> {
    set.validate()?;
    let header = serde_json::to_vec(&Header {
        model: set.model_name.clone(),
        layer: set.layer,
        kind: set.kind,
        dim: set.dim,
        count: set.records.len(),
    })?;
    let mut out = Vec::with_capacity(PREAMBLE_LEN + header.len());
    out.extend_from_slice(MAGIC);
    out.extend_from_slice(&VERSION.to_le_bytes());
    out.extend_from_slice(&0u16.to_le_bytes());
    out.extend_from_slice(&len_u32(header.len())?.to_le_bytes());
    out.extend_from_slice(&header);
    for (id, m) in &set.records {
        out.extend_from_slice(&len_u32(id.len())?.to_le_bytes());
        out.extend_from_slice(id.as_bytes());
        out.extend_from_slice(&len_u32(m.n_rows)?.to_le_bytes());
        for v in &m.data {
            out.extend_from_slice(&v.to_le_bytes());
        }
    }
    Ok(out)
}

fn len_u32(n: usize) -> Result<u32> {
    u32::try_from(n).map_err(|_| Error::Validation(format!("length {n} does not fit in u32")))
}

struct Cursor<'a> {
    buf: &'a [u8],
    pos: usize,
}

impl<'a> Cursor<'a> {
    fn take(&mut self, n: usize, what: &str) -> Result<&'a [u8]> {
        if self.buf.len() - self.pos < n {
            return Err(Error::Truncated(format!(
                "need {n} bytes for {what} at offset {}, {} left",
                self.pos,
                self.buf.len() - self.pos
            )));
        }
        let s = &self.buf[self.pos..self.pos + n];
        self.pos += n;
        Ok(s)
    }

    fn u16(&mut self, what: &str) -> Result<u16> {
        let b = self.take(2, what)?;
        Ok(u16::from_le_bytes([b[0], b[1]]))
    }

    fn u32(&mut self, what: &str) -> Result<u32> {
        let b = self.take(4, what)?;
        Ok(u32::from_le_bytes([b[0], b[1], b[2], b[3]]))
    }

    fn remaining(&self) -> usize {
        self.buf.len() - self.pos
    }
}

/// Parses container bytes. Allocation is bounded by the input length: every
/// declared size is checked against the remaining bytes before use.
pub fn decode(bytes: &[u8]) -> Result<EmbeddingSet> {
    let mut cur = Cursor { buf: bytes, pos: 0 };
    let magic = cur.take(4, "magic")?;
    if magic != MAGIC {
        let mut found = [0u8; 4];
        found.copy_from_slice(magic);
        return Err(Error::BadMagic { found });
    }
    let version = cur.u16("version")?;
    if version != VERSION {
        return Err(Error::UnsupportedVersion(version));
    }
    let reserved = cur.u16("reserved")?;
    if reserved != 0 {
        return Err(Error::Header(format!("reserved field is {reserved}, expected 0")));
    }
    let header_len = cur.u32("header length")? as usize;
    let header_bytes = cur.take(header_len, "header")?;
    let header: Header = serde_json::from_slice(header_bytes)
        .map_err(|e| Error::Header(format!("header JSON: {e}")))?;
    if header.dim == 0 {
        return Err(Error::Header("dim must be positive".into()));
    }
    // Each record is at least 8 bytes, which bounds any believable count.
    if header.count > cur.remaining() / 8 {
        return Err(Error::Truncated(format!(
            "header declares {} records but only {} bytes follow",
            header.count,
            cur.remaining()
        )));
    }

    let mut set = EmbeddingSet::new(header.model, header.layer, header.kind, header.dim);
    for k in 0..header.count {
        let id_len = cur.u32("record id length")? as usize;
        let id = std::str::from_utf8(cur.take(id_len, "record id")?)
            .map_err(|_| Error::Header(format!("record {k} id is not UTF-8")))?
            .to_string();
        let n_rows = cur.u32("row count")? as usize;
        let n_bytes = n_rows
            .checked_mul(header.dim)
            .and_then(|n| n.checked_mul(4))
            .ok_or_else(|| Error::Truncated(format!("record '{id}' size overflows")))?;
        let raw = cur.take(n_bytes, "record data")?;
        let data: Vec<f32> = raw
            .chunks_exact(4)
            .map(|c| f32::from_le_bytes([c[0], c[1], c[2], c[3]]))
            .collect();
        let m = Matrix {
            n_rows,
            dim: header.dim,
            data,
        };
        check_record(set.kind, set.dim, &id, &m)?;
        if set.records.insert(id.clone(), m).is_some() {
            return Err(Error::Validation(format!("duplicate record id '{id}'")));
        }
    }
    if cur.remaining() != 0 {
        return Err(Error::Header(format!(
            "{} trailing bytes after the last record",
            cur.remaining()
        )));
    }
    Ok(set)
}

pub fn read_container(path: impl AsRef<Path>) -> Result<EmbeddingSet> {
    let path = path.as_ref();
    let bytes = fs::read(path).map_err(|e| Error::io(path, e))?;
    decode(&bytes)
}

pub fn write_container(set: &EmbeddingSet, path: impl AsRef<Path>) -> Result<()> {
    let path = path.as_ref();
    let bytes = encode(set)?;
    fs::write(path, bytes).map_err(|e| Error::io(path, e))
}

/// Column means of the rows, in f64.
pub fn mean_pool(words: &Matrix) -> Result<Vec<f64>> {
    if words.n_rows == 0 {
        return Err(Error::Empty("mean pooling over zero rows".into()));
    }
    let mut acc = vec![0.0f64; words.dim];
    for row in words.rows() {
        for (a, &v) in acc.iter_mut().zip(row) {
            *a += f64::from(v);
        }
    }
    let n = words.n_rows as f64;
    Ok(acc.into_iter().map(|s| s / n).collect())
}

use std::collections::HashSet;
use std::fs;
use std::io::{BufWriter, Write};
use std::path::Path;

use serde::{Deserialize, Serialize};

use super::LidLabel;
use crate::{Error, Result};

/// One code-switched sentence with its Spanish and English translations.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ParallelCsRecord {
    pub id: String,
    pub cs: String,
    pub es: String,
    pub en: String,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub cs_tokens: Option<Vec<(String, LidLabel)>>,
}

impl ParallelCsRecord {
    fn validate(&self) -> std::result::Result<(), String> {
        for (name, value) in [("id", &self.id), ("cs", &self.cs), ("es", &self.es), ("en", &self.en)] {
            if value.trim().is_empty() {
                return Err(format!("field \"{name}\" is empty"));
            }
        }
        if let Some(tokens) = &self.cs_tokens {
            let joined = tokens.iter().map(|(f, _)| f.as_str()).collect::<Vec<_>>().join(" ");
            if whitespace_tokens(&joined) != whitespace_tokens(&self.cs) {
                return Err("cs_tokens do not reproduce the cs text".into());
            }
        }
        Ok(())
    }

    pub fn cs_tokens(&self) -> Vec<&str> {
        whitespace_tokens(&self.cs)
    }
}

/// Splits on Unicode whitespace. Punctuation stays attached to words.
pub fn whitespace_tokens(text: &str) -> Vec<&str> {
    text.split_whitespace().collect()
}

#[derive(Debug, Clone, Default, PartialEq)]
pub struct ParallelCsCorpus {
    pub records: Vec<ParallelCsRecord>,
}

impl ParallelCsCorpus {
    pub fn len(&self) -> usize {
        self.records.len()
    }

    pub fn is_empty(&self) -> bool {
        self.records.is_empty()
    }

    pub fn get(&self, id: &str) -> Option<&ParallelCsRecord> {
        self.records.iter().find(|r| r.id == id)
    }

    /// All per-token labels of the code-switched side, in order. Every record
    /// must carry `cs_tokens`.
    pub fn token_labels(&self) -> Result<Vec<LidLabel>> {
        let mut out = Vec::new();
        for r in &self.records {
            let tokens = r.cs_tokens.as_ref().ok_or_else(|| {
                Error::Validation(format!("record '{}' has no cs_tokens labels", r.id))
            })?;
            out.extend(tokens.iter().map(|(_, l)| *l));
        }
        Ok(out)
    }
}

pub fn load_parallel_corpus(path: impl AsRef<Path>) -> Result<ParallelCsCorpus> {
    let path = path.as_ref();
    let text = fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
    parse_parallel_corpus(&text, path)
}

/// Parses JSON-lines text; `origin` is only used in error messages.
pub fn parse_parallel_corpus(text: &str, origin: &Path) -> Result<ParallelCsCorpus> {
    let mut records = Vec::new();
    let mut seen = HashSet::new();
    for (i, line) in text.lines().enumerate() {
        let lineno = i + 1;
        if line.trim().is_empty() {
            continue;
        }
        let record: ParallelCsRecord =
            serde_json::from_str(line).map_err(|e| Error::parse(origin, lineno, e.to_string()))?;
        record
            .validate()
            .map_err(|msg| Error::parse(origin, lineno, msg))?;
        if !seen.insert(record.id.clone()) {
            return Err(Error::Validation(format!(
                "{}:{lineno}: duplicate record id '{}'",
                origin.display(),
                record.id
            )));
        }
        records.push(record);
    }
    Ok(ParallelCsCorpus { records })
}

pub fn write_parallel_corpus(corpus: &ParallelCsCorpus, path: impl AsRef<Path>) -> Result<()> {
    let path = path.as_ref();
    let file = fs::File::create(path).map_err(|e| Error::io(path, e))?;
    let mut w = BufWriter::new(file);
    for r in &corpus.records {
        serde_json::to_writer(&mut w, r)?;
        w.write_all(b"\n").map_err(|e| Error::io(path, e))?;
    }
    w.flush().map_err(|e| Error::io(path, e))
}

//! Synthetic code-switched text from parallel monolingual sentences.
//!
//! Two methods are provided: replacing random tokens with their aligned
//! translations ([`gen_random`]), and replacing whole noun phrases of a
//! matrix-language sentence with their aligned translations ([`gen_np`]).
//! Translation is driven entirely by word alignments between the English
//! and Spanish sides of each record, with an optional word dictionary as a
//! fallback for the random method.

mod np;

use std::collections::{BTreeMap, BTreeSet};
use std::fmt;
use std::fs;
use std::io::{BufWriter, Write};
use std::path::Path;
use std::str::FromStr;

use rand::Rng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

pub use np::{gen_np, identify_noun_phrases, NpRules, NounPhraseSpan};

use crate::corpus::{
    whitespace_tokens, AlignmentRecord, ConlluSentence, CorpusStats, LidLabel, ParallelCsCorpus,
    ParallelCsRecord, StatsCategory,
};
use crate::{fnv1a, seeded_rng, Error, Result};

pub const DEFAULT_P_SWITCH: f64 = 0.5;

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Language {
    En,
    Es,
}

impl Language {
    pub fn category(self) -> StatsCategory {
        match self {
            Language::En => StatsCategory::En,
            Language::Es => StatsCategory::Es,
        }
    }

    pub fn other(self) -> Language {
        match self {
            Language::En => Language::Es,
            Language::Es => Language::En,
        }
    }

    fn side(self, record: &ParallelCsRecord) -> &str {
        match self {
            Language::En => &record.en,
            Language::Es => &record.es,
        }
    }
}

/// Translation direction: tokens of `source` are replaced by tokens of the
/// other language.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
pub enum Direction {
    #[serde(rename = "en-es")]
    EnToEs,
    #[serde(rename = "es-en")]
    EsToEn,
}

impl Direction {
    pub fn from_source(source: Language) -> Self {
        match source {
            Language::En => Direction::EnToEs,
            Language::Es => Direction::EsToEn,
        }
    }

    pub fn source(self) -> Language {
        match self {
            Direction::EnToEs => Language::En,
            Direction::EsToEn => Language::Es,
        }
    }

    pub fn target(self) -> Language {
        self.source().other()
    }
}

impl FromStr for Direction {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "en-es" => Ok(Direction::EnToEs),
            "es-en" => Ok(Direction::EsToEn),
            other => Err(Error::Config(format!("unknown direction '{other}', expected en-es or es-en"))),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Method {
    Random,
    NpEnMatrix,
    NpEsMatrix,
}

impl Method {
    pub fn as_str(self) -> &'static str {
        match self {
            Method::Random => "random",
            Method::NpEnMatrix => "np_en_matrix",
            Method::NpEsMatrix => "np_es_matrix",
        }
    }
}

impl fmt::Display for Method {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

/// Word alignments per record (English to Spanish) plus optional per-direction
/// word dictionaries keyed by lowercased source form.
#[derive(Debug, Clone, Default, PartialEq)]
pub struct TranslationLexicon {
    alignments: BTreeMap<String, AlignmentRecord>,
    dictionaries: BTreeMap<Direction, BTreeMap<String, String>>,
}

impl TranslationLexicon {
    pub fn new() -> Self {
        Self::default()
    }

    /// Pairs the i-th alignment line with the i-th corpus record and checks
    /// index ranges against the whitespace tokens of `en` and `es`.
    pub fn from_corpus(corpus: &ParallelCsCorpus, alignments: Vec<AlignmentRecord>) -> Result<Self> {
        if alignments.len() != corpus.len() {
            return Err(Error::LengthMismatch(format!(
                "{} alignment lines for {} corpus records",
                alignments.len(),
                corpus.len()
            )));
        }
        let mut lex = Self::new();
        for (record, a) in corpus.records.iter().zip(alignments) {
            lex.insert_alignment(record, a)?;
        }
        Ok(lex)
    }

    pub fn insert_alignment(&mut self, record: &ParallelCsRecord, en_to_es: AlignmentRecord) -> Result<()> {
        en_to_es
            .check_ranges(whitespace_tokens(&record.en).len(), whitespace_tokens(&record.es).len())
            .map_err(|e| Error::Validation(format!("record '{}': {e}", record.id)))?;
        self.alignments.insert(record.id.clone(), en_to_es);
        Ok(())
    }

    pub fn add_entry(&mut self, direction: Direction, source: &str, target: &str) {
        self.dictionaries
            .entry(direction)
            .or_default()
            .insert(source.to_lowercase(), target.to_string());
    }

    /// Reads `source<TAB>target` lines; blank lines and `#` comments are
    /// ignored.
    pub fn load_dictionary(&mut self, direction: Direction, path: impl AsRef<Path>) -> Result<()> {
        let path = path.as_ref();
        let text = fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
        for (i, line) in text.lines().enumerate() {
            if line.trim().is_empty() || line.starts_with('#') {
                continue;
            }
            let (s, t) = line
                .split_once('\t')
                .ok_or_else(|| Error::parse(path, i + 1, "expected source<TAB>target"))?;
            if s.is_empty() || t.is_empty() {
                return Err(Error::parse(path, i + 1, "empty dictionary field"));
            }
            self.add_entry(direction, s, t);
        }
        Ok(())
    }

    /// Alignment of a record in the given direction.
    pub fn alignment(&self, id: &str, direction: Direction) -> Option<AlignmentRecord> {
        let a = self.alignments.get(id)?;
        Some(match direction {
            Direction::EnToEs => a.clone(),
            Direction::EsToEn => a.inverted(),
        })
    }

    pub fn has_dictionary(&self, direction: Direction) -> bool {
        self.dictionaries.get(&direction).is_some_and(|d| !d.is_empty())
    }

    pub fn lookup(&self, direction: Direction, form: &str) -> Option<&str> {
        self.dictionaries
            .get(&direction)?
            .get(&form.to_lowercase())
            .map(String::as_str)
    }
}

/// One generated sentence, serialized as a JSONL line.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SyntheticRecord {
    pub id: String,
    pub text: String,
    pub method: Method,
    pub source_id: String,
    /// Replaced source-token ranges, end exclusive.
    pub replaced_spans: Vec<(usize, usize)>,
}

/// A generated record together with per-token bookkeeping.
#[derive(Debug, Clone, PartialEq)]
pub struct Generated {
    pub record: SyntheticRecord,
    /// Reporting category of every output token.
    pub token_categories: Vec<StatsCategory>,
    /// Tokens selected for replacement that had no alignment or dictionary
    /// entry and were kept.
    pub unaligned: usize,
    /// Replacements whose text equals the source text.
    pub noop: usize,
    /// Noun phrases kept because nothing in the target was aligned to them.
    pub skipped_spans: usize,
}

/// Capitalizes the first letter of `replacement` when `source` starts with
/// an uppercase letter. Never lowercases.
fn match_case(source: &str, replacement: &str) -> String {
    let source_upper = source.chars().next().is_some_and(char::is_uppercase);
    let mut chars = replacement.chars();
    match chars.next() {
        Some(c) if source_upper && c.is_lowercase() => c.to_uppercase().chain(chars).collect(),
        _ => replacement.to_string(),
    }
}

/// Punctuation, numbers, user mentions, hashtags and URLs carry no language.
fn is_language_neutral(form: &str) -> bool {
    form.starts_with('@')
        || form.starts_with('#')
        || ["http://", "https://", "www."].iter().any(|p| form.to_lowercase().starts_with(p))
        || !form.chars().any(char::is_alphabetic)
}

/// Category of a generated token: neutral tokens are `other`, forms tagged
/// as named entities in the record's code-switched side are `ne`, and the
/// rest take the language they came from.
fn categorize(form: &str, origin: Language, named_entities: &BTreeSet<&str>) -> StatsCategory {
    if is_language_neutral(form) {
        StatsCategory::Other
    } else if named_entities.contains(form) {
        StatsCategory::Ne
    } else {
        origin.category()
    }
}

fn named_entities(record: &ParallelCsRecord) -> BTreeSet<&str> {
    record
        .cs_tokens
        .iter()
        .flatten()
        .filter(|(_, l)| *l == LidLabel::Ne)
        .map(|(f, _)| f.as_str())
        .collect()
}

/// Seed for one record: the run seed mixed with a hash of the record id, so
/// results do not depend on record order or parallelism.
pub fn record_seed(seed: u64, id: &str) -> u64 {
    seed ^ fnv1a(id.as_bytes())
}

/// Replaces each source token, independently with probability `p_switch`,
/// by its aligned target tokens (ascending target order), falling back to
/// the dictionary. Tokens with neither are kept and counted as unaligned.
pub fn gen_random(
    record: &ParallelCsRecord,
    direction: Direction,
    p_switch: f64,
    lexicon: &TranslationLexicon,
    seed: u64,
) -> Result<Generated> {
    if !(0.0..=1.0).contains(&p_switch) {
        return Err(Error::Config(format!("p_switch {p_switch} outside [0, 1]")));
    }
    let alignment = lexicon.alignment(&record.id, direction);
    if alignment.is_none() && !lexicon.has_dictionary(direction) {
        return Err(Error::Validation(format!(
            "record '{}' has no alignment and no dictionary is loaded",
            record.id
        )));
    }
    let src = whitespace_tokens(direction.source().side(record));
    let tgt = whitespace_tokens(direction.target().side(record));
    let nes = named_entities(record);
    let mut rng = seeded_rng(record_seed(seed, &record.id));

    let mut out = Vec::with_capacity(src.len());
    let mut cats = Vec::with_capacity(src.len());
    let mut spans = Vec::new();
    let (mut unaligned, mut noop) = (0, 0);
    for (i, &token) in src.iter().enumerate() {
        // one draw per token, whether or not it is used
        let u: f64 = rng.random();
        let keep = |out: &mut Vec<String>, cats: &mut Vec<StatsCategory>| {
            out.push(token.to_string());
            cats.push(categorize(token, direction.source(), &nes));
        };
        if u >= p_switch {
            keep(&mut out, &mut cats);
            continue;
        }
        let targets = alignment.as_ref().map(|a| a.targets_of(|s| s == i)).unwrap_or_default();
        let replacement: Vec<String> = if !targets.is_empty() {
            targets.iter().map(|&t| tgt[t].to_string()).collect()
        } else if let Some(word) = lexicon.lookup(direction, token) {
            whitespace_tokens(word).into_iter().map(str::to_string).collect()
        } else {
            unaligned += 1;
            keep(&mut out, &mut cats);
            continue;
        };
        let mut replacement = replacement;
        replacement[0] = match_case(token, &replacement[0]);
        if replacement.len() == 1 && replacement[0] == token {
            noop += 1;
        }
        for r in replacement {
            cats.push(categorize(&r, direction.target(), &nes));
            out.push(r);
        }
        spans.push((i, i + 1));
    }
    Ok(Generated {
        record: SyntheticRecord {
            id: format!("{}-{}", record.id, Method::Random),
            text: out.join(" "),
            method: Method::Random,
            source_id: record.id.clone(),
            replaced_spans: spans,
        },
        token_categories: cats,
        unaligned,
        noop,
        skipped_spans: 0,
    })
}

#[derive(Debug, Clone, PartialEq)]
pub enum GenerationMethod {
    Random { direction: Direction, p_switch: f64 },
    NounPhrase { matrix: Language, rules: NpRules },
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct SkippedRecord {
    pub id: String,
    pub reason: String,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct GenerationReport {
    pub method: Option<Method>,
    pub n_input: usize,
    pub n_generated: usize,
    pub skipped_records: Vec<SkippedRecord>,
    pub replaced_spans: usize,
    pub unaligned_tokens: usize,
    pub noop_replacements: usize,
    pub skipped_spans: usize,
    pub stats: CorpusStats,
}

/// Runs one method over every record. Records that cannot be generated
/// (missing alignment, missing parse, token mismatch) are skipped and listed
/// in the report; nothing here is fatal except an invalid `p_switch`.
///
/// `parses` maps record id to the dependency parse of the matrix-language
/// side and is only consulted by the noun-phrase method.
pub fn gen_corpus(
    corpus: &ParallelCsCorpus,
    method: &GenerationMethod,
    lexicon: &TranslationLexicon,
    parses: &BTreeMap<String, ConlluSentence>,
    seed: u64,
) -> Result<(Vec<SyntheticRecord>, GenerationReport)> {
    if let GenerationMethod::Random { p_switch, .. } = method {
        if !(0.0..=1.0).contains(p_switch) {
            return Err(Error::Config(format!("p_switch {p_switch} outside [0, 1]")));
        }
    }
    let results: Vec<Result<Generated>> = corpus
        .records
        .par_iter()
        .map(|record| match method {
            GenerationMethod::Random { direction, p_switch } => {
                gen_random(record, *direction, *p_switch, lexicon, seed)
            }
            GenerationMethod::NounPhrase { matrix, rules } => {
                let parse = parses.get(&record.id).ok_or_else(|| {
                    Error::MissingRecord(record.id.clone())
                })?;
                gen_np(record, *matrix, parse, lexicon, rules)
            }
        })
        .collect();

    let mut records = Vec::new();
    let mut counts = [0usize; 5];
    let mut report = GenerationReport {
        method: None,
        n_input: corpus.len(),
        n_generated: 0,
        skipped_records: Vec::new(),
        replaced_spans: 0,
        unaligned_tokens: 0,
        noop_replacements: 0,
        skipped_spans: 0,
        stats: CorpusStats::from_counts(counts),
    };
    for (record, r) in corpus.records.iter().zip(results) {
        match r {
            Ok(g) => {
                report.method = Some(g.record.method);
                report.replaced_spans += g.record.replaced_spans.len();
                report.unaligned_tokens += g.unaligned;
                report.noop_replacements += g.noop;
                report.skipped_spans += g.skipped_spans;
                for c in &g.token_categories {
                    counts[StatsCategory::ALL.iter().position(|x| x == c).unwrap_or(4)] += 1;
                }
                records.push(g.record);
            }
            Err(e) => {
                log::warn!("skipping record '{}': {e}", record.id);
                report.skipped_records.push(SkippedRecord {
                    id: record.id.clone(),
                    reason: e.to_string(),
                });
            }
        }
    }
    report.n_generated = records.len();
    report.stats = CorpusStats::from_counts(counts);
    Ok((records, report))
}

pub fn write_synthetic(records: &[SyntheticRecord], path: impl AsRef<Path>) -> Result<()> {
    let path = path.as_ref();
    let file = fs::File::create(path).map_err(|e| Error::io(path, e))?;
    let mut w = BufWriter::new(file);
    for r in records {
        serde_json::to_writer(&mut w, r)?;
        w.write_all(b"\n").map_err(|e| Error::io(path, e))?;
    }
    w.flush().map_err(|e| Error::io(path, e))
}

pub fn read_synthetic(path: impl AsRef<Path>) -> Result<Vec<SyntheticRecord>> {
    let path = path.as_ref();
    let text = fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
    text.lines()
        .enumerate()
        .filter(|(_, l)| !l.trim().is_empty())
        .map(|(i, l)| serde_json::from_str(l).map_err(|e| Error::parse(path, i + 1, e.to_string())))
        .collect()
}

#[cfg(test)]
mod tests;

use serde::{Deserialize, Serialize};

use super::{categorize, match_case, named_entities, Direction, Generated, Language, Method, SyntheticRecord};
use crate::corpus::{whitespace_tokens, ConlluSentence, ParallelCsRecord};
use crate::{Error, Result};

/// Token range `start..end` within one sentence.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
pub struct NounPhraseSpan {
    pub start: usize,
    pub end: usize,
}

impl NounPhraseSpan {
    pub fn len(&self) -> usize {
        self.end - self.start
    }

    pub fn is_empty(&self) -> bool {
        self.end == self.start
    }

    pub fn contains(&self, i: usize) -> bool {
        (self.start..self.end).contains(&i)
    }

    fn overlaps(&self, other: &NounPhraseSpan) -> bool {
        self.start < other.end && other.start < self.end
    }
}

/// Which words head a noun phrase and which dependency relations pull a
/// dependent into it. Relation subtypes (`flat:name`) match their base.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct NpRules {
    pub head_upos: Vec<String>,
    pub relations: Vec<String>,
}

impl Default for NpRules {
    fn default() -> Self {
        let s = |xs: &[&str]| xs.iter().map(|x| x.to_string()).collect();
        NpRules {
            head_upos: s(&["NOUN", "PROPN", "PRON"]),
            relations: s(&["det", "amod", "nummod", "compound", "flat"]),
        }
    }
}

/// Noun-phrase spans of a parsed sentence. Each nominal head is grown by
/// following allowed relations downward (recursively); its span runs from
/// the leftmost to the rightmost word reached. Longer spans win over the
/// spans they overlap, so nested phrases collapse into the outermost one.
pub fn identify_noun_phrases(sentence: &ConlluSentence, rules: &NpRules) -> Vec<NounPhraseSpan> {
    let children = sentence.children();
    let allowed = |deprel: &str| {
        let base = deprel.split(':').next().unwrap_or(deprel);
        rules.relations.iter().any(|r| r == base)
    };
    let mut candidates = Vec::new();
    for (h, word) in sentence.words.iter().enumerate() {
        if !rules.head_upos.contains(&word.upos) {
            continue;
        }
        let (mut lo, mut hi) = (h, h);
        let mut stack = vec![h];
        while let Some(v) = stack.pop() {
            for &c in &children[v] {
                if allowed(&sentence.words[c].deprel) {
                    lo = lo.min(c);
                    hi = hi.max(c);
                    stack.push(c);
                }
            }
        }
        candidates.push(NounPhraseSpan { start: lo, end: hi + 1 });
    }
    candidates.sort_by(|a, b| b.len().cmp(&a.len()).then(a.start.cmp(&b.start)));
    let mut kept: Vec<NounPhraseSpan> = Vec::new();
    for c in candidates {
        if !kept.iter().any(|k| k.overlaps(&c)) {
            kept.push(c);
        }
    }
    kept.sort();
    kept
}

/// Replaces every noun phrase of the matrix-language sentence with the
/// target tokens aligned to it, in target order. Phrases with no aligned
/// target token are left in place and counted.
pub fn gen_np(
    record: &ParallelCsRecord,
    matrix: Language,
    parse: &ConlluSentence,
    lexicon: &super::TranslationLexicon,
    rules: &NpRules,
) -> Result<Generated> {
    let direction = Direction::from_source(matrix);
    let src = whitespace_tokens(matrix.side(record));
    if src != parse.forms() {
        return Err(Error::Validation(format!(
            "record '{}': parse tokens do not match the {} sentence",
            record.id,
            if matrix == Language::En { "en" } else { "es" }
        )));
    }
    let alignment = lexicon
        .alignment(&record.id, direction)
        .ok_or_else(|| Error::Validation(format!("record '{}' has no alignment", record.id)))?;
    let tgt = whitespace_tokens(matrix.other().side(record));
    let nes = named_entities(record);
    let method = match matrix {
        Language::En => Method::NpEnMatrix,
        Language::Es => Method::NpEsMatrix,
    };

    let spans = identify_noun_phrases(parse, rules);
    let mut out = Vec::new();
    let mut cats = Vec::new();
    let mut replaced = Vec::new();
    let (mut skipped, mut noop) = (0, 0);
    let mut i = 0;
    let mut k = 0;
    while i < src.len() {
        if k == spans.len() || spans[k].start != i {
            out.push(src[i].to_string());
            cats.push(categorize(src[i], matrix, &nes));
            i += 1;
            continue;
        }
        let span = spans[k];
        k += 1;
        let targets = alignment.targets_of(|s| span.contains(s));
        if targets.is_empty() {
            skipped += 1;
            for t in &src[span.start..span.end] {
                out.push(t.to_string());
                cats.push(categorize(t, matrix, &nes));
            }
        } else {
            let mut words: Vec<String> = targets.iter().map(|&t| tgt[t].to_string()).collect();
            words[0] = match_case(src[span.start], &words[0]);
            if words.iter().map(String::as_str).eq(src[span.start..span.end].iter().copied()) {
                noop += 1;
            }
            for w in words {
                cats.push(categorize(&w, matrix.other(), &nes));
                out.push(w);
            }
            replaced.push((span.start, span.end));
        }
        i = span.end;
    }
    Ok(Generated {
        record: SyntheticRecord {
            id: format!("{}-{}", record.id, method),
            text: out.join(" "),
            method,
            source_id: record.id.clone(),
            replaced_spans: replaced,
        },
        token_categories: cats,
        unaligned: 0,
        noop,
        skipped_spans: skipped,
    })
}

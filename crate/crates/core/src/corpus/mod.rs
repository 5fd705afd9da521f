//! Corpus ingestion: parallel code-switched records, token-level language
//! tags, CoNLL-U treebanks and word alignments.

mod alignment;
mod conllu;
mod lid;
mod parallel;
mod stats;

use std::fmt;
use std::str::FromStr;

use serde::{Deserialize, Serialize};

pub use alignment::{load_alignments, parse_alignment_line, write_alignments, AlignmentRecord};
pub use conllu::{load_conllu, parse_conllu, write_conllu, ConlluSentence, ConlluWord};
pub use lid::{intra_sentential_filter, load_lid_file, parse_lid, write_lid_file, LidSentence, LidToken};
pub use parallel::{
    load_parallel_corpus, parse_parallel_corpus, whitespace_tokens, write_parallel_corpus,
    ParallelCsCorpus, ParallelCsRecord,
};
pub use stats::{corpus_stats, CategoryCount, CorpusStats, StatsCategory, StatsMapping};

/// Token-level language tag.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum LidLabel {
    /// English
    Lang1,
    /// Spanish
    Lang2,
    Other,
    Ne,
    Fw,
    Mixed,
    Unk,
    Ambiguous,
}

impl LidLabel {
    pub const ALL: [LidLabel; 8] = [
        LidLabel::Lang1,
        LidLabel::Lang2,
        LidLabel::Other,
        LidLabel::Ne,
        LidLabel::Fw,
        LidLabel::Mixed,
        LidLabel::Unk,
        LidLabel::Ambiguous,
    ];

    pub fn as_str(self) -> &'static str {
        match self {
            LidLabel::Lang1 => "lang1",
            LidLabel::Lang2 => "lang2",
            LidLabel::Other => "other",
            LidLabel::Ne => "ne",
            LidLabel::Fw => "fw",
            LidLabel::Mixed => "mixed",
            LidLabel::Unk => "unk",
            LidLabel::Ambiguous => "ambiguous",
        }
    }

    pub fn index(self) -> usize {
        LidLabel::ALL.iter().position(|&l| l == self).unwrap_or(0)
    }
}

impl fmt::Display for LidLabel {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

impl FromStr for LidLabel {
    type Err = crate::Error;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        LidLabel::ALL
            .into_iter()
            .find(|l| l.as_str() == s)
            .ok_or_else(|| crate::Error::UnknownLabel(s.to_string()))
    }
}

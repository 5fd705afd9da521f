use std::fs;
use std::io::{BufWriter, Write};
use std::path::Path;

use super::LidLabel;
use crate::{Error, Result};

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct LidToken {
    pub form: String,
    pub label: LidLabel,
}

/// A sentence with one language tag per token.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct LidSentence {
    pub tokens: Vec<LidToken>,
}

impl LidSentence {
    pub fn labels(&self) -> impl Iterator<Item = LidLabel> + '_ {
        self.tokens.iter().map(|t| t.label)
    }

    pub fn is_intra_sentential(&self) -> bool {
        self.labels().any(|l| l == LidLabel::Lang1) && self.labels().any(|l| l == LidLabel::Lang2)
    }
}

pub fn load_lid_file(path: impl AsRef<Path>) -> Result<Vec<LidSentence>> {
    let path = path.as_ref();
    let text = fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
    parse_lid(&text, path)
}

/// Parses `token<TAB>label` lines with blank lines between sentences.
pub fn parse_lid(text: &str, origin: &Path) -> Result<Vec<LidSentence>> {
    let mut sentences = Vec::new();
    let mut current = Vec::new();
    for (i, line) in text.lines().enumerate() {
        let lineno = i + 1;
        let line = line.trim_end_matches('\r');
        if line.trim().is_empty() {
            if !current.is_empty() {
                sentences.push(LidSentence {
                    tokens: std::mem::take(&mut current),
                });
            }
            continue;
        }
        let mut fields = line.split('\t');
        let form = fields.next().unwrap_or_default();
        let label = fields
            .next()
            .ok_or_else(|| Error::parse(origin, lineno, "expected token<TAB>label"))?;
        if fields.next().is_some() {
            return Err(Error::parse(origin, lineno, "expected exactly two tab-separated fields"));
        }
        if form.is_empty() || form.chars().any(char::is_whitespace) {
            return Err(Error::parse(origin, lineno, format!("invalid token form {form:?}")));
        }
        let label: LidLabel = label
            .trim()
            .parse()
            .map_err(|_| Error::parse(origin, lineno, format!("unknown label '{}'", label.trim())))?;
        current.push(LidToken {
            form: form.to_string(),
            label,
        });
    }
    if !current.is_empty() {
        sentences.push(LidSentence { tokens: current });
    }
    Ok(sentences)
}

pub fn write_lid_file(sentences: &[LidSentence], path: impl AsRef<Path>) -> Result<()> {
    let path = path.as_ref();
    let file = fs::File::create(path).map_err(|e| Error::io(path, e))?;
    let mut w = BufWriter::new(file);
    let io = |e| Error::io(path, e);
    for (k, s) in sentences.iter().enumerate() {
        if k > 0 {
            writeln!(w).map_err(io)?;
        }
        for t in &s.tokens {
            writeln!(w, "{}\t{}", t.form, t.label).map_err(io)?;
        }
    }
    w.flush().map_err(io)
}

/// Keeps the sentences that contain both a `lang1` and a `lang2` token.
pub fn intra_sentential_filter(sentences: &[LidSentence]) -> Vec<LidSentence> {
    sentences
        .iter()
        .filter(|s| s.is_intra_sentential())
        .cloned()
        .collect()
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    fn parse(text: &str) -> Result<Vec<LidSentence>> {
        parse_lid(text, Path::new("t.tsv"))
    }

    fn sent(labels: &[LidLabel]) -> LidSentence {
        LidSentence {
            tokens: labels
                .iter()
                .enumerate()
                .map(|(i, &label)| LidToken {
                    form: format!("w{i}"),
                    label,
                })
                .collect(),
        }
    }

    #[test]
    fn two_sentences() {
        let s = parse("I\tlang1\nlike\tlang1\n\nla\tlang2\nplaya\tlang2\n").unwrap();
        assert_eq!(s.len(), 2);
        assert_eq!(s[1].tokens[1].form, "playa");
        assert_eq!(s[1].tokens[1].label, LidLabel::Lang2);
    }

    #[test]
    fn unknown_label_names_label_and_line() {
        let err = parse("I\tlang1\nfoo\tlang3\n").unwrap_err().to_string();
        assert!(err.contains("lang3") && err.contains(":2:"), "{err}");
    }

    #[test]
    fn filter_examples() {
        use LidLabel::*;
        let input = vec![sent(&[Lang1, Lang1]), sent(&[Lang1, Lang2, Other])];
        let kept = intra_sentential_filter(&input);
        assert_eq!(kept, vec![input[1].clone()]);
    }

    fn arb_sentence() -> impl Strategy<Value = LidSentence> {
        prop::collection::vec(prop::sample::select(LidLabel::ALL.to_vec()), 1..6)
            .prop_map(|labels| sent(&labels))
    }

    proptest! {
        #[test]
        fn filter_idempotent_and_order_preserving(input in prop::collection::vec(arb_sentence(), 0..20)) {
            let once = intra_sentential_filter(&input);
            prop_assert_eq!(intra_sentential_filter(&once), once.clone());
            let mut it = input.iter();
            for s in &once {
                prop_assert!(it.any(|x| x == s));
            }
        }

        #[test]
        fn write_then_parse_roundtrips(input in prop::collection::vec(arb_sentence(), 0..6)) {
            let dir = tempfile::tempdir().unwrap();
            let p = dir.path().join("lid.tsv");
            write_lid_file(&input, &p).unwrap();
            prop_assert_eq!(load_lid_file(&p).unwrap(), input);
        }
    }
}

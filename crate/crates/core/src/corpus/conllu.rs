use std::fs;
use std::io::{BufWriter, Write};
use std::path::Path;

use crate::tree::{validate_heads, DepTree};
use crate::{Error, Result};

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct ConlluWord {
    /// 1-based position in the sentence.
    pub index: usize,
    pub form: String,
    pub lemma: String,
    pub upos: String,
    /// 1-based head index, 0 for the root.
    pub head: usize,
    pub deprel: String,
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct ConlluSentence {
    pub sent_id: String,
    pub words: Vec<ConlluWord>,
}

impl ConlluSentence {
    pub fn heads(&self) -> Vec<usize> {
        self.words.iter().map(|w| w.head).collect()
    }

    pub fn forms(&self) -> Vec<&str> {
        self.words.iter().map(|w| w.form.as_str()).collect()
    }

    pub fn len(&self) -> usize {
        self.words.len()
    }

    pub fn is_empty(&self) -> bool {
        self.words.is_empty()
    }

    /// The undirected tree over 0-based word positions.
    pub fn tree(&self) -> Result<DepTree> {
        DepTree::from_heads(&self.heads()).map_err(|e| Error::InvalidTree {
            sent_id: self.sent_id.clone(),
            reason: e.to_string(),
        })
    }

    /// 0-based children of every word.
    pub fn children(&self) -> Vec<Vec<usize>> {
        let mut children = vec![Vec::new(); self.words.len()];
        for (i, w) in self.words.iter().enumerate() {
            if w.head > 0 {
                children[w.head - 1].push(i);
            }
        }
        children
    }

    fn validate(&self) -> Result<()> {
        for (i, w) in self.words.iter().enumerate() {
            if w.index != i + 1 {
                return Err(Error::InvalidTree {
                    sent_id: self.sent_id.clone(),
                    reason: format!("word indices not contiguous at position {} (found {})", i + 1, w.index),
                });
            }
        }
        validate_heads(&self.heads()).map_err(|e| Error::InvalidTree {
            sent_id: self.sent_id.clone(),
            reason: e.to_string(),
        })?;
        Ok(())
    }
}

pub fn load_conllu(path: impl AsRef<Path>) -> Result<Vec<ConlluSentence>> {
    let path = path.as_ref();
    let text = fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
    parse_conllu(&text, path)
}

/// Parses 10-column CoNLL-U. Multiword-token ranges (`1-2`) and empty nodes
/// (`1.1`) are skipped. Sentences without a `# sent_id` comment get
/// `sent<k>` with `k` counted from 1 within the file.
pub fn parse_conllu(text: &str, origin: &Path) -> Result<Vec<ConlluSentence>> {
    let mut sentences = Vec::new();
    let mut words = Vec::new();
    let mut sent_id: Option<String> = None;

    let mut finish = |words: &mut Vec<ConlluWord>, sent_id: &mut Option<String>| -> Result<()> {
        if words.is_empty() {
            *sent_id = None;
            return Ok(());
        }
        let id = sent_id
            .take()
            .unwrap_or_else(|| format!("sent{}", sentences.len() + 1));
        let s = ConlluSentence {
            sent_id: id,
            words: std::mem::take(words),
        };
        s.validate()?;
        sentences.push(s);
        Ok(())
    };

    for (i, raw) in text.lines().enumerate() {
        let lineno = i + 1;
        let line = raw.trim_end_matches('\r');
        if line.trim().is_empty() {
            finish(&mut words, &mut sent_id)?;
            continue;
        }
        if let Some(comment) = line.strip_prefix('#') {
            if let Some((key, value)) = comment.split_once('=') {
                if key.trim() == "sent_id" {
                    sent_id = Some(value.trim().to_string());
                }
            }
            continue;
        }
        let cols: Vec<&str> = line.split('\t').collect();
        if cols.len() != 10 {
            return Err(Error::parse(
                origin,
                lineno,
                format!("expected 10 tab-separated columns, found {}", cols.len()),
            ));
        }
        if cols[0].contains('-') || cols[0].contains('.') {
            continue;
        }
        let index: usize = cols[0]
            .parse()
            .map_err(|_| Error::parse(origin, lineno, format!("invalid word index '{}'", cols[0])))?;
        let head: usize = cols[6]
            .parse()
            .map_err(|_| Error::parse(origin, lineno, format!("invalid head '{}'", cols[6])))?;
        words.push(ConlluWord {
            index,
            form: cols[1].to_string(),
            lemma: cols[2].to_string(),
            upos: cols[3].to_string(),
            head,
            deprel: cols[7].to_string(),
        });
    }
    finish(&mut words, &mut sent_id)?;
    Ok(sentences)
}

pub fn write_conllu(sentences: &[ConlluSentence], path: impl AsRef<Path>) -> Result<()> {
    let path = path.as_ref();
    let file = fs::File::create(path).map_err(|e| Error::io(path, e))?;
    let mut w = BufWriter::new(file);
    let io = |e| Error::io(path, e);
    for s in sentences {
        writeln!(w, "# sent_id = {}", s.sent_id).map_err(io)?;
        for word in &s.words {
            writeln!(
                w,
                "{}\t{}\t{}\t{}\t_\t_\t{}\t{}\t_\t_",
                word.index, word.form, word.lemma, word.upos, word.head, word.deprel
            )
            .map_err(io)?;
        }
        writeln!(w).map_err(io)?;
    }
    w.flush().map_err(io)
}

#[cfg(test)]
mod tests {
    use super::*;

    fn parse(text: &str) -> Result<Vec<ConlluSentence>> {
        parse_conllu(text, Path::new("t.conllu"))
    }

    fn line(idx: &str, form: &str, upos: &str, head: &str, rel: &str) -> String {
        format!("{idx}\t{form}\t{form}\t{upos}\t_\t_\t{head}\t{rel}\t_\t_\n")
    }

    #[test]
    fn three_word_tree() {
        let text = format!(
            "# sent_id = s1\n{}{}{}\n",
            line("1", "the", "DET", "2", "det"),
            line("2", "car", "NOUN", "0", "root"),
            line("3", "runs", "VERB", "2", "acl"),
        );
        let s = parse(&text).unwrap();
        assert_eq!(s.len(), 1);
        assert_eq!(s[0].sent_id, "s1");
        assert_eq!(s[0].heads(), vec![2, 0, 2]);
        assert_eq!(validate_heads(&s[0].heads()), Ok(2));
    }

    #[test]
    fn cycle_is_rejected_with_sent_id() {
        let text = format!(
            "# sent_id = bad\n{}{}{}\n",
            line("1", "a", "X", "2", "dep"),
            line("2", "b", "X", "3", "dep"),
            line("3", "c", "X", "2", "dep"),
        );
        match parse(&text) {
            Err(Error::InvalidTree { sent_id, .. }) => assert_eq!(sent_id, "bad"),
            other => panic!("expected tree error, got {other:?}"),
        }
    }

    #[test]
    fn multiple_roots_rejected() {
        let text = format!("{}{}\n", line("1", "a", "X", "0", "root"), line("2", "b", "X", "0", "root"));
        assert!(matches!(parse(&text), Err(Error::InvalidTree { .. })));
    }

    #[test]
    fn multiword_ranges_and_empty_nodes_skipped() {
        let text = format!(
            "{}{}{}{}{}",
            "1-2\tdel\t_\t_\t_\t_\t_\t_\t_\t_\n",
            line("1", "de", "ADP", "2", "case"),
            line("2", "el", "DET", "0", "root"),
            "2.1\tx\t_\t_\t_\t_\t_\t_\t_\t_\n",
            "\n"
        );
        let s = parse(&text).unwrap();
        assert_eq!(s[0].forms(), vec!["de", "el"]);
        assert_eq!(s[0].sent_id, "sent1");
    }

    #[test]
    fn wrong_column_count() {
        assert!(matches!(parse("1\tx\n"), Err(Error::Parse { line: 1, .. })));
    }

    #[test]
    fn roundtrip() {
        let text = format!(
            "# sent_id = a\n{}{}\n# sent_id = b\n{}\n",
            line("1", "hola", "INTJ", "2", "discourse"),
            line("2", "amigo", "NOUN", "0", "root"),
            line("1", "yes", "INTJ", "0", "root"),
        );
        let s = parse(&text).unwrap();
        let dir = tempfile::tempdir().unwrap();
        let p = dir.path().join("x.conllu");
        write_conllu(&s, &p).unwrap();
        assert_eq!(load_conllu(&p).unwrap(), s);
    }
}

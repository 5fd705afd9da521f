use std::fs;
use std::io::{BufWriter, Write};
use std::path::Path;

use crate::{Error, Result};

/// Word alignment for one sentence pair: 0-based `(source, target)` pairs.
#[derive(Debug, Clone, Default, PartialEq, Eq)]
pub struct AlignmentRecord {
    pub pairs: Vec<(usize, usize)>,
}

impl AlignmentRecord {
    pub fn check_ranges(&self, src_len: usize, tgt_len: usize) -> Result<()> {
        for &(s, t) in &self.pairs {
            if s >= src_len || t >= tgt_len {
                return Err(Error::Validation(format!(
                    "alignment pair {s}-{t} out of range for {src_len} source and {tgt_len} target tokens"
                )));
            }
        }
        Ok(())
    }

    /// Swaps source and target.
    pub fn inverted(&self) -> AlignmentRecord {
        let mut pairs: Vec<_> = self.pairs.iter().map(|&(s, t)| (t, s)).collect();
        pairs.sort_unstable();
        AlignmentRecord { pairs }
    }

    /// Sorted target indices aligned to any of the given source indices.
    pub fn targets_of(&self, sources: impl Fn(usize) -> bool) -> Vec<usize> {
        let mut out: Vec<usize> = self
            .pairs
            .iter()
            .filter(|(s, _)| sources(*s))
            .map(|&(_, t)| t)
            .collect();
        out.sort_unstable();
        out.dedup();
        out
    }
}

/// Parses one line of `i-j` pairs.
pub fn parse_alignment_line(line: &str) -> std::result::Result<AlignmentRecord, String> {
    let mut pairs = Vec::new();
    for item in line.split_whitespace() {
        let (s, t) = item
            .split_once('-')
            .ok_or_else(|| format!("expected i-j, found '{item}'"))?;
        let s = s.parse().map_err(|_| format!("invalid source index in '{item}'"))?;
        let t = t.parse().map_err(|_| format!("invalid target index in '{item}'"))?;
        pairs.push((s, t));
    }
    Ok(AlignmentRecord { pairs })
}

/// One line per sentence pair; an empty line is an empty alignment.
pub fn load_alignments(path: impl AsRef<Path>) -> Result<Vec<AlignmentRecord>> {
    let path = path.as_ref();
    let text = fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
    text.lines()
        .enumerate()
        .map(|(i, line)| parse_alignment_line(line).map_err(|m| Error::parse(path, i + 1, m)))
        .collect()
}

pub fn write_alignments(records: &[AlignmentRecord], path: impl AsRef<Path>) -> Result<()> {
    let path = path.as_ref();
    let file = fs::File::create(path).map_err(|e| Error::io(path, e))?;
    let mut w = BufWriter::new(file);
    let io = |e| Error::io(path, e);
    for r in records {
        let line: Vec<String> = r.pairs.iter().map(|(s, t)| format!("{s}-{t}")).collect();
        writeln!(w, "{}", line.join(" ")).map_err(io)?;
    }
    w.flush().map_err(io)
}

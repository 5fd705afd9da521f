use serde::{Deserialize, Serialize};

use super::LidLabel;

/// Reporting categories: the five token-language columns of a dataset
/// summary.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum StatsCategory {
    En,
    Es,
    Other,
    Ne,
    Unk,
}

impl StatsCategory {
    pub const ALL: [StatsCategory; 5] = [
        StatsCategory::En,
        StatsCategory::Es,
        StatsCategory::Other,
        StatsCategory::Ne,
        StatsCategory::Unk,
    ];

    pub fn as_str(self) -> &'static str {
        match self {
            StatsCategory::En => "en",
            StatsCategory::Es => "es",
            StatsCategory::Other => "other",
            StatsCategory::Ne => "ne",
            StatsCategory::Unk => "unk",
        }
    }
}

/// How the eight token labels collapse into the five reporting categories.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct StatsMapping {
    pub lang1: StatsCategory,
    pub lang2: StatsCategory,
    pub other: StatsCategory,
    pub ne: StatsCategory,
    pub fw: StatsCategory,
    pub mixed: StatsCategory,
    pub unk: StatsCategory,
    pub ambiguous: StatsCategory,
}

impl Default for StatsMapping {
    fn default() -> Self {
        StatsMapping {
            lang1: StatsCategory::En,
            lang2: StatsCategory::Es,
            other: StatsCategory::Other,
            ne: StatsCategory::Ne,
            fw: StatsCategory::Other,
            mixed: StatsCategory::Other,
            unk: StatsCategory::Unk,
            ambiguous: StatsCategory::Other,
        }
    }
}

impl StatsMapping {
    pub fn category(&self, label: LidLabel) -> StatsCategory {
        match label {
            LidLabel::Lang1 => self.lang1,
            LidLabel::Lang2 => self.lang2,
            LidLabel::Other => self.other,
            LidLabel::Ne => self.ne,
            LidLabel::Fw => self.fw,
            LidLabel::Mixed => self.mixed,
            LidLabel::Unk => self.unk,
            LidLabel::Ambiguous => self.ambiguous,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct CategoryCount {
    pub count: usize,
    pub percent: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct CorpusStats {
    pub n_tokens: usize,
    pub en: CategoryCount,
    pub es: CategoryCount,
    pub other: CategoryCount,
    pub ne: CategoryCount,
    pub unk: CategoryCount,
}

impl CorpusStats {
    pub fn get(&self, cat: StatsCategory) -> CategoryCount {
        match cat {
            StatsCategory::En => self.en,
            StatsCategory::Es => self.es,
            StatsCategory::Other => self.other,
            StatsCategory::Ne => self.ne,
            StatsCategory::Unk => self.unk,
        }
    }

    pub fn from_counts(counts: [usize; 5]) -> Self {
        let n: usize = counts.iter().sum();
        let cc = |c: usize| CategoryCount {
            count: c,
            percent: if n == 0 { 0.0 } else { 100.0 * c as f64 / n as f64 },
        };
        CorpusStats {
            n_tokens: n,
            en: cc(counts[0]),
            es: cc(counts[1]),
            other: cc(counts[2]),
            ne: cc(counts[3]),
            unk: cc(counts[4]),
        }
    }

    /// `dataset,n_tokens,en,en_pct,...` row with percentages to 2 decimals.
    pub fn csv_row(&self, dataset: &str) -> String {
        let mut row = format!("{dataset},{}", self.n_tokens);
        for cat in StatsCategory::ALL {
            let c = self.get(cat);
            row.push_str(&format!(",{},{:.2}", c.count, c.percent));
        }
        row
    }

    pub const CSV_HEADER: &'static str =
        "dataset,n_tokens,en,en_pct,es,es_pct,other,other_pct,ne,ne_pct,unk,unk_pct";
}

/// Token counts per reporting category.
pub fn corpus_stats(labels: impl IntoIterator<Item = LidLabel>, mapping: &StatsMapping) -> CorpusStats {
    let mut counts = [0usize; 5];
    for label in labels {
        let cat = mapping.category(label);
        counts[StatsCategory::ALL.iter().position(|&c| c == cat).unwrap_or(2)] += 1;
    }
    CorpusStats::from_counts(counts)
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    #[test]
    fn single_token() {
        let s = corpus_stats([LidLabel::Lang1], &StatsMapping::default());
        assert_eq!(s.n_tokens, 1);
        assert_eq!(s.en.count, 1);
        assert_eq!(s.en.percent, 100.0);
    }

    #[test]
    fn empty_is_zero() {
        let s = corpus_stats([], &StatsMapping::default());
        assert_eq!(s.n_tokens, 0);
        assert_eq!(s.es.percent, 0.0);
    }

    #[test]
    fn real_cs_table_row() {
        // Token counts of the real code-switched dataset summary:
        // 4302 tokens, en 2174 (50.53%), es 1397 (32.47%), other 657 (15.27%),
        // ne 73 (1.69%), unk 1 (0.02%).
        let mut labels = Vec::new();
        labels.extend(std::iter::repeat_n(LidLabel::Lang1, 2174));
        labels.extend(std::iter::repeat_n(LidLabel::Lang2, 1397));
        labels.extend(std::iter::repeat_n(LidLabel::Other, 657));
        labels.extend(std::iter::repeat_n(LidLabel::Ne, 73));
        labels.extend(std::iter::repeat_n(LidLabel::Unk, 1));
        let s = corpus_stats(labels, &StatsMapping::default());
        assert_eq!(s.n_tokens, 4302);
        assert_eq!(
            s.csv_row("r-CS"),
            "r-CS,4302,2174,50.53,1397,32.47,657,15.27,73,1.70,1,0.02"
        );
    }

    #[test]
    fn random_cs_table_row() {
        // 4649 tokens, en 2039 (43.859%), es 1867 (40.159%).
        let s = CorpusStats::from_counts([2039, 1867, 662, 80, 1]);
        assert_eq!(s.n_tokens, 4649);
        assert_eq!(format!("{:.2}", s.en.percent), "43.86");
        assert_eq!(format!("{:.2}", s.es.percent), "40.16");
    }

    #[test]
    fn default_mapping_collapses_minor_labels_to_other() {
        let m = StatsMapping::default();
        for l in [LidLabel::Fw, LidLabel::Mixed, LidLabel::Ambiguous, LidLabel::Other] {
            assert_eq!(m.category(l), StatsCategory::Other);
        }
    }

    proptest! {
        #[test]
        fn counts_and_percentages_consistent(idx in prop::collection::vec(0usize..8, 1..300)) {
            let labels: Vec<LidLabel> = idx.iter().map(|&i| LidLabel::ALL[i]).collect();
            let s = corpus_stats(labels.clone(), &StatsMapping::default());
            let total: usize = StatsCategory::ALL.iter().map(|&c| s.get(c).count).sum();
            prop_assert_eq!(total, s.n_tokens);
            let pct: f64 = StatsCategory::ALL.iter().map(|&c| s.get(c).percent).sum();
            prop_assert!((pct - 100.0).abs() <= 0.1);
            for c in StatsCategory::ALL {
                let cc = s.get(c);
                prop_assert!((100.0 * cc.count as f64 / s.n_tokens as f64 - cc.percent).abs() <= 0.01);
            }
        }
    }
}

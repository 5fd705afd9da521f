//! Layer-by-layer probe sweeps averaged over seeds.

use std::collections::BTreeMap;
use std::fmt::Write as _;
use std::path::PathBuf;

use log::warn;
use rand::seq::SliceRandom;
use rayon::prelude::*;
use serde::Serialize;

use super::{evaluate, train_probe, LabelledData, ProbeTrainConfig, SelectionMetric};
use crate::corpus::{LidLabel, LidSentence};
use crate::embedstore::{read_container, EmbeddingSet};
use crate::stats::{aggregate_seeds, SeedSummary};
use crate::{seeded_rng, Error, Result};

/// Disjoint train/dev/test index lists covering `0..n`.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Split {
    pub train: Vec<usize>,
    pub dev: Vec<usize>,
    pub test: Vec<usize>,
}

/// Seeded shuffle, then 80% train, 10% dev (both rounded down) and the
/// remainder as test.
pub fn split_80_10_10(n: usize, seed: u64) -> Split {
    let mut idx: Vec<usize> = (0..n).collect();
    idx.shuffle(&mut seeded_rng(seed));
    let n_train = n * 8 / 10;
    let n_dev = n / 10;
    let test = idx.split_off(n_train + n_dev);
    let dev = idx.split_off(n_train);
    Split {
        train: idx,
        dev,
        test,
    }
}

/// Record id under which the extractor stores the word vectors of the
/// `index`-th (0-based) sentence of a LID file.
pub fn lid_sentence_id(index: usize) -> String {
    index.to_string()
}

/// One embedding container in a sweep.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct ContainerRef {
    pub layer: u32,
    pub pooling: String,
    pub path: PathBuf,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct SweepRow {
    pub model: String,
    pub layer: u32,
    pub pooling: String,
    pub seed: u64,
    pub split: String,
    pub f1_macro: f64,
    pub f1_weighted: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct SweepSummary {
    pub model: String,
    pub layer: u32,
    pub pooling: String,
    pub f1_macro: SeedSummary,
    pub f1_weighted: SeedSummary,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct LayerSweepResult {
    pub task: String,
    /// The F1 average reported as the headline number for this task.
    pub primary_metric: SelectionMetric,
    pub std_kind: &'static str,
    pub rows: Vec<SweepRow>,
    pub summaries: Vec<SweepSummary>,
    /// Containers that could not be used, with the reason.
    pub skipped: Vec<(String, String)>,
}

pub const SWEEP_CSV_HEADER: &str = "model,layer,pooling,seed,split,f1_macro,f1_weighted";

impl LayerSweepResult {
    pub fn to_csv(&self) -> String {
        let mut out = String::from(SWEEP_CSV_HEADER);
        out.push('\n');
        for r in &self.rows {
            let _ = writeln!(
                out,
                "{},{},{},{},{},{:.6},{:.6}",
                r.model, r.layer, r.pooling, r.seed, r.split, r.f1_macro, r.f1_weighted
            );
        }
        out
    }

    pub fn summary_json(&self) -> Result<String> {
        Ok(serde_json::to_string_pretty(self)?)
    }

    /// `(series name, [(layer, mean)])` using the primary metric; one series
    /// per (model, pooling).
    pub fn mean_series(&self) -> Vec<(String, Vec<(u32, f64)>)> {
        let mut series: BTreeMap<String, Vec<(u32, f64)>> = BTreeMap::new();
        for s in &self.summaries {
            let v = match self.primary_metric {
                SelectionMetric::Macro => s.f1_macro.mean,
                SelectionMetric::Weighted => s.f1_weighted.mean,
            };
            series
                .entry(format!("{} ({})", s.model, s.pooling))
                .or_default()
                .push((s.layer, v));
        }
        series
            .into_iter()
            .map(|(k, mut v)| {
                v.sort_by_key(|p| p.0);
                (k, v)
            })
            .collect()
    }
}

/// A unit of splitting: one sentence with one or more labelled vectors.
struct Unit {
    xs: Vec<Vec<f64>>,
    ys: Vec<usize>,
}

fn gather(units: &[Unit], idx: &[usize]) -> LabelledData {
    let mut data = LabelledData::default();
    for &i in idx {
        for (x, &y) in units[i].xs.iter().zip(&units[i].ys) {
            data.push(x.clone(), y);
        }
    }
    data
}

struct SweepPlan<'a> {
    task: &'static str,
    label_set: Vec<String>,
    selection: SelectionMetric,
    cfg: &'a ProbeTrainConfig,
    seeds: &'a [u64],
}

fn load_containers(containers: &[ContainerRef], skipped: &mut Vec<(String, String)>) -> Vec<(ContainerRef, EmbeddingSet)> {
    let mut out = Vec::new();
    for c in containers {
        match read_container(&c.path) {
            Ok(set) => out.push((c.clone(), set)),
            Err(e) => {
                warn!("skipping layer {} ({}): {e}", c.layer, c.path.display());
                skipped.push((c.path.display().to_string(), e.to_string()));
            }
        }
    }
    out
}

/// All seeds for one container.
fn sweep_layer(
    plan: &SweepPlan<'_>,
    cref: &ContainerRef,
    set: &EmbeddingSet,
    build_units: &(impl Fn(&EmbeddingSet) -> Result<Vec<Unit>> + Sync),
) -> Result<(Vec<SweepRow>, SweepSummary)> {
    let units = build_units(set)?;
    if units.is_empty() {
        return Err(Error::Empty(format!("dataset for layer {}", cref.layer)));
    }
    let cells: Vec<Result<SweepRow>> = plan
        .seeds
        .par_iter()
        .map(|&seed| {
            let split = split_80_10_10(units.len(), seed);
            let train = gather(&units, &split.train);
            let dev = gather(&units, &split.dev);
            let test = gather(&units, &split.test);
            if test.is_empty() {
                return Err(Error::Empty("test split".into()));
            }
            let out = train_probe(&train, &dev, &plan.label_set, plan.selection, &plan.cfg.with_seed(seed))?;
            let (f1_macro, f1_weighted) = evaluate(&out.model, &test)?;
            Ok(SweepRow {
                model: set.model_name.clone(),
                layer: cref.layer,
                pooling: cref.pooling.clone(),
                seed,
                split: "test".into(),
                f1_macro,
                f1_weighted,
            })
        })
        .collect();
    let cells = cells.into_iter().collect::<Result<Vec<_>>>()?;
    let macros: Vec<f64> = cells.iter().map(|r| r.f1_macro).collect();
    let weighted: Vec<f64> = cells.iter().map(|r| r.f1_weighted).collect();
    let summary = SweepSummary {
        model: set.model_name.clone(),
        layer: cref.layer,
        pooling: cref.pooling.clone(),
        f1_macro: aggregate_seeds(&macros)?,
        f1_weighted: aggregate_seeds(&weighted)?,
    };
    Ok((cells, summary))
}

fn run_sweep(
    plan: SweepPlan<'_>,
    containers: &[ContainerRef],
    build_units: impl Fn(&EmbeddingSet) -> Result<Vec<Unit>> + Sync,
) -> Result<LayerSweepResult> {
    plan.cfg.validate()?;
    if plan.seeds.is_empty() {
        return Err(Error::Config("at least one seed is required".into()));
    }
    let mut skipped = Vec::new();
    let loaded = load_containers(containers, &mut skipped);
    let mut rows = Vec::new();
    let mut summaries = Vec::new();

    for (cref, set) in &loaded {
        match sweep_layer(&plan, cref, set, &build_units) {
            Ok((cells, summary)) => {
                rows.extend(cells);
                summaries.push(summary);
            }
            Err(e) => {
                warn!("skipping layer {} ({}): {e}", cref.layer, cref.path.display());
                skipped.push((cref.path.display().to_string(), e.to_string()));
            }
        }
    }
    Ok(LayerSweepResult {
        task: plan.task.to_string(),
        primary_metric: plan.selection,
        std_kind: "population",
        rows,
        summaries,
        skipped,
    })
}

/// Code-switched vs monolingual sentence classification. `dataset` holds
/// `(record id, label)` with label 0 = monolingual and 1 = code-switched.
/// Word-level containers are mean-pooled per sentence.
pub fn sentence_classification_sweep(
    containers: &[ContainerRef],
    dataset: &[(String, u8)],
    cfg: &ProbeTrainConfig,
    seeds: &[u64],
) -> Result<LayerSweepResult> {
    if let Some((id, l)) = dataset.iter().find(|(_, l)| *l > 1) {
        return Err(Error::Validation(format!("record '{id}' has label {l}, expected 0 or 1")));
    }
    let plan = SweepPlan {
        task: "sentence_classification",
        label_set: vec!["0".into(), "1".into()],
        selection: SelectionMetric::Macro,
        cfg,
        seeds,
    };
    run_sweep(plan, containers, |set| {
        dataset
            .iter()
            .map(|(id, label)| {
                Ok(Unit {
                    xs: vec![set.sentence_vector(id)?],
                    ys: vec![usize::from(*label)],
                })
            })
            .collect()
    })
}

/// Token-level language identification over the eight tag classes. The
/// vectors of sentence `i` are looked up under `lid_sentence_id(i)` unless
/// explicit ids are supplied.
pub fn lid_sweep(
    containers: &[ContainerRef],
    dataset: &[(String, LidSentence)],
    cfg: &ProbeTrainConfig,
    seeds: &[u64],
) -> Result<LayerSweepResult> {
    let plan = SweepPlan {
        task: "lid",
        label_set: LidLabel::ALL.iter().map(|l| l.as_str().to_string()).collect(),
        selection: SelectionMetric::Weighted,
        cfg,
        seeds,
    };
    run_sweep(plan, containers, |set| {
        dataset
            .iter()
            .map(|(id, sentence)| {
                let m = set.get(id).ok_or_else(|| Error::MissingRecord(id.clone()))?;
                if m.n_rows() != sentence.tokens.len() {
                    return Err(Error::LengthMismatch(format!(
                        "sentence '{id}' has {} tokens but {} vectors",
                        sentence.tokens.len(),
                        m.n_rows()
                    )));
                }
                Ok(Unit {
                    xs: m.to_f64_rows(),
                    ys: sentence.labels().map(LidLabel::index).collect(),
                })
            })
            .collect()
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::corpus::LidToken;
    use crate::embedstore::{write_container, EmbeddingKind, Matrix};
    use proptest::prelude::*;

    #[test]
    fn sixteen_thousand_records_split() {
        let s = split_80_10_10(16_000, 0);
        assert_eq!((s.train.len(), s.dev.len(), s.test.len()), (12_800, 1_600, 1_600));
    }

    proptest! {
        #[test]
        fn splits_partition_and_repeat(n in 0usize..300, seed in any::<u64>()) {
            let s = split_80_10_10(n, seed);
            let mut all: Vec<usize> = s.train.iter().chain(&s.dev).chain(&s.test).copied().collect();
            all.sort_unstable();
            prop_assert_eq!(all, (0..n).collect::<Vec<_>>());
            prop_assert_eq!(split_80_10_10(n, seed), s);
        }
    }

    fn write_sentence_layer(dir: &std::path::Path, layer: u32, ids: &[(String, u8)]) -> ContainerRef {
        let mut set = EmbeddingSet::new("toy", layer, EmbeddingKind::SentenceMean, 4);
        for (k, (id, label)) in ids.iter().enumerate() {
            let sign = if *label == 1 { 1.0 } else { -1.0 };
            let jitter = (k % 7) as f32 * 0.1;
            set.insert(id.clone(), Matrix::new(1, 4, vec![sign * 3.0 + jitter, jitter, -jitter, 1.0]).unwrap())
                .unwrap();
        }
        let path = dir.join(format!("layer{layer}.csem"));
        write_container(&set, &path).unwrap();
        ContainerRef {
            layer,
            pooling: "mean".into(),
            path,
        }
    }

    #[test]
    fn sentence_sweep_with_missing_layer() {
        let dir = tempfile::tempdir().unwrap();
        let data: Vec<(String, u8)> = (0..100).map(|i| (format!("s{i}"), (i % 2) as u8)).collect();
        let mut containers = vec![write_sentence_layer(dir.path(), 0, &data), write_sentence_layer(dir.path(), 1, &data)];
        containers.push(ContainerRef {
            layer: 2,
            pooling: "mean".into(),
            path: dir.path().join("missing.csem"),
        });
        let seeds = [0, 1];
        let res = sentence_classification_sweep(&containers, &data, &ProbeTrainConfig::default(), &seeds).unwrap();
        assert_eq!(res.rows.len(), 4);
        assert_eq!(res.skipped.len(), 1);
        for r in &res.rows {
            assert!(r.f1_macro >= 0.99, "{r:?}");
        }
        let csv = res.to_csv();
        assert!(csv.starts_with(SWEEP_CSV_HEADER));
        assert_eq!(csv.lines().count(), 5);

        let one = sentence_classification_sweep(&containers[..1], &data, &ProbeTrainConfig::default(), &[3]).unwrap();
        assert_eq!(one.summaries[0].f1_macro.mean, one.rows[0].f1_macro);
    }

    #[test]
    fn lid_sweep_checks_token_counts() {
        let dir = tempfile::tempdir().unwrap();
        let mut set = EmbeddingSet::new("toy", 0, EmbeddingKind::Word, 2);
        let mut dataset = Vec::new();
        for i in 0..40 {
            let labels = [LidLabel::Lang1, LidLabel::Lang2, LidLabel::Other];
            let tokens: Vec<LidToken> = labels
                .iter()
                .map(|&label| LidToken {
                    form: "w".into(),
                    label,
                })
                .collect();
            // label is an affine function of the vector
            let rows: Vec<Vec<f32>> = labels.iter().map(|l| vec![l.index() as f32 * 2.0, 1.0]).collect();
            set.insert(lid_sentence_id(i), Matrix::from_rows(&rows).unwrap()).unwrap();
            dataset.push((lid_sentence_id(i), LidSentence { tokens }));
        }
        let path = dir.path().join("w.csem");
        write_container(&set, &path).unwrap();
        let containers = [ContainerRef {
            layer: 0,
            pooling: "word".into(),
            path,
        }];
        let cfg = ProbeTrainConfig {
            learning_rate: 0.05,
            ..Default::default()
        };
        let res = lid_sweep(&containers, &dataset, &cfg, &[0]).unwrap();
        assert!(res.rows[0].f1_weighted >= 0.99, "{:?}", res.rows[0]);

        dataset[3].1.tokens.pop();
        // a bad layer is reported and skipped, not fatal
        let res = lid_sweep(&containers, &dataset, &cfg, &[0]).unwrap();
        assert!(res.rows.is_empty());
        assert_eq!(res.skipped.len(), 1);
        assert!(res.skipped[0].1.contains("'3'"), "{:?}", res.skipped);
    }
}

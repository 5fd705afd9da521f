use std::fs;
use std::path::{Path, PathBuf};

use anyhow::Result;
use serde::Serialize;

use csprobe::corpus::{load_lid_file, LidLabel, LidSentence};
use csprobe::embedstore::read_container;
use csprobe::probe::{
    evaluate, lid_sentence_id, lid_sweep, sentence_classification_sweep, split_80_10_10, train_probe as fit,
    ContainerRef, LabelledData, LayerSweepResult, ProbeModel, ProbeTrainConfig, SelectionMetric,
};

use crate::config::{section, ExperimentConfig, Task};
use crate::run::Run;
use crate::svg::line_chart;
use crate::InputError;

/// `id<TAB>label` lines, label 0 (monolingual) or 1 (code-switched).
fn load_sentence_dataset(path: &Path) -> Result<Vec<(String, u8)>> {
    let text = fs::read_to_string(path).map_err(|e| InputError(format!("cannot read {}: {e}", path.display())))?;
    let mut out = Vec::new();
    for (i, line) in text.lines().enumerate() {
        if line.trim().is_empty() {
            continue;
        }
        let bad = || InputError(format!("{}:{}: expected id<TAB>0|1", path.display(), i + 1));
        let (id, label) = line.split_once('\t').ok_or_else(bad)?;
        let label = match label.trim() {
            "0" => 0,
            "1" => 1,
            _ => return Err(bad().into()),
        };
        out.push((id.to_string(), label));
    }
    Ok(out)
}

fn load_lid_dataset(path: &Path) -> Result<Vec<(String, LidSentence)>> {
    Ok(load_lid_file(path)?
        .into_iter()
        .enumerate()
        .map(|(i, s)| (lid_sentence_id(i), s))
        .collect())
}

/// One sentence: its vectors and their class indices.
type Unit = (Vec<Vec<f64>>, Vec<usize>);

#[derive(Serialize)]
struct SeedReport {
    seed: u64,
    best_epoch: usize,
    epochs_run: usize,
    best_dev_f1: Option<f64>,
    test_f1_macro: f64,
    test_f1_weighted: f64,
    warnings: Vec<String>,
}

#[derive(Serialize)]
struct TrainProbeReport<'a> {
    task: Task,
    model: &'a str,
    layer: u32,
    n_units: usize,
    config: ProbeTrainConfig,
    seeds: Vec<SeedReport>,
}

#[derive(Serialize)]
struct SavedProbe<'a> {
    seed: u64,
    layer: u32,
    model: &'a ProbeModel,
}

pub fn train_probe(cfg: &ExperimentConfig, run: &mut Run) -> Result<()> {
    let sec = section(&cfg.probe, "probe")?;
    let dataset_path = run.input(&sec.dataset)?;
    let container_path = run.input(&sec.embeddings)?;
    let set = read_container(&container_path)?;
    let train_cfg = cfg.train.apply(ProbeTrainConfig::default());

    // one unit per sentence, so every token of a sentence lands in one split
    let (label_set, selection, units): (Vec<String>, _, Vec<Unit>) = match sec.task {
        Task::Sentence => {
            let data = load_sentence_dataset(&dataset_path)?;
            let units = data
                .iter()
                .map(|(id, y)| Ok((vec![set.sentence_vector(id)?], vec![usize::from(*y)])))
                .collect::<csprobe::Result<Vec<_>>>()?;
            (vec!["0".into(), "1".into()], SelectionMetric::Macro, units)
        }
        Task::Lid => {
            let data = load_lid_dataset(&dataset_path)?;
            let units = data
                .iter()
                .map(|(id, s)| {
                    let m = set.get(id).ok_or_else(|| csprobe::Error::MissingRecord(id.clone()))?;
                    if m.n_rows() != s.tokens.len() {
                        return Err(csprobe::Error::LengthMismatch(format!(
                            "sentence '{id}' has {} tokens but {} vectors",
                            s.tokens.len(),
                            m.n_rows()
                        )));
                    }
                    Ok((m.to_f64_rows(), s.labels().map(LidLabel::index).collect()))
                })
                .collect::<csprobe::Result<Vec<_>>>()?;
            let labels = LidLabel::ALL.iter().map(|l| l.as_str().to_string()).collect();
            (labels, SelectionMetric::Weighted, units)
        }
    };
    if units.is_empty() {
        return Err(csprobe::Error::Empty("probe dataset".into()).into());
    }
    let gather = |idx: &[usize]| {
        let mut d = LabelledData::default();
        for &i in idx {
            for (x, &y) in units[i].0.iter().zip(&units[i].1) {
                d.push(x.clone(), y);
            }
        }
        d
    };

    let mut seeds = Vec::new();
    for &seed in &cfg.seeds {
        let split = split_80_10_10(units.len(), seed);
        let test = gather(&split.test);
        if test.is_empty() {
            return Err(csprobe::Error::Empty("test split".into()).into());
        }
        let out = fit(&gather(&split.train), &gather(&split.dev), &label_set, selection, &train_cfg.with_seed(seed))?;
        let (test_f1_macro, test_f1_weighted) = evaluate(&out.model, &test)?;
        run.write_json(
            &format!("probe-seed{seed}.json"),
            &SavedProbe {
                seed,
                layer: set.layer,
                model: &out.model,
            },
        )?;
        seeds.push(SeedReport {
            seed,
            best_epoch: out.best_epoch,
            epochs_run: out.epochs_run,
            best_dev_f1: out.best_dev_f1,
            test_f1_macro,
            test_f1_weighted,
            warnings: out.warnings,
        });
    }
    run.write_json(
        "train_probe.json",
        &TrainProbeReport {
            task: sec.task,
            model: &set.model_name,
            layer: set.layer,
            n_units: units.len(),
            config: train_cfg,
            seeds,
        },
    )
}

pub fn sweep(cfg: &ExperimentConfig, run: &mut Run) -> Result<()> {
    let sec = section(&cfg.sweep, "sweep")?;
    let dataset_path = run.input(&sec.dataset)?;
    let mut refs: Vec<(u32, String, PathBuf)> = sec
        .containers
        .iter()
        .map(|c| (c.layer, c.pooling.clone(), c.path.clone()))
        .collect();
    if let Some(pattern) = &sec.pattern {
        if sec.layers.is_empty() || sec.poolings.is_empty() {
            return Err(InputError("`pattern` needs non-empty `layers` and `poolings`".into()).into());
        }
        for pooling in &sec.poolings {
            for &layer in &sec.layers {
                let path = pattern.replace("{layer}", &layer.to_string()).replace("{pooling}", pooling);
                refs.push((layer, pooling.clone(), PathBuf::from(path)));
            }
        }
    }
    if refs.is_empty() {
        return Err(InputError("[sweep] names no containers".into()).into());
    }
    // missing layer files are reported by the sweep and skipped
    let containers: Vec<ContainerRef> = refs
        .into_iter()
        .map(|(layer, pooling, path)| {
            let resolved = run.optional_input(&path).unwrap_or_else(|| run.resolve(&path));
            ContainerRef {
                layer,
                pooling,
                path: resolved,
            }
        })
        .collect();

    let train_cfg = cfg.train.apply(ProbeTrainConfig::default());
    let result: LayerSweepResult = match sec.task {
        Task::Sentence => {
            sentence_classification_sweep(&containers, &load_sentence_dataset(&dataset_path)?, &train_cfg, &cfg.seeds)?
        }
        Task::Lid => lid_sweep(&containers, &load_lid_dataset(&dataset_path)?, &train_cfg, &cfg.seeds)?,
    };
    if result.rows.is_empty() {
        return Err(csprobe::Error::Empty(format!("every layer failed: {:?}", result.skipped)).into());
    }
    let metric = match result.primary_metric {
        SelectionMetric::Macro => "macro",
        SelectionMetric::Weighted => "weighted",
    };
    let chart = line_chart(
        &format!("Mean F1 across layers ({})", result.task),
        "layer",
        &format!("mean {metric} F1 over {} seeds", cfg.seeds.len()),
        &result.mean_series(),
    );
    run.write("sweep.csv", result.to_csv())?;
    run.write("sweep_summary.json", result.summary_json()? + "\n")?;
    run.write("sweep.svg", chart)
}

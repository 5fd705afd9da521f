use std::collections::BTreeMap;
use std::fmt::Write as _;
use std::path::PathBuf;

use anyhow::Result;
use serde::Serialize;

use csprobe::corpus::load_conllu;
use csprobe::csgen::read_synthetic;
use csprobe::embedstore::read_container;
use csprobe::structprobe::{
    default_train_config, evaluate_probe, parse_corpus, read_parses, train_structural_probe, write_parses,
    ParsedSentence, ProbeSentence, StructuralEval, StructuralProbe, DSPR_WINDOW,
};
use csprobe::treedist::{ged_compare, GedCostModel, GedLimits, GedSummary};

use crate::config::{section, ExperimentConfig, Split};
use crate::run::Run;
use crate::InputError;

#[derive(Serialize)]
struct EvalRow {
    treebank: String,
    eval: StructuralEval,
}

#[derive(Serialize)]
struct ProbeReport {
    probe: String,
    file: String,
    rank: usize,
    n_train: usize,
    n_dev: usize,
    best_epoch: usize,
    best_dev_loss: f64,
    train_losses: Vec<f64>,
    dev_losses: Vec<f64>,
    evaluation: Vec<EvalRow>,
}

/// Trains the structural probe(s) and returns them by name ("joint" unless
/// `per_language` is set).
pub fn train_structural(cfg: &ExperimentConfig, run: &mut Run) -> Result<Vec<(String, StructuralProbe)>> {
    let sec = section(&cfg.structural, "structural")?;
    if sec.treebanks.is_empty() {
        return Err(InputError("[structural] lists no [[structural.treebank]] entries".into()).into());
    }
    let parts = sec
        .treebanks
        .iter()
        .map(|t| Ok((t, run.input(&t.conllu)?, run.input(&t.embeddings)?)))
        .collect::<Result<Vec<_>>>()?;

    let mut data: BTreeMap<(String, Split), Vec<ProbeSentence>> = BTreeMap::new();
    for (part, conllu, embeddings) in parts {
        let set = read_container(&embeddings)?;
        if set.layer != sec.layer {
            log::warn!(
                "{} holds layer {}, config asks for layer {}",
                embeddings.display(),
                set.layer,
                sec.layer
            );
        }
        let bucket = data.entry((part.name.clone(), part.split)).or_default();
        for s in load_conllu(&conllu)? {
            let words = set
                .get(&s.sent_id)
                .ok_or_else(|| csprobe::Error::MissingRecord(s.sent_id.clone()))?;
            if let Some(ps) = ProbeSentence::from_conllu(&s, words, sec.drop_punct)? {
                bucket.push(ps);
            }
        }
    }

    let names: Vec<String> = {
        let mut n: Vec<String> = sec.treebanks.iter().map(|t| t.name.clone()).collect();
        n.sort();
        n.dedup();
        n
    };
    let groups: Vec<(String, Vec<String>)> = if sec.per_language {
        names.iter().map(|n| (n.clone(), vec![n.clone()])).collect()
    } else {
        vec![("joint".to_string(), names.clone())]
    };
    let train_cfg = cfg.train.apply(default_train_config()).with_seed(cfg.seeds[0]);
    let collect = |members: &[String], split: Split| -> Vec<ProbeSentence> {
        members
            .iter()
            .flat_map(|m| data.get(&(m.clone(), split)).cloned().unwrap_or_default())
            .collect()
    };

    let mut probes = Vec::new();
    let mut reports = Vec::new();
    let mut csv = String::from("probe,treebank,n_sentences,uuas,dspr,dspr_sentences\n");
    for (group, members) in groups {
        let train = collect(&members, Split::Train);
        let dev = collect(&members, Split::Dev);
        let out = train_structural_probe(&train, &dev, sec.rank, sec.layer, &cfg.model, &train_cfg)?;
        let file = if sec.per_language {
            format!("structural_probe-{group}.csem")
        } else {
            "structural_probe.csem".to_string()
        };
        out.probe.save(run.out_path(&file))?;
        run.record_output(&file)?;

        let mut evaluation = Vec::new();
        for m in &members {
            let Some(test) = data.get(&(m.clone(), Split::Test)) else { continue };
            if test.is_empty() {
                continue;
            }
            let eval = evaluate_probe(&out.probe, test, DSPR_WINDOW)?;
            let (dspr, dspr_n) = eval
                .dspr
                .map_or((String::new(), 0), |d| (format!("{:.6}", d.mean), d.n_sentences));
            let _ = writeln!(csv, "{group},{m},{},{:.6},{dspr},{dspr_n}", eval.n_sentences, eval.uuas);
            log::info!("{group} probe on {m}: UUAS {:.4}", eval.uuas);
            evaluation.push(EvalRow {
                treebank: m.clone(),
                eval,
            });
        }
        reports.push(ProbeReport {
            probe: group.clone(),
            file,
            rank: sec.rank,
            n_train: train.len(),
            n_dev: dev.len(),
            best_epoch: out.best_epoch,
            best_dev_loss: out.best_dev_loss,
            train_losses: out.train_losses,
            dev_losses: out.dev_losses,
            evaluation,
        });
        probes.push((group, out.probe));
    }
    run.write("structural_eval.csv", csv)?;
    run.write_json("structural.json", &reports)?;
    Ok(probes)
}

#[derive(Serialize)]
struct ParseReport {
    n_parsed: usize,
    skipped: Vec<String>,
}

/// Parses every configured set. `trained` stands in for `[parse] probe`.
pub fn parse(
    cfg: &ExperimentConfig,
    run: &mut Run,
    trained: Option<&StructuralProbe>,
) -> Result<BTreeMap<String, Vec<ParsedSentence>>> {
    let sec = section(&cfg.parse, "parse")?;
    let probe = match (&sec.probe, trained) {
        (Some(path), _) => StructuralProbe::load(run.input(path)?)?,
        (None, Some(p)) => p.clone(),
        (None, None) => return Err(InputError("[parse] needs `probe`".into()).into()),
    };
    if sec.inputs.is_empty() {
        return Err(InputError("[parse] lists no inputs".into()).into());
    }
    if let Some(name) = sec.sources.keys().find(|k| !sec.inputs.contains_key(*k)) {
        return Err(InputError(format!("[parse] sources names unknown set '{name}'")).into());
    }
    let inputs = sec
        .inputs
        .iter()
        .map(|(name, path)| Ok((name, run.input(path)?)))
        .collect::<Result<Vec<_>>>()?;
    let sources = sec
        .sources
        .iter()
        .map(|(name, path)| Ok((name, run.input(path)?)))
        .collect::<Result<BTreeMap<_, _>>>()?;

    let mut parsed_sets = BTreeMap::new();
    let mut reports = BTreeMap::new();
    for (name, path) in inputs {
        let set = read_container(&path)?;
        let (mut parsed, skipped) = parse_corpus(&probe, &set, None)?;
        if let Some(src) = sources.get(name) {
            let map: BTreeMap<String, String> =
                read_synthetic(src)?.into_iter().map(|r| (r.id, r.source_id)).collect();
            for p in &mut parsed {
                p.id = map
                    .get(&p.id)
                    .cloned()
                    .ok_or_else(|| csprobe::Error::MissingRecord(p.id.clone()))?;
            }
            parsed.sort_by(|a, b| a.id.cmp(&b.id));
        }
        let file = format!("parses-{name}.jsonl");
        write_parses(&parsed, run.out_path(&file))?;
        run.record_output(&file)?;
        reports.insert(
            name.clone(),
            ParseReport {
                n_parsed: parsed.len(),
                skipped,
            },
        );
        parsed_sets.insert(name.clone(), parsed);
    }
    run.write_json("parse.json", &reports)?;
    Ok(parsed_sets)
}

#[derive(Serialize)]
struct GedReport<'a> {
    costs: GedCostModel,
    node_cap: usize,
    expansion_budget: usize,
    summaries: BTreeMap<&'a str, GedSummary>,
}

fn compare_all(
    run: &mut Run,
    cs_sets: &BTreeMap<String, Vec<ParsedSentence>>,
    es: &[ParsedSentence],
    en: &[ParsedSentence],
    costs: GedCostModel,
    limits: GedLimits,
) -> Result<()> {
    let mut table = String::from("dataset,retained,excluded,spearman\n");
    let mut summaries = BTreeMap::new();
    for (name, cs) in cs_sets {
        let cmp = ged_compare(cs, es, en, &costs, limits)?;
        let file = format!("ged-{name}.csv");
        run.write(&file, cmp.to_csv())?;
        let s = cmp.summary;
        let _ = writeln!(table, "{name},{},{},{:.4}", s.retained, s.excluded, s.spearman);
        log::info!("{name}: spearman {:.4} over {} records ({} excluded)", s.spearman, s.retained, s.excluded);
        summaries.insert(name.as_str(), s);
    }
    run.write("ged_summary.csv", table)?;
    run.write_json(
        "ged.json",
        &GedReport {
            costs,
            node_cap: limits.node_cap,
            expansion_budget: limits.expansion_budget,
            summaries,
        },
    )
}

fn ged_settings(cfg: &ExperimentConfig) -> Result<(GedCostModel, GedLimits)> {
    let (costs, limits) = cfg
        .ged
        .as_ref()
        .map_or((GedCostModel::default(), GedLimits::default()), |g| (g.costs, g.limits()));
    costs.validate()?;
    Ok((costs, limits))
}

pub fn ged(cfg: &ExperimentConfig, run: &mut Run) -> Result<()> {
    let sec = section(&cfg.ged, "ged")?;
    let need = |p: &Option<PathBuf>, lang: &str| {
        p.clone()
            .ok_or_else(|| InputError(format!("[ged] needs `{lang}`")))
    };
    let es_path = run.input(&need(&sec.es, "es")?)?;
    let en_path = run.input(&need(&sec.en, "en")?)?;
    if sec.cs.is_empty() {
        return Err(InputError("[ged] lists no code-switched parse files in `cs`".into()).into());
    }
    let cs_paths = sec
        .cs
        .iter()
        .map(|(name, path)| Ok((name.clone(), run.input(path)?)))
        .collect::<Result<Vec<_>>>()?;
    let (costs, limits) = ged_settings(cfg)?;
    let es = read_parses(es_path)?;
    let en = read_parses(en_path)?;
    let cs_sets = cs_paths
        .into_iter()
        .map(|(name, path)| Ok((name, read_parses(path)?)))
        .collect::<Result<BTreeMap<_, _>>>()?;
    compare_all(run, &cs_sets, &es, &en, costs, limits)
}

/// Trains the probe, parses every configured set and compares each set in
/// `[syntax] compare` against the `es` and `en` parses.
pub fn syntax(cfg: &ExperimentConfig, run: &mut Run) -> Result<()> {
    let sec = section(&cfg.syntax, "syntax")?;
    let parse_sec = section(&cfg.parse, "parse")?;
    for name in sec.compare.iter().map(String::as_str).chain(["es", "en"]) {
        if !parse_sec.inputs.contains_key(name) {
            return Err(InputError(format!("[parse] inputs has no set '{name}'")).into());
        }
    }
    let (costs, limits) = ged_settings(cfg)?;
    let probe = if parse_sec.probe.is_some() {
        None
    } else {
        let mut probes = train_structural(cfg, run)?;
        if probes.len() != 1 {
            return Err(InputError("per-language probes need an explicit [parse] probe".into()).into());
        }
        probes.pop().map(|(_, p)| p)
    };
    let mut parsed = parse(cfg, run, probe.as_ref())?;
    let es = parsed.remove("es").unwrap_or_default();
    let en = parsed.remove("en").unwrap_or_default();
    let cs_sets: BTreeMap<String, Vec<ParsedSentence>> =
        parsed.into_iter().filter(|(k, _)| sec.compare.contains(k)).collect();
    compare_all(run, &cs_sets, &es, &en, costs, limits)
}

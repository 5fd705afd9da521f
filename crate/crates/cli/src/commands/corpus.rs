use std::collections::BTreeMap;

use anyhow::Result;
use serde::Serialize;

use csprobe::corpus::{corpus_stats, load_alignments, load_conllu, load_lid_file, load_parallel_corpus, CorpusStats};
use csprobe::csgen::{
    gen_corpus, write_synthetic, Direction, GenerationMethod, GenerationReport, Language, NpRules, TranslationLexicon,
};

use crate::config::{section, ExperimentConfig, MethodName};
use crate::run::Run;
use crate::InputError;

#[derive(Serialize)]
struct StatsEntry<'a> {
    dataset: &'a str,
    stats: CorpusStats,
}

pub fn stats(cfg: &ExperimentConfig, run: &mut Run) -> Result<()> {
    let sec = section(&cfg.stats, "stats")?;
    if sec.datasets.is_empty() {
        return Err(InputError("[stats] lists no [[stats.dataset]] entries".into()).into());
    }
    let mut sources = Vec::new();
    for d in &sec.datasets {
        let source = match (&d.parallel, &d.lid) {
            (Some(p), None) => (true, run.input(p)?),
            (None, Some(l)) => (false, run.input(l)?),
            _ => {
                return Err(InputError(format!(
                    "dataset '{}' needs exactly one of `parallel` or `lid`",
                    d.name
                ))
                .into())
            }
        };
        sources.push(source);
    }

    let mut csv = format!("{}\n", CorpusStats::CSV_HEADER);
    let mut entries = Vec::new();
    for (d, (parallel, path)) in sec.datasets.iter().zip(sources) {
        let labels = if parallel {
            load_parallel_corpus(&path)?.token_labels()?
        } else {
            load_lid_file(&path)?
                .iter()
                .flat_map(|s| s.labels().collect::<Vec<_>>())
                .collect()
        };
        let stats = corpus_stats(labels, &sec.mapping);
        csv.push_str(&stats.csv_row(&d.name));
        csv.push('\n');
        entries.push(StatsEntry {
            dataset: &d.name,
            stats,
        });
    }
    run.write("stats.csv", csv)?;
    run.write_json("stats.json", &entries)
}

fn set_name(method: MethodName) -> &'static str {
    match method {
        MethodName::Random => "randCS",
        MethodName::NpEnMatrix => "NPenCS",
        MethodName::NpEsMatrix => "NPesCS",
    }
}

pub fn generate(cfg: &ExperimentConfig, run: &mut Run) -> Result<()> {
    let sec = section(&cfg.generate, "generate")?;
    let corpus_path = run.input(&sec.corpus)?;
    let alignment_path = run.input(&sec.alignments)?;
    let dictionaries = [
        (Direction::EnToEs, &sec.dictionary_en_es),
        (Direction::EsToEn, &sec.dictionary_es_en),
    ]
    .into_iter()
    .filter_map(|(d, p)| p.as_ref().map(|p| run.input(p).map(|p| (d, p))))
    .collect::<Result<Vec<_>>>()?;
    let mut parse_paths = BTreeMap::new();
    for &method in &sec.methods {
        let (lang, path) = match method {
            MethodName::Random => continue,
            MethodName::NpEnMatrix => (Language::En, &sec.parses_en),
            MethodName::NpEsMatrix => (Language::Es, &sec.parses_es),
        };
        let path = path.as_ref().ok_or_else(|| {
            InputError(format!("method {method:?} needs parses_{}", if lang == Language::En { "en" } else { "es" }))
        })?;
        parse_paths.insert(lang, run.input(path)?);
    }
    let direction: Direction = sec.direction.parse()?;
    let defaults = NpRules::default();
    let rules = NpRules {
        head_upos: sec.head_upos.clone().unwrap_or(defaults.head_upos),
        relations: sec.relations.clone().unwrap_or(defaults.relations),
    };

    let corpus = load_parallel_corpus(&corpus_path)?;
    let mut lexicon = TranslationLexicon::from_corpus(&corpus, load_alignments(&alignment_path)?)?;
    for (d, path) in dictionaries {
        lexicon.load_dictionary(d, path)?;
    }
    let mut parses = BTreeMap::new();
    for (lang, path) in parse_paths {
        let by_id: BTreeMap<_, _> = load_conllu(path)?.into_iter().map(|s| (s.sent_id.clone(), s)).collect();
        parses.insert(lang, by_id);
    }

    let seed = cfg.seeds[0];
    let empty = BTreeMap::new();
    let mut reports: BTreeMap<&str, GenerationReport> = BTreeMap::new();
    let mut csv = format!("{}\n", CorpusStats::CSV_HEADER);
    for &method in &sec.methods {
        let (gm, lang_parses) = match method {
            MethodName::Random => (
                GenerationMethod::Random {
                    direction,
                    p_switch: sec.p_switch,
                },
                &empty,
            ),
            MethodName::NpEnMatrix => (
                GenerationMethod::NounPhrase {
                    matrix: Language::En,
                    rules: rules.clone(),
                },
                &parses[&Language::En],
            ),
            MethodName::NpEsMatrix => (
                GenerationMethod::NounPhrase {
                    matrix: Language::Es,
                    rules: rules.clone(),
                },
                &parses[&Language::Es],
            ),
        };
        let (records, report) = gen_corpus(&corpus, &gm, &lexicon, lang_parses, seed)?;
        let name = set_name(method);
        let file = format!("{name}.jsonl");
        write_synthetic(&records, run.out_path(&file))?;
        run.record_output(&file)?;
        log::info!("{name}: {} of {} records generated", report.n_generated, report.n_input);
        csv.push_str(&report.stats.csv_row(name));
        csv.push('\n');
        reports.insert(name, report);
    }
    run.write("generate_stats.csv", csv)?;
    run.write_json("generate.json", &reports)
}

use super::*;
use crate::corpus::{parse_alignment_line, ConlluWord};
use proptest::prelude::*;

fn record(id: &str, en: &str, es: &str) -> ParallelCsRecord {
    ParallelCsRecord {
        id: id.into(),
        cs: en.into(),
        es: es.into(),
        en: en.into(),
        cs_tokens: None,
    }
}

fn lexicon_for(r: &ParallelCsRecord, alignment: &str) -> TranslationLexicon {
    let mut lex = TranslationLexicon::new();
    lex.insert_alignment(r, parse_alignment_line(alignment).unwrap()).unwrap();
    lex
}

fn word(index: usize, form: &str, upos: &str, head: usize, deprel: &str) -> ConlluWord {
    ConlluWord {
        index,
        form: form.into(),
        lemma: "_".into(),
        upos: upos.into(),
        head,
        deprel: deprel.into(),
    }
}

fn saw_the_red_car() -> ConlluSentence {
    ConlluSentence {
        sent_id: "r1".into(),
        words: vec![
            word(1, "I", "PRON", 2, "nsubj"),
            word(2, "saw", "VERB", 0, "root"),
            word(3, "the", "DET", 5, "det"),
            word(4, "red", "ADJ", 5, "amod"),
            word(5, "car", "NOUN", 2, "obj"),
        ],
    }
}

#[test]
fn noun_phrase_replacement() {
    let r = record("r1", "I saw the red car", "Vi el coche rojo");
    // the pro-dropped subject has no Spanish counterpart
    let lex = lexicon_for(&r, "1-0 2-1 3-3 4-2");
    let g = gen_np(&r, Language::En, &saw_the_red_car(), &lex, &NpRules::default()).unwrap();
    assert_eq!(g.record.text, "I saw el coche rojo");
    assert_eq!(g.record.replaced_spans, vec![(2, 5)]);
    assert_eq!(g.record.method, Method::NpEnMatrix);
    assert_eq!(g.skipped_spans, 1);
    use StatsCategory::{En, Es};
    assert_eq!(g.token_categories, vec![En, En, Es, Es, Es]);
}

#[test]
fn noun_phrase_spans() {
    let spans = identify_noun_phrases(&saw_the_red_car(), &NpRules::default());
    assert_eq!(
        spans,
        vec![NounPhraseSpan { start: 0, end: 1 }, NounPhraseSpan { start: 2, end: 5 }]
    );
    let go_away = ConlluSentence {
        sent_id: "g".into(),
        words: vec![word(1, "go", "VERB", 0, "root"), word(2, "away", "ADV", 1, "advmod")],
    };
    assert!(identify_noun_phrases(&go_away, &NpRules::default()).is_empty());
    // "the car company": "car" is a compound nominal nested inside the outer phrase
    let nested = ConlluSentence {
        sent_id: "n".into(),
        words: vec![
            word(1, "the", "DET", 3, "det"),
            word(2, "car", "NOUN", 3, "compound"),
            word(3, "company", "NOUN", 0, "root"),
            word(4, "of", "ADP", 5, "case"),
            word(5, "Maria", "PROPN", 3, "nmod"),
        ],
    };
    assert_eq!(
        identify_noun_phrases(&nested, &NpRules::default()),
        vec![NounPhraseSpan { start: 0, end: 3 }, NounPhraseSpan { start: 4, end: 5 }]
    );
}

#[test]
fn np_without_nominals_is_identity() {
    let r = record("g", "go away", "vete");
    let lex = lexicon_for(&r, "0-0 1-0");
    let parse = ConlluSentence {
        sent_id: "g".into(),
        words: vec![word(1, "go", "VERB", 0, "root"), word(2, "away", "ADV", 1, "advmod")],
    };
    let g = gen_np(&r, Language::En, &parse, &lex, &NpRules::default()).unwrap();
    assert_eq!(g.record.text, "go away");
    assert!(g.record.replaced_spans.is_empty());
    assert_eq!(g.record.method, Method::NpEnMatrix);
}

#[test]
fn np_rejects_token_mismatch() {
    let r = record("r1", "I saw a car", "Vi un coche");
    let lex = lexicon_for(&r, "1-0");
    assert!(gen_np(&r, Language::En, &saw_the_red_car(), &lex, &NpRules::default()).is_err());
}

#[test]
fn random_extremes() {
    let r = record("a", "the red car", "el rojo coche");
    let lex = lexicon_for(&r, "0-0 1-1 2-2");
    let g0 = gen_random(&r, Direction::EnToEs, 0.0, &lex, 3).unwrap();
    assert_eq!(g0.record.text, r.en);
    assert!(g0.record.replaced_spans.is_empty());
    let g1 = gen_random(&r, Direction::EnToEs, 1.0, &lex, 3).unwrap();
    assert_eq!(g1.record.text, r.es);
    let back = gen_random(&r, Direction::EsToEn, 1.0, &lex, 3).unwrap();
    assert_eq!(back.record.text, r.en);
}

#[test]
fn random_uses_dictionary_then_keeps() {
    let r = record("d", "Hello big world", "hola mundo");
    let mut lex = TranslationLexicon::new();
    lex.add_entry(Direction::EnToEs, "HELLO", "hola");
    let g = gen_random(&r, Direction::EnToEs, 1.0, &lex, 0).unwrap();
    // casing follows the source, unknown words stay
    assert_eq!(g.record.text, "Hola big world");
    assert_eq!(g.unaligned, 2);
    assert_eq!(g.record.replaced_spans, vec![(0, 1)]);

    let empty = TranslationLexicon::new();
    assert!(gen_random(&r, Direction::EnToEs, 0.5, &empty, 0).is_err());
    assert!(gen_random(&r, Direction::EnToEs, 1.5, &lex, 0).is_err());
}

#[test]
fn casing_is_upgraded_only() {
    assert_eq!(match_case("The", "el"), "El");
    assert_eq!(match_case("the", "El"), "El");
    assert_eq!(match_case("1990", "mil"), "mil");
    assert_eq!(match_case("Über", "ñu"), "Ñu");
}

#[test]
fn neutral_tokens_and_entities() {
    let nes = BTreeSet::from(["Maria"]);
    for form in ["!", "12", "3.5", "@user", "#tag", "https://x.org", "www.a.com", ":)"] {
        assert_eq!(categorize(form, Language::En, &nes), StatsCategory::Other, "{form}");
    }
    assert_eq!(categorize("Maria", Language::Es, &nes), StatsCategory::Ne);
    assert_eq!(categorize("casa", Language::Es, &nes), StatsCategory::Es);
}

#[test]
fn replacement_rate_concentrates() {
    let n = 10_000;
    let words: Vec<String> = (0..n).map(|i| format!("w{i}")).collect();
    let targets: Vec<String> = (0..n).map(|i| format!("t{i}")).collect();
    let r = record("big", &words.join(" "), &targets.join(" "));
    let align = (0..n).map(|i| format!("{i}-{i}")).collect::<Vec<_>>().join(" ");
    let lex = lexicon_for(&r, &align);
    let g = gen_random(&r, Direction::EnToEs, 0.5, &lex, 0).unwrap();
    let rate = g.record.replaced_spans.len() as f64 / n as f64;
    assert!((rate - 0.5).abs() <= 0.02, "rate {rate}");
}

#[test]
fn corpus_generation_reports_and_is_deterministic() {
    let mut corpus = ParallelCsCorpus::default();
    corpus.records.push(ParallelCsRecord {
        cs_tokens: Some(vec![
            ("Maria".into(), LidLabel::Ne),
            ("come".into(), LidLabel::Lang2),
            ("pizza".into(), LidLabel::Lang1),
            ("!".into(), LidLabel::Other),
        ]),
        ..record("a", "Maria eats pizza !", "Maria come pizza !")
    });
    corpus.records.push(record("b", "good morning", "buenos dias"));
    corpus.records.push(record("c", "no alignment here", "sin alineacion"));
    let mut lex = TranslationLexicon::new();
    lex.insert_alignment(&corpus.records[0], parse_alignment_line("0-0 1-1 2-2 3-3").unwrap()).unwrap();
    lex.insert_alignment(&corpus.records[1], parse_alignment_line("0-0 1-1").unwrap()).unwrap();
    lex.add_entry(Direction::EsToEn, "zzz", "zzz");

    let method = GenerationMethod::Random {
        direction: Direction::EnToEs,
        p_switch: 1.0,
    };
    let parses = BTreeMap::new();
    let (recs, report) = gen_corpus(&corpus, &method, &lex, &parses, 7).unwrap();
    assert_eq!(recs.len(), 2);
    assert_eq!(report.skipped_records.len(), 1);
    assert_eq!(report.skipped_records[0].id, "c");
    assert_eq!(recs[0].text, "Maria come pizza !");
    // Maria=ne, come=es, pizza=es (no-op), !=other, buenos dias = es es
    assert_eq!(report.stats.n_tokens, 6);
    assert_eq!(report.stats.ne.count, 1);
    assert_eq!(report.stats.es.count, 4);
    assert_eq!(report.stats.other.count, 1);
    assert_eq!(report.noop_replacements, 3);

    let again = gen_corpus(&corpus, &method, &lex, &parses, 7).unwrap();
    assert_eq!(again.0, recs);

    let (none, empty) = gen_corpus(&ParallelCsCorpus::default(), &method, &lex, &parses, 7).unwrap();
    assert!(none.is_empty());
    assert_eq!(empty.n_input, 0);
    assert_eq!(empty.stats.n_tokens, 0);
}

#[test]
fn synthetic_jsonl_round_trip() {
    let dir = tempfile::tempdir().unwrap();
    let path = dir.path().join("syn.jsonl");
    let recs = vec![SyntheticRecord {
        id: "a-random".into(),
        text: "el car".into(),
        method: Method::Random,
        source_id: "a".into(),
        replaced_spans: vec![(0, 1)],
    }];
    write_synthetic(&recs, &path).unwrap();
    assert_eq!(
        std::fs::read_to_string(&path).unwrap(),
        "{\"id\":\"a-random\",\"text\":\"el car\",\"method\":\"random\",\"source_id\":\"a\",\"replaced_spans\":[[0,1]]}\n"
    );
    assert_eq!(read_synthetic(&path).unwrap(), recs);
}

fn arb_sentence() -> impl Strategy<Value = ConlluSentence> {
    (2usize..12)
        .prop_flat_map(|n| {
            (
                prop::collection::vec(0usize..1000, n),
                prop::collection::vec(0usize..5, n),
                prop::collection::vec(0usize..7, n),
            )
        })
        .prop_map(|(parents, upos, rels)| {
            let upos_set = ["NOUN", "PROPN", "PRON", "VERB", "DET"];
            let rel_set = ["det", "amod", "nummod", "compound", "flat:name", "case", "obj"];
            let n = parents.len();
            // word 1 is the root; every later word attaches to an earlier one
            let words = (0..n)
                .map(|i| {
                    let head = if i == 0 { 0 } else { parents[i] % i + 1 };
                    word(i + 1, &format!("w{i}"), upos_set[upos[i]], head, rel_set[rels[i]])
                })
                .collect();
            ConlluSentence {
                sent_id: "p".into(),
                words,
            }
        })
}

proptest! {
    #[test]
    fn spans_never_overlap(s in arb_sentence()) {
        let spans = identify_noun_phrases(&s, &NpRules::default());
        for w in spans.windows(2) {
            prop_assert!(w[0].end <= w[1].start);
        }
        for sp in &spans {
            prop_assert!(sp.start < sp.end && sp.end <= s.len());
        }
    }

    #[test]
    fn zero_switch_is_identity(tokens in prop::collection::vec("[a-zA-Z]{1,6}", 1..20), seed in any::<u64>()) {
        let text = tokens.join(" ");
        let r = record("x", &text, &text);
        let align = (0..tokens.len()).map(|i| format!("{i}-{i}")).collect::<Vec<_>>().join(" ");
        let lex = lexicon_for(&r, &align);
        let g = gen_random(&r, Direction::EnToEs, 0.0, &lex, seed).unwrap();
        prop_assert_eq!(g.record.text, text);
    }

    #[test]
    fn same_seed_same_output(seed in any::<u64>(), p in 0.0f64..=1.0) {
        let r = record("y", "one two three four five", "uno dos tres cuatro cinco");
        let lex = lexicon_for(&r, "0-0 1-1 2-2 3-3 4-4");
        let a = gen_random(&r, Direction::EnToEs, p, &lex, seed).unwrap();
        let b = gen_random(&r, Direction::EnToEs, p, &lex, seed).unwrap();
        prop_assert_eq!(a, b);
    }
}

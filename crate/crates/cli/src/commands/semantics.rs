use std::collections::BTreeMap;

use anyhow::Result;
use serde::Serialize;

use csprobe::csgen::read_synthetic;
use csprobe::embedstore::read_container;
use csprobe::semsim::{consistency_report, real_plan, rekey_by_source, synthetic_plan, PlanRow, SYNTHETIC_SET_NAMES};

use crate::config::{section, ExperimentConfig, PlanName};
use crate::run::Run;
use crate::InputError;

#[derive(Serialize)]
struct SemanticsReport<'a> {
    model: &'a str,
    include_diagonal: bool,
    n_pairs: BTreeMap<&'a str, usize>,
    skipped_rows: &'a [PlanRow],
}

pub fn semantics(cfg: &ExperimentConfig, run: &mut Run) -> Result<()> {
    let sec = section(&cfg.semantics, "semantics")?;
    if let Some(name) = sec.sources.keys().find(|k| !sec.sets.contains_key(*k)) {
        return Err(InputError(format!("[semantics] sources names unknown set '{name}'")).into());
    }
    let set_paths = sec
        .sets
        .iter()
        .map(|(name, path)| Ok((name.clone(), run.input(path)?)))
        .collect::<Result<Vec<_>>>()?;
    let source_paths = sec
        .sources
        .iter()
        .map(|(name, path)| Ok((name.clone(), run.input(path)?)))
        .collect::<Result<BTreeMap<_, _>>>()?;

    let mut sets = BTreeMap::new();
    for (name, path) in set_paths {
        let mut set = read_container(&path)?;
        if let Some(src) = source_paths.get(&name) {
            set = rekey_by_source(&set, &read_synthetic(src)?)?;
        }
        sets.insert(name, set);
    }
    let mut plan = Vec::new();
    if matches!(sec.plan, PlanName::Real | PlanName::Both) {
        plan.extend(real_plan());
    }
    if matches!(sec.plan, PlanName::Synthetic | PlanName::Both) {
        plan.extend(synthetic_plan(&SYNTHETIC_SET_NAMES));
    }
    let report = consistency_report(&sets, &plan, &cfg.model, sec.include_diagonal)?;
    if report.results.is_empty() {
        return Err(csprobe::Error::Empty("no plan row has all of its sets configured".into()).into());
    }
    run.write("semantics.csv", report.to_csv())?;
    let n_pairs = report
        .vectors
        .iter()
        .map(|(label, v)| (label.as_str(), v.values.len()))
        .collect();
    run.write_json(
        "semantics.json",
        &SemanticsReport {
            model: &cfg.model,
            include_diagonal: sec.include_diagonal,
            n_pairs,
            skipped_rows: &report.skipped_rows,
        },
    )
}

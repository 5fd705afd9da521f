//! The experiment config file: TOML, one optional section per command.
//! Relative paths are resolved against the directory holding the file.

use std::collections::BTreeMap;
use std::fs;
use std::path::{Path, PathBuf};

use anyhow::{Context, Result};
use serde::{Deserialize, Serialize};

use csprobe::corpus::StatsMapping;
use csprobe::probe::ProbeTrainConfig;
use csprobe::treedist::{GedCostModel, DEFAULT_EXPANSION_BUDGET, DEFAULT_NODE_CAP};

use crate::InputError;

fn default_model() -> String {
    "model".into()
}

fn default_seeds() -> Vec<u64> {
    vec![0, 1, 2, 3, 4]
}

#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ExperimentConfig {
    /// Name written into reports and the model column of CSVs.
    #[serde(default = "default_model")]
    pub model: String,
    #[serde(default = "default_seeds")]
    pub seeds: Vec<u64>,
    pub out: Option<PathBuf>,
    pub jobs: Option<usize>,
    #[serde(default)]
    pub train: TrainSection,
    pub stats: Option<StatsSection>,
    pub generate: Option<GenerateSection>,
    pub probe: Option<ProbeSection>,
    pub sweep: Option<SweepSection>,
    pub structural: Option<StructuralSection>,
    pub parse: Option<ParseSection>,
    pub ged: Option<GedSection>,
    pub syntax: Option<SyntaxSection>,
    pub semantics: Option<SemanticsSection>,
}

/// Optimizer overrides; unset fields keep the task's defaults.
#[derive(Debug, Clone, Default, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct TrainSection {
    pub batch_size: Option<usize>,
    pub learning_rate: Option<f64>,
    pub max_epochs: Option<usize>,
    pub patience: Option<usize>,
}

impl TrainSection {
    pub fn apply(&self, base: ProbeTrainConfig) -> ProbeTrainConfig {
        ProbeTrainConfig {
            batch_size: self.batch_size.unwrap_or(base.batch_size),
            learning_rate: self.learning_rate.unwrap_or(base.learning_rate),
            max_epochs: self.max_epochs.unwrap_or(base.max_epochs),
            patience: self.patience.unwrap_or(base.patience),
            seed: base.seed,
        }
    }
}

#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct StatsSection {
    #[serde(default)]
    pub mapping: StatsMapping,
    #[serde(default, rename = "dataset")]
    pub datasets: Vec<StatsDataset>,
}

/// A labelled corpus: either a parallel JSONL corpus with `cs_tokens` or a
/// token-per-line LID file.
#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct StatsDataset {
    pub name: String,
    pub parallel: Option<PathBuf>,
    pub lid: Option<PathBuf>,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum MethodName {
    Random,
    NpEnMatrix,
    NpEsMatrix,
}

fn all_methods() -> Vec<MethodName> {
    vec![MethodName::Random, MethodName::NpEnMatrix, MethodName::NpEsMatrix]
}

fn default_p_switch() -> f64 {
    csprobe::csgen::DEFAULT_P_SWITCH
}

fn default_direction() -> String {
    "en-es".into()
}

#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct GenerateSection {
    pub corpus: PathBuf,
    /// English-to-Spanish alignments, line i for record i.
    pub alignments: PathBuf,
    pub dictionary_en_es: Option<PathBuf>,
    pub dictionary_es_en: Option<PathBuf>,
    /// CoNLL-U parses of the English and Spanish sides, `sent_id` = record id.
    pub parses_en: Option<PathBuf>,
    pub parses_es: Option<PathBuf>,
    #[serde(default = "all_methods")]
    pub methods: Vec<MethodName>,
    #[serde(default = "default_p_switch")]
    pub p_switch: f64,
    #[serde(default = "default_direction")]
    pub direction: String,
    pub head_upos: Option<Vec<String>>,
    pub relations: Option<Vec<String>>,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Task {
    Sentence,
    Lid,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ProbeSection {
    pub task: Task,
    /// `id<TAB>label` lines for the sentence task, a LID file otherwise.
    pub dataset: PathBuf,
    pub embeddings: PathBuf,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SweepSection {
    pub task: Task,
    pub dataset: PathBuf,
    /// Container path with `{layer}` and `{pooling}` placeholders.
    pub pattern: Option<String>,
    #[serde(default)]
    pub layers: Vec<u32>,
    #[serde(default)]
    pub poolings: Vec<String>,
    #[serde(default, rename = "container")]
    pub containers: Vec<SweepContainer>,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SweepContainer {
    pub layer: u32,
    pub pooling: String,
    pub path: PathBuf,
}

fn default_rank() -> usize {
    128
}

fn default_layer() -> u32 {
    7
}

fn yes() -> bool {
    true
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Split {
    Train,
    Dev,
    Test,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct StructuralSection {
    #[serde(default = "default_rank")]
    pub rank: usize,
    #[serde(default = "default_layer")]
    pub layer: u32,
    #[serde(default = "yes")]
    pub drop_punct: bool,
    /// Train one probe per treebank name instead of one joint probe.
    #[serde(default)]
    pub per_language: bool,
    #[serde(rename = "treebank")]
    pub treebanks: Vec<TreebankPart>,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct TreebankPart {
    pub name: String,
    pub split: Split,
    pub conllu: PathBuf,
    pub embeddings: PathBuf,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ParseSection {
    /// Trained probe container. The syntax command uses its freshly trained
    /// probe when this is unset.
    pub probe: Option<PathBuf>,
    /// Set name to word-level container.
    pub inputs: BTreeMap<String, PathBuf>,
    /// Synthetic JSONL per set name; parses of those sets are stored under
    /// the source record ids.
    #[serde(default)]
    pub sources: BTreeMap<String, PathBuf>,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct GedSection {
    /// Parse files of the code-switched sets to compare, by name.
    #[serde(default)]
    pub cs: BTreeMap<String, PathBuf>,
    pub es: Option<PathBuf>,
    pub en: Option<PathBuf>,
    #[serde(default)]
    pub costs: GedCostModel,
    pub node_cap: Option<usize>,
    pub expansion_budget: Option<usize>,
}

impl GedSection {
    pub fn limits(&self) -> csprobe::treedist::GedLimits {
        csprobe::treedist::GedLimits {
            node_cap: self.node_cap.unwrap_or(DEFAULT_NODE_CAP),
            expansion_budget: self.expansion_budget.unwrap_or(DEFAULT_EXPANSION_BUDGET),
        }
    }
}

#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SyntaxSection {
    /// Parsed sets compared against `es` and `en`.
    pub compare: Vec<String>,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum PlanName {
    Real,
    Synthetic,
    #[default]
    Both,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SemanticsSection {
    #[serde(default)]
    pub plan: PlanName,
    #[serde(default)]
    pub include_diagonal: bool,
    pub sets: BTreeMap<String, PathBuf>,
    #[serde(default)]
    pub sources: BTreeMap<String, PathBuf>,
}

/// A loaded config plus the raw bytes it was parsed from.
#[derive(Debug, Clone)]
pub struct LoadedConfig {
    pub config: ExperimentConfig,
    pub raw: Vec<u8>,
    pub base_dir: PathBuf,
}

pub fn load(path: &Path) -> Result<LoadedConfig> {
    let raw = fs::read(path)
        .map_err(|e| InputError(format!("cannot read config {}: {e}", path.display())))?;
    let text = std::str::from_utf8(&raw)
        .map_err(|_| InputError(format!("config {} is not UTF-8", path.display())))?;
    let config: ExperimentConfig = toml::from_str(text)
        .map_err(|e| InputError(format!("invalid config {}: {e}", path.display())))?;
    if config.seeds.is_empty() {
        return Err(InputError("seeds must not be empty".into()).into());
    }
    let base_dir = path.parent().map(Path::to_path_buf).unwrap_or_default();
    Ok(LoadedConfig { config, raw, base_dir })
}

pub fn section<'a, T>(section: &'a Option<T>, name: &str) -> Result<&'a T> {
    section
        .as_ref()
        .ok_or_else(|| InputError(format!("config has no [{name}] section")))
        .context("configuration")
}

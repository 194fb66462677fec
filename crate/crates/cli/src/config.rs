//! Run configuration: a TOML document with every section optional,
//! `key=value` overrides, and the seed scheme.

use std::path::{Path, PathBuf};

use anyhow::{anyhow, bail, Context};
use exportscore::dataset::columns::{default_predictors, CATEGORICAL, EXPORT_REVENUE, TOTAL_REVENUE};
use exportscore::metrics::harness::Grouping;
use exportscore::models::ModelSpec;
use exportscore::scoring::PremiaOptions;
use exportscore::stats::{derive_seed, streams};
use exportscore::synth::{GeneratorSpec, PatternMix};
use exportscore::{LabelDefinition, Schema};
use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct RunConfig {
    /// Master seed; every random component derives its seed from it.
    pub seed: u64,
    pub output_dir: PathBuf,
    /// Write a generation-time comment line into output CSVs.
    pub timestamp: bool,
    pub data: DataConfig,
    pub simulate: SimulateConfig,
    pub model: ModelSpec,
    pub partition: PartitionConfig,
    pub evaluate: EvaluateConfig,
    pub score: ScoreConfig,
    pub analyze: AnalyzeConfig,
}

impl Default for RunConfig {
    fn default() -> Self {
        Self {
            seed: 0,
            output_dir: "out".into(),
            timestamp: true,
            data: DataConfig::default(),
            simulate: SimulateConfig::default(),
            model: ModelSpec::default(),
            partition: PartitionConfig::default(),
            evaluate: EvaluateConfig::default(),
            score: ScoreConfig::default(),
            analyze: AnalyzeConfig::default(),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct DataConfig {
    /// Input panel; defaults to `panel.csv` in the output directory.
    pub panel: Option<PathBuf>,
    /// Column declaration; inferred from the header when absent.
    pub schema: Option<Schema>,
    /// Model predictors; the 52 account predictors when the panel has them,
    /// otherwise every numeric column except the revenues.
    pub predictors: Option<Vec<String>>,
    pub label: LabelDefinition,
}

impl Default for DataConfig {
    fn default() -> Self {
        Self {
            panel: None,
            schema: None,
            predictors: None,
            label: LabelDefinition::PositiveRevenue,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Default, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct SimulateConfig {
    pub generator: GeneratorSpec,
    /// Inject exporting-pattern paths in these proportions.
    pub patterns: Option<PatternMix>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct PartitionConfig {
    /// Share of firms used for training.
    pub fraction: f64,
}

impl Default for PartitionConfig {
    fn default() -> Self {
        Self { fraction: 0.8 }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct EvaluateConfig {
    /// Model documents to evaluate; defaults to `model.json` in the output
    /// directory.
    pub models: Vec<PathBuf>,
    pub threshold: f64,
    pub grouping: Option<Grouping>,
    /// Extra random-split replications refitting `model`.
    pub cv_replications: usize,
    /// Also fit and evaluate `model` within each year.
    pub per_year: bool,
    /// Also refit `model` under these exporter definitions.
    pub definitions: Vec<LabelDefinition>,
}

impl Default for EvaluateConfig {
    fn default() -> Self {
        Self {
            models: vec![],
            threshold: 0.5,
            grouping: None,
            cv_replications: 0,
            per_year: false,
            definitions: vec![],
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum RowSelection {
    All,
    Test,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct ScoreConfig {
    /// Model document; defaults to `model.json` in the output directory.
    pub model: Option<PathBuf>,
    pub rows: RowSelection,
    /// Resource columns regressed on risk class.
    pub outcomes: Vec<String>,
    pub premia: PremiaOptions,
}

impl Default for ScoreConfig {
    fn default() -> Self {
        Self {
            model: None,
            rows: RowSelection::All,
            outcomes: vec!["cash".into(), "fixed_assets".into()],
            premia: PremiaOptions::default(),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct AnalyzeConfig {
    /// Represent each firm by its latest scored year.
    pub latest_only: bool,
    pub lq_reps: usize,
    /// Categorical columns to summarize non-exporter scores by.
    pub group_by: Vec<String>,
    /// BART refits for the inclusion proportions; 1 reuses the trained model.
    pub vip_replications: usize,
}

impl Default for AnalyzeConfig {
    fn default() -> Self {
        Self {
            latest_only: true,
            lq_reps: 1000,
            group_by: CATEGORICAL.iter().map(|s| s.to_string()).collect(),
            vip_replications: 1,
        }
    }
}

/// Seeds of every random component, derived from the master seed.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct Seeds {
    pub simulate: u64,
    pub partition: u64,
    pub model: u64,
    pub bootstrap: u64,
    pub vip: u64,
}

/// Keys holding seeds below the root; the master seed replaces them.
const DERIVED_SEED_KEYS: [&str; 4] = [
    "simulate.generator.seed",
    "model.bart.seed",
    "model.cart.seed",
    "model.forest.seed",
];

impl RunConfig {
    pub fn seeds(&self) -> Seeds {
        Seeds {
            simulate: derive_seed(self.seed, streams::SIMULATE),
            partition: derive_seed(self.seed, streams::PARTITION),
            model: derive_seed(self.seed, streams::MODEL),
            bootstrap: derive_seed(self.seed, streams::BOOTSTRAP),
            vip: derive_seed(self.seed, streams::VIP),
        }
    }

    pub fn panel_path(&self) -> PathBuf {
        self.data.panel.clone().unwrap_or_else(|| self.output_dir.join("panel.csv"))
    }

    pub fn model_path(&self) -> PathBuf {
        self.score.model.clone().unwrap_or_else(|| self.output_dir.join("model.json"))
    }

    pub fn evaluation_models(&self) -> Vec<PathBuf> {
        if self.evaluate.models.is_empty() {
            vec![self.output_dir.join("model.json")]
        } else {
            self.evaluate.models.clone()
        }
    }

    /// Predictors for a panel with the given numeric columns.
    pub fn predictors(&self, numeric: &[String]) -> Vec<String> {
        if let Some(p) = &self.data.predictors {
            return p.clone();
        }
        let accounts = default_predictors();
        if accounts.iter().all(|p| numeric.contains(p)) {
            return accounts;
        }
        numeric
            .iter()
            .filter(|c| c.as_str() != EXPORT_REVENUE && c.as_str() != TOTAL_REVENUE)
            .cloned()
            .collect()
    }

    pub fn validate(&self) -> anyhow::Result<()> {
        if self.seed > i64::MAX as u64 {
            bail!("seed: must fit a signed 64-bit integer");
        }
        let f = self.partition.fraction;
        if !(f > 0.0 && f < 1.0) {
            bail!("partition.fraction: must lie in (0, 1), got {f}");
        }
        let t = self.evaluate.threshold;
        if !(0.0..=1.0).contains(&t) {
            bail!("evaluate.threshold: must lie in [0, 1], got {t}");
        }
        self.model.validate().map_err(|e| anyhow!("model: {e}"))?;
        self.simulate.generator.validate().map_err(|e| anyhow!("simulate.generator: {e}"))?;
        if self.analyze.lq_reps == 0 {
            bail!("analyze.lq_reps: must be positive");
        }
        if self.analyze.vip_replications == 0 {
            bail!("analyze.vip_replications: must be positive");
        }
        Ok(())
    }

    /// TOML text of the resolved configuration, without the derived seeds.
    pub fn to_toml(&self) -> String {
        let mut value = toml::Table::try_from(self).expect("config serializes");
        for key in DERIVED_SEED_KEYS {
            let parts: Vec<&str> = key.split('.').collect();
            let (last, parents) = parts.split_last().expect("non-empty");
            let mut t = &mut value;
            for p in parents {
                t = t.get_mut(*p).and_then(|v| v.as_table_mut()).expect("section present");
            }
            t.remove(*last);
        }
        toml::to_string(&value).expect("table serializes")
    }

    /// SHA-256 of the resolved configuration text.
    pub fn hash(&self) -> String {
        hex::encode(Sha256::digest(self.to_toml().as_bytes()))
    }
}

fn table_at<'a>(root: &'a mut toml::Table, path: &[&str], full: &str) -> anyhow::Result<&'a mut toml::Table> {
    let mut t = root;
    for p in path {
        let entry = t.entry(p.to_string()).or_insert_with(|| toml::Value::Table(toml::Table::new()));
        t = entry
            .as_table_mut()
            .ok_or_else(|| anyhow!("{full}: {p} is not a table"))?;
    }
    Ok(t)
}

/// Parses the right-hand side of an override as a TOML value, falling back
/// to a bare string.
fn override_value(raw: &str) -> toml::Value {
    match format!("v = {raw}").parse::<toml::Table>() {
        Ok(mut t) => t.remove("v").expect("parsed key"),
        Err(_) => toml::Value::String(raw.to_string()),
    }
}

/// Applies `key.path=value` overrides on top of a parsed document.
pub fn apply_overrides(table: &mut toml::Table, overrides: &[String]) -> anyhow::Result<()> {
    for o in overrides {
        let (key, raw) = o
            .split_once('=')
            .ok_or_else(|| anyhow!("override {o:?}: expected key=value"))?;
        let key = key.trim();
        let parts: Vec<&str> = key.split('.').collect();
        if parts.iter().any(|p| p.is_empty()) {
            bail!("override {o:?}: empty key segment");
        }
        let (last, parents) = parts.split_last().expect("non-empty");
        table_at(table, parents, key)?.insert(last.to_string(), override_value(raw.trim()));
    }
    Ok(())
}

fn reject_derived_seeds(table: &toml::Table) -> anyhow::Result<()> {
    for key in DERIVED_SEED_KEYS {
        let mut v: Option<&toml::Value> = None;
        let mut t = Some(table);
        for p in key.split('.') {
            v = t.and_then(|t| t.get(p));
            t = v.and_then(|v| v.as_table());
        }
        if v.is_some() {
            bail!("{key}: component seeds are derived from the master `seed`; set that instead");
        }
    }
    Ok(())
}

/// Reads the config file (if any), applies overrides and deserializes,
/// reporting the key path of any error.
pub fn load(path: Option<&Path>, overrides: &[String]) -> anyhow::Result<RunConfig> {
    let mut table = match path {
        Some(p) => {
            let text = std::fs::read_to_string(p).with_context(|| format!("reading config {}", p.display()))?;
            text.parse::<toml::Table>()
                .map_err(|e| anyhow!("config {}: {}", p.display(), e.to_string().replace('\n', " ")))?
        }
        None => toml::Table::new(),
    };
    apply_overrides(&mut table, overrides)?;
    reject_derived_seeds(&table)?;
    let config: RunConfig = serde_path_to_error::deserialize(toml::Value::Table(table)).map_err(|e| {
        let path = e.path().to_string();
        let msg = e.into_inner().to_string().replace('\n', " ");
        // toml already appends the key to some messages
        let msg = msg.trim().trim_end_matches(&format!(" in `{path}`")).to_string();
        anyhow!("{path}: {msg}")
    })?;
    config.validate()?;
    Ok(config)
}

pub fn infer_schema(header: &[String]) -> Schema {
    let mut schema = Schema::accounts();
    let fixed = [schema.firm_id.clone(), schema.year.clone()];
    schema.numeric = header
        .iter()
        .filter(|h| !fixed.contains(h) && !CATEGORICAL.contains(&h.as_str()))
        .cloned()
        .collect();
    schema.categorical.retain(|c| header.contains(&c.name));
    schema
}

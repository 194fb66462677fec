//! One function per subcommand. Each reads its inputs from the resolved
//! configuration and writes its artifacts into the output directory.

use std::collections::HashMap;
use std::fs::{self, File};
use std::io::{BufWriter, Write};
use std::path::{Path, PathBuf};

use anyhow::{bail, Context as _};
use exportscore::analytics::{aggregate_scores, location_quotients, potential_set, summarize_vip, vip_replicate, write_group_summaries};
use exportscore::bart::BartConfig;
use exportscore::dataset::{ingest_csv, label, partition, write_csv};
use exportscore::metrics::harness::{by_definition, common_spearman, cross_validate, group_labels, per_year, score_dataset};
use exportscore::metrics::{evaluate, evaluate_by_group, write_reports, ReportRow};
use exportscore::models::{train, Model};
use exportscore::scoring::{fit_premia, premia_table, score, write_premia_csv, ScoreTable};
use exportscore::stats::derive_seed;
use exportscore::synth::{generate, pattern_generate, GeneratorSpec};
use exportscore::{Dataset, FeatureMatrix, FirmPanel, LabelDefinition, LabelSet, PredictionTable, RowKey};
use serde::Serialize;

use crate::config::{infer_schema, RowSelection, RunConfig};

/// The resolved configuration plus everything stamped onto outputs.
pub struct Context {
    pub config: RunConfig,
    pub hash: String,
    pub timestamp: Option<String>,
}

impl Context {
    pub fn new(config: RunConfig) -> Self {
        let hash = config.hash();
        let timestamp = config
            .timestamp
            .then(|| humantime::format_rfc3339_seconds(std::time::SystemTime::now()).to_string());
        Self { config, hash, timestamp }
    }

    /// Leading comment lines of every output CSV.
    pub fn comments(&self) -> Vec<String> {
        let mut c = vec![format!("exportscore {} config_sha256={}", env!("CARGO_PKG_VERSION"), self.hash)];
        if let Some(ts) = &self.timestamp {
            c.push(format!("generated_at {ts}"));
        }
        c
    }

    fn path(&self, name: &str) -> PathBuf {
        self.config.output_dir.join(name)
    }

    fn create(&self, name: &str) -> anyhow::Result<BufWriter<File>> {
        let path = self.path(name);
        let file = File::create(&path).with_context(|| format!("creating {}", path.display()))?;
        Ok(BufWriter::new(file))
    }

    fn write_csv(
        &self,
        name: &str,
        write: impl FnOnce(&mut BufWriter<File>, &[String]) -> exportscore::Result<()>,
    ) -> anyhow::Result<()> {
        let mut out = self.create(name)?;
        write(&mut out, &self.comments())?;
        out.flush().with_context(|| format!("writing {name}"))?;
        log::info!("wrote {}", self.path(name).display());
        Ok(())
    }

    fn write_text(&self, name: &str, text: &str) -> anyhow::Result<()> {
        fs::write(self.path(name), text).with_context(|| format!("writing {name}"))?;
        log::info!("wrote {}", self.path(name).display());
        Ok(())
    }

    /// Writes the fully resolved configuration next to the outputs.
    pub fn echo(&self, subcommand: &str) -> anyhow::Result<()> {
        fs::create_dir_all(&self.config.output_dir)
            .with_context(|| format!("creating {}", self.config.output_dir.display()))?;
        let s = self.config.seeds();
        let text = format!(
            "# exportscore {} config_sha256={}\n# derived seeds: simulate={} partition={} model={} bootstrap={} vip={}\n{}",
            env!("CARGO_PKG_VERSION"),
            self.hash,
            s.simulate,
            s.partition,
            s.model,
            s.bootstrap,
            s.vip,
            self.config.to_toml()
        );
        self.write_text(&format!("{subcommand}.config.toml"), &text)
    }
}

fn read_header(path: &Path) -> anyhow::Result<Vec<String>> {
    let file = File::open(path).with_context(|| format!("opening {}", path.display()))?;
    let mut rdr = csv::ReaderBuilder::new().comment(Some(b'#')).from_reader(file);
    Ok(rdr
        .headers()
        .with_context(|| format!("reading header of {}", path.display()))?
        .iter()
        .map(|h| h.trim().to_string())
        .collect())
}

fn load_panel(ctx: &Context) -> anyhow::Result<FirmPanel> {
    let path = ctx.config.panel_path();
    let schema = match &ctx.config.data.schema {
        Some(s) => s.clone(),
        None => infer_schema(&read_header(&path)?),
    };
    let panel = ingest_csv(&path, &schema)?;
    log::info!("read {} rows from {}", panel.n_rows(), path.display());
    Ok(panel)
}

fn numeric_names(panel: &FirmPanel) -> Vec<String> {
    panel.numeric.iter().map(|c| c.name.clone()).collect()
}

fn load_model(path: &Path) -> anyhow::Result<Model> {
    let text = fs::read_to_string(path).with_context(|| format!("reading {}", path.display()))?;
    Ok(Model::from_json(&text)?)
}

fn model_name(path: &Path) -> String {
    path.file_stem().map(|s| s.to_string_lossy().into_owned()).unwrap_or_else(|| path.display().to_string())
}

fn test_rows(ctx: &Context, panel: &FirmPanel) -> anyhow::Result<Vec<usize>> {
    let split = partition(panel, ctx.config.partition.fraction, ctx.config.seeds().partition)?;
    Ok(split.test_rows(panel))
}

/// Scores the given panel rows; rows the model cannot score are skipped.
fn predict_rows(model: &Model, panel: &FirmPanel, rows: &[usize]) -> anyhow::Result<PredictionTable> {
    let x = FeatureMatrix::from_panel(panel, &model.predictor_names(), rows)?;
    let mut keys = Vec::new();
    let mut scores = Vec::new();
    for (i, s) in model.predict(&x)?.into_iter().enumerate() {
        if let Some(s) = s {
            keys.push(panel.key(rows[i]));
            scores.push(s);
        }
    }
    Ok(PredictionTable { keys, scores })
}

fn selected_rows(ctx: &Context, panel: &FirmPanel) -> anyhow::Result<Vec<usize>> {
    Ok(match ctx.config.score.rows {
        RowSelection::All => (0..panel.n_rows()).collect(),
        RowSelection::Test => test_rows(ctx, panel)?,
    })
}

pub fn simulate(ctx: &Context) -> anyhow::Result<()> {
    let spec = GeneratorSpec { seed: ctx.config.seeds().simulate, ..ctx.config.simulate.generator.clone() };
    let synthetic = match &ctx.config.simulate.patterns {
        Some(mix) => pattern_generate(&spec, mix)?,
        None => generate(&spec)?,
    };
    log::info!(
        "simulated {} firm-years, implied prevalence {:.4}",
        synthetic.panel.n_rows(),
        synthetic.truth.prevalence()
    );
    ctx.write_csv("panel.csv", |w, c| write_csv(&synthetic.panel, w, c))?;
    ctx.write_csv("truth.csv", |w, c| synthetic.truth.write_csv(w, c))
}

pub fn train_model(ctx: &Context) -> anyhow::Result<()> {
    let panel = load_panel(ctx)?;
    let labels = label(&panel, ctx.config.data.label)?;
    let predictors = ctx.config.predictors(&numeric_names(&panel));
    let split = partition(&panel, ctx.config.partition.fraction, ctx.config.seeds().partition)?;
    let data = Dataset::from_panel(&panel, &labels, &predictors, Some(&split.train_rows(&panel)))?;
    log::info!("training {} on {} rows, {} predictors", ctx.config.model.kind, data.len(), predictors.len());
    let model = train(&ctx.config.model, &data.x, &data.y, ctx.config.seeds().model)?;
    if model.n_dropped() > 0 {
        log::info!("{} incomplete training rows dropped", model.n_dropped());
    }
    ctx.write_text("model.json", &model.to_json()?)
}

pub fn predict(ctx: &Context) -> anyhow::Result<()> {
    let panel = load_panel(ctx)?;
    let model = load_model(&ctx.config.model_path())?;
    let rows = selected_rows(ctx, &panel)?;
    let table = score(&predict_rows(&model, &panel, &rows)?)?;
    if table.len() < rows.len() {
        log::info!("{} rows could not be scored", rows.len() - table.len());
    }
    ctx.write_csv("predictions.csv", |w, c| table.write_csv(w, c))
}

fn definition_name(d: &LabelDefinition) -> String {
    match d {
        LabelDefinition::PositiveRevenue => "positive_revenue".into(),
        LabelDefinition::ShareThreshold { percentile } => format!("share_threshold:p={percentile}"),
        LabelDefinition::Annual { year } => format!("annual:year={year}"),
    }
}

fn write_spearman<W: Write>(names: &[String], n: usize, m: &[Vec<f64>], mut out: W, comments: &[String]) -> exportscore::Result<()> {
    let io = |e| exportscore::Error::io("<spearman>", e);
    for c in comments {
        writeln!(out, "# {c}").map_err(io)?;
    }
    writeln!(out, "# common test rows: {n}").map_err(io)?;
    let mut w = csv::Writer::from_writer(out);
    let mut header = vec!["model".to_string()];
    header.extend(names.iter().cloned());
    w.write_record(&header)?;
    for (i, row) in m.iter().enumerate() {
        let mut rec = vec![names[i].clone()];
        rec.extend(row.iter().map(|v| v.to_string()));
        w.write_record(&rec)?;
    }
    w.flush().map_err(io)?;
    Ok(())
}

pub fn evaluate_models(ctx: &Context) -> anyhow::Result<()> {
    let cfg = &ctx.config;
    let threshold = cfg.evaluate.threshold;
    let panel = load_panel(ctx)?;
    let labels = label(&panel, cfg.data.label)?;
    let test = test_rows(ctx, &panel)?;

    let mut rows = Vec::new();
    let mut grouped = Vec::new();
    let mut tables = Vec::new();
    let mut names = Vec::new();
    for path in cfg.evaluation_models() {
        let model = load_model(&path)?;
        let mut name = model_name(&path);
        if names.contains(&name) {
            name = path.display().to_string();
        }
        let data = Dataset::from_panel(&panel, &labels, &model.predictor_names(), Some(&test))?;
        let (predictions, y, unscored) = score_dataset(&model, &data)?;
        if unscored > 0 {
            log::info!("{name}: {unscored} test rows could not be scored");
        }
        let report = evaluate(&predictions.scores, &y, threshold)?;
        rows.push(ReportRow { model: name.clone(), group: "all".into(), fold: 0, report });
        if let Some(g) = cfg.evaluate.grouping {
            let groups = group_labels(&predictions.keys, &labels, g)?;
            for (group, report) in evaluate_by_group(&predictions.scores, &y, &groups, threshold)? {
                grouped.push(ReportRow { model: name.clone(), group, fold: 0, report });
            }
        }
        names.push(name);
        tables.push(predictions);
    }

    let predictors = cfg.predictors(&numeric_names(&panel));
    let kind = cfg.model.kind.name().to_string();
    if cfg.evaluate.cv_replications > 0 {
        let seeds: Vec<u64> = (0..cfg.evaluate.cv_replications as u64)
            .map(|r| derive_seed(cfg.seeds().partition, r + 1))
            .collect();
        let evals = cross_validate(&cfg.model, &panel, &labels, &predictors, cfg.partition.fraction, &seeds, threshold)?;
        for (r, e) in evals.into_iter().enumerate() {
            rows.push(ReportRow { model: kind.clone(), group: "all".into(), fold: r + 1, report: e.report });
        }
    }
    if cfg.evaluate.per_year {
        let evals = per_year(&cfg.model, &panel, &predictors, cfg.partition.fraction, cfg.seeds().partition, threshold)?;
        for (year, e) in evals {
            rows.push(ReportRow { model: kind.clone(), group: format!("year={year}"), fold: 0, report: e.report });
        }
    }
    if !cfg.evaluate.definitions.is_empty() {
        let split = partition(&panel, cfg.partition.fraction, cfg.seeds().partition)?;
        let evals = by_definition(&cfg.model, &panel, &cfg.evaluate.definitions, &predictors, &split, threshold, cfg.seeds().model)?;
        for (d, e) in evals {
            rows.push(ReportRow { model: kind.clone(), group: definition_name(&d), fold: 0, report: e.report });
        }
    }

    ctx.write_csv("report.csv", |w, c| write_reports(&rows, w, c))?;
    if !grouped.is_empty() {
        ctx.write_csv("report_grouped.csv", |w, c| write_reports(&grouped, w, c))?;
    }
    if tables.len() >= 2 {
        let refs: Vec<&PredictionTable> = tables.iter().collect();
        let (common, matrix) = common_spearman(&refs)?;
        ctx.write_csv("spearman.csv", |w, c| write_spearman(&names, common.len(), &matrix, w, c))?;
    }
    Ok(())
}

#[derive(Serialize)]
struct PremiaDocument {
    outcome: String,
    model: exportscore::scoring::PremiaModel,
    table: Vec<exportscore::scoring::PremiaRow>,
}

pub fn score_firms(ctx: &Context) -> anyhow::Result<()> {
    let panel = load_panel(ctx)?;
    let model = load_model(&ctx.config.model_path())?;
    let rows = selected_rows(ctx, &panel)?;
    let table = score(&predict_rows(&model, &panel, &rows)?)?;
    ctx.write_csv("scores.csv", |w, c| table.write_csv(w, c))?;

    let mut models = Vec::new();
    for outcome in &ctx.config.score.outcomes {
        models.push(fit_premia(&panel, &table, outcome, &ctx.config.score.premia)?);
    }
    let docs: Vec<PremiaDocument> = models
        .iter()
        .map(|m| PremiaDocument { outcome: m.outcome.clone(), model: m.clone(), table: premia_table(m) })
        .collect();
    let json = serde_json::to_string_pretty(&serde_json::json!({
        "generator": format!("exportscore {}", env!("CARGO_PKG_VERSION")),
        "config_sha256": ctx.hash,
        "premia": docs,
    }))?;
    ctx.write_text("premia.json", &(json + "\n"))?;
    ctx.write_csv("premia.csv", |w, c| write_premia_csv(&models, w, c))
}

fn write_potential<W: Write>(
    set: &exportscore::analytics::PotentialSet,
    mut out: W,
    comments: &[String],
) -> exportscore::Result<()> {
    let io = |e| exportscore::Error::io("<potential>", e);
    for c in comments {
        writeln!(out, "# {c}").map_err(io)?;
    }
    if let Some(m) = set.median {
        writeln!(out, "# non-exporter median score: {m}").map_err(io)?;
    }
    let mut w = csv::Writer::from_writer(out);
    w.write_record(["firm_id", "year", "score", "potential"])?;
    for (k, s) in &set.non_exporters {
        w.write_record([k.firm_id.clone(), k.year.to_string(), s.to_string(), set.potential.contains(k).to_string()])?;
    }
    w.flush().map_err(io)?;
    Ok(())
}

pub fn analyze(ctx: &Context) -> anyhow::Result<()> {
    let cfg = &ctx.config;
    let panel = load_panel(ctx)?;
    let model = load_model(&cfg.model_path())?;
    let labels: LabelSet = label(&panel, cfg.data.label)?;
    let table: ScoreTable = score(&predict_rows(&model, &panel, &labels.rows)?)?;
    let set = potential_set(&table, &labels, cfg.analyze.latest_only)?;
    log::info!("{} non-exporters, {} potential exporters", set.non_exporters.len(), set.potential.len());
    ctx.write_csv("potential.csv", |w, c| write_potential(&set, w, c))?;

    let index: HashMap<RowKey, usize> = panel.keys().into_iter().enumerate().map(|(i, k)| (k, i)).collect();
    let category = |name: &str| -> anyhow::Result<Vec<String>> {
        let col = panel.require_categorical(name)?;
        Ok(set
            .non_exporters
            .iter()
            .map(|(k, _)| col.get(index[k]).unwrap_or("NA").to_string())
            .collect())
    };
    let regions = category(&cfg.score.premia.region_column)?;
    let firms: Vec<(String, bool)> = set
        .non_exporters
        .iter()
        .zip(regions)
        .map(|((k, _), r)| (r, set.potential.contains(k)))
        .collect();
    let lq = location_quotients(&firms, cfg.analyze.lq_reps, cfg.seeds().bootstrap);
    ctx.write_csv("lq.csv", |w, c| lq.write_csv(w, c))?;

    for column in &cfg.analyze.group_by {
        let rows: Vec<(String, f64)> = category(column)?
            .into_iter()
            .zip(&set.non_exporters)
            .map(|(g, (_, s))| (g, *s))
            .collect();
        let summaries = aggregate_scores(&rows, set.median);
        ctx.write_csv(&format!("groups_{column}.csv"), |w, c| write_group_summaries(&summaries, w, c))?;
    }

    if let Model::Bart { mia, model: bart, .. } = &model {
        let summary = if cfg.analyze.vip_replications == 1 {
            summarize_vip(bart.predictor_names(), vec![bart.vip()])
        } else {
            let predictors = bart.predictor_names();
            let split = partition(&panel, cfg.partition.fraction, cfg.seeds().partition)?;
            let data = Dataset::from_panel(&panel, &labels, &predictors, Some(&split.train_rows(&panel)))?;
            let data = if *mia { data } else { data.complete_cases().0 };
            let seeds: Vec<u64> = (0..cfg.analyze.vip_replications as u64).map(|r| derive_seed(cfg.seeds().vip, r)).collect();
            let config = BartConfig { mia: *mia, ..bart.config.clone() };
            vip_replicate(&data.x, &data.y, &config, &seeds)?
        };
        ctx.write_csv("vip.csv", |w, c| summary.write_csv(w, c))?;
    } else {
        log::info!("inclusion proportions need a BART model; skipping vip.csv");
    }
    Ok(())
}

/// Subcommand names in pipeline order.
pub const SUBCOMMANDS: [&str; 6] = ["simulate", "train", "predict", "evaluate", "score", "analyze"];

pub fn run(ctx: &Context, subcommand: &str) -> anyhow::Result<()> {
    ctx.echo(subcommand)?;
    match subcommand {
        "simulate" => simulate(ctx),
        "train" => train_model(ctx),
        "predict" => predict(ctx),
        "evaluate" => evaluate_models(ctx),
        "score" => score_firms(ctx),
        "analyze" => analyze(ctx),
        other => bail!("unknown subcommand {other:?}"),
    }
}


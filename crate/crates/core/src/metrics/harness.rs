//! Evaluation protocols: hold-out evaluation, repeated random splits,
//! per-year training, alternative exporter definitions, grouped reports and
//! rank correlations on a common test set.

use std::collections::{BTreeSet, HashMap};

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use super::{evaluate, evaluate_by_group, spearman_matrix, MetricsReport};
use crate::dataset::{classify_patterns, label, partition, FirmPanel, LabelDefinition, LabelSet, Partition, RowKey};
use crate::error::{Error, Result};
use crate::features::{Dataset, PredictionTable};
use crate::models::{train, Model, ModelSpec};
use crate::stats::{derive_seed, streams};

/// A trained model with its scored test rows.
#[derive(Debug, Clone)]
pub struct Evaluation {
    pub model: Model,
    /// Test rows the model could score.
    pub predictions: PredictionTable,
    pub labels: Vec<bool>,
    pub report: MetricsReport,
    /// Training rows used / test rows the model could not score.
    pub n_train: usize,
    pub n_test_unscored: usize,
}

/// Test rows of `data` that `model` scores, with their labels.
pub fn score_dataset(model: &Model, data: &Dataset) -> Result<(PredictionTable, Vec<bool>, usize)> {
    let scores = model.predict(&data.x)?;
    let mut keys = Vec::new();
    let mut kept = Vec::new();
    let mut labels = Vec::new();
    for (i, s) in scores.into_iter().enumerate() {
        if let Some(s) = s {
            keys.push(data.keys[i].clone());
            kept.push(s);
            labels.push(data.y[i]);
        }
    }
    let unscored = data.len() - kept.len();
    Ok((PredictionTable { keys, scores: kept }, labels, unscored))
}

/// Trains on the partition's training firms and evaluates on its test firms.
pub fn holdout(
    spec: &ModelSpec,
    panel: &FirmPanel,
    labels: &LabelSet,
    predictors: &[String],
    split: &Partition,
    threshold: f64,
    model_seed: u64,
) -> Result<Evaluation> {
    let train_rows = split.train_rows(panel);
    let test_rows = split.test_rows(panel);
    let train_set = Dataset::from_panel(panel, labels, predictors, Some(&train_rows))?;
    let test_set = Dataset::from_panel(panel, labels, predictors, Some(&test_rows))?;
    let model = train(spec, &train_set.x, &train_set.y, model_seed)?;
    let (predictions, test_labels, n_test_unscored) = score_dataset(&model, &test_set)?;
    let report = evaluate(&predictions.scores, &test_labels, threshold)?;
    Ok(Evaluation {
        n_train: train_set.len() - model.n_dropped(),
        model,
        predictions,
        labels: test_labels,
        report,
        n_test_unscored,
    })
}

/// Repeats the random firm split once per seed; each replicate derives its
/// partition and model seeds from its own seed.
pub fn cross_validate(
    spec: &ModelSpec,
    panel: &FirmPanel,
    labels: &LabelSet,
    predictors: &[String],
    fraction: f64,
    seeds: &[u64],
    threshold: f64,
) -> Result<Vec<Evaluation>> {
    seeds
        .par_iter()
        .map(|&s| {
            let split = partition(panel, fraction, derive_seed(s, streams::PARTITION))?;
            holdout(spec, panel, labels, predictors, &split, threshold, derive_seed(s, streams::MODEL))
        })
        .collect()
}

/// Trains and tests within each year separately.
pub fn per_year(
    spec: &ModelSpec,
    panel: &FirmPanel,
    predictors: &[String],
    fraction: f64,
    seed: u64,
    threshold: f64,
) -> Result<Vec<(i32, Evaluation)>> {
    let years: BTreeSet<i32> = panel.years.iter().copied().collect();
    years
        .into_iter()
        .map(|year| {
            let sub = panel.select_rows(&panel.rows_in_year(year));
            let labels = label(&sub, LabelDefinition::Annual { year })?;
            let split = partition(&sub, fraction, derive_seed(seed, streams::PARTITION))?;
            let eval = holdout(spec, &sub, &labels, predictors, &split, threshold, derive_seed(seed, streams::MODEL))?;
            Ok((year, eval))
        })
        .collect()
}

/// Evaluates the same split under several exporter definitions.
pub fn by_definition(
    spec: &ModelSpec,
    panel: &FirmPanel,
    definitions: &[LabelDefinition],
    predictors: &[String],
    split: &Partition,
    threshold: f64,
    model_seed: u64,
) -> Result<Vec<(LabelDefinition, Evaluation)>> {
    definitions
        .iter()
        .map(|&d| {
            let labels = label(panel, d)?;
            Ok((d, holdout(spec, panel, &labels, predictors, split, threshold, model_seed)?))
        })
        .collect()
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Grouping {
    /// The five exporting-pattern categories.
    Pattern,
    /// Pattern categories split by start / stop year or export-year count.
    PatternDetail,
    /// Permanent / temporary / never exporters.
    BmClass,
    Year,
}

/// Group label for each key. Pattern groupings classify firms on the full
/// label timeline `labels`.
pub fn group_labels(keys: &[RowKey], labels: &LabelSet, grouping: Grouping) -> Result<Vec<String>> {
    if grouping == Grouping::Year {
        return Ok(keys.iter().map(|k| k.year.to_string()).collect());
    }
    let classes: HashMap<String, String> = classify_patterns(labels)?
        .into_iter()
        .map(|c| {
            let g = match grouping {
                Grouping::Pattern => c.category.name().to_string(),
                Grouping::PatternDetail => c.category.detail(),
                _ => c.bm_class.name().to_string(),
            };
            (c.firm_id, g)
        })
        .collect();
    keys.iter()
        .map(|k| {
            classes
                .get(&k.firm_id)
                .cloned()
                .ok_or_else(|| Error::Alignment(format!("firm {:?} has no exporting pattern", k.firm_id)))
        })
        .collect()
}

pub fn grouped_report(
    eval: &Evaluation,
    labels: &LabelSet,
    grouping: Grouping,
    threshold: f64,
) -> Result<Vec<(String, MetricsReport)>> {
    let groups = group_labels(&eval.predictions.keys, labels, grouping)?;
    evaluate_by_group(&eval.predictions.scores, &eval.labels, &groups, threshold)
}

/// Restricts several prediction tables to the keys they all share and
/// returns the pairwise rank-correlation matrix on that common set.
pub fn common_spearman(tables: &[&PredictionTable]) -> Result<(Vec<RowKey>, Vec<Vec<f64>>)> {
    let Some(first) = tables.first() else {
        return Ok((vec![], vec![]));
    };
    let maps: Vec<HashMap<&RowKey, f64>> = tables
        .iter()
        .map(|t| t.keys.iter().zip(t.scores.iter().copied()).collect())
        .collect();
    let common: Vec<RowKey> = first
        .keys
        .iter()
        .filter(|k| maps.iter().all(|m| m.contains_key(k)))
        .cloned()
        .collect();
    let vectors: Vec<Vec<f64>> = maps
        .iter()
        .map(|m| common.iter().map(|k| m[k]).collect())
        .collect();
    Ok((common, spearman_matrix(&vectors)?))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::dataset::{columns::EXPORT_REVENUE, columns::TOTAL_REVENUE, NumericColumn};
    use crate::models::ModelKind;

    fn panel() -> FirmPanel {
        let mut ids = Vec::new();
        let mut years = Vec::new();
        let mut x = Vec::new();
        let mut ex = Vec::new();
        for f in 0..60 {
            for y in 0..3 {
                ids.push(format!("f{f:02}"));
                years.push(2010 + y);
                let v = ((f * 37 + y * 11) % 100) as f64 / 100.0;
                x.push(Some(v));
                ex.push(Some(if v > 0.5 { 10.0 } else { 0.0 }));
            }
        }
        let n = ids.len();
        FirmPanel::new(
            ids,
            years,
            vec![
                NumericColumn::from_options("x", x),
                NumericColumn::from_options(EXPORT_REVENUE, ex),
                NumericColumn::from_options(TOTAL_REVENUE, vec![Some(100.0); n]),
            ],
            vec![],
        )
        .unwrap()
    }

    #[test]
    fn holdout_and_groups_cover_test_rows() {
        let p = panel();
        let labels = label(&p, LabelDefinition::PositiveRevenue).unwrap();
        let split = partition(&p, 0.8, 1).unwrap();
        let e = holdout(&ModelSpec::of(ModelKind::Logit), &p, &labels, &["x".into()], &split, 0.5, 2).unwrap();
        assert_eq!(e.predictions.len(), 36);
        assert_eq!(e.n_train, 144);
        for g in [Grouping::Pattern, Grouping::BmClass, Grouping::Year] {
            let r = grouped_report(&e, &labels, g, 0.5).unwrap();
            assert_eq!(r.iter().map(|(_, m)| m.n_obs).sum::<usize>(), 36);
        }
    }

    #[test]
    fn repeated_splits_and_years() {
        let p = panel();
        let labels = label(&p, LabelDefinition::PositiveRevenue).unwrap();
        let spec = ModelSpec::of(ModelKind::Cart);
        let cv = cross_validate(&spec, &p, &labels, &["x".into()], 0.8, &[1, 2, 3], 0.5).unwrap();
        assert_eq!(cv.len(), 3);
        let yearly = per_year(&spec, &p, &["x".into()], 0.8, 4, 0.5).unwrap();
        assert_eq!(yearly.iter().map(|(y, _)| *y).collect::<Vec<_>>(), vec![2010, 2011, 2012]);
    }

    #[test]
    fn spearman_on_shared_keys() {
        let k = |f: &str| RowKey::new(f, 2010);
        let a = PredictionTable { keys: vec![k("a"), k("b"), k("c")], scores: vec![0.1, 0.2, 0.3] };
        let b = PredictionTable { keys: vec![k("c"), k("a"), k("b"), k("d")], scores: vec![0.9, 0.1, 0.5, 0.0] };
        let (keys, m) = common_spearman(&[&a, &b]).unwrap();
        assert_eq!(keys.len(), 3);
        assert_eq!(m, vec![vec![1.0, 1.0], vec![1.0, 1.0]]);
    }
}

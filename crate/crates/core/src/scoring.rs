//! Exporting scores, distances, risk classes and the premia regression of
//! firm resources on risk class with firm-clustered standard errors.

use std::collections::{BTreeMap, BTreeSet, HashMap, HashSet};
use std::io::Write;

use nalgebra::{DMatrix, DVector};
use serde::{Deserialize, Serialize};

use crate::dataset::columns::{EXPORT_REVENUE, INDUSTRY4, REGION};
use crate::dataset::{FirmPanel, RowKey};
use crate::error::{Error, Result};
use crate::features::PredictionTable;

/// Scores are snapped to multiples of this so that `1 - score` is exact.
const GRID: f64 = 1.0 / 9_007_199_254_740_992.0; // 2^-53

/// Risk class 1..=10 from ten equal bins, left-closed, top bin closed.
pub fn risk_class(score: f64) -> u8 {
    ((score * 10.0).floor() as i64 + 1).clamp(1, 10) as u8
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ScoreRow {
    pub firm_id: String,
    pub year: i32,
    pub score: f64,
    pub distance: f64,
    pub risk_class: u8,
}

#[derive(Debug, Clone, PartialEq, Default, Serialize, Deserialize)]
pub struct ScoreTable {
    pub rows: Vec<ScoreRow>,
}

/// Distance to export status and risk class per prediction. Scores are
/// rounded to the nearest multiple of 2^-53 (a change of at most 2^-54) so
/// that distance and score sum to one exactly.
pub fn score(predictions: &PredictionTable) -> Result<ScoreTable> {
    let rows = predictions
        .keys
        .iter()
        .zip(&predictions.scores)
        .map(|(k, &s)| {
            if !(0.0..=1.0).contains(&s) {
                return Err(Error::Parameter(format!(
                    "score {s} for firm {} year {} outside [0, 1]",
                    k.firm_id, k.year
                )));
            }
            let s = (s / GRID).round() * GRID;
            Ok(ScoreRow {
                firm_id: k.firm_id.clone(),
                year: k.year,
                score: s,
                distance: 1.0 - s,
                risk_class: risk_class(s),
            })
        })
        .collect::<Result<Vec<_>>>()?;
    Ok(ScoreTable { rows })
}

/// Inverse of the distance map.
pub fn score_from_distance(distance: f64) -> f64 {
    1.0 - distance
}

impl ScoreTable {
    pub fn len(&self) -> usize {
        self.rows.len()
    }

    pub fn is_empty(&self) -> bool {
        self.rows.is_empty()
    }

    pub fn key(&self, i: usize) -> RowKey {
        RowKey::new(self.rows[i].firm_id.clone(), self.rows[i].year)
    }

    pub fn filter(&self, keep: impl Fn(&ScoreRow) -> bool) -> ScoreTable {
        ScoreTable {
            rows: self.rows.iter().filter(|r| keep(r)).cloned().collect(),
        }
    }

    pub fn write_csv<W: Write>(&self, mut out: W, comments: &[String]) -> Result<()> {
        for c in comments {
            writeln!(out, "# {c}").map_err(|e| Error::io("<scores>", e))?;
        }
        let mut w = csv::Writer::from_writer(out);
        w.write_record(["firm_id", "year", "score", "distance", "risk_class"])?;
        for r in &self.rows {
            w.write_record([
                r.firm_id.clone(),
                r.year.to_string(),
                r.score.to_string(),
                r.distance.to_string(),
                r.risk_class.to_string(),
            ])?;
        }
        w.flush().map_err(|e| Error::io("<scores>", e))?;
        Ok(())
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct PremiaOptions {
    /// Size control enters as the log of this column.
    pub size_column: String,
    pub industry_column: String,
    pub region_column: String,
    /// Drop rows with positive export revenue before fitting.
    pub exclude_exporters: bool,
}

impl Default for PremiaOptions {
    fn default() -> Self {
        Self {
            size_column: "employees".into(),
            industry_column: INDUSTRY4.into(),
            region_column: REGION.into(),
            exclude_exporters: false,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Coefficient {
    pub name: String,
    pub estimate: f64,
    pub std_error: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PremiaModel {
    pub outcome: String,
    /// Omitted risk class (the lowest class present).
    pub reference_class: u8,
    pub coefficients: Vec<Coefficient>,
    pub n_obs: usize,
    pub n_clusters: usize,
    /// Rows dropped for a non-positive or missing outcome, size or category.
    pub n_dropped: usize,
}

pub const INTERCEPT: &str = "intercept";
const SIZE: &str = "log_size";

fn risk_name(class: u8) -> String {
    format!("risk_{class}")
}

impl PremiaModel {
    /// A model holding only an intercept and risk effects, for applying
    /// published coefficients.
    pub fn from_coefficients(outcome: &str, intercept: f64, risk: &[(u8, f64)]) -> Self {
        let mut coefficients = vec![Coefficient {
            name: INTERCEPT.into(),
            estimate: intercept,
            std_error: f64::NAN,
        }];
        coefficients.extend(risk.iter().map(|&(c, v)| Coefficient {
            name: risk_name(c),
            estimate: v,
            std_error: f64::NAN,
        }));
        Self {
            outcome: outcome.into(),
            reference_class: 1,
            coefficients,
            n_obs: 0,
            n_clusters: 0,
            n_dropped: 0,
        }
    }

    pub fn get(&self, name: &str) -> Option<&Coefficient> {
        self.coefficients.iter().find(|c| c.name == name)
    }

    pub fn intercept(&self) -> f64 {
        self.get(INTERCEPT).map_or(0.0, |c| c.estimate)
    }

    /// Risk effect relative to the reference class; `None` if the class was
    /// not estimated.
    pub fn theta(&self, class: u8) -> Option<f64> {
        if class == self.reference_class {
            return Some(0.0);
        }
        self.get(&risk_name(class)).map(|c| c.estimate)
    }
}

struct Block {
    name: &'static str,
    columns: Vec<(String, Vec<f64>)>,
}

fn dummies(name: &'static str, prefix: &str, values: &[String]) -> (Block, String) {
    let levels: BTreeSet<&String> = values.iter().collect();
    let reference = levels.iter().next().map(|s| s.to_string()).unwrap_or_default();
    let columns = levels
        .iter()
        .skip(1)
        .map(|lvl| {
            (
                format!("{prefix}_{lvl}"),
                values.iter().map(|v| if v == *lvl { 1.0 } else { 0.0 }).collect(),
            )
        })
        .collect();
    (Block { name, columns }, reference)
}

/// Rank-deficiency test on the leading `k` columns of a cross-product
/// matrix, scaled to unit diagonal.
fn is_singular(xtx: &DMatrix<f64>, k: usize) -> bool {
    let sub = xtx.view((0, 0), (k, k));
    let d: Vec<f64> = (0..k).map(|i| sub[(i, i)].sqrt()).collect();
    if d.iter().any(|&v| v == 0.0) {
        return true;
    }
    let scaled = DMatrix::from_fn(k, k, |i, j| sub[(i, j)] / (d[i] * d[j]));
    let eig = scaled.symmetric_eigenvalues();
    let max = eig.iter().fold(0.0f64, |a, &b| a.max(b.abs()));
    let min = eig.iter().fold(f64::INFINITY, |a, &b| a.min(b));
    min <= max * 1e-11
}

/// Least-squares fit with the given clusters, returning estimates and
/// cluster-robust standard errors with the `G/(G-1) * (N-1)/(N-K)`
/// small-sample factor.
pub fn ols_clustered(x: &DMatrix<f64>, y: &DVector<f64>, clusters: &[usize]) -> (DVector<f64>, DVector<f64>) {
    let (n, k) = x.shape();
    let xtx = x.transpose() * x;
    let inv = xtx
        .clone()
        .cholesky()
        .map(|c| c.inverse())
        .unwrap_or_else(|| xtx.pseudo_inverse(1e-12).expect("pseudo-inverse"));
    let beta = &inv * (x.transpose() * y);
    let resid = y - x * &beta;
    let g = clusters.iter().copied().max().map_or(0, |m| m + 1);
    let mut scores = DMatrix::<f64>::zeros(g, k);
    for i in 0..n {
        for j in 0..k {
            scores[(clusters[i], j)] += x[(i, j)] * resid[i];
        }
    }
    let meat = scores.transpose() * &scores;
    let factor = if g > 1 && n > k {
        (g as f64 / (g - 1) as f64) * ((n - 1) as f64 / (n - k) as f64)
    } else {
        f64::NAN
    };
    let v = &inv * meat * &inv * factor;
    let se = DVector::from_fn(k, |j, _| v[(j, j)].max(0.0).sqrt());
    (beta, se)
}

/// Log-outcome regression on risk-class, year, industry and region dummies
/// plus log size, with firm-clustered standard errors.
pub fn fit_premia(
    panel: &FirmPanel,
    scores: &ScoreTable,
    outcome: &str,
    options: &PremiaOptions,
) -> Result<PremiaModel> {
    let out_col = panel.require_numeric(outcome)?;
    let size_col = panel.require_numeric(&options.size_column)?;
    let ind_col = panel.require_categorical(&options.industry_column)?;
    let reg_col = panel.require_categorical(&options.region_column)?;
    let exports = if options.exclude_exporters {
        Some(panel.require_numeric(EXPORT_REVENUE)?)
    } else {
        None
    };
    let index = panel.row_index();

    let mut y = Vec::new();
    let mut size = Vec::new();
    let mut classes = Vec::new();
    let mut years = Vec::new();
    let mut industries = Vec::new();
    let mut regions = Vec::new();
    let mut firms = Vec::new();
    let mut dropped = 0;
    let mut seen = HashSet::new();
    for r in &scores.rows {
        let Some(&row) = index.get(&(r.firm_id.as_str(), r.year)) else {
            return Err(Error::Alignment(format!(
                "scored firm {} year {} absent from panel",
                r.firm_id, r.year
            )));
        };
        if !seen.insert(row) {
            return Err(Error::Alignment(format!("firm {} year {} scored twice", r.firm_id, r.year)));
        }
        if let Some(ex) = exports {
            if ex.get(row).is_some_and(|v| v > 0.0) {
                continue;
            }
        }
        match (out_col.get(row), size_col.get(row), ind_col.get(row), reg_col.get(row)) {
            (Some(o), Some(s), Some(ind), Some(reg)) if o > 0.0 && s > 0.0 => {
                y.push(o.ln());
                size.push(s.ln());
                classes.push(r.risk_class);
                years.push(r.year);
                industries.push(ind.to_string());
                regions.push(reg.to_string());
                firms.push(r.firm_id.clone());
            }
            _ => dropped += 1,
        }
    }
    let n = y.len();
    if n == 0 {
        return Err(Error::MissingData(format!("no usable rows for outcome {outcome:?}")));
    }

    let class_levels: BTreeSet<u8> = classes.iter().copied().collect();
    let reference_class = *class_levels.iter().next().expect("non-empty");
    let risk = Block {
        name: "risk class",
        columns: class_levels
            .iter()
            .skip(1)
            .map(|&c| (risk_name(c), classes.iter().map(|&v| if v == c { 1.0 } else { 0.0 }).collect()))
            .collect(),
    };
    let year_strings: Vec<String> = years.iter().map(|y| y.to_string()).collect();
    let blocks = vec![
        Block { name: INTERCEPT, columns: vec![(INTERCEPT.into(), vec![1.0; n])] },
        risk,
        Block { name: "size", columns: vec![(SIZE.into(), size)] },
        dummies("year", "year", &year_strings).0,
        dummies("industry", "industry", &industries).0,
        dummies("region", "region", &regions).0,
    ];

    let names: Vec<String> = blocks.iter().flat_map(|b| b.columns.iter().map(|c| c.0.clone())).collect();
    let k = names.len();
    let x = DMatrix::from_fn(n, k, {
        let cols: Vec<&Vec<f64>> = blocks.iter().flat_map(|b| b.columns.iter().map(|c| &c.1)).collect();
        move |i, j| cols[j][i]
    });
    if n <= k {
        return Err(Error::Parameter(format!("{n} rows cannot identify {k} coefficients")));
    }
    let xtx = x.transpose() * &x;
    let mut upto = 0;
    for b in &blocks {
        if b.columns.is_empty() {
            continue;
        }
        upto += b.columns.len();
        if is_singular(&xtx, upto) {
            return Err(Error::Collinearity(b.name.into()));
        }
    }

    let mut cluster_ids: HashMap<&str, usize> = HashMap::new();
    let clusters: Vec<usize> = firms
        .iter()
        .map(|f| {
            let next = cluster_ids.len();
            *cluster_ids.entry(f.as_str()).or_insert(next)
        })
        .collect();
    let (beta, se) = ols_clustered(&x, &DVector::from_vec(y), &clusters);
    Ok(PremiaModel {
        outcome: outcome.into(),
        reference_class,
        coefficients: names
            .into_iter()
            .enumerate()
            .map(|(j, name)| Coefficient { name, estimate: beta[j], std_error: se[j] })
            .collect(),
        n_obs: n,
        n_clusters: cluster_ids.len(),
        n_dropped: dropped,
    })
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PremiaRow {
    pub risk_class: u8,
    /// `exp(intercept + theta)` in outcome units.
    pub level: f64,
    /// Relative gap to the reference class.
    pub gap_from_reference: f64,
    /// Relative gap to the next lower estimated class.
    pub gap_from_previous: Option<f64>,
}

/// Outcome level per estimated risk class and relative gaps.
pub fn premia_table(model: &PremiaModel) -> Vec<PremiaRow> {
    let mut thetas: BTreeMap<u8, f64> = BTreeMap::new();
    for c in 1..=10u8 {
        if let Some(t) = model.theta(c) {
            thetas.insert(c, t);
        }
    }
    let b0 = model.intercept();
    let mut prev: Option<f64> = None;
    thetas
        .into_iter()
        .map(|(class, theta)| {
            let level = (b0 + theta).exp();
            let row = PremiaRow {
                risk_class: class,
                level,
                gap_from_reference: theta.exp_m1(),
                gap_from_previous: prev.map(|p| level / p - 1.0),
            };
            prev = Some(level);
            row
        })
        .collect()
}

/// Relative gap `level(s) / level(r) - 1` between two classes.
pub fn premia_gap(model: &PremiaModel, from: u8, to: u8) -> Option<f64> {
    Some((model.theta(to)? - model.theta(from)?).exp_m1())
}

pub fn write_premia_csv<W: Write>(models: &[PremiaModel], mut out: W, comments: &[String]) -> Result<()> {
    for c in comments {
        writeln!(out, "# {c}").map_err(|e| Error::io("<premia>", e))?;
    }
    let mut w = csv::Writer::from_writer(out);
    w.write_record(["outcome", "risk_class", "theta", "std_error", "level", "gap_from_reference", "gap_from_previous"])?;
    for m in models {
        for row in premia_table(m) {
            let se = m
                .get(&risk_name(row.risk_class))
                .map(|c| c.std_error.to_string())
                .unwrap_or_default();
            w.write_record([
                m.outcome.clone(),
                row.risk_class.to_string(),
                m.theta(row.risk_class).unwrap_or(0.0).to_string(),
                se,
                row.level.to_string(),
                row.gap_from_reference.to_string(),
                row.gap_from_previous.map(|g| g.to_string()).unwrap_or_default(),
            ])?;
        }
    }
    w.flush().map_err(|e| Error::io("<premia>", e))?;
    Ok(())
}

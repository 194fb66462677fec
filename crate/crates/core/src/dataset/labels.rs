use serde::{Deserialize, Serialize};

use super::columns::{EXPORT_REVENUE, TOTAL_REVENUE};
use super::{FirmPanel, RowKey};
use crate::error::{Error, Result};
use crate::stats::{nearest_rank, sort_f64};

/// How a firm-year is labelled as exporter.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case", deny_unknown_fields)]
pub enum LabelDefinition {
    /// Exporter iff export revenue is strictly positive.
    PositiveRevenue,
    /// Exporter iff the export share of revenue strictly exceeds the
    /// nearest-rank `percentile` of the positive-share distribution.
    ShareThreshold { percentile: f64 },
    /// Positive-revenue labels restricted to a single year.
    Annual { year: i32 },
}

/// Binary export labels keyed by firm-year.
#[derive(Debug, Clone, PartialEq)]
pub struct LabelSet {
    pub definition: LabelDefinition,
    pub keys: Vec<RowKey>,
    pub labels: Vec<bool>,
    /// Panel row of each label.
    pub rows: Vec<usize>,
}

impl LabelSet {
    pub fn len(&self) -> usize {
        self.labels.len()
    }

    pub fn is_empty(&self) -> bool {
        self.labels.is_empty()
    }

    pub fn positives(&self) -> usize {
        self.labels.iter().filter(|&&l| l).count()
    }

    /// Keeps only entries whose panel row satisfies `keep`.
    pub fn filter_rows(&self, keep: impl Fn(usize) -> bool) -> LabelSet {
        let idx: Vec<usize> = (0..self.len()).filter(|&i| keep(self.rows[i])).collect();
        LabelSet {
            definition: self.definition,
            keys: idx.iter().map(|&i| self.keys[i].clone()).collect(),
            labels: idx.iter().map(|&i| self.labels[i]).collect(),
            rows: idx.iter().map(|&i| self.rows[i]).collect(),
        }
    }
}

/// Assigns export labels. Rows with missing export revenue are left out.
pub fn label(panel: &FirmPanel, definition: LabelDefinition) -> Result<LabelSet> {
    let exports = panel.require_numeric(EXPORT_REVENUE)?;
    let mut set = LabelSet {
        definition,
        keys: Vec::new(),
        labels: Vec::new(),
        rows: Vec::new(),
    };
    let mut push = |r: usize, l: bool| {
        set.keys.push(panel.key(r));
        set.labels.push(l);
        set.rows.push(r);
    };

    match definition {
        LabelDefinition::PositiveRevenue => {
            for r in 0..panel.n_rows() {
                if let Some(x) = exports.get(r) {
                    push(r, x > 0.0);
                }
            }
        }
        LabelDefinition::Annual { year } => {
            for r in panel.rows_in_year(year) {
                if let Some(x) = exports.get(r) {
                    push(r, x > 0.0);
                }
            }
        }
        LabelDefinition::ShareThreshold { percentile } => {
            if !(percentile > 0.0 && percentile < 100.0) {
                return Err(Error::Parameter(format!(
                    "share-threshold percentile must lie in (0, 100), got {percentile}"
                )));
            }
            let totals = panel.require_numeric(TOTAL_REVENUE)?;
            let share = |r: usize| -> Option<f64> {
                let x = exports.get(r)?;
                if x <= 0.0 {
                    return Some(0.0);
                }
                let t = totals.get(r).filter(|&t| t > 0.0)?;
                Some(x / t)
            };
            let mut positive: Vec<f64> = (0..panel.n_rows())
                .filter_map(share)
                .filter(|&s| s > 0.0)
                .collect();
            sort_f64(&mut positive);
            let cut = if positive.is_empty() {
                f64::INFINITY
            } else {
                nearest_rank(&positive, percentile)
            };
            for r in 0..panel.n_rows() {
                if let Some(s) = share(r) {
                    push(r, s > 0.0 && s > cut);
                }
            }
        }
    }
    Ok(set)
}

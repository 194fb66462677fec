//! Column-major predictor matrices handed to the models.

use serde::{Deserialize, Serialize};

use crate::dataset::{FirmPanel, LabelSet, RowKey};
use crate::error::{Error, Result};

/// Named predictor columns; missing cells are NaN.
#[derive(Debug, Clone, PartialEq)]
pub struct FeatureMatrix {
    pub names: Vec<String>,
    pub columns: Vec<Vec<f64>>,
    n_rows: usize,
}

impl FeatureMatrix {
    pub fn new(names: Vec<String>, columns: Vec<Vec<f64>>) -> Result<Self> {
        if names.len() != columns.len() {
            return Err(Error::Schema("name count differs from column count".into()));
        }
        let n_rows = columns.first().map_or(0, Vec::len);
        if columns.iter().any(|c| c.len() != n_rows) {
            return Err(Error::Schema("ragged feature columns".into()));
        }
        Ok(Self {
            names,
            columns,
            n_rows,
        })
    }

    /// Builds from row-major data; `None` marks a missing cell.
    pub fn from_rows(names: Vec<String>, rows: &[Vec<Option<f64>>]) -> Result<Self> {
        let p = names.len();
        let mut columns = vec![Vec::with_capacity(rows.len()); p];
        for row in rows {
            if row.len() != p {
                return Err(Error::Schema("row width differs from name count".into()));
            }
            for (j, v) in row.iter().enumerate() {
                columns[j].push(v.unwrap_or(f64::NAN));
            }
        }
        let mut m = Self::new(names, columns)?;
        m.n_rows = rows.len();
        Ok(m)
    }

    /// Extracts `predictors` for the given panel rows.
    pub fn from_panel(panel: &FirmPanel, predictors: &[String], rows: &[usize]) -> Result<Self> {
        let columns = predictors
            .iter()
            .map(|name| {
                let col = panel.require_numeric(name)?;
                Ok(rows.iter().map(|&r| col.values[r]).collect())
            })
            .collect::<Result<Vec<Vec<f64>>>>()?;
        let mut m = Self::new(predictors.to_vec(), columns)?;
        m.n_rows = rows.len();
        Ok(m)
    }

    pub fn n_rows(&self) -> usize {
        self.n_rows
    }

    pub fn n_cols(&self) -> usize {
        self.columns.len()
    }

    #[inline]
    pub fn get(&self, row: usize, col: usize) -> f64 {
        self.columns[col][row]
    }

    pub fn row(&self, row: usize) -> Vec<f64> {
        self.columns.iter().map(|c| c[row]).collect()
    }

    pub fn is_complete(&self, row: usize) -> bool {
        self.columns.iter().all(|c| !c[row].is_nan())
    }

    pub fn has_missing(&self) -> bool {
        self.columns.iter().any(|c| c.iter().any(|v| v.is_nan()))
    }

    pub fn complete_rows(&self) -> Vec<usize> {
        (0..self.n_rows).filter(|&r| self.is_complete(r)).collect()
    }

    pub fn select_rows(&self, rows: &[usize]) -> FeatureMatrix {
        FeatureMatrix {
            names: self.names.clone(),
            columns: self
                .columns
                .iter()
                .map(|c| rows.iter().map(|&r| c[r]).collect())
                .collect(),
            n_rows: rows.len(),
        }
    }

    pub fn select_columns(&self, names: &[String]) -> Result<FeatureMatrix> {
        let columns = names
            .iter()
            .map(|n| {
                self.column_index(n)
                    .map(|j| self.columns[j].clone())
                    .ok_or_else(|| Error::Schema(format!("unknown predictor {n:?}")))
            })
            .collect::<Result<_>>()?;
        Ok(FeatureMatrix {
            names: names.to_vec(),
            columns,
            n_rows: self.n_rows,
        })
    }

    pub fn column_index(&self, name: &str) -> Option<usize> {
        self.names.iter().position(|n| n == name)
    }

    /// Reorders columns to `expected`, failing on unknown or absent names.
    pub fn aligned_to(&self, expected: &[String]) -> Result<FeatureMatrix> {
        if let Some(extra) = self.names.iter().find(|n| !expected.contains(n)) {
            return Err(Error::Schema(format!("unknown predictor {extra:?}")));
        }
        if let Some(absent) = expected.iter().find(|n| !self.names.contains(n)) {
            return Err(Error::Schema(format!("predictor {absent:?} absent from input")));
        }
        self.select_columns(expected)
    }
}

/// A modelling view: features, binary outcome and keys for the same rows.
#[derive(Debug, Clone)]
pub struct Dataset {
    pub x: FeatureMatrix,
    pub y: Vec<bool>,
    pub keys: Vec<RowKey>,
}

impl Dataset {
    /// Joins labelled panel rows restricted to `rows` (panel indices).
    pub fn from_panel(
        panel: &FirmPanel,
        labels: &LabelSet,
        predictors: &[String],
        rows: Option<&[usize]>,
    ) -> Result<Self> {
        let keep: Vec<usize> = match rows {
            Some(rows) => {
                let allowed: std::collections::HashSet<usize> = rows.iter().copied().collect();
                (0..labels.len()).filter(|&i| allowed.contains(&labels.rows[i])).collect()
            }
            None => (0..labels.len()).collect(),
        };
        let panel_rows: Vec<usize> = keep.iter().map(|&i| labels.rows[i]).collect();
        Ok(Self {
            x: FeatureMatrix::from_panel(panel, predictors, &panel_rows)?,
            y: keep.iter().map(|&i| labels.labels[i]).collect(),
            keys: keep.iter().map(|&i| labels.keys[i].clone()).collect(),
        })
    }

    pub fn len(&self) -> usize {
        self.y.len()
    }

    pub fn is_empty(&self) -> bool {
        self.y.is_empty()
    }

    pub fn select(&self, rows: &[usize]) -> Dataset {
        Dataset {
            x: self.x.select_rows(rows),
            y: rows.iter().map(|&r| self.y[r]).collect(),
            keys: rows.iter().map(|&r| self.keys[r].clone()).collect(),
        }
    }

    /// Rows with every predictor observed, plus how many were dropped.
    pub fn complete_cases(&self) -> (Dataset, usize) {
        let rows = self.x.complete_rows();
        let dropped = self.len() - rows.len();
        (self.select(&rows), dropped)
    }
}

/// Per-row probability scores keyed by firm-year.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PredictionTable {
    pub keys: Vec<RowKey>,
    pub scores: Vec<f64>,
}

impl PredictionTable {
    pub fn len(&self) -> usize {
        self.scores.len()
    }

    pub fn is_empty(&self) -> bool {
        self.scores.is_empty()
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn alignment_rejects_unknown_names() {
        let m = FeatureMatrix::new(vec!["a".into(), "z".into()], vec![vec![1.0], vec![2.0]]).unwrap();
        let err = m.aligned_to(&["a".to_string(), "b".to_string()]).unwrap_err();
        assert!(err.to_string().contains("\"z\""));
    }

    #[test]
    fn alignment_reorders() {
        let m = FeatureMatrix::new(vec!["b".into(), "a".into()], vec![vec![1.0], vec![2.0]]).unwrap();
        let a = m.aligned_to(&["a".to_string(), "b".to_string()]).unwrap();
        assert_eq!(a.row(0), vec![2.0, 1.0]);
    }

    #[test]
    fn complete_rows_skip_nan() {
        let m = FeatureMatrix::from_rows(
            vec!["a".into(), "b".into()],
            &[vec![Some(1.0), None], vec![Some(1.0), Some(2.0)]],
        )
        .unwrap();
        assert_eq!(m.complete_rows(), vec![1]);
        assert!(m.has_missing());
    }
}

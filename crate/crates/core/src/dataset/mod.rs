//! Firm-year panels: schema, CSV ingestion, derived predictors, export
//! labels, exporting-pattern classes and firm-level partitions.

mod derive;
mod io;
mod labels;
mod partition;
mod patterns;

pub mod columns;

use std::collections::{BTreeSet, HashMap};

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

pub use derive::{derive_predictors, DERIVED_COLUMNS};
pub use io::{ingest_csv, read_csv, write_csv};
pub use labels::{label, LabelDefinition, LabelSet};
pub use partition::{partition, Partition};
pub use patterns::{classify_patterns, BmClass, PatternCategory, PatternClass};

/// Identifies one firm-year observation.
#[derive(Debug, Clone, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
pub struct RowKey {
    pub firm_id: String,
    pub year: i32,
}

impl RowKey {
    pub fn new(firm_id: impl Into<String>, year: i32) -> Self {
        Self {
            firm_id: firm_id.into(),
            year,
        }
    }
}

/// A numeric column with its missingness mask. Missing cells hold NaN in
/// `values` and `true` in `missing`.
#[derive(Debug, Clone, PartialEq)]
pub struct NumericColumn {
    pub name: String,
    pub values: Vec<f64>,
    pub missing: Vec<bool>,
}

impl NumericColumn {
    pub fn from_options(name: impl Into<String>, cells: impl IntoIterator<Item = Option<f64>>) -> Self {
        let mut values = Vec::new();
        let mut missing = Vec::new();
        for cell in cells {
            match cell {
                Some(v) if v.is_finite() => {
                    values.push(v);
                    missing.push(false);
                }
                _ => {
                    values.push(f64::NAN);
                    missing.push(true);
                }
            }
        }
        Self {
            name: name.into(),
            values,
            missing,
        }
    }

    #[inline]
    pub fn get(&self, row: usize) -> Option<f64> {
        if self.missing[row] {
            None
        } else {
            Some(self.values[row])
        }
    }

    pub fn len(&self) -> usize {
        self.values.len()
    }

    pub fn is_empty(&self) -> bool {
        self.values.is_empty()
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct CategoricalColumn {
    pub name: String,
    pub values: Vec<Option<String>>,
}

impl CategoricalColumn {
    pub fn get(&self, row: usize) -> Option<&str> {
        self.values[row].as_deref()
    }
}

/// Declared column of categorical type, with an optional closed vocabulary.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct CategoricalSpec {
    pub name: String,
    #[serde(default)]
    pub vocabulary: Option<Vec<String>>,
}

/// Column declaration for CSV ingestion.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct Schema {
    #[serde(default = "default_firm_id")]
    pub firm_id: String,
    #[serde(default = "default_year")]
    pub year: String,
    pub numeric: Vec<String>,
    pub categorical: Vec<CategoricalSpec>,
}

fn default_firm_id() -> String {
    "firm_id".into()
}

fn default_year() -> String {
    "year".into()
}

impl Schema {
    /// Financial-accounts layout: base accounts, flags, precomputed TFP and
    /// markup, outcome revenues, derived predictors and location/industry codes.
    pub fn accounts() -> Self {
        let numeric = columns::BASE_NUMERIC
            .iter()
            .chain(DERIVED_COLUMNS.iter())
            .map(|s| s.to_string())
            .collect();
        let categorical = columns::CATEGORICAL
            .iter()
            .map(|name| CategoricalSpec {
                name: name.to_string(),
                vocabulary: None,
            })
            .collect();
        Self {
            firm_id: default_firm_id(),
            year: default_year(),
            numeric,
            categorical,
        }
    }

    /// Schema with arbitrary numeric columns plus the standard codes.
    pub fn custom(numeric: impl IntoIterator<Item = impl Into<String>>) -> Self {
        let mut schema = Self::accounts();
        schema.numeric = numeric.into_iter().map(Into::into).collect();
        schema
    }

    pub fn column_names(&self) -> Vec<String> {
        let mut names = vec![self.firm_id.clone(), self.year.clone()];
        names.extend(self.numeric.iter().cloned());
        names.extend(self.categorical.iter().map(|c| c.name.clone()));
        names
    }
}

/// Rectangular firm-year table. Immutable once built and validated.
#[derive(Debug, Clone, PartialEq)]
pub struct FirmPanel {
    pub firm_ids: Vec<String>,
    pub years: Vec<i32>,
    pub numeric: Vec<NumericColumn>,
    pub categorical: Vec<CategoricalColumn>,
}

impl FirmPanel {
    /// Builds a panel and checks its invariants: equal column lengths,
    /// unique (firm, year) keys, a contiguous year range.
    pub fn new(
        firm_ids: Vec<String>,
        years: Vec<i32>,
        numeric: Vec<NumericColumn>,
        categorical: Vec<CategoricalColumn>,
    ) -> Result<Self> {
        let panel = Self {
            firm_ids,
            years,
            numeric,
            categorical,
        };
        panel.validate()?;
        Ok(panel)
    }

    fn validate(&self) -> Result<()> {
        let n = self.firm_ids.len();
        if self.years.len() != n {
            return Err(Error::Schema("year column length differs from firm ids".into()));
        }
        let mut names = BTreeSet::new();
        for col in &self.numeric {
            if col.values.len() != n || col.missing.len() != n {
                return Err(Error::Schema(format!("column {} has wrong length", col.name)));
            }
            if !names.insert(col.name.as_str()) {
                return Err(Error::Schema(format!("column {} declared twice", col.name)));
            }
        }
        for col in &self.categorical {
            if col.values.len() != n {
                return Err(Error::Schema(format!("column {} has wrong length", col.name)));
            }
            if !names.insert(col.name.as_str()) {
                return Err(Error::Schema(format!("column {} declared twice", col.name)));
            }
        }
        let mut seen = HashMap::with_capacity(n);
        for (id, &year) in self.firm_ids.iter().zip(&self.years) {
            if seen.insert((id.as_str(), year), ()).is_some() {
                return Err(Error::DuplicateKey {
                    firm_id: id.clone(),
                    year,
                });
            }
        }
        let distinct: BTreeSet<i32> = self.years.iter().copied().collect();
        if let (Some(&lo), Some(&hi)) = (distinct.first(), distinct.last()) {
            if (hi - lo + 1) as usize != distinct.len() {
                return Err(Error::Schema(format!(
                    "years do not form a contiguous range ({lo}..={hi})"
                )));
            }
        }
        Ok(())
    }

    pub fn n_rows(&self) -> usize {
        self.firm_ids.len()
    }

    pub fn key(&self, row: usize) -> RowKey {
        RowKey::new(self.firm_ids[row].clone(), self.years[row])
    }

    pub fn keys(&self) -> Vec<RowKey> {
        (0..self.n_rows()).map(|r| self.key(r)).collect()
    }

    pub fn numeric(&self, name: &str) -> Option<&NumericColumn> {
        self.numeric.iter().find(|c| c.name == name)
    }

    pub fn require_numeric(&self, name: &str) -> Result<&NumericColumn> {
        self.numeric(name)
            .ok_or_else(|| Error::Schema(format!("required column {name:?} not in panel")))
    }

    pub fn categorical(&self, name: &str) -> Option<&CategoricalColumn> {
        self.categorical.iter().find(|c| c.name == name)
    }

    pub fn require_categorical(&self, name: &str) -> Result<&CategoricalColumn> {
        self.categorical(name)
            .ok_or_else(|| Error::Schema(format!("required column {name:?} not in panel")))
    }

    /// Distinct firm ids in sorted order.
    pub fn firms(&self) -> Vec<String> {
        let set: BTreeSet<&String> = self.firm_ids.iter().collect();
        set.into_iter().cloned().collect()
    }

    /// Row indices whose firm is in `firms`.
    pub fn rows_for_firms(&self, firms: &BTreeSet<String>) -> Vec<usize> {
        (0..self.n_rows())
            .filter(|&r| firms.contains(&self.firm_ids[r]))
            .collect()
    }

    /// Restricts the panel to the given rows, preserving order.
    pub fn select_rows(&self, rows: &[usize]) -> FirmPanel {
        FirmPanel {
            firm_ids: rows.iter().map(|&r| self.firm_ids[r].clone()).collect(),
            years: rows.iter().map(|&r| self.years[r]).collect(),
            numeric: self
                .numeric
                .iter()
                .map(|c| NumericColumn {
                    name: c.name.clone(),
                    values: rows.iter().map(|&r| c.values[r]).collect(),
                    missing: rows.iter().map(|&r| c.missing[r]).collect(),
                })
                .collect(),
            categorical: self
                .categorical
                .iter()
                .map(|c| CategoricalColumn {
                    name: c.name.clone(),
                    values: rows.iter().map(|&r| c.values[r].clone()).collect(),
                })
                .collect(),
        }
    }

    /// Rows observed in `year`.
    pub fn rows_in_year(&self, year: i32) -> Vec<usize> {
        (0..self.n_rows()).filter(|&r| self.years[r] == year).collect()
    }

    /// Inserts or replaces a numeric column.
    pub(crate) fn put_numeric(&mut self, column: NumericColumn) {
        match self.numeric.iter_mut().find(|c| c.name == column.name) {
            Some(slot) => *slot = column,
            None => self.numeric.push(column),
        }
    }

    pub(crate) fn row_index(&self) -> HashMap<(&str, i32), usize> {
        self.firm_ids
            .iter()
            .zip(&self.years)
            .enumerate()
            .map(|(r, (id, &y))| ((id.as_str(), y), r))
            .collect()
    }
}

use std::collections::BTreeMap;

use serde::{Deserialize, Serialize};

use super::LabelSet;
use crate::error::{Error, Result};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(tag = "category", rename_all = "snake_case")]
pub enum PatternCategory {
    ConstantExporter,
    NonExporter,
    /// Zeros strictly before `start_year`, ones from it onward.
    SwitchingExporter { start_year: i32 },
    /// Ones strictly before `stop_year`, zeros from it onward.
    SwitchingNonExporter { stop_year: i32 },
    /// Two or more status switches.
    Discontinuous { export_years: usize },
}

impl PatternCategory {
    pub fn name(&self) -> &'static str {
        match self {
            PatternCategory::ConstantExporter => "constant_exporter",
            PatternCategory::NonExporter => "non_exporter",
            PatternCategory::SwitchingExporter { .. } => "switching_exporter",
            PatternCategory::SwitchingNonExporter { .. } => "switching_non_exporter",
            PatternCategory::Discontinuous { .. } => "discontinuous",
        }
    }

    /// Sub-group label, e.g. `switching_exporter:start=2013`.
    pub fn detail(&self) -> String {
        match self {
            PatternCategory::SwitchingExporter { start_year } => {
                format!("switching_exporter:start={start_year}")
            }
            PatternCategory::SwitchingNonExporter { stop_year } => {
                format!("switching_non_exporter:stop={stop_year}")
            }
            PatternCategory::Discontinuous { export_years } => {
                format!("discontinuous:export_years={export_years}")
            }
            other => other.name().to_string(),
        }
    }
}

/// Permanent / temporary / never exporter split based on runs of
/// consecutive exporting years.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum BmClass {
    Permanent,
    Temporary,
    Never,
}

impl BmClass {
    pub fn name(&self) -> &'static str {
        match self {
            BmClass::Permanent => "permanent",
            BmClass::Temporary => "temporary",
            BmClass::Never => "never",
        }
    }
}

pub const PERMANENT_RUN: usize = 4;

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct PatternClass {
    pub firm_id: String,
    pub category: PatternCategory,
    pub bm_class: BmClass,
}

/// Classifies one firm's ordered label path starting at `first_year`.
pub(crate) fn classify_path(path: &[bool], first_year: i32) -> (PatternCategory, BmClass) {
    let exports = path.iter().filter(|&&x| x).count();
    let switches = path.windows(2).filter(|w| w[0] != w[1]).count();
    let category = if exports == path.len() {
        PatternCategory::ConstantExporter
    } else if exports == 0 {
        PatternCategory::NonExporter
    } else if switches == 1 {
        let at = path.windows(2).position(|w| w[0] != w[1]).unwrap() + 1;
        let year = first_year + at as i32;
        if path[0] {
            PatternCategory::SwitchingNonExporter { stop_year: year }
        } else {
            PatternCategory::SwitchingExporter { start_year: year }
        }
    } else {
        PatternCategory::Discontinuous {
            export_years: exports,
        }
    };

    let mut longest = 0;
    let mut run = 0;
    for &x in path {
        run = if x { run + 1 } else { 0 };
        longest = longest.max(run);
    }
    let bm = if longest >= PERMANENT_RUN {
        BmClass::Permanent
    } else if exports > 0 {
        BmClass::Temporary
    } else {
        BmClass::Never
    };
    (category, bm)
}

/// Assigns each firm one exporting-pattern category and one permanent /
/// temporary / never class. Firms come back sorted by id.
pub fn classify_patterns(labels: &LabelSet) -> Result<Vec<PatternClass>> {
    let mut by_firm: BTreeMap<&str, BTreeMap<i32, bool>> = BTreeMap::new();
    for (key, &l) in labels.keys.iter().zip(&labels.labels) {
        by_firm.entry(&key.firm_id).or_default().insert(key.year, l);
    }
    let mut out = Vec::with_capacity(by_firm.len());
    for (firm, years) in by_firm {
        let first = *years.keys().next().unwrap();
        let last = *years.keys().next_back().unwrap();
        if let Some(gap) = (first..=last).find(|y| !years.contains_key(y)) {
            return Err(Error::IncompleteTimeline {
                firm_id: firm.to_string(),
                missing_year: gap,
            });
        }
        let path: Vec<bool> = years.values().copied().collect();
        let (category, bm_class) = classify_path(&path, first);
        out.push(PatternClass {
            firm_id: firm.to_string(),
            category,
            bm_class,
        });
    }
    Ok(out)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::dataset::{LabelDefinition, RowKey};

    fn path(bits: &[u8]) -> Vec<bool> {
        bits.iter().map(|&b| b == 1).collect()
    }

    #[test]
    fn always_exporting_is_constant_and_permanent() {
        let (c, bm) = classify_path(&path(&[1, 1, 1, 1, 1, 1, 1, 1, 1]), 2010);
        assert_eq!(c, PatternCategory::ConstantExporter);
        assert_eq!(bm, BmClass::Permanent);
    }

    #[test]
    fn switching_exporter_start_year() {
        let (c, bm) = classify_path(&path(&[0, 0, 1, 1, 1, 1, 1, 1, 1]), 2010);
        assert_eq!(c, PatternCategory::SwitchingExporter { start_year: 2012 });
        assert_eq!(bm, BmClass::Permanent);
    }

    #[test]
    fn irregular_path_is_discontinuous_and_temporary() {
        let (c, bm) = classify_path(&path(&[1, 0, 1, 0, 0, 0, 0, 0, 0]), 2010);
        assert_eq!(c, PatternCategory::Discontinuous { export_years: 2 });
        assert_eq!(bm, BmClass::Temporary);
    }

    #[test]
    fn switching_non_exporter_and_never() {
        let (c, bm) = classify_path(&path(&[1, 1, 1, 0]), 2010);
        assert_eq!(c, PatternCategory::SwitchingNonExporter { stop_year: 2013 });
        assert_eq!(bm, BmClass::Temporary);
        let (c, bm) = classify_path(&path(&[0, 0, 0]), 2010);
        assert_eq!(c, PatternCategory::NonExporter);
        assert_eq!(bm, BmClass::Never);
    }

    #[test]
    fn gap_in_coverage_is_error() {
        let labels = LabelSet {
            definition: LabelDefinition::PositiveRevenue,
            keys: vec![RowKey::new("a", 2010), RowKey::new("a", 2012)],
            labels: vec![true, true],
            rows: vec![0, 1],
        };
        assert!(matches!(
            classify_patterns(&labels),
            Err(Error::IncompleteTimeline { missing_year: 2011, .. })
        ));
    }

    proptest::proptest! {
        #[test]
        fn categories_partition_firms(paths in proptest::collection::vec(
            proptest::collection::vec(proptest::bool::ANY, 1..10), 1..30)) {
            let mut keys = Vec::new();
            let mut labs = Vec::new();
            for (f, p) in paths.iter().enumerate() {
                for (t, &l) in p.iter().enumerate() {
                    keys.push(RowKey::new(format!("f{f:02}"), 2010 + t as i32));
                    labs.push(l);
                }
            }
            let rows = (0..labs.len()).collect();
            let set = LabelSet { definition: LabelDefinition::PositiveRevenue, keys, labels: labs, rows };
            let classes = classify_patterns(&set).unwrap();
            proptest::prop_assert_eq!(classes.len(), paths.len());
            for (c, p) in classes.iter().zip(&paths) {
                let longest = p.split(|x| !x).map(<[bool]>::len).max().unwrap_or(0);
                proptest::prop_assert_eq!(c.bm_class == BmClass::Permanent, longest >= 4);
                if let PatternCategory::SwitchingExporter { start_year } = c.category {
                    let s = (start_year - 2010) as usize;
                    proptest::prop_assert!(p[..s].iter().all(|x| !x) && p[s..].iter().all(|&x| x));
                }
            }
        }
    }
}

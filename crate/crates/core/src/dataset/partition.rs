use std::collections::BTreeSet;

use rand::seq::SliceRandom;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use super::FirmPanel;
use crate::error::{Error, Result};

/// Firm-level train/test split. `fraction` is the training share.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Partition {
    pub train_firm_ids: BTreeSet<String>,
    pub test_firm_ids: BTreeSet<String>,
    pub fraction: f64,
    pub seed: u64,
}

impl Partition {
    pub fn train_rows(&self, panel: &FirmPanel) -> Vec<usize> {
        panel.rows_for_firms(&self.train_firm_ids)
    }

    pub fn test_rows(&self, panel: &FirmPanel) -> Vec<usize> {
        panel.rows_for_firms(&self.test_firm_ids)
    }
}

/// Uniform random split of firms (all years of a firm stay together).
pub fn partition(panel: &FirmPanel, fraction: f64, seed: u64) -> Result<Partition> {
    if !(fraction > 0.0 && fraction < 1.0) {
        return Err(Error::Parameter(format!(
            "partition fraction must lie in (0, 1), got {fraction}"
        )));
    }
    let mut firms = panel.firms();
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    firms.shuffle(&mut rng);
    let n_train = (fraction * firms.len() as f64).round() as usize;
    let test = firms.split_off(n_train);
    Ok(Partition {
        train_firm_ids: firms.into_iter().collect(),
        test_firm_ids: test.into_iter().collect(),
        fraction,
        seed,
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    fn panel(firms: usize, years: i32) -> FirmPanel {
        let mut ids = Vec::new();
        let mut ys = Vec::new();
        for f in 0..firms {
            for y in 0..years {
                ids.push(format!("f{f:03}"));
                ys.push(2010 + y);
            }
        }
        FirmPanel::new(ids, ys, vec![], vec![]).unwrap()
    }

    #[test]
    fn eighty_twenty_split() {
        let p = panel(100, 1);
        let part = partition(&p, 0.8, 42).unwrap();
        assert_eq!(part.train_firm_ids.len(), 80);
        assert_eq!(part.test_firm_ids.len(), 20);
        assert!(part.train_firm_ids.is_disjoint(&part.test_firm_ids));
    }

    #[test]
    fn same_seed_same_split() {
        let p = panel(57, 2);
        assert_eq!(partition(&p, 0.8, 9).unwrap(), partition(&p, 0.8, 9).unwrap());
        assert_ne!(
            partition(&p, 0.8, 9).unwrap().test_firm_ids,
            partition(&p, 0.8, 10).unwrap().test_firm_ids
        );
    }

    #[test]
    fn all_years_of_a_firm_on_one_side() {
        let p = panel(30, 9);
        let part = partition(&p, 0.8, 1).unwrap();
        let train = part.train_rows(&p);
        let test = part.test_rows(&p);
        assert_eq!(train.len() + test.len(), p.n_rows());
        assert_eq!(train.len() % 9, 0);
    }

    #[test]
    fn fraction_out_of_range() {
        let p = panel(3, 1);
        assert!(partition(&p, 1.0, 0).is_err());
        assert!(partition(&p, 0.0, 0).is_err());
    }

    proptest::proptest! {
        #[test]
        fn test_share_within_one_firm(n in 2usize..200, f in 0.05f64..0.95, seed in 0u64..1000) {
            let p = panel(n, 1);
            let part = partition(&p, f, seed).unwrap();
            let target = (1.0 - f) * n as f64;
            proptest::prop_assert!((part.test_firm_ids.len() as f64 - target).abs() <= 1.0);
            proptest::prop_assert_eq!(part.train_firm_ids.len() + part.test_firm_ids.len(), n);
        }
    }
}

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use super::tree::{grow, ClassTree, GrowParams};
use crate::error::{Error, Result};
use crate::features::FeatureMatrix;
use crate::stats::derive_seed;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct ForestConfig {
    pub trees: usize,
    /// Predictors sampled per split; `None` means floor(sqrt(p)).
    pub mtry: Option<usize>,
    pub min_node_size: usize,
    pub bootstrap: bool,
    pub seed: u64,
}

impl Default for ForestConfig {
    fn default() -> Self {
        Self {
            trees: 500,
            mtry: None,
            min_node_size: 1,
            bootstrap: true,
            seed: 0,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ForestTree {
    pub tree: ClassTree,
    /// Seed of the tree's bootstrap draw and feature sampling.
    pub seed: u64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ForestModel {
    pub names: Vec<String>,
    pub trees: Vec<ForestTree>,
    pub mtry: usize,
    /// Accuracy of out-of-bag majority votes; absent without bootstrap or
    /// when no row was ever out of bag.
    pub oob_accuracy: Option<f64>,
    pub n_used: usize,
    pub n_dropped: usize,
}

impl ForestModel {
    /// Fraction of trees voting exporter, for complete rows.
    pub fn predict(&self, x: &FeatureMatrix) -> Result<Vec<Option<f64>>> {
        let x = x.aligned_to(&self.names)?;
        let k = self.trees.len() as f64;
        Ok((0..x.n_rows())
            .into_par_iter()
            .map(|i| {
                x.is_complete(i).then(|| {
                    let row = |j: usize| x.get(i, j);
                    self.trees.iter().filter(|t| t.tree.vote(&row)).count() as f64 / k
                })
            })
            .collect())
    }
}

pub fn default_mtry(p: usize) -> usize {
    ((p as f64).sqrt().floor() as usize).max(1)
}

/// Random forest of unpruned Gini trees on bootstrap resamples of the
/// complete rows.
pub fn fit_forest(x: &FeatureMatrix, y: &[bool], config: &ForestConfig) -> Result<ForestModel> {
    if x.n_rows() != y.len() {
        return Err(Error::Alignment(format!(
            "{} feature rows but {} labels",
            x.n_rows(),
            y.len()
        )));
    }
    let p = x.n_cols();
    let mtry = config.mtry.unwrap_or_else(|| default_mtry(p));
    if mtry == 0 || mtry > p {
        return Err(Error::Parameter(format!("mtry must lie in 1..={p}, got {mtry}")));
    }
    if config.trees == 0 {
        return Err(Error::Parameter("forest needs at least one tree".into()));
    }
    let rows = x.complete_rows();
    if rows.is_empty() {
        return Err(Error::MissingData("no complete rows to fit".into()));
    }
    let n = rows.len();
    let params = GrowParams {
        min_node_size: config.min_node_size,
        mtry: Some(mtry),
    };
    let fitted: Vec<(ForestTree, Vec<bool>)> = (0..config.trees)
        .into_par_iter()
        .map(|t| {
            let seed = derive_seed(config.seed, t as u64);
            let mut rng = ChaCha8Rng::seed_from_u64(seed);
            let mut in_bag = vec![!config.bootstrap; n];
            let sample: Vec<usize> = if config.bootstrap {
                (0..n)
                    .map(|_| {
                        let k = rng.random_range(0..n);
                        in_bag[k] = true;
                        rows[k]
                    })
                    .collect()
            } else {
                rows.clone()
            };
            let tree = grow(&x.columns, y, &sample, params, &mut rng);
            (ForestTree { tree, seed }, in_bag)
        })
        .collect();

    let mut votes = vec![(0usize, 0usize); n];
    for (ft, in_bag) in &fitted {
        for (k, &r) in rows.iter().enumerate() {
            if !in_bag[k] {
                votes[k].0 += 1;
                votes[k].1 += ft.tree.vote(&|j| x.get(r, j)) as usize;
            }
        }
    }
    let scored: Vec<(usize, bool)> = votes
        .iter()
        .enumerate()
        .filter(|(_, v)| v.0 > 0)
        .map(|(k, v)| (k, 2 * v.1 > v.0))
        .collect();
    let oob_accuracy = (!scored.is_empty()).then(|| {
        scored.iter().filter(|&&(k, pred)| pred == y[rows[k]]).count() as f64 / scored.len() as f64
    });
    Ok(ForestModel {
        names: x.names.clone(),
        trees: fitted.into_iter().map(|(t, _)| t).collect(),
        mtry,
        oob_accuracy,
        n_used: n,
        n_dropped: x.n_rows() - n,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::baselines::cart::{fit_cart, CartConfig};

    fn data(n: usize, seed: u64, noise_only: bool) -> (FeatureMatrix, Vec<bool>) {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let cols: Vec<Vec<f64>> = (0..4).map(|_| (0..n).map(|_| rng.random()).collect()).collect();
        let y = (0..n)
            .map(|i| {
                if noise_only {
                    rng.random::<f64>() < 0.7
                } else {
                    cols[0][i] + 0.3 * rng.random::<f64>() > 0.6
                }
            })
            .collect();
        let names = (0..4).map(|j| format!("x{j}")).collect();
        (FeatureMatrix::new(names, cols).unwrap(), y)
    }

    #[test]
    fn single_tree_without_bootstrap_is_unpruned_cart() {
        let (x, y) = data(150, 1, false);
        let f = fit_forest(
            &x,
            &y,
            &ForestConfig { trees: 1, mtry: Some(4), min_node_size: 5, bootstrap: false, seed: 3 },
        )
        .unwrap();
        let c = fit_cart(&x, &y, &CartConfig { prune: false, ..CartConfig::default() }).unwrap();
        assert_eq!(f.trees[0].tree, c.tree);
    }

    #[test]
    fn seeded_forests_identical() {
        let (x, y) = data(120, 2, false);
        let cfg = ForestConfig { trees: 30, seed: 9, ..ForestConfig::default() };
        assert_eq!(fit_forest(&x, &y, &cfg).unwrap(), fit_forest(&x, &y, &cfg).unwrap());
    }

    #[test]
    fn noise_oob_accuracy_near_majority_rate() {
        let (x, y) = data(1000, 4, true);
        let f = fit_forest(&x, &y, &ForestConfig { trees: 200, seed: 1, ..ForestConfig::default() }).unwrap();
        let majority = y.iter().filter(|&&v| v).count() as f64 / y.len() as f64;
        let majority = majority.max(1.0 - majority);
        let oob = f.oob_accuracy.unwrap();
        assert!((oob - majority).abs() <= 0.05, "oob {oob} majority {majority}");
    }

    #[test]
    fn scores_are_vote_fractions() {
        let (x, y) = data(100, 5, false);
        let f = fit_forest(&x, &y, &ForestConfig { trees: 8, ..ForestConfig::default() }).unwrap();
        for s in f.predict(&x).unwrap() {
            let s = s.unwrap();
            assert!((s * 8.0 - (s * 8.0).round()).abs() < 1e-12);
        }
        assert_eq!(f.mtry, 2);
    }
}

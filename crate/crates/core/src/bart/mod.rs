//! Probit Bayesian additive regression trees with Missingness-In-Attributes
//! split rules.
//!
//! The model is `P(y = 1 | x) = Phi(sum_t tree_t(x))`. Each tree is regularized
//! by a depth prior `beta * (1 + depth)^(-eta)` on splitting and a
//! `N(0, sigma_q^2)` prior on leaf values with `sigma_q = 3 / (d * sqrt(q))`.
//! Fitting alternates truncated-normal latent draws with a backfitting sweep
//! of grow / prune / change Metropolis-Hastings proposals and conjugate leaf
//! updates.
//!
//! With MIA enabled every numeric split carries the side that receives
//! missing values, and predictors with missing training values also admit a
//! pure missingness split, so absence itself can be used as signal.

mod sampler;
mod tree;

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

pub use sampler::{draw_latent, leaf_posterior_stats};
pub use tree::{Direction, NodeRecord, SplitRule, Tree};

use crate::error::{Error, Result};
use crate::features::FeatureMatrix;
use crate::stats::{normal_cdf, sort_f64};
use sampler::{RuleSpace, Sampler};

/// Relative frequencies of the three tree proposals.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ProposalProbs {
    pub grow: f64,
    pub prune: f64,
    pub change: f64,
}

impl Default for ProposalProbs {
    fn default() -> Self {
        Self {
            grow: 0.28,
            prune: 0.28,
            change: 0.44,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct BartConfig {
    /// Number of trees `q`.
    pub trees: usize,
    /// Depth-penalty exponent.
    pub eta: f64,
    /// Base split probability.
    pub beta: f64,
    /// Leaf-prior scale divisor `d`.
    pub d: f64,
    /// Error variance, fixed at 1 under the probit link.
    pub sigma2: f64,
    pub burn_in: usize,
    pub post_burn: usize,
    /// Missingness-In-Attributes splits; when off, training data must be
    /// complete.
    pub mia: bool,
    pub seed: u64,
    pub proposal: ProposalProbs,
}

impl Default for BartConfig {
    fn default() -> Self {
        Self {
            trees: 50,
            eta: 2.0,
            beta: 0.95,
            d: 2.0,
            sigma2: 1.0,
            burn_in: 250,
            post_burn: 1000,
            mia: true,
            seed: 0,
            proposal: ProposalProbs::default(),
        }
    }
}

impl BartConfig {
    pub fn validate(&self) -> Result<()> {
        let bad = |m: String| Err(Error::Parameter(m));
        if !(self.beta > 0.0 && self.beta < 1.0) {
            return bad(format!("beta must lie in (0, 1), got {}", self.beta));
        }
        if !(self.eta >= 0.0 && self.eta.is_finite()) {
            return bad(format!("eta must be >= 0, got {}", self.eta));
        }
        if self.trees == 0 {
            return bad("tree count must be >= 1".into());
        }
        if !(self.d > 0.0 && self.d.is_finite()) {
            return bad(format!("d must be positive, got {}", self.d));
        }
        if self.sigma2 != 1.0 {
            return bad(format!("sigma2 is fixed at 1 under the probit link, got {}", self.sigma2));
        }
        if self.post_burn == 0 {
            return bad("post_burn must be >= 1".into());
        }
        let p = self.proposal;
        if !(p.grow > 0.0 && p.prune > 0.0 && p.change > 0.0) {
            return bad("proposal weights must be positive".into());
        }
        if (p.grow + p.prune + p.change - 1.0).abs() > 1e-9 {
            return bad("proposal weights must sum to 1".into());
        }
        Ok(())
    }

    /// Prior probability that a node at `depth` splits.
    pub fn split_prob(&self, depth: usize) -> f64 {
        self.beta * (1.0 + depth as f64).powf(-self.eta)
    }

    /// Leaf prior standard deviation `3 / (d * sqrt(q))`.
    pub fn sigma_q(&self) -> f64 {
        3.0 / (self.d * (self.trees as f64).sqrt())
    }
}

/// Training-time metadata for one predictor.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PredictorMeta {
    pub name: String,
    /// Candidate cutpoints: sorted distinct observed values minus the largest.
    pub cutpoints: Vec<f64>,
    pub has_missing: bool,
}

/// Posterior sample: `post_burn` ensembles of `trees` trees each.
#[derive(Debug, Clone, PartialEq)]
pub struct BartModel {
    pub config: BartConfig,
    pub predictors: Vec<PredictorMeta>,
    pub draws: Vec<Vec<Tree>>,
}

/// Posterior mean and variance of a leaf value given its residuals.
pub fn leaf_posterior(residuals: &[f64], sigma2: f64, sigma_q: f64) -> (f64, f64) {
    leaf_posterior_stats(residuals.len(), residuals.iter().sum(), sigma2, sigma_q)
}

fn predictor_meta(x: &FeatureMatrix) -> Vec<PredictorMeta> {
    x.names
        .iter()
        .zip(&x.columns)
        .map(|(name, col)| {
            let mut observed: Vec<f64> = col.iter().copied().filter(|v| !v.is_nan()).collect();
            sort_f64(&mut observed);
            observed.dedup();
            observed.pop();
            PredictorMeta {
                name: name.clone(),
                cutpoints: observed,
                has_missing: col.iter().any(|v| v.is_nan()),
            }
        })
        .collect()
}

/// Fits the probit sum-of-trees model by MCMC.
pub fn fit(x: &FeatureMatrix, y: &[bool], config: &BartConfig) -> Result<BartModel> {
    config.validate()?;
    if x.n_rows() != y.len() {
        return Err(Error::Alignment(format!(
            "{} feature rows but {} labels",
            x.n_rows(),
            y.len()
        )));
    }
    let pos = y.iter().filter(|&&v| v).count();
    let neg = y.len() - pos;
    if pos < 2 || neg < 2 {
        return Err(Error::DegenerateOutcome(format!(
            "need at least two rows of each class, got {pos} positive and {neg} negative"
        )));
    }
    if !config.mia && x.has_missing() {
        return Err(Error::MissingData(
            "training rows contain missing cells but MIA is disabled".into(),
        ));
    }

    let predictors = predictor_meta(x);
    let space = RuleSpace::new(
        predictors.iter().map(|p| p.cutpoints.clone()).collect(),
        predictors.iter().map(|p| p.has_missing).collect(),
        config.mia,
    );
    let rng = ChaCha8Rng::seed_from_u64(config.seed);
    let mut sampler = Sampler::new(&x.columns, y, &space, config, rng);
    for _ in 0..config.burn_in {
        sampler.sweep();
    }
    let mut draws = Vec::with_capacity(config.post_burn);
    for _ in 0..config.post_burn {
        sampler.sweep();
        draws.push(sampler.snapshot());
    }
    Ok(BartModel {
        config: config.clone(),
        predictors,
        draws,
    })
}

/// Largest f64 strictly below 1.
const ONE_MINUS: f64 = 1.0 - f64::EPSILON / 2.0;

impl BartModel {
    pub fn predictor_names(&self) -> Vec<String> {
        self.predictors.iter().map(|p| p.name.clone()).collect()
    }

    /// Posterior mean of `Phi(sum of trees)` per row. Columns are matched to
    /// the training predictors by name.
    pub fn predict(&self, x: &FeatureMatrix) -> Result<Vec<f64>> {
        let x = x.aligned_to(&self.predictor_names())?;
        if !self.config.mia && x.has_missing() {
            return Err(Error::MissingData(
                "rows contain missing cells but the model was fit without MIA".into(),
            ));
        }
        let n_draws = self.draws.len() as f64;
        let scores = (0..x.n_rows())
            .into_par_iter()
            .map(|i| {
                let row = x.row(i);
                let mut total = 0.0;
                for ensemble in &self.draws {
                    let s: f64 = ensemble.iter().map(|t| t.eval(|j| row[j])).sum();
                    total += normal_cdf(s);
                }
                (total / n_draws).clamp(f64::MIN_POSITIVE, ONE_MINUS)
            })
            .collect();
        Ok(scores)
    }

    /// Variable inclusion proportions: share of all split rules across the
    /// retained draws that use each predictor (missingness splits count
    /// toward their predictor). All zeros if no draw has a split.
    pub fn vip(&self) -> Vec<f64> {
        let mut counts = vec![0usize; self.predictors.len()];
        for ensemble in &self.draws {
            for tree in ensemble {
                for rule in tree.rules() {
                    counts[rule.predictor()] += 1;
                }
            }
        }
        let total: usize = counts.iter().sum();
        if total == 0 {
            return vec![0.0; counts.len()];
        }
        counts.iter().map(|&c| c as f64 / total as f64).collect()
    }

    /// Mean leaf count per tree for each retained draw.
    pub fn trace_mean_leaves(&self) -> Vec<f64> {
        self.draws
            .iter()
            .map(|e| e.iter().map(Tree::n_leaves).sum::<usize>() as f64 / e.len() as f64)
            .collect()
    }
}

use rand::seq::SliceRandom;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use super::tree::{grow, ClassNode, ClassTree, GrowParams};
use crate::error::{Error, Result};
use crate::features::FeatureMatrix;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct CartConfig {
    pub min_node_size: usize,
    /// Folds for choosing the pruning level.
    pub cv_folds: usize,
    /// Skip pruning entirely.
    pub prune: bool,
    pub seed: u64,
}

impl Default for CartConfig {
    fn default() -> Self {
        Self {
            min_node_size: 5,
            cv_folds: 5,
            prune: true,
            seed: 0,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CartModel {
    pub names: Vec<String>,
    pub tree: ClassTree,
    /// Complexity parameter of the retained subtree (misclassification rate
    /// per extra leaf).
    pub alpha: f64,
    pub n_used: usize,
    pub n_dropped: usize,
}

impl CartModel {
    /// Positive share in the reached leaf for complete rows.
    pub fn predict(&self, x: &FeatureMatrix) -> Result<Vec<Option<f64>>> {
        let x = x.aligned_to(&self.names)?;
        Ok((0..x.n_rows())
            .map(|i| x.is_complete(i).then(|| self.tree.prob(&|j| x.get(i, j))))
            .collect())
    }
}

fn misclassified(n: usize, pos: usize) -> usize {
    pos.min(n - pos)
}

/// Weakest-link pruning sequence: increasing complexity parameters with the
/// optimal subtree for each, ending at the root leaf.
pub(crate) fn pruning_sequence(tree: &ClassTree) -> Vec<(f64, ClassTree)> {
    let total = tree.counts(0).0.max(1) as f64;
    let mut current = tree.clone();
    let mut seq = vec![(0.0, current.compact())];
    loop {
        // (subtree misclassified, leaves) per node, computed bottom-up
        let mut stats = vec![(0usize, 0usize); current.nodes.len()];
        fn walk(t: &ClassTree, i: usize, stats: &mut [(usize, usize)]) -> (usize, usize) {
            let s = match t.nodes[i] {
                ClassNode::Leaf { n, positives } => (misclassified(n, positives), 1),
                ClassNode::Split { left, right, .. } => {
                    let a = walk(t, left, stats);
                    let b = walk(t, right, stats);
                    (a.0 + b.0, a.1 + b.1)
                }
            };
            stats[i] = s;
            s
        }
        walk(&current, 0, &mut stats);
        let mut internal = Vec::new();
        let mut stack = vec![0usize];
        while let Some(i) = stack.pop() {
            if let ClassNode::Split { left, right, n, positives, .. } = current.nodes[i] {
                let g = (misclassified(n, positives) as f64 - stats[i].0 as f64)
                    / total
                    / (stats[i].1 - 1) as f64;
                internal.push((i, g));
                stack.push(left);
                stack.push(right);
            }
        }
        if internal.is_empty() {
            break;
        }
        let alpha = internal.iter().map(|&(_, g)| g).fold(f64::INFINITY, f64::min);
        for &(i, g) in &internal {
            if g <= alpha + 1e-12 {
                current.collapse(i);
            }
        }
        let pruned = current.compact();
        current = pruned.clone();
        if alpha <= 1e-12 && seq.len() == 1 {
            seq[0] = (0.0, pruned);
        } else {
            seq.push((alpha.max(0.0), pruned));
        }
    }
    seq
}

fn subtree_at(seq: &[(f64, ClassTree)], alpha: f64) -> &ClassTree {
    let k = seq.iter().rposition(|(a, _)| *a <= alpha).unwrap_or(0);
    &seq[k].1
}

/// Gini tree with cost-complexity pruning chosen by k-fold cross-validation
/// under the one-standard-error rule. Uses complete rows only.
pub fn fit_cart(x: &FeatureMatrix, y: &[bool], config: &CartConfig) -> Result<CartModel> {
    if x.n_rows() != y.len() {
        return Err(Error::Alignment(format!(
            "{} feature rows but {} labels",
            x.n_rows(),
            y.len()
        )));
    }
    if config.cv_folds < 2 {
        return Err(Error::Parameter("CART needs at least two folds".into()));
    }
    let rows = x.complete_rows();
    if rows.is_empty() {
        return Err(Error::MissingData("no complete rows to fit".into()));
    }
    let params = GrowParams {
        min_node_size: config.min_node_size,
        mtry: None,
    };
    // growth without feature sampling is deterministic; the generator is unused
    let mut rng = ChaCha8Rng::seed_from_u64(config.seed);
    let full = grow(&x.columns, y, &rows, params, &mut rng);
    let model = |tree: ClassTree, alpha: f64| CartModel {
        names: x.names.clone(),
        tree,
        alpha,
        n_used: rows.len(),
        n_dropped: x.n_rows() - rows.len(),
    };
    if !config.prune || rows.len() < config.cv_folds {
        return Ok(model(full, 0.0));
    }

    let seq = pruning_sequence(&full);
    // geometric midpoints between successive complexity parameters
    let probes: Vec<f64> = (0..seq.len())
        .map(|k| match seq.get(k + 1) {
            Some((next, _)) => (seq[k].0 * next).sqrt(),
            None => f64::INFINITY,
        })
        .collect();
    let mut shuffled = rows.clone();
    shuffled.shuffle(&mut rng);
    let mut errors = vec![0usize; seq.len()];
    for f in 0..config.cv_folds {
        let held: Vec<usize> = shuffled.iter().skip(f).step_by(config.cv_folds).copied().collect();
        let train: Vec<usize> = shuffled
            .iter()
            .enumerate()
            .filter(|(i, _)| i % config.cv_folds != f)
            .map(|(_, &r)| r)
            .collect();
        let fold_seq = pruning_sequence(&grow(&x.columns, y, &train, params, &mut rng));
        for (k, &probe) in probes.iter().enumerate() {
            let t = subtree_at(&fold_seq, probe);
            errors[k] += held
                .iter()
                .filter(|&&r| t.vote(&|j| x.get(r, j)) != y[r])
                .count();
        }
    }
    let n = rows.len() as f64;
    let rates: Vec<f64> = errors.iter().map(|&e| e as f64 / n).collect();
    let (best_k, best) = rates
        .iter()
        .copied()
        .enumerate()
        .fold((0, f64::INFINITY), |acc, (k, r)| if r < acc.1 { (k, r) } else { acc });
    let se = (best * (1.0 - best) / n).sqrt();
    let chosen = (best_k..seq.len())
        .rev()
        .find(|&k| rates[k] <= best + se + 1e-12)
        .unwrap_or(best_k);
    let (alpha, tree) = seq[chosen].clone();
    Ok(model(tree, alpha))
}

//! Backfitting Metropolis-within-Gibbs sampler for the probit sum of trees.

use rand::Rng;
use rand_chacha::ChaCha8Rng;
use rand_distr::{Exp1, Open01, StandardNormal};

use super::tree::{Direction, FlatNode, SplitRule, Tree};
use super::BartConfig;
use crate::stats::{normal_cdf, normal_quantile};

const NONE: u32 = u32::MAX;

/// Conjugate normal update for a leaf mean with prior N(0, sigma_q^2) and
/// Gaussian residuals of variance `sigma2`. Returns (mean, variance).
pub fn leaf_posterior_stats(n: usize, sum: f64, sigma2: f64, sigma_q: f64) -> (f64, f64) {
    let var = 1.0 / (n as f64 / sigma2 + 1.0 / (sigma_q * sigma_q));
    (var * sum / sigma2, var)
}

/// Draws the latent utility of a probit observation: N(fit, 1) truncated to
/// (0, inf) when `y` is true and (-inf, 0) otherwise, by inverting the CDF
/// on the truncated interval.
pub fn draw_latent<R: Rng + ?Sized>(y: bool, fit: f64, rng: &mut R) -> f64 {
    let u: f64 = rng.sample(Open01);
    // Work on the lower tail of the standard normal for stability:
    // y = 1 needs eps > -fit, i.e. -eps < fit; y = 0 needs eps < -fit.
    let bound = if y { fit } else { -fit };
    let mass = normal_cdf(bound);
    let w = u * mass;
    let eps = if w > 0.0 {
        normal_quantile(w)
    } else {
        // Far tail: exponential approximation beyond the truncation point.
        let e: f64 = rng.sample(Exp1);
        bound - e / (-bound).max(1.0)
    };
    let eps = eps.min(bound);
    if y {
        let z = fit - eps;
        if z > 0.0 {
            z
        } else {
            f64::MIN_POSITIVE
        }
    } else {
        let z = fit + eps;
        if z < 0.0 {
            z
        } else {
            -f64::MIN_POSITIVE
        }
    }
}

/// Candidate cutpoints per predictor and whether it has missing training
/// values.
#[derive(Debug, Clone, PartialEq)]
pub(crate) struct RuleSpace {
    pub cuts: Vec<Vec<f64>>,
    pub has_missing: Vec<bool>,
    pub mia: bool,
    base_available: usize,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
enum MissState {
    /// Both missing and observed values may reach the node.
    Unknown,
    Missing,
    /// Only observed values reach the node, or missingness splits are off.
    Observed,
}

#[derive(Debug, Clone, Copy)]
struct Bound {
    predictor: usize,
    lo: usize,
    hi: usize,
    miss: MissState,
}

impl RuleSpace {
    pub fn new(cuts: Vec<Vec<f64>>, has_missing: Vec<bool>, mia: bool) -> Self {
        let mut space = RuleSpace {
            cuts,
            has_missing,
            mia,
            base_available: 0,
        };
        space.base_available = (0..space.cuts.len())
            .filter(|&j| space.n_options(&space.base_bound(j)) > 0)
            .count();
        space
    }

    fn base_bound(&self, j: usize) -> Bound {
        Bound {
            predictor: j,
            lo: 0,
            hi: self.cuts[j].len(),
            miss: if self.mia && self.has_missing[j] {
                MissState::Unknown
            } else {
                MissState::Observed
            },
        }
    }

    fn numeric_options(&self, b: &Bound) -> usize {
        match b.miss {
            MissState::Missing => 0,
            _ => b.hi.saturating_sub(b.lo),
        }
    }

    fn n_options(&self, b: &Bound) -> usize {
        self.numeric_options(b) + usize::from(b.miss == MissState::Unknown)
    }

    fn apply(&self, b: &mut Bound, rule: &SplitRule, left: bool) {
        match *rule {
            SplitRule::Numeric {
                predictor,
                cutpoint,
                missing,
            } => {
                let k = self.cuts[predictor].partition_point(|&c| c < cutpoint);
                let missing_side = missing == Direction::Left;
                if left {
                    b.hi = b.hi.min(k);
                } else {
                    b.lo = b.lo.max(k + 1);
                }
                if left != missing_side {
                    b.miss = MissState::Observed;
                }
            }
            SplitRule::Missingness { .. } => {
                b.miss = if left {
                    MissState::Missing
                } else {
                    MissState::Observed
                };
            }
        }
    }

    fn bound_for(&self, bounds: &[Bound], j: usize) -> Bound {
        bounds
            .iter()
            .find(|b| b.predictor == j)
            .copied()
            .unwrap_or_else(|| self.base_bound(j))
    }

    /// Number of predictors with at least one admissible rule.
    fn n_available(&self, bounds: &[Bound]) -> usize {
        let mut n = self.base_available;
        for b in bounds {
            if self.n_options(&self.base_bound(b.predictor)) > 0 {
                n -= 1;
            }
            if self.n_options(b) > 0 {
                n += 1;
            }
        }
        n
    }

    fn with_rule(&self, bounds: &[Bound], rule: &SplitRule, left: bool) -> Vec<Bound> {
        let mut out = bounds.to_vec();
        let j = rule.predictor();
        let idx = match out.iter().position(|b| b.predictor == j) {
            Some(i) => i,
            None => {
                out.push(self.base_bound(j));
                out.len() - 1
            }
        };
        self.apply(&mut out[idx], rule, left);
        out
    }

    /// Uniform draw over admissible predictors, then over that predictor's
    /// admissible cutpoints plus its missingness pseudo-cutpoint.
    fn propose<R: Rng + ?Sized>(&self, bounds: &[Bound], rng: &mut R) -> Option<SplitRule> {
        let avail: Vec<(usize, usize)> = (0..self.cuts.len())
            .filter_map(|j| {
                let n = self.n_options(&self.bound_for(bounds, j));
                (n > 0).then_some((j, n))
            })
            .collect();
        if avail.is_empty() {
            return None;
        }
        let (j, n) = avail[rng.random_range(0..avail.len())];
        let b = self.bound_for(bounds, j);
        let k = rng.random_range(0..n);
        let numeric = self.numeric_options(&b);
        if k < numeric {
            let missing = if self.mia && rng.random::<bool>() {
                Direction::Right
            } else {
                Direction::Left
            };
            Some(SplitRule::Numeric {
                predictor: j,
                cutpoint: self.cuts[j][b.lo + k],
                missing,
            })
        } else {
            Some(SplitRule::Missingness { predictor: j })
        }
    }
}

#[derive(Debug, Clone)]
struct WorkNode {
    parent: u32,
    left: u32,
    right: u32,
    rule: Option<SplitRule>,
    value: f64,
    depth: u32,
    alive: bool,
}

/// Mutable arena tree with the training rows held by each leaf.
#[derive(Debug, Clone)]
struct WorkTree {
    nodes: Vec<WorkNode>,
    rows: Vec<Vec<u32>>,
    free: Vec<u32>,
}

impl WorkTree {
    fn stump(n_rows: usize) -> Self {
        WorkTree {
            nodes: vec![WorkNode {
                parent: NONE,
                left: NONE,
                right: NONE,
                rule: None,
                value: 0.0,
                depth: 0,
                alive: true,
            }],
            rows: vec![(0..n_rows as u32).collect()],
            free: Vec::new(),
        }
    }

    fn is_leaf(&self, id: u32) -> bool {
        self.nodes[id as usize].rule.is_none()
    }

    fn is_stump(&self) -> bool {
        self.is_leaf(0)
    }

    fn leaves(&self) -> Vec<u32> {
        (0..self.nodes.len() as u32)
            .filter(|&i| self.nodes[i as usize].alive && self.is_leaf(i))
            .collect()
    }

    fn is_nog(&self, id: u32) -> bool {
        let n = &self.nodes[id as usize];
        n.alive && n.rule.is_some() && self.is_leaf(n.left) && self.is_leaf(n.right)
    }

    fn nogs(&self) -> Vec<u32> {
        (0..self.nodes.len() as u32).filter(|&i| self.is_nog(i)).collect()
    }

    fn alloc(&mut self, node: WorkNode) -> u32 {
        match self.free.pop() {
            Some(id) => {
                self.nodes[id as usize] = node;
                id
            }
            None => {
                self.nodes.push(node);
                self.rows.push(Vec::new());
                (self.nodes.len() - 1) as u32
            }
        }
    }

    fn grow(&mut self, leaf: u32, rule: SplitRule, left_rows: Vec<u32>, right_rows: Vec<u32>) {
        let depth = self.nodes[leaf as usize].depth + 1;
        let child = WorkNode {
            parent: leaf,
            left: NONE,
            right: NONE,
            rule: None,
            value: 0.0,
            depth,
            alive: true,
        };
        let l = self.alloc(child.clone());
        let r = self.alloc(child);
        let node = &mut self.nodes[leaf as usize];
        node.rule = Some(rule);
        node.left = l;
        node.right = r;
        self.rows[leaf as usize] = Vec::new();
        self.rows[l as usize] = left_rows;
        self.rows[r as usize] = right_rows;
    }

    fn prune(&mut self, id: u32) {
        let (l, r) = {
            let n = &self.nodes[id as usize];
            (n.left, n.right)
        };
        let mut merged = std::mem::take(&mut self.rows[l as usize]);
        merged.append(&mut self.rows[r as usize]);
        self.rows[id as usize] = merged;
        for c in [l, r] {
            self.nodes[c as usize].alive = false;
            self.free.push(c);
        }
        let n = &mut self.nodes[id as usize];
        n.rule = None;
        n.left = NONE;
        n.right = NONE;
    }

    fn flatten(&self) -> Tree {
        fn walk(t: &WorkTree, id: u32, out: &mut Vec<FlatNode>) {
            let n = &t.nodes[id as usize];
            match n.rule {
                None => out.push(FlatNode::Leaf { value: n.value }),
                Some(rule) => {
                    let slot = out.len();
                    out.push(FlatNode::Split { rule, right: 0 });
                    walk(t, n.left, out);
                    let right = out.len() as u32;
                    out[slot] = FlatNode::Split { rule, right };
                    walk(t, n.right, out);
                }
            }
        }
        let mut out = Vec::new();
        walk(self, 0, &mut out);
        Tree { nodes: out }
    }
}

/// One chain of the sampler over a fixed training set.
pub(crate) struct Sampler<'a> {
    x: &'a [Vec<f64>],
    y: &'a [bool],
    space: &'a RuleSpace,
    cfg: &'a BartConfig,
    rng: ChaCha8Rng,
    trees: Vec<WorkTree>,
    fit: Vec<f64>,
    z: Vec<f64>,
    others: Vec<f64>,
    sigma_q: f64,
    log_split: Vec<f64>,
    log_stop: Vec<f64>,
    /// When false the chain targets the tree prior alone.
    pub use_likelihood: bool,
}

impl<'a> Sampler<'a> {
    pub fn new(
        x: &'a [Vec<f64>],
        y: &'a [bool],
        space: &'a RuleSpace,
        cfg: &'a BartConfig,
        rng: ChaCha8Rng,
    ) -> Self {
        let n = y.len();
        let max_depth = 128;
        let log_split = (0..max_depth).map(|d| cfg.split_prob(d).ln()).collect();
        let log_stop = (0..max_depth).map(|d| (1.0 - cfg.split_prob(d)).ln()).collect();
        Sampler {
            x,
            y,
            space,
            cfg,
            rng,
            trees: (0..cfg.trees).map(|_| WorkTree::stump(n)).collect(),
            fit: vec![0.0; n],
            z: vec![0.0; n],
            others: vec![0.0; n],
            sigma_q: cfg.sigma_q(),
            log_split,
            log_stop,
            use_likelihood: true,
        }
    }

    /// One Gibbs sweep: latent utilities, then each tree in turn.
    pub fn sweep(&mut self) {
        if self.use_likelihood {
            for i in 0..self.y.len() {
                self.z[i] = draw_latent(self.y[i], self.fit[i], &mut self.rng);
            }
        }
        for t in 0..self.trees.len() {
            self.update_tree(t);
        }
    }

    pub fn snapshot(&self) -> Vec<Tree> {
        self.trees.iter().map(WorkTree::flatten).collect()
    }

    fn update_tree(&mut self, t: usize) {
        {
            let tree = &self.trees[t];
            for leaf in tree.leaves() {
                let mu = tree.nodes[leaf as usize].value;
                for &i in &tree.rows[leaf as usize] {
                    self.others[i as usize] = self.fit[i as usize] - mu;
                }
            }
        }
        self.metropolis(t);
        let tree = &mut self.trees[t];
        for leaf in tree.leaves() {
            let rows = &tree.rows[leaf as usize];
            let sum: f64 = rows
                .iter()
                .map(|&i| self.z[i as usize] - self.others[i as usize])
                .sum();
            let (mean, var) = leaf_posterior_stats(rows.len(), sum, self.cfg.sigma2, self.sigma_q);
            let draw: f64 = self.rng.sample(StandardNormal);
            let mu = mean + var.sqrt() * draw;
            tree.nodes[leaf as usize].value = mu;
            for &i in rows {
                self.fit[i as usize] = self.others[i as usize] + mu;
            }
        }
    }

    fn log_ml(&self, rows: &[u32]) -> f64 {
        if !self.use_likelihood {
            return 0.0;
        }
        let s2 = self.cfg.sigma2;
        let t2 = self.sigma_q * self.sigma_q;
        let n = rows.len() as f64;
        let sum: f64 = rows
            .iter()
            .map(|&i| self.z[i as usize] - self.others[i as usize])
            .sum();
        0.5 * (s2 / (s2 + n * t2)).ln() + t2 * sum * sum / (2.0 * s2 * (s2 + n * t2))
    }

    fn bounds(&self, tree: &WorkTree, id: u32) -> Vec<Bound> {
        let mut bounds: Vec<Bound> = Vec::new();
        let mut child = id;
        let mut parent = tree.nodes[id as usize].parent;
        while parent != NONE {
            let p = &tree.nodes[parent as usize];
            let rule = p.rule.expect("ancestor is internal");
            let j = rule.predictor();
            let idx = match bounds.iter().position(|b| b.predictor == j) {
                Some(i) => i,
                None => {
                    bounds.push(self.space.base_bound(j));
                    bounds.len() - 1
                }
            };
            self.space.apply(&mut bounds[idx], &rule, p.left == child);
            child = parent;
            parent = p.parent;
        }
        bounds
    }

    /// Log prior factor of a leaf at `depth`: log(1 - p_split) when it could
    /// split, 0 when no rule is admissible there.
    fn leaf_factor(&self, bounds: &[Bound], rule: &SplitRule, left: bool, depth: usize) -> f64 {
        let child = self.space.with_rule(bounds, rule, left);
        if self.space.n_available(&child) > 0 {
            self.log_stop[depth]
        } else {
            0.0
        }
    }

    fn split_rows(&self, rows: &[u32], rule: &SplitRule) -> (Vec<u32>, Vec<u32>) {
        let col = &self.x[rule.predictor()];
        rows.iter()
            .partition(|&&i| rule.goes_left(col[i as usize]))
    }

    fn metropolis(&mut self, t: usize) {
        let p = self.cfg.proposal;
        let stump = self.trees[t].is_stump();
        let u: f64 = self.rng.random();
        if stump || u < p.grow {
            self.grow(t, stump);
        } else if u < p.grow + p.prune {
            self.prune(t);
        } else {
            self.change(t);
        }
    }

    fn grow(&mut self, t: usize, stump: bool) {
        let p = self.cfg.proposal;
        let leaves = self.trees[t].leaves();
        let leaf = leaves[self.rng.random_range(0..leaves.len())];
        let tree = &self.trees[t];
        let bounds = self.bounds(tree, leaf);
        let Some(rule) = self.space.propose(&bounds, &mut self.rng) else {
            return;
        };
        let tree = &self.trees[t];
        let rows = &tree.rows[leaf as usize];
        let (left, right) = self.split_rows(rows, &rule);
        if left.is_empty() || right.is_empty() {
            return;
        }
        let d = tree.nodes[leaf as usize].depth as usize;
        let parent = tree.nodes[leaf as usize].parent;
        let parent_was_nog = parent != NONE && tree.is_nog(parent);
        let w_after = tree.nogs().len() + 1 - usize::from(parent_was_nog);
        let pi_grow = if stump { 1.0 } else { p.grow };

        let mut log_r = p.prune.ln() - pi_grow.ln() + (leaves.len() as f64).ln()
            - (w_after as f64).ln()
            + self.log_split[d]
            + self.leaf_factor(&bounds, &rule, true, d + 1)
            + self.leaf_factor(&bounds, &rule, false, d + 1)
            - self.log_stop[d];
        log_r += self.log_ml(&left) + self.log_ml(&right) - self.log_ml(rows);

        let u: f64 = self.rng.random();
        if u.ln() < log_r {
            self.trees[t].grow(leaf, rule, left, right);
        }
    }

    fn prune(&mut self, t: usize) {
        let p = self.cfg.proposal;
        let nogs = self.trees[t].nogs();
        let node = nogs[self.rng.random_range(0..nogs.len())];
        let tree = &self.trees[t];
        let n = &tree.nodes[node as usize];
        let rule = n.rule.expect("nog node has a rule");
        let d = n.depth as usize;
        let (l, r) = (n.left, n.right);
        let n_leaves_after = tree.leaves().len() - 1;
        let pi_grow_after = if node == 0 { 1.0 } else { p.grow };
        let bounds = self.bounds(tree, node);

        let grow_prior = self.log_split[d]
            + self.leaf_factor(&bounds, &rule, true, d + 1)
            + self.leaf_factor(&bounds, &rule, false, d + 1)
            - self.log_stop[d];
        let mut log_r = pi_grow_after.ln() - p.prune.ln() + (nogs.len() as f64).ln()
            - (n_leaves_after as f64).ln()
            - grow_prior;
        let lrows = &tree.rows[l as usize];
        let rrows = &tree.rows[r as usize];
        if self.use_likelihood {
            let mut merged = lrows.clone();
            merged.extend_from_slice(rrows);
            log_r += self.log_ml(&merged) - self.log_ml(lrows) - self.log_ml(rrows);
        }

        let u: f64 = self.rng.random();
        if u.ln() < log_r {
            self.trees[t].prune(node);
        }
    }

    fn change(&mut self, t: usize) {
        let nogs = self.trees[t].nogs();
        let node = nogs[self.rng.random_range(0..nogs.len())];
        let tree = &self.trees[t];
        let bounds = self.bounds(tree, node);
        let Some(new_rule) = self.space.propose(&bounds, &mut self.rng) else {
            return;
        };
        let tree = &self.trees[t];
        let n = &tree.nodes[node as usize];
        let old_rule = n.rule.expect("nog node has a rule");
        let d = n.depth as usize;
        let (l, r) = (n.left, n.right);
        let mut all = tree.rows[l as usize].clone();
        all.extend_from_slice(&tree.rows[r as usize]);
        let (left, right) = self.split_rows(&all, &new_rule);
        if left.is_empty() || right.is_empty() {
            return;
        }
        let mut log_r = self.leaf_factor(&bounds, &new_rule, true, d + 1)
            + self.leaf_factor(&bounds, &new_rule, false, d + 1)
            - self.leaf_factor(&bounds, &old_rule, true, d + 1)
            - self.leaf_factor(&bounds, &old_rule, false, d + 1);
        log_r += self.log_ml(&left) + self.log_ml(&right)
            - self.log_ml(&tree.rows[l as usize])
            - self.log_ml(&tree.rows[r as usize]);

        let u: f64 = self.rng.random();
        if u.ln() < log_r {
            let tree = &mut self.trees[t];
            tree.nodes[node as usize].rule = Some(new_rule);
            tree.rows[l as usize] = left;
            tree.rows[r as usize] = right;
        }
    }

    #[cfg(test)]
    fn tree_depth(&self, t: usize) -> usize {
        self.trees[t].flatten().depth()
    }
}

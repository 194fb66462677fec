//! Gini classification trees shared by CART and the forest.

use rand::seq::index::sample;
use rand::Rng;
use serde::{Deserialize, Serialize};

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case", deny_unknown_fields)]
pub enum ClassNode {
    Leaf {
        /// Training rows reaching the leaf and how many were positive.
        n: usize,
        positives: usize,
    },
    Split {
        feature: usize,
        threshold: f64,
        left: usize,
        right: usize,
        n: usize,
        positives: usize,
    },
}

impl ClassNode {
    fn counts(&self) -> (usize, usize) {
        match *self {
            ClassNode::Leaf { n, positives } | ClassNode::Split { n, positives, .. } => (n, positives),
        }
    }
}

/// Binary classification tree; node 0 is the root.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ClassTree {
    pub nodes: Vec<ClassNode>,
}

impl ClassTree {
    fn leaf_of(&self, row: &dyn Fn(usize) -> f64) -> &ClassNode {
        let mut i = 0;
        loop {
            match self.nodes[i] {
                ClassNode::Leaf { .. } => return &self.nodes[i],
                ClassNode::Split {
                    feature,
                    threshold,
                    left,
                    right,
                    ..
                } => i = if row(feature) <= threshold { left } else { right },
            }
        }
    }

    /// Positive share of the training rows in the reached leaf.
    pub fn prob(&self, row: &dyn Fn(usize) -> f64) -> f64 {
        let (n, pos) = self.leaf_of(row).counts();
        if n == 0 {
            0.0
        } else {
            pos as f64 / n as f64
        }
    }

    /// Majority vote of the reached leaf; ties vote 0.
    pub fn vote(&self, row: &dyn Fn(usize) -> f64) -> bool {
        let (n, pos) = self.leaf_of(row).counts();
        2 * pos > n
    }

    pub fn n_leaves(&self) -> usize {
        self.reachable().filter(|&i| matches!(self.nodes[i], ClassNode::Leaf { .. })).count()
    }

    pub fn depth(&self) -> usize {
        fn walk(t: &ClassTree, i: usize) -> usize {
            match t.nodes[i] {
                ClassNode::Leaf { .. } => 0,
                ClassNode::Split { left, right, .. } => 1 + walk(t, left).max(walk(t, right)),
            }
        }
        walk(self, 0)
    }

    fn reachable(&self) -> impl Iterator<Item = usize> + '_ {
        let mut stack = vec![0usize];
        std::iter::from_fn(move || {
            let i = stack.pop()?;
            if let ClassNode::Split { left, right, .. } = self.nodes[i] {
                stack.push(right);
                stack.push(left);
            }
            Some(i)
        })
    }

    /// Copy with the subtree at `node` collapsed to a leaf.
    pub(crate) fn collapse(&mut self, node: usize) {
        let (n, positives) = self.nodes[node].counts();
        self.nodes[node] = ClassNode::Leaf { n, positives };
    }

    /// Drops unreachable nodes and renumbers.
    pub(crate) fn compact(&self) -> ClassTree {
        fn copy(t: &ClassTree, i: usize, out: &mut Vec<ClassNode>) -> usize {
            let slot = out.len();
            out.push(t.nodes[i]);
            if let ClassNode::Split {
                feature,
                threshold,
                left,
                right,
                n,
                positives,
            } = t.nodes[i]
            {
                let l = copy(t, left, out);
                let r = copy(t, right, out);
                out[slot] = ClassNode::Split {
                    feature,
                    threshold,
                    left: l,
                    right: r,
                    n,
                    positives,
                };
            }
            slot
        }
        let mut out = Vec::new();
        copy(self, 0, &mut out);
        ClassTree { nodes: out }
    }

    pub(crate) fn counts(&self, node: usize) -> (usize, usize) {
        self.nodes[node].counts()
    }
}

/// Growth controls.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct GrowParams {
    /// Nodes with fewer rows are not split.
    pub min_node_size: usize,
    /// Predictors drawn per split; `None` uses all of them.
    pub mtry: Option<usize>,
}

fn gini_sum(n: usize, pos: usize) -> f64 {
    // n * gini = n * (1 - p^2 - q^2) = 2 pos (n - pos) / n
    if n == 0 {
        0.0
    } else {
        2.0 * pos as f64 * (n - pos) as f64 / n as f64
    }
}

struct Best {
    feature: usize,
    threshold: f64,
    impurity: f64,
}

/// Grows an unpruned tree on `rows` (indices into `x` columns, duplicates
/// allowed for bootstrap samples). Splits are taken whenever a node is
/// impure, large enough and some predictor separates its rows, even at zero
/// impurity decrease; this lets the tree reach interactions such as XOR.
pub fn grow<R: Rng>(
    x: &[Vec<f64>],
    y: &[bool],
    rows: &[usize],
    params: GrowParams,
    rng: &mut R,
) -> ClassTree {
    let mut nodes = Vec::new();
    let mut stack = vec![(rows.to_vec(), usize::MAX, false)];
    let p = x.len();
    while let Some((node_rows, parent, is_left)) = stack.pop() {
        let n = node_rows.len();
        let pos = node_rows.iter().filter(|&&r| y[r]).count();
        let id = nodes.len();
        nodes.push(ClassNode::Leaf { n, positives: pos });
        if parent != usize::MAX {
            if let ClassNode::Split { left, right, .. } = &mut nodes[parent] {
                if is_left {
                    *left = id;
                } else {
                    *right = id;
                }
            }
        }
        if pos == 0 || pos == n || n < params.min_node_size.max(2) {
            continue;
        }
        let features: Vec<usize> = match params.mtry {
            Some(m) if m < p => {
                let mut f = sample(rng, p, m).into_vec();
                f.sort_unstable();
                f
            }
            _ => (0..p).collect(),
        };
        let mut best: Option<Best> = None;
        let mut order: Vec<(f64, bool)> = Vec::with_capacity(n);
        for &j in &features {
            order.clear();
            order.extend(node_rows.iter().map(|&r| (x[j][r], y[r])));
            order.sort_by(|a, b| a.0.total_cmp(&b.0));
            let mut left_n = 0;
            let mut left_pos = 0;
            for k in 0..n - 1 {
                left_n += 1;
                left_pos += order[k].1 as usize;
                if order[k].0 == order[k + 1].0 {
                    continue;
                }
                let imp = gini_sum(left_n, left_pos) + gini_sum(n - left_n, pos - left_pos);
                if best.as_ref().is_none_or(|b| imp < b.impurity - 1e-12) {
                    best = Some(Best {
                        feature: j,
                        threshold: 0.5 * (order[k].0 + order[k + 1].0),
                        impurity: imp,
                    });
                }
            }
        }
        let Some(b) = best else { continue };
        let (l, r): (Vec<usize>, Vec<usize>) = node_rows.iter().partition(|&&i| x[b.feature][i] <= b.threshold);
        nodes[id] = ClassNode::Split {
            feature: b.feature,
            threshold: b.threshold,
            left: 0,
            right: 0,
            n,
            positives: pos,
        };
        stack.push((r, id, false));
        stack.push((l, id, true));
    }
    ClassTree { nodes }
}

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Side that receives rows whose split predictor is missing.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Direction {
    Left,
    Right,
}

/// Binary split rule with explicit handling of missing values.
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum SplitRule {
    /// `x <= cutpoint` goes left, `x > cutpoint` right, missing to `missing`.
    Numeric {
        predictor: usize,
        cutpoint: f64,
        missing: Direction,
    },
    /// Missing goes left, observed right.
    Missingness { predictor: usize },
}

impl SplitRule {
    #[inline]
    pub fn predictor(&self) -> usize {
        match *self {
            SplitRule::Numeric { predictor, .. } | SplitRule::Missingness { predictor } => predictor,
        }
    }

    /// Routes a value of this rule's predictor (NaN = missing).
    #[inline]
    pub fn goes_left(&self, value: f64) -> bool {
        match *self {
            SplitRule::Numeric {
                cutpoint, missing, ..
            } => {
                if value.is_nan() {
                    missing == Direction::Left
                } else {
                    value <= cutpoint
                }
            }
            SplitRule::Missingness { .. } => value.is_nan(),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub(crate) enum FlatNode {
    Leaf { value: f64 },
    Split { rule: SplitRule, right: u32 },
}

/// Immutable binary tree stored in preorder; the left child of an internal
/// node is the next entry, the right child is at `right`.
#[derive(Debug, Clone, PartialEq)]
pub struct Tree {
    pub(crate) nodes: Vec<FlatNode>,
}

/// Serialized node in a preorder listing.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case", deny_unknown_fields)]
pub enum NodeRecord {
    Leaf {
        value: f64,
    },
    Numeric {
        predictor: usize,
        cutpoint: f64,
        missing_direction: Direction,
    },
    Missingness {
        predictor: usize,
    },
}

impl Tree {
    pub fn stump(value: f64) -> Self {
        Tree {
            nodes: vec![FlatNode::Leaf { value }],
        }
    }

    /// Evaluates the tree on one row given a column accessor.
    #[inline]
    pub fn eval(&self, x: impl Fn(usize) -> f64) -> f64 {
        let mut i = 0usize;
        loop {
            match self.nodes[i] {
                FlatNode::Leaf { value } => return value,
                FlatNode::Split { rule, right } => {
                    i = if rule.goes_left(x(rule.predictor())) {
                        i + 1
                    } else {
                        right as usize
                    };
                }
            }
        }
    }

    /// Index of the leaf reached by a row (preorder position).
    pub fn leaf_index(&self, x: impl Fn(usize) -> f64) -> usize {
        let mut i = 0usize;
        loop {
            match self.nodes[i] {
                FlatNode::Leaf { .. } => return i,
                FlatNode::Split { rule, right } => {
                    i = if rule.goes_left(x(rule.predictor())) {
                        i + 1
                    } else {
                        right as usize
                    };
                }
            }
        }
    }

    pub fn rules(&self) -> impl Iterator<Item = &SplitRule> {
        self.nodes.iter().filter_map(|n| match n {
            FlatNode::Split { rule, .. } => Some(rule),
            FlatNode::Leaf { .. } => None,
        })
    }

    pub fn leaf_values(&self) -> impl Iterator<Item = f64> + '_ {
        self.nodes.iter().filter_map(|n| match *n {
            FlatNode::Leaf { value } => Some(value),
            FlatNode::Split { .. } => None,
        })
    }

    pub fn n_leaves(&self) -> usize {
        self.leaf_values().count()
    }

    /// Maximum leaf depth (a stump has depth 0).
    pub fn depth(&self) -> usize {
        fn walk(nodes: &[FlatNode], i: usize) -> (usize, usize) {
            // returns (depth below i, index after subtree)
            match nodes[i] {
                FlatNode::Leaf { .. } => (0, i + 1),
                FlatNode::Split { right, .. } => {
                    let (l, _) = walk(nodes, i + 1);
                    let (r, end) = walk(nodes, right as usize);
                    (1 + l.max(r), end)
                }
            }
        }
        walk(&self.nodes, 0).0
    }

    pub fn to_records(&self) -> Vec<NodeRecord> {
        self.nodes
            .iter()
            .map(|n| match *n {
                FlatNode::Leaf { value } => NodeRecord::Leaf { value },
                FlatNode::Split { rule, .. } => match rule {
                    SplitRule::Numeric {
                        predictor,
                        cutpoint,
                        missing,
                    } => NodeRecord::Numeric {
                        predictor,
                        cutpoint,
                        missing_direction: missing,
                    },
                    SplitRule::Missingness { predictor } => NodeRecord::Missingness { predictor },
                },
            })
            .collect()
    }

    /// Rebuilds a tree from a preorder listing, checking it is a complete
    /// binary tree with finite leaves.
    pub fn from_records(records: &[NodeRecord]) -> Result<Self> {
        fn build(recs: &[NodeRecord], i: usize, out: &mut Vec<FlatNode>) -> Result<usize> {
            let rec = recs
                .get(i)
                .ok_or_else(|| Error::Document("truncated preorder node list".into()))?;
            let rule = match *rec {
                NodeRecord::Leaf { value } => {
                    if !value.is_finite() {
                        return Err(Error::Document("non-finite leaf value".into()));
                    }
                    out.push(FlatNode::Leaf { value });
                    return Ok(i + 1);
                }
                NodeRecord::Numeric {
                    predictor,
                    cutpoint,
                    missing_direction,
                } => SplitRule::Numeric {
                    predictor,
                    cutpoint,
                    missing: missing_direction,
                },
                NodeRecord::Missingness { predictor } => SplitRule::Missingness { predictor },
            };
            let slot = out.len();
            out.push(FlatNode::Split { rule, right: 0 });
            let after_left = build(recs, i + 1, out)?;
            out[slot] = FlatNode::Split {
                rule,
                right: after_left as u32,
            };
            build(recs, after_left, out)
        }
        let mut nodes = Vec::with_capacity(records.len());
        let end = build(records, 0, &mut nodes)?;
        if end != records.len() {
            return Err(Error::Document("trailing nodes after tree".into()));
        }
        Ok(Tree { nodes })
    }
}

//! Multiway decision trees over symbolic values, grown by information gain.

use std::collections::BTreeMap;

use serde::{Deserialize, Serialize};

use super::info::information_gain_counts;
use super::TrainConfig;
use crate::dataset::{FeatureValue, Label, LabelCounts};
use crate::feature::FeatureMatrix;

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(tag = "node", rename_all = "snake_case")]
pub enum TreeNode {
    Leaf {
        label: Label,
        count: usize,
    },
    Split {
        feature: usize,
        label: Label,
        count: usize,
        branches: Vec<Branch>,
        /// Index into `branches` of the child used for unseen values.
        fallback: usize,
    },
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Branch {
    pub value: FeatureValue,
    pub child: TreeNode,
}

impl TreeNode {
    pub fn predict(&self, row: &[FeatureValue]) -> Label {
        let mut node = self;
        loop {
            match node {
                TreeNode::Leaf { label, .. } => return *label,
                TreeNode::Split {
                    feature,
                    branches,
                    fallback,
                    ..
                } => {
                    let value = &row[*feature];
                    let i = branches
                        .binary_search_by(|b| b.value.cmp(value))
                        .unwrap_or(*fallback);
                    node = &branches[i].child;
                }
            }
        }
    }

    pub fn depth(&self) -> usize {
        match self {
            TreeNode::Leaf { .. } => 0,
            TreeNode::Split { branches, .. } => {
                1 + branches.iter().map(|b| b.child.depth()).max().unwrap_or(0)
            }
        }
    }

    /// Feature index at the root, if the root splits.
    pub fn root_feature(&self) -> Option<usize> {
        match self {
            TreeNode::Leaf { .. } => None,
            TreeNode::Split { feature, .. } => Some(*feature),
        }
    }
}

/// Best admissible split of `rows` at `idx`: every child must hold at least
/// `min_leaf` rows. Ties in gain go to the lowest feature index.
fn best_split(
    m: &FeatureMatrix,
    idx: &[usize],
    parent: LabelCounts,
    min_leaf: usize,
) -> Option<(usize, f64, BTreeMap<FeatureValue, Vec<usize>>)> {
    let mut best: Option<(usize, f64, BTreeMap<FeatureValue, Vec<usize>>)> = None;
    for j in 0..m.width() {
        let mut groups: BTreeMap<FeatureValue, Vec<usize>> = BTreeMap::new();
        for &i in idx {
            groups.entry(m.rows[i][j].clone()).or_default().push(i);
        }
        if groups.len() < 2 || groups.values().any(|g| g.len() < min_leaf) {
            continue;
        }
        let counts: Vec<LabelCounts> = groups
            .values()
            .map(|g| g.iter().map(|&i| m.labels[i]).collect())
            .collect();
        let gain = information_gain_counts(parent, &counts);
        if best.as_ref().is_none_or(|(_, g, _)| gain > *g + 1e-12) {
            best = Some((j, gain, groups));
        }
    }
    best
}

fn grow(m: &FeatureMatrix, idx: &[usize], depth: usize, cfg: &TrainConfig) -> TreeNode {
    let counts: LabelCounts = idx.iter().map(|&i| m.labels[i]).collect();
    let label = counts.majority();
    let leaf = TreeNode::Leaf {
        label,
        count: idx.len(),
    };
    if counts.is_pure() || depth >= cfg.max_depth || idx.len() < 2 * cfg.min_leaf {
        return leaf;
    }
    let Some((feature, _, groups)) = best_split(m, idx, counts, cfg.min_leaf) else {
        return leaf;
    };
    let mut fallback = 0;
    let mut fallback_size = 0;
    let branches: Vec<Branch> = groups
        .into_iter()
        .enumerate()
        .map(|(b, (value, rows))| {
            if rows.len() > fallback_size {
                fallback = b;
                fallback_size = rows.len();
            }
            Branch {
                value,
                child: grow(m, &rows, depth + 1, cfg),
            }
        })
        .collect();
    TreeNode::Split {
        feature,
        label,
        count: idx.len(),
        branches,
        fallback,
    }
}

pub fn train_tree(m: &FeatureMatrix, cfg: &TrainConfig) -> TreeNode {
    let idx: Vec<usize> = (0..m.len()).collect();
    grow(m, &idx, 0, cfg)
}

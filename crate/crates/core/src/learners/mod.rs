//! Induction algorithms over feature matrices.
//!
//! Three learners share one [`Classifier`] type: a multiway information-gain
//! tree (the internal learner for recursive problems), k-nearest neighbours
//! under Hamming distance, and a hinge-loss linear model. All are
//! deterministic and every `predict` is total, including on values never seen
//! in training.

pub mod cv;
pub mod info;
pub mod knn;
pub mod linear;
pub mod tree;

use std::fmt;
use std::str::FromStr;

use serde::{Deserialize, Serialize};

use crate::dataset::{FeatureValue, Label, LabelCounts};
use crate::feature::FeatureMatrix;

pub use cv::{cross_validate, stratified_folds, CvError};
pub use info::{entropy, information_gain};
pub use knn::KnnModel;
pub use linear::LinearModel;
pub use tree::TreeNode;

#[derive(Copy, Clone, Debug, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum LearnerKind {
    Knn,
    Linear,
    Tree,
}

impl LearnerKind {
    pub const ALL: [LearnerKind; 3] = [LearnerKind::Knn, LearnerKind::Linear, LearnerKind::Tree];
}

impl fmt::Display for LearnerKind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            LearnerKind::Knn => "knn",
            LearnerKind::Linear => "linear",
            LearnerKind::Tree => "tree",
        })
    }
}

impl FromStr for LearnerKind {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        match s {
            "knn" => Ok(LearnerKind::Knn),
            "linear" | "svm" => Ok(LearnerKind::Linear),
            "tree" => Ok(LearnerKind::Tree),
            other => Err(format!(
                "unknown learner `{other}` (expected knn|linear|tree)"
            )),
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct TrainConfig {
    pub max_depth: usize,
    /// Minimum rows in every child of a tree split.
    pub min_leaf: usize,
    pub k: usize,
    pub epochs: usize,
    pub lambda: f64,
    pub seed: u64,
}

impl Default for TrainConfig {
    fn default() -> Self {
        TrainConfig {
            max_depth: 12,
            min_leaf: 2,
            k: 3,
            epochs: 50,
            lambda: 1e-3,
            seed: 0,
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum Model {
    Constant,
    Tree(TreeNode),
    Knn(KnnModel),
    Linear(LinearModel),
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Classifier {
    default_class: Label,
    model: Model,
}

impl Classifier {
    pub fn constant(label: Label) -> Self {
        Classifier {
            default_class: label,
            model: Model::Constant,
        }
    }

    /// Training-majority class, ties negative.
    pub fn default_class(&self) -> Label {
        self.default_class
    }

    pub fn model(&self) -> &Model {
        &self.model
    }

    pub fn predict(&self, row: &[FeatureValue]) -> Label {
        match &self.model {
            Model::Constant => self.default_class,
            Model::Tree(t) => t.predict(row),
            Model::Knn(k) => k.predict(row),
            Model::Linear(l) => l.predict(row),
        }
    }

    pub fn accuracy(&self, m: &FeatureMatrix) -> f64 {
        if m.is_empty() {
            return 1.0;
        }
        let hits = m
            .rows
            .iter()
            .zip(&m.labels)
            .filter(|(r, l)| self.predict(r) == **l)
            .count();
        hits as f64 / m.len() as f64
    }
}

pub fn train(kind: LearnerKind, m: &FeatureMatrix, cfg: &TrainConfig) -> Classifier {
    let counts: LabelCounts = m.labels.iter().copied().collect();
    let default_class = counts.majority();
    let model = match kind {
        LearnerKind::Tree => Model::Tree(tree::train_tree(m, cfg)),
        LearnerKind::Knn => Model::Knn(KnnModel::fit(m, cfg.k)),
        LearnerKind::Linear if counts.is_pure() => Model::Constant,
        LearnerKind::Linear => Model::Linear(LinearModel::fit(m, cfg.epochs, cfg.lambda)),
    };
    Classifier {
        default_class,
        model,
    }
}

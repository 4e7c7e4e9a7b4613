use serde::{Deserialize, Serialize};

use crate::dataset::{FeatureValue, Label};
use crate::feature::FeatureMatrix;

/// Stored training rows; prediction is a majority vote of the `k` nearest
/// rows under Hamming distance.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct KnnModel {
    pub k: usize,
    pub rows: Vec<Vec<FeatureValue>>,
    pub labels: Vec<Label>,
}

pub fn hamming(a: &[FeatureValue], b: &[FeatureValue]) -> usize {
    a.iter().zip(b).filter(|(x, y)| x != y).count()
}

impl KnnModel {
    pub fn fit(m: &FeatureMatrix, k: usize) -> Self {
        KnnModel {
            k,
            rows: m.rows.clone(),
            labels: m.labels.clone(),
        }
    }

    /// Distance ties go to the lower row index, vote ties to `Negative`.
    pub fn predict(&self, row: &[FeatureValue]) -> Label {
        let mut order: Vec<(usize, usize)> = self
            .rows
            .iter()
            .enumerate()
            .map(|(i, r)| (hamming(r, row), i))
            .collect();
        order.sort_unstable();
        Label::majority(order.iter().take(self.k).map(|&(_, i)| self.labels[i]))
    }
}

//! Linear classifier over one-hot encoded symbolic values, trained by
//! hinge-loss subgradient steps (Pegasos schedule, `η_t = 1 / (λ t)`).
//!
//! Rows are visited cyclically in input order, so a dataset listed twice
//! trained for `e` epochs takes exactly the steps of the original trained for
//! `2e` epochs.

use std::collections::BTreeMap;

use serde::{Deserialize, Serialize};

use crate::dataset::{FeatureValue, Label};
use crate::feature::FeatureMatrix;

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct LinearTerm {
    pub feature: usize,
    pub value: FeatureValue,
    pub weight: f64,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct LinearModel {
    /// Sorted by `(feature, value)`.
    pub terms: Vec<LinearTerm>,
    pub bias: f64,
}

/// Active `(column, value)` keys of a row. Set values activate each member.
fn active_keys(row: &[FeatureValue]) -> Vec<(usize, FeatureValue)> {
    let mut keys = Vec::with_capacity(row.len());
    for (j, v) in row.iter().enumerate() {
        match v {
            FeatureValue::Set(members) => {
                keys.extend(members.iter().map(|m| (j, FeatureValue::Atom(m.clone()))))
            }
            other => keys.push((j, other.clone())),
        }
    }
    keys
}

impl LinearModel {
    pub fn fit(m: &FeatureMatrix, epochs: usize, lambda: f64) -> Self {
        let mut vocab: BTreeMap<(usize, FeatureValue), usize> = BTreeMap::new();
        let encoded: Vec<Vec<usize>> = m
            .rows
            .iter()
            .map(|r| {
                active_keys(r)
                    .into_iter()
                    .map(|k| {
                        let next = vocab.len();
                        *vocab.entry(k).or_insert(next)
                    })
                    .collect()
            })
            .collect();
        // last slot is the constant bias input
        let bias_slot = vocab.len();
        let mut w = vec![0.0; bias_slot + 1];
        let mut t = 0u64;
        for _ in 0..epochs {
            for (x, y) in encoded.iter().zip(&m.labels) {
                t += 1;
                let eta = 1.0 / (lambda * t as f64);
                let y = if y.is_positive() { 1.0 } else { -1.0 };
                let score: f64 = x.iter().map(|&i| w[i]).sum::<f64>() + w[bias_slot];
                let shrink = 1.0 - eta * lambda;
                for wi in w.iter_mut() {
                    *wi *= shrink;
                }
                if y * score < 1.0 {
                    for &i in x {
                        w[i] += eta * y;
                    }
                    w[bias_slot] += eta * y;
                }
            }
        }
        let terms = vocab
            .into_iter()
            .map(|((feature, value), i)| LinearTerm {
                feature,
                value,
                weight: w[i],
            })
            .collect();
        LinearModel {
            terms,
            bias: w[bias_slot],
        }
    }

    pub fn score(&self, row: &[FeatureValue]) -> f64 {
        let mut s = self.bias;
        for (j, v) in active_keys(row) {
            if let Ok(i) = self
                .terms
                .binary_search_by(|t| (t.feature, &t.value).cmp(&(j, &v)))
            {
                s += self.terms[i].weight;
            }
        }
        s
    }

    pub fn predict(&self, row: &[FeatureValue]) -> Label {
        Label::from_bool(self.score(row) > 0.0)
    }
}

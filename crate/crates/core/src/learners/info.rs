//! Entropy and information gain over binary labels, in bits.

use crate::dataset::{Label, LabelCounts};

pub fn entropy(counts: LabelCounts) -> f64 {
    let n = counts.total() as f64;
    if n == 0.0 {
        return 0.0;
    }
    [counts.negative, counts.positive]
        .into_iter()
        .filter(|&c| c > 0)
        .map(|c| {
            let p = c as f64 / n;
            -p * p.log2()
        })
        .sum()
}

/// Gain of splitting `parent` into `groups`. Clamped to `[0, H(parent)]`
/// against rounding.
pub fn information_gain_counts(parent: LabelCounts, groups: &[LabelCounts]) -> f64 {
    let n = parent.total() as f64;
    if n == 0.0 {
        return 0.0;
    }
    let h = entropy(parent);
    let conditional: f64 = groups
        .iter()
        .map(|g| g.total() as f64 / n * entropy(*g))
        .sum();
    (h - conditional).clamp(0.0, h)
}

/// `H(labels) - Σ |g|/n · H(labels | g)` where each group lists indices into
/// `labels`.
pub fn information_gain(labels: &[Label], groups: &[Vec<usize>]) -> f64 {
    let parent: LabelCounts = labels.iter().copied().collect();
    let counts: Vec<LabelCounts> = groups
        .iter()
        .map(|g| g.iter().map(|&i| labels[i]).collect())
        .collect();
    information_gain_counts(parent, &counts)
}

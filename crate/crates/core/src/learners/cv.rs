use rand::seq::SliceRandom;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use thiserror::Error;

use super::{train, LearnerKind, TrainConfig};
use crate::dataset::{Dataset, Label};
use crate::feature::{materialize, Feature};
use crate::kb::KnowledgeBase;

#[derive(Debug, Error, PartialEq, Eq)]
pub enum CvError {
    #[error("cross-validation needs at least 2 folds, got {0}")]
    TooFewFolds(usize),
    #[error("{examples} examples cannot fill {folds} folds")]
    TooFewExamples { examples: usize, folds: usize },
}

/// Seeded stratified fold assignment: `result[i]` is the fold of example `i`.
///
/// Each class is shuffled separately, then negatives followed by positives
/// are dealt round-robin, so fold sizes and per-class counts per fold each
/// differ by at most one.
pub fn stratified_folds(labels: &[Label], folds: usize, seed: u64) -> Result<Vec<usize>, CvError> {
    if folds < 2 {
        return Err(CvError::TooFewFolds(folds));
    }
    if labels.len() < folds {
        return Err(CvError::TooFewExamples {
            examples: labels.len(),
            folds,
        });
    }
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut assignment = vec![0; labels.len()];
    let mut slot = 0;
    for class in [Label::Negative, Label::Positive] {
        let mut idx: Vec<usize> = (0..labels.len()).filter(|&i| labels[i] == class).collect();
        idx.shuffle(&mut rng);
        for i in idx {
            assignment[i] = slot % folds;
            slot += 1;
        }
    }
    Ok(assignment)
}

/// Indices of the training and test portions of `fold`.
pub fn split_fold(assignment: &[usize], fold: usize) -> (Vec<usize>, Vec<usize>) {
    (0..assignment.len()).partition(|&i| assignment[i] != fold)
}

/// Per-fold test accuracy of `learner` on a fixed feature list.
pub fn cross_validate(
    ds: &Dataset,
    features: &[Feature],
    kb: &KnowledgeBase,
    learner: LearnerKind,
    folds: usize,
    seed: u64,
    cfg: &TrainConfig,
) -> Result<Vec<f64>, CvError> {
    let assignment = stratified_folds(&ds.labels(), folds, seed)?;
    let matrix = materialize(ds, features, kb);
    Ok((0..folds)
        .map(|fold| {
            let (train_idx, test_idx) = split_fold(&assignment, fold);
            let pick = |idx: &[usize]| {
                crate::feature::FeatureMatrix::new(
                    matrix.names.clone(),
                    idx.iter().map(|&i| matrix.rows[i].clone()).collect(),
                    idx.iter().map(|&i| matrix.labels[i]).collect(),
                )
            };
            let h = train(learner, &pick(&train_idx), cfg);
            h.accuracy(&pick(&test_idx))
        })
        .collect())
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::dataset::{Column, Example, FeatureValue};

    #[test]
    fn ten_examples_five_folds() {
        let labels: Vec<Label> = (0..10).map(|i| Label::from_bool(i < 6)).collect();
        let a = stratified_folds(&labels, 5, 7).unwrap();
        for fold in 0..5 {
            let members: Vec<usize> = (0..10).filter(|&i| a[i] == fold).collect();
            assert_eq!(members.len(), 2);
            let pos = members.iter().filter(|&&i| labels[i].is_positive()).count();
            // 6 positives over 5 folds: each fold gets floor or ceil of 1.2
            assert!((1..=2).contains(&pos), "fold {fold}: {pos}");
        }
        let total_pos_two = (0..5)
            .filter(|&f| {
                (0..10)
                    .filter(|&i| a[i] == f && labels[i].is_positive())
                    .count()
                    == 2
            })
            .count();
        assert_eq!(total_pos_two, 1);
    }

    #[test]
    fn fold_errors() {
        let labels = vec![Label::Negative; 3];
        assert_eq!(
            stratified_folds(&labels, 1, 0),
            Err(CvError::TooFewFolds(1))
        );
        assert_eq!(
            stratified_folds(&labels, 4, 0),
            Err(CvError::TooFewExamples {
                examples: 3,
                folds: 4
            })
        );
    }

    #[test]
    fn constant_labels_are_always_right() {
        let ds = Dataset::new(
            vec![Column::new("x")],
            (0..12)
                .map(|i| {
                    Example::new(format!("e{i}"), Label::Positive)
                        .with("x", FeatureValue::atom(format!("v{}", i % 3).as_str()))
                })
                .collect(),
        )
        .unwrap();
        let kb = KnowledgeBase::new();
        for kind in LearnerKind::ALL {
            let acc = cross_validate(
                &ds,
                &[Feature::base("x")],
                &kb,
                kind,
                4,
                1,
                &TrainConfig::default(),
            )
            .unwrap();
            assert_eq!(acc, vec![1.0; 4]);
        }
    }

    #[test]
    fn same_seed_same_folds() {
        let labels: Vec<Label> = (0..30).map(|i| Label::from_bool(i % 3 == 0)).collect();
        assert_eq!(
            stratified_folds(&labels, 10, 42).unwrap(),
            stratified_folds(&labels, 10, 42).unwrap()
        );
    }
}

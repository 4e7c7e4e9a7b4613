//! Baseline-versus-generated comparisons.
//!
//! Every (dataset, method, learner) cell is scored by stratified
//! cross-validation with the same fold assignment for every method, so
//! per-fold accuracies can be compared pairwise. Features are generated from
//! the training portion of each fold and only applied to the held-out
//! portion.

pub mod stats;

use std::collections::BTreeMap;
use std::fmt::{self, Write as _};
use std::str::FromStr;

use rayon::prelude::*;
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::dataset::Dataset;
use crate::deep::{deep_generate, DeepConfig};
use crate::expand::{expand_features, AggregatorFamily};
use crate::feature::{materialize, Feature, FeatureMatrix};
use crate::kb::KnowledgeBase;
use crate::learners::cv::{split_fold, stratified_folds, CvError};
use crate::learners::{cross_validate, train, LearnerKind, TrainConfig};

pub use stats::{friedman_test, paired_t_test, FriedmanTest, StatsError, TTest};

#[derive(Copy, Clone, Debug, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub enum Method {
    Baseline,
    Expander,
    Feagure { depth: usize },
}

impl Method {
    pub const STANDARD: [Method; 4] = [
        Method::Baseline,
        Method::Expander,
        Method::Feagure { depth: 1 },
        Method::Feagure { depth: 2 },
    ];
}

impl fmt::Display for Method {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Method::Baseline => f.write_str("baseline"),
            Method::Expander => f.write_str("expander"),
            Method::Feagure { depth } => write!(f, "feagure_d{depth}"),
        }
    }
}

impl FromStr for Method {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        match s {
            "baseline" => Ok(Method::Baseline),
            "expander" => Ok(Method::Expander),
            _ => s
                .strip_prefix("feagure_d")
                .and_then(|d| d.parse().ok())
                .map(|depth| Method::Feagure { depth })
                .ok_or_else(|| {
                    format!("unknown method `{s}` (expected baseline|expander|feagure_d<N>)")
                }),
        }
    }
}

impl Serialize for Method {
    fn serialize<S: serde::Serializer>(&self, s: S) -> Result<S::Ok, S::Error> {
        s.collect_str(self)
    }
}

impl<'de> Deserialize<'de> for Method {
    fn deserialize<D: serde::Deserializer<'de>>(d: D) -> Result<Self, D::Error> {
        String::deserialize(d)?
            .parse()
            .map_err(serde::de::Error::custom)
    }
}

#[derive(Copy, Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum GenerationScope {
    /// Generate from each fold's training portion.
    Fold,
    /// Generate once from the whole dataset.
    Dataset,
}

impl FromStr for GenerationScope {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        match s {
            "fold" => Ok(GenerationScope::Fold),
            "dataset" => Ok(GenerationScope::Dataset),
            other => Err(format!(
                "unknown generation scope `{other}` (expected fold|dataset)"
            )),
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct ExperimentConfig {
    pub methods: Vec<Method>,
    pub learners: Vec<LearnerKind>,
    pub folds: usize,
    pub seed: u64,
    pub scope: GenerationScope,
    pub aggregator: AggregatorFamily,
    pub coverage: f64,
    /// Generation settings; the recursion depth is taken from each method.
    pub deep: DeepConfig,
    pub train: TrainConfig,
}

impl Default for ExperimentConfig {
    fn default() -> Self {
        ExperimentConfig {
            methods: Method::STANDARD.to_vec(),
            learners: LearnerKind::ALL.to_vec(),
            folds: 10,
            seed: 0,
            scope: GenerationScope::Fold,
            aggregator: AggregatorFamily::Majority,
            coverage: 1.0,
            deep: DeepConfig::default(),
            train: TrainConfig::default(),
        }
    }
}

#[derive(Debug, Error, PartialEq)]
pub enum EvalError {
    #[error("dataset `{0}` has a single class")]
    SingleClass(String),
    #[error("dataset `{name}`: {source}")]
    Folds {
        name: String,
        #[source]
        source: CvError,
    },
}

/// A dataset together with the features it starts from.
#[derive(Clone, Debug)]
pub struct Task {
    pub name: String,
    pub dataset: Dataset,
    pub features: Vec<Feature>,
}

impl Task {
    /// One base feature per column.
    pub fn new(name: impl Into<String>, dataset: Dataset) -> Self {
        let features = dataset
            .columns()
            .iter()
            .map(|c| Feature::base(c.name.clone()))
            .collect();
        Task {
            name: name.into(),
            dataset,
            features,
        }
    }
}

/// The features `method` produces from `train`: the input features followed
/// by whatever it generates.
pub fn method_features(
    method: Method,
    train: &Dataset,
    features: &[Feature],
    kb: &KnowledgeBase,
    cfg: &ExperimentConfig,
) -> Vec<Feature> {
    let mut out = features.to_vec();
    match method {
        Method::Baseline => {}
        Method::Expander => out.extend(expand_features(
            train,
            features,
            kb,
            cfg.aggregator,
            cfg.coverage,
        )),
        Method::Feagure { depth } => {
            let mut deep = cfg.deep.clone();
            deep.generation.depth = depth;
            out.extend(deep_generate(train, features, kb, &deep).features);
        }
    }
    out
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct CellResult {
    pub method: Method,
    pub learner: LearnerKind,
    pub fold_accuracies: Vec<f64>,
    pub mean_accuracy: f64,
    /// This method against the baseline on the same folds.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub vs_baseline: Option<TTest>,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct DatasetResult {
    pub name: String,
    pub examples: usize,
    pub cells: Vec<CellResult>,
    /// Number of features each method used, per fold.
    pub feature_counts: BTreeMap<String, Vec<usize>>,
}

impl DatasetResult {
    pub fn cell(&self, method: Method, learner: LearnerKind) -> Option<&CellResult> {
        self.cells
            .iter()
            .find(|c| c.method == method && c.learner == learner)
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct SummaryCell {
    pub method: Method,
    pub learner: LearnerKind,
    /// Mean over datasets of the per-dataset mean accuracy.
    pub mean_accuracy: f64,
    /// Across datasets when there are several, otherwise across folds.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub vs_baseline: Option<TTest>,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ExperimentResult {
    pub config: ExperimentConfig,
    pub datasets: Vec<DatasetResult>,
    pub summary: Vec<SummaryCell>,
    /// Friedman test across datasets per learner, when there are at least
    /// two datasets and two methods.
    pub friedman: BTreeMap<String, FriedmanTest>,
}

fn pick(m: &FeatureMatrix, idx: &[usize]) -> FeatureMatrix {
    FeatureMatrix::new(
        m.names.clone(),
        idx.iter().map(|&i| m.rows[i].clone()).collect(),
        idx.iter().map(|&i| m.labels[i]).collect(),
    )
}

fn run_task(
    task: &Task,
    kb: &KnowledgeBase,
    cfg: &ExperimentConfig,
) -> Result<DatasetResult, EvalError> {
    let ds = &task.dataset;
    if ds.label_counts().is_pure() {
        return Err(EvalError::SingleClass(task.name.clone()));
    }
    let assignment =
        stratified_folds(&ds.labels(), cfg.folds, cfg.seed).map_err(|source| EvalError::Folds {
            name: task.name.clone(),
            source,
        })?;

    let whole: BTreeMap<Method, Vec<Feature>> = match cfg.scope {
        GenerationScope::Dataset => cfg
            .methods
            .par_iter()
            .map(|&m| (m, method_features(m, ds, &task.features, kb, cfg)))
            .collect(),
        GenerationScope::Fold => BTreeMap::new(),
    };

    // (method, fold) -> (feature count, accuracy per learner)
    let jobs: Vec<(Method, usize)> = cfg
        .methods
        .iter()
        .flat_map(|&m| (0..cfg.folds).map(move |f| (m, f)))
        .collect();
    let outcomes: Vec<(usize, Vec<f64>)> = jobs
        .par_iter()
        .map(|&(method, fold)| {
            let (train_idx, test_idx) = split_fold(&assignment, fold);
            let features = match cfg.scope {
                GenerationScope::Dataset => whole[&method].clone(),
                GenerationScope::Fold => {
                    method_features(method, &ds.subset(&train_idx), &task.features, kb, cfg)
                }
            };
            let m = materialize(ds, &features, kb);
            let (train_m, test_m) = (pick(&m, &train_idx), pick(&m, &test_idx));
            let accs = cfg
                .learners
                .iter()
                .map(|&l| train(l, &train_m, &cfg.train).accuracy(&test_m))
                .collect();
            (features.len(), accs)
        })
        .collect();

    let mut feature_counts = BTreeMap::new();
    let mut per_cell: BTreeMap<(Method, LearnerKind), Vec<f64>> = BTreeMap::new();
    for (&(method, _), (count, accs)) in jobs.iter().zip(&outcomes) {
        feature_counts
            .entry(method.to_string())
            .or_insert_with(Vec::new)
            .push(*count);
        for (&l, &a) in cfg.learners.iter().zip(accs) {
            per_cell.entry((method, l)).or_default().push(a);
        }
    }

    let mut cells = Vec::new();
    for &method in &cfg.methods {
        for &learner in &cfg.learners {
            let accs = per_cell[&(method, learner)].clone();
            let vs_baseline = (method != Method::Baseline)
                .then(|| per_cell.get(&(Method::Baseline, learner)))
                .flatten()
                .and_then(|base| paired_t_test(&accs, base).ok());
            cells.push(CellResult {
                method,
                learner,
                mean_accuracy: mean(&accs),
                fold_accuracies: accs,
                vs_baseline,
            });
        }
    }
    Ok(DatasetResult {
        name: task.name.clone(),
        examples: ds.len(),
        cells,
        feature_counts,
    })
}

fn mean(xs: &[f64]) -> f64 {
    if xs.is_empty() {
        0.0
    } else {
        xs.iter().sum::<f64>() / xs.len() as f64
    }
}

/// Cross-validated comparison of every configured method and learner on
/// every task.
pub fn run_experiment(
    tasks: &[Task],
    kb: &KnowledgeBase,
    cfg: &ExperimentConfig,
) -> Result<ExperimentResult, EvalError> {
    let datasets = tasks
        .iter()
        .map(|t| run_task(t, kb, cfg))
        .collect::<Result<Vec<_>, _>>()?;

    let mut summary = Vec::new();
    for &method in &cfg.methods {
        for &learner in &cfg.learners {
            let means: Vec<f64> = datasets
                .iter()
                .map(|d| {
                    d.cell(method, learner)
                        .expect("every cell is filled")
                        .mean_accuracy
                })
                .collect();
            let vs_baseline = if method == Method::Baseline {
                None
            } else if datasets.len() >= 2 {
                cfg.methods
                    .contains(&Method::Baseline)
                    .then(|| {
                        let base: Vec<f64> = datasets
                            .iter()
                            .map(|d| d.cell(Method::Baseline, learner).unwrap().mean_accuracy)
                            .collect();
                        paired_t_test(&means, &base).ok()
                    })
                    .flatten()
            } else {
                datasets
                    .first()
                    .and_then(|d| d.cell(method, learner))
                    .and_then(|c| c.vs_baseline.clone())
            };
            summary.push(SummaryCell {
                method,
                learner,
                mean_accuracy: mean(&means),
                vs_baseline,
            });
        }
    }

    let mut friedman = BTreeMap::new();
    if datasets.len() >= 2 && cfg.methods.len() >= 2 {
        for &learner in &cfg.learners {
            let matrix: Vec<Vec<f64>> = datasets
                .iter()
                .map(|d| {
                    cfg.methods
                        .iter()
                        .map(|&m| d.cell(m, learner).unwrap().mean_accuracy)
                        .collect()
                })
                .collect();
            if let Ok(f) = friedman_test(&matrix) {
                friedman.insert(learner.to_string(), f);
            }
        }
    }

    Ok(ExperimentResult {
        config: cfg.clone(),
        datasets,
        summary,
        friedman,
    })
}

impl ExperimentResult {
    pub fn summary_cell(&self, method: Method, learner: LearnerKind) -> Option<&SummaryCell> {
        self.summary
            .iter()
            .find(|c| c.method == method && c.learner == learner)
    }

    /// Learners as rows, methods as columns. `*` marks a significant
    /// difference from the baseline at 0.05, `**` at 0.001, and a trailing
    /// `-` a significant decrease.
    pub fn to_table(&self) -> String {
        let methods = &self.config.methods;
        let mut out = String::new();
        let _ = write!(out, "{:<8}", "learner");
        for m in methods {
            let _ = write!(out, " {:>12}", m.to_string());
        }
        out.push('\n');
        for &learner in &self.config.learners {
            let _ = write!(out, "{:<8}", learner.to_string());
            for &m in methods {
                let cell = self
                    .summary_cell(m, learner)
                    .expect("summary covers all cells");
                let mark = match &cell.vs_baseline {
                    Some(t) if t.significant(0.001) => "**",
                    Some(t) if t.significant(0.05) => "*",
                    _ => "",
                };
                let down = match &cell.vs_baseline {
                    Some(t) if !mark.is_empty() && t.mean_diff < 0.0 => "-",
                    _ => "",
                };
                let _ = write!(
                    out,
                    " {:>12}",
                    format!("{:.3}{mark}{down}", cell.mean_accuracy)
                );
            }
            out.push('\n');
        }
        for (learner, f) in &self.friedman {
            let sig = if f.significant_at.is_empty() {
                "not significant".to_string()
            } else {
                format!("p < {}", f.significant_at.last().unwrap())
            };
            let _ = writeln!(
                out,
                "friedman[{learner}]: chi2 = {:.3} (df {}), {sig}",
                f.statistic, f.df
            );
        }
        out
    }
}

/// Maximal achievable accuracy: the best mean cross-validated accuracy of the
/// three learners on the given features.
pub fn maa(
    ds: &Dataset,
    features: &[Feature],
    kb: &KnowledgeBase,
    folds: usize,
    seed: u64,
    cfg: &TrainConfig,
) -> Result<f64, CvError> {
    let mut best = f64::NEG_INFINITY;
    for learner in LearnerKind::ALL {
        best = best.max(mean(&cross_validate(
            ds, features, kb, learner, folds, seed, cfg,
        )?));
    }
    Ok(best)
}

#[derive(Clone, Debug, PartialEq)]
pub struct HoldoutResult {
    pub features: Vec<Feature>,
    pub accuracy: f64,
}

/// Generates from `train` only, then scores `learner` on `test`.
pub fn evaluate_holdout(
    train_ds: &Dataset,
    test_ds: &Dataset,
    features: &[Feature],
    kb: &KnowledgeBase,
    method: Method,
    learner: LearnerKind,
    cfg: &ExperimentConfig,
) -> HoldoutResult {
    let features = method_features(method, train_ds, features, kb, cfg);
    let h = train(learner, &materialize(train_ds, &features, kb), &cfg.train);
    let accuracy = h.accuracy(&materialize(test_ds, &features, kb));
    HoldoutResult { features, accuracy }
}

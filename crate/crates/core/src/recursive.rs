//! Feature generation by recursive induction.
//!
//! For a feature `f`, the values `f` takes on the training set become the
//! objects of a new learning problem. Each value is labeled with the majority
//! label of the examples carrying it, and described by the knowledge-base
//! relations that apply to the values. A classifier `h` trained on that
//! problem becomes the new feature `h ∘ f`. Before training, the new
//! problem's own features can be extended the same way, up to a recursion
//! depth.
//!
//! Set-valued features (e.g. the entities mentioned in a document) are split
//! by departure type first: each type yields its own problem over the member
//! entities of that type, and the resulting feature votes over those members.

use std::collections::BTreeMap;
use std::fmt;

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::dataset::{Column, Dataset, Example, FeatureValue, Label, LabelCounts};
use crate::expand::{relation_features, AggregatorFamily};
use crate::feature::{materialize, ClassifierFeature, Feature, SELF_COLUMN};
use crate::kb::{KnowledgeBase, Value};
use crate::learners::{train, LearnerKind, TrainConfig};

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct GenerationConfig {
    /// Recursion depth; 0 trains directly on the relation features.
    pub depth: usize,
    pub min_recursive_size: usize,
    pub coverage: f64,
    pub aggregator: AggregatorFamily,
    pub learner: LearnerKind,
    pub train: TrainConfig,
}

impl Default for GenerationConfig {
    fn default() -> Self {
        GenerationConfig {
            depth: 2,
            min_recursive_size: 8,
            coverage: 1.0,
            aggregator: AggregatorFamily::Majority,
            learner: LearnerKind::Tree,
            train: TrainConfig::default(),
        }
    }
}

/// A learning problem whose objects are feature values.
#[derive(Clone, Debug, PartialEq)]
pub struct RecursiveProblem {
    pub source: String,
    pub partition: Option<String>,
    pub objects: Vec<(Value, Label)>,
    /// Features over [`SELF_COLUMN`].
    pub features: Vec<Feature>,
    pub depth: usize,
}

impl RecursiveProblem {
    /// The objects as a one-column dataset keyed by the value itself.
    pub fn dataset(&self) -> Dataset {
        let examples = self
            .objects
            .iter()
            .map(|(v, l)| {
                Example::new(v.as_str(), *l).with(SELF_COLUMN, FeatureValue::Atom(v.clone()))
            })
            .collect();
        Dataset::new(vec![Column::new(SELF_COLUMN)], examples).expect("object values are distinct")
    }

    pub fn label_counts(&self) -> LabelCounts {
        self.objects.iter().map(|(_, l)| *l).collect()
    }
}

#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(tag = "reason", rename_all = "snake_case")]
pub enum FilterReason {
    TooFewObjects { objects: usize, min: usize },
    SingleClass,
    NoApplicableRelations,
}

impl fmt::Display for FilterReason {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            FilterReason::TooFewObjects { objects, min } => {
                write!(f, "too few objects ({objects} < {min})")
            }
            FilterReason::SingleClass => f.write_str("single class"),
            FilterReason::NoApplicableRelations => f.write_str("no applicable relations"),
        }
    }
}

/// A candidate problem that was discarded.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct FilteredOut {
    pub source: String,
    pub partition: Option<String>,
    pub objects: usize,
    pub reason: FilterReason,
}

type Partition = (Option<String>, Vec<(Value, Label)>);

/// Builds the recursive problems of `feature` over `ds`: one for an
/// atom-valued feature, one per departure type for a set-valued one.
pub fn create_new_problem(
    feature: &Feature,
    ds: &Dataset,
    kb: &KnowledgeBase,
    cfg: &GenerationConfig,
    depth: usize,
) -> Vec<Result<RecursiveProblem, FilteredOut>> {
    let mut labels: BTreeMap<Value, LabelCounts> = BTreeMap::new();
    let mut set_valued = false;
    for ex in ds.examples() {
        let value = feature.evaluate(ex, kb);
        set_valued |= matches!(value, FeatureValue::Set(_));
        for v in value.members() {
            labels.entry(v.clone()).or_default().add(ex.label);
        }
    }
    let labeled: Vec<(Value, Label)> = labels.into_iter().map(|(v, c)| (v, c.majority())).collect();

    let partitions: Vec<Partition> = if set_valued {
        let parts: Vec<_> = kb
            .departure_types()
            .into_iter()
            .map(|t| {
                let members: Vec<(Value, Label)> = labeled
                    .iter()
                    .filter(|(v, _)| kb.has_type(v, t))
                    .cloned()
                    .collect();
                (Some(t.to_string()), members)
            })
            .filter(|(_, m)| !m.is_empty())
            .collect();
        if parts.is_empty() {
            vec![(None, labeled)]
        } else {
            parts
        }
    } else {
        vec![(None, labeled)]
    };

    partitions
        .into_iter()
        .map(|(partition, objects)| build_problem(feature, partition, objects, kb, cfg, depth))
        .collect()
}

fn build_problem(
    feature: &Feature,
    partition: Option<String>,
    objects: Vec<(Value, Label)>,
    kb: &KnowledgeBase,
    cfg: &GenerationConfig,
    depth: usize,
) -> Result<RecursiveProblem, FilteredOut> {
    let filtered = |reason| FilteredOut {
        source: feature.name().to_string(),
        partition: partition.clone(),
        objects: objects.len(),
        reason,
    };
    if objects.len() < cfg.min_recursive_size {
        return Err(filtered(FilterReason::TooFewObjects {
            objects: objects.len(),
            min: cfg.min_recursive_size,
        }));
    }
    let counts: LabelCounts = objects.iter().map(|(_, l)| *l).collect();
    if counts.is_pure() {
        return Err(filtered(FilterReason::SingleClass));
    }
    let values: std::collections::BTreeSet<Value> =
        objects.iter().map(|(v, _)| v.clone()).collect();
    let relations: Vec<_> = kb
        .applicable_relations(&values, cfg.coverage)
        .into_iter()
        .filter(|r| partition.as_deref().is_none_or(|t| r.departure_type() == t))
        .collect();
    let features = relation_features(
        &Feature::base(SELF_COLUMN),
        &values,
        &relations,
        cfg.aggregator,
    );
    if features.is_empty() {
        return Err(filtered(FilterReason::NoApplicableRelations));
    }
    Ok(RecursiveProblem {
        source: feature.name().to_string(),
        partition,
        objects,
        features,
        depth,
    })
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(tag = "outcome", rename_all = "snake_case")]
pub enum CandidateOutcome {
    Generated { feature: String },
    Filtered(FilterReason),
}

/// One attempted recursive problem at the top level of a generation call.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Candidate {
    pub source: String,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub partition: Option<String>,
    pub objects: usize,
    /// Share of the smaller class among the objects, when a problem was built.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub minority_fraction: Option<f64>,
    #[serde(flatten)]
    pub outcome: CandidateOutcome,
}

#[derive(Clone, Debug, Default, PartialEq)]
pub struct Generation {
    pub features: Vec<Feature>,
    pub candidates: Vec<Candidate>,
}

impl Generation {
    pub fn filtered(&self) -> impl Iterator<Item = (&Candidate, &FilterReason)> {
        self.candidates.iter().filter_map(|c| match &c.outcome {
            CandidateOutcome::Filtered(r) => Some((c, r)),
            _ => None,
        })
    }
}

/// Trains the classifier for one problem, extending its features
/// recursively while `depth > 0`.
pub fn solve_problem(
    feature: &Feature,
    problem: RecursiveProblem,
    kb: &KnowledgeBase,
    cfg: &GenerationConfig,
) -> Feature {
    let ds = problem.dataset();
    let mut features = problem.features;
    if problem.depth > 0 {
        let nested = generate_features(&ds, &features, kb, cfg, problem.depth - 1);
        features.extend(nested.features);
    }
    let m = materialize(&ds, &features, kb);
    let model = train(cfg.learner, &m, &cfg.train);
    Feature::classifier(feature.clone(), problem.partition, features, model)
}

/// One generated feature per surviving (feature, partition) candidate, in
/// input order.
pub fn generate_features(
    ds: &Dataset,
    features: &[Feature],
    kb: &KnowledgeBase,
    cfg: &GenerationConfig,
    depth: usize,
) -> Generation {
    let per_feature: Vec<Generation> = features
        .par_iter()
        .map(|f| {
            let mut out = Generation::default();
            for problem in create_new_problem(f, ds, kb, cfg, depth) {
                match problem {
                    Ok(p) => {
                        let objects = p.objects.len();
                        let counts = p.label_counts();
                        let minority = counts.negative.min(counts.positive) as f64 / objects as f64;
                        let partition = p.partition.clone();
                        let g = solve_problem(f, p, kb, cfg);
                        out.candidates.push(Candidate {
                            source: f.name().to_string(),
                            partition,
                            objects,
                            minority_fraction: Some(minority),
                            outcome: CandidateOutcome::Generated {
                                feature: g.name().to_string(),
                            },
                        });
                        out.features.push(g);
                    }
                    Err(filtered) => out.candidates.push(Candidate {
                        source: filtered.source,
                        partition: filtered.partition,
                        objects: filtered.objects,
                        minority_fraction: None,
                        outcome: CandidateOutcome::Filtered(filtered.reason),
                    }),
                }
            }
            out
        })
        .collect();
    let mut all = Generation::default();
    for g in per_feature {
        all.features.extend(g.features);
        all.candidates.extend(g.candidates);
    }
    all
}

/// `h(f(x))` for a generated feature.
pub fn apply_generated(
    feature: &ClassifierFeature,
    example: &Example,
    kb: &KnowledgeBase,
) -> Label {
    feature.apply(&feature.inner.evaluate(example, kb), kb)
}

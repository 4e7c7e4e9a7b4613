//! Evaluable feature definitions and feature matrices.
//!
//! A [`Feature`] is a small composition tree. Leaves read a base column;
//! relation nodes push the inner value through a knowledge-base relation,
//! optionally collapsing the looked-up objects with an aggregator; classifier
//! nodes apply a trained model to the inner value. Classifier nodes carry the
//! features their model was trained on, so a serialized feature is
//! self-contained given the knowledge base.

use rayon::prelude::*;
use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};

use crate::dataset::{Dataset, Example, FeatureValue, Label};
use crate::expand::AggregatorInstance;
use crate::kb::{KnowledgeBase, Value};
use crate::learners::Classifier;

/// Column holding the object itself in a recursive problem.
pub const SELF_COLUMN: &str = "self";

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Feature {
    name: String,
    #[serde(flatten)]
    kind: FeatureKind,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum FeatureKind {
    Base {
        column: String,
    },
    Relation {
        inner: Box<Feature>,
        relation: String,
        #[serde(default, skip_serializing_if = "Option::is_none")]
        aggregator: Option<AggregatorInstance>,
    },
    Classifier(Box<ClassifierFeature>),
}

/// `h ∘ inner`: a classifier over the values of `inner`.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ClassifierFeature {
    pub inner: Feature,
    /// When set, only members of this departure type vote on set values.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub partition: Option<String>,
    /// Features over [`SELF_COLUMN`] that produce the model's input row.
    pub features: Vec<Feature>,
    pub model: Classifier,
}

impl ClassifierFeature {
    /// The model's prediction for a single object.
    pub fn predict_value(&self, value: &Value, kb: &KnowledgeBase) -> Label {
        let ex = object_example(value);
        let row: Vec<FeatureValue> = self.features.iter().map(|f| f.evaluate(&ex, kb)).collect();
        self.model.predict(&row)
    }

    /// Applies the classifier to an evaluated inner value. Sets vote by
    /// majority (ties negative); missing values get the model's default class.
    pub fn apply(&self, inner: &FeatureValue, kb: &KnowledgeBase) -> Label {
        match inner {
            FeatureValue::Missing => self.model.default_class(),
            FeatureValue::Atom(v) => self.predict_value(v, kb),
            FeatureValue::Set(members) => {
                let votes: Vec<Label> = members
                    .iter()
                    .filter(|v| match &self.partition {
                        Some(t) => kb.has_type(v, t),
                        None => true,
                    })
                    .map(|v| self.predict_value(v, kb))
                    .collect();
                if votes.is_empty() {
                    self.model.default_class()
                } else {
                    Label::majority(votes)
                }
            }
        }
    }
}

/// A one-column example whose only value is `value` itself.
pub fn object_example(value: &Value) -> Example {
    Example::new(value.as_str(), Label::Negative)
        .with(SELF_COLUMN, FeatureValue::Atom(value.clone()))
}

impl Feature {
    pub fn base(column: impl Into<String>) -> Self {
        let column = column.into();
        Feature {
            name: column.clone(),
            kind: FeatureKind::Base { column },
        }
    }

    /// `relation ∘ inner`. Without an aggregator the value is the looked-up
    /// object (or set of objects); with one it is the aggregator's 0/1.
    pub fn relation(
        inner: Feature,
        relation: impl Into<String>,
        aggregator: Option<AggregatorInstance>,
    ) -> Self {
        let relation = relation.into();
        let name = match &aggregator {
            None => format!("{relation}({})", inner.name),
            Some(agg) => format!("{agg}:{relation}({})", inner.name),
        };
        Feature {
            name,
            kind: FeatureKind::Relation {
                inner: Box::new(inner),
                relation,
                aggregator,
            },
        }
    }

    /// Wraps a trained classifier. The name embeds a digest of the full
    /// definition so distinct models over the same inner feature never share
    /// a name.
    pub fn classifier(
        inner: Feature,
        partition: Option<String>,
        features: Vec<Feature>,
        model: Classifier,
    ) -> Self {
        let body = ClassifierFeature {
            inner,
            partition,
            features,
            model,
        };
        let json = serde_json::to_vec(&body).expect("feature definitions serialize");
        let digest = Sha256::digest(&json);
        let tag: String = digest[..4].iter().map(|b| format!("{b:02x}")).collect();
        let name = match &body.partition {
            None => format!("h{tag}({})", body.inner.name),
            Some(t) => format!("h{tag}<{t}>({})", body.inner.name),
        };
        Feature {
            name,
            kind: FeatureKind::Classifier(Box::new(body)),
        }
    }

    pub fn name(&self) -> &str {
        &self.name
    }

    pub fn kind(&self) -> &FeatureKind {
        &self.kind
    }

    pub fn as_classifier(&self) -> Option<&ClassifierFeature> {
        match &self.kind {
            FeatureKind::Classifier(c) => Some(c),
            _ => None,
        }
    }

    pub fn is_generated(&self) -> bool {
        !matches!(self.kind, FeatureKind::Base { .. })
    }

    /// Nesting depth of classifier layers anywhere in the definition.
    pub fn classifier_depth(&self) -> usize {
        match &self.kind {
            FeatureKind::Base { .. } => 0,
            FeatureKind::Relation { inner, .. } => inner.classifier_depth(),
            FeatureKind::Classifier(c) => c.inner.classifier_depth().max(c.added_layers()),
        }
    }

    pub fn evaluate(&self, example: &Example, kb: &KnowledgeBase) -> FeatureValue {
        match &self.kind {
            FeatureKind::Base { column } => example.value(column).clone(),
            FeatureKind::Relation {
                inner,
                relation,
                aggregator,
            } => {
                let inner = inner.evaluate(example, kb);
                if inner.is_missing() {
                    return FeatureValue::Missing;
                }
                let rel = kb.relation(relation);
                // multiset: one entry per (member, object) pair
                let objects: Vec<&Value> = inner
                    .members()
                    .into_iter()
                    .flat_map(|m| rel.and_then(|r| r.objects(m)).into_iter().flatten())
                    .collect();
                match aggregator {
                    Some(agg) => {
                        FeatureValue::Atom(Label::from_bool(agg.apply(&objects)).to_value())
                    }
                    None => {
                        let set = FeatureValue::set(objects.into_iter().cloned());
                        match set {
                            FeatureValue::Set(s) if s.len() == 1 => {
                                FeatureValue::Atom(s.into_iter().next().unwrap())
                            }
                            other => other,
                        }
                    }
                }
            }
            FeatureKind::Classifier(c) => {
                let inner = c.inner.evaluate(example, kb);
                FeatureValue::Atom(c.apply(&inner, kb).to_value())
            }
        }
    }
}

impl ClassifierFeature {
    /// Classifier layers this node adds on top of its inner feature.
    pub fn added_layers(&self) -> usize {
        1 + self
            .features
            .iter()
            .map(Feature::classifier_depth)
            .max()
            .unwrap_or(0)
    }
}

/// Rows of evaluated feature values with their labels.
#[derive(Clone, Debug, PartialEq)]
pub struct FeatureMatrix {
    pub names: Vec<String>,
    pub rows: Vec<Vec<FeatureValue>>,
    pub labels: Vec<Label>,
}

impl FeatureMatrix {
    pub fn new(names: Vec<String>, rows: Vec<Vec<FeatureValue>>, labels: Vec<Label>) -> Self {
        assert_eq!(rows.len(), labels.len(), "one label per row");
        FeatureMatrix {
            names,
            rows,
            labels,
        }
    }

    pub fn len(&self) -> usize {
        self.rows.len()
    }

    pub fn is_empty(&self) -> bool {
        self.rows.is_empty()
    }

    pub fn width(&self) -> usize {
        self.names.len()
    }

    pub fn column(&self, j: usize) -> impl Iterator<Item = &FeatureValue> {
        self.rows.iter().map(move |r| &r[j])
    }
}

/// Evaluates every feature on every example. Rows are computed in parallel
/// and returned in example order.
pub fn materialize(ds: &Dataset, features: &[Feature], kb: &KnowledgeBase) -> FeatureMatrix {
    let rows: Vec<Vec<FeatureValue>> = ds
        .examples()
        .par_iter()
        .map(|ex| features.iter().map(|f| f.evaluate(ex, kb)).collect())
        .collect();
    FeatureMatrix::new(
        features.iter().map(|f| f.name.clone()).collect(),
        rows,
        ds.labels(),
    )
}

/// JSON document holding a list of feature definitions.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct FeatureSet {
    pub features: Vec<Feature>,
}

impl FeatureSet {
    pub fn to_json(&self) -> String {
        serde_json::to_string_pretty(self).expect("feature definitions serialize")
    }

    pub fn from_json(text: &str) -> serde_json::Result<Self> {
        serde_json::from_str(text)
    }
}

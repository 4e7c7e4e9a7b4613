//! Aggregators and relational expansion.
//!
//! Expansion composes every applicable relation onto every input feature,
//! ignoring labels. Function relations yield one atom-valued feature; other
//! relations yield one binary feature per observed object, built with an
//! aggregator family.

use std::collections::{BTreeMap, BTreeSet};
use std::fmt;
use std::str::FromStr;

use serde::{Deserialize, Serialize};

use crate::dataset::Dataset;
use crate::feature::Feature;
use crate::kb::{KnowledgeBase, Relation, Value};

#[derive(Copy, Clone, Debug, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum AggregatorFamily {
    Majority,
    Any,
}

impl fmt::Display for AggregatorFamily {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            AggregatorFamily::Majority => "majority",
            AggregatorFamily::Any => "any",
        })
    }
}

impl FromStr for AggregatorFamily {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        match s {
            "majority" => Ok(AggregatorFamily::Majority),
            "any" => Ok(AggregatorFamily::Any),
            other => Err(format!(
                "unknown aggregator `{other}` (expected majority|any)"
            )),
        }
    }
}

/// An aggregator family bound to one target value.
#[derive(Clone, Debug, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
pub struct AggregatorInstance {
    pub family: AggregatorFamily,
    pub target: Value,
}

impl AggregatorInstance {
    pub fn new(family: AggregatorFamily, target: impl Into<Value>) -> Self {
        AggregatorInstance {
            family,
            target: target.into(),
        }
    }

    pub fn apply(&self, values: &[&Value]) -> bool {
        match self.family {
            AggregatorFamily::Majority => majority_aggregate(values, &self.target),
            AggregatorFamily::Any => any_aggregate(values, &self.target),
        }
    }
}

impl fmt::Display for AggregatorInstance {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{}[{}]", self.family, self.target)
    }
}

/// True iff `target` has maximal multiplicity in `values` and is the
/// smallest such value, so exactly one target fires on a non-empty multiset.
pub fn majority_aggregate(values: &[&Value], target: &Value) -> bool {
    let mut counts: BTreeMap<&Value, usize> = BTreeMap::new();
    for v in values {
        *counts.entry(v).or_default() += 1;
    }
    let Some(best) = counts.values().copied().max() else {
        return false;
    };
    // BTreeMap iterates in value order, so the first maximum is the smallest
    counts
        .iter()
        .find(|(_, &c)| c == best)
        .is_some_and(|(v, _)| *v == target)
}

/// True iff `target` occurs in `values`.
pub fn any_aggregate(values: &[&Value], target: &Value) -> bool {
    values.contains(&target)
}

/// Builds the relation features of `inner` for each relation in `relations`,
/// given the values `inner` takes on the training data.
pub(crate) fn relation_features(
    inner: &Feature,
    values: &BTreeSet<Value>,
    relations: &[&Relation],
    family: AggregatorFamily,
) -> Vec<Feature> {
    let mut out = Vec::new();
    for rel in relations {
        if rel.is_function() {
            out.push(Feature::relation(inner.clone(), rel.name(), None));
            continue;
        }
        let observed: BTreeSet<&Value> = values
            .iter()
            .filter_map(|v| rel.objects(v))
            .flatten()
            .collect();
        for target in observed {
            out.push(Feature::relation(
                inner.clone(),
                rel.name(),
                Some(AggregatorInstance::new(family, target.clone())),
            ));
        }
    }
    out
}

/// Values `feature` takes over `ds`, with set members flattened.
pub fn observed_values(ds: &Dataset, feature: &Feature, kb: &KnowledgeBase) -> BTreeSet<Value> {
    ds.examples()
        .iter()
        .flat_map(|ex| {
            feature
                .evaluate(ex, kb)
                .members()
                .into_iter()
                .cloned()
                .collect::<Vec<_>>()
        })
        .collect()
}

/// Relational expansion of every input feature.
pub fn expand_features(
    ds: &Dataset,
    features: &[Feature],
    kb: &KnowledgeBase,
    family: AggregatorFamily,
    coverage: f64,
) -> Vec<Feature> {
    let mut seen = BTreeSet::new();
    let mut out = Vec::new();
    for f in features {
        let values = observed_values(ds, f, kb);
        if values.is_empty() {
            continue;
        }
        let relations = kb.applicable_relations(&values, coverage);
        for g in relation_features(f, &values, &relations, family) {
            if seen.insert(g.name().to_string()) {
                out.push(g);
            }
        }
    }
    out
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::dataset::{Column, Example, FeatureValue, Label};

    fn v(s: &str) -> Value {
        Value::from(s)
    }

    #[test]
    fn majority_cases() {
        let (p, e) = (v("poland"), v("egypt"));
        let vals = [&p, &p, &e];
        assert!(majority_aggregate(&vals, &p));
        assert!(!majority_aggregate(&vals, &e));
        let (a, b) = (v("a"), v("b"));
        assert!(majority_aggregate(&[&a, &b], &a));
        assert!(!majority_aggregate(&[&a, &b], &b));
        assert!(!majority_aggregate(&[], &a));
    }

    #[test]
    fn any_cases() {
        let (l, s, x) = (v("libya"), v("sudan"), v("x"));
        assert!(any_aggregate(&[&l, &s], &s));
        assert!(!any_aggregate(&[], &s));
        assert!(any_aggregate(&[&x], &x));
    }

    fn kb() -> KnowledgeBase {
        KnowledgeBase::load(
            "countryOf\tsurname\tcountry\tfn\nborderOf\tcountry\tcountry\trel\n",
            "countryOf\tnowak\tpoland\ncountryOf\thaddad\tegypt\n\
             borderOf\tegypt\tlibya\nborderOf\tegypt\tsudan\n",
        )
        .unwrap()
    }

    fn one_column(name: &str, values: &[&str]) -> Dataset {
        Dataset::new(
            vec![Column::new(name)],
            values
                .iter()
                .enumerate()
                .map(|(i, x)| {
                    Example::new(format!("e{i}"), Label::Negative)
                        .with(name, FeatureValue::atom(*x))
                })
                .collect(),
        )
        .unwrap()
    }

    #[test]
    fn function_relation_gives_one_feature() {
        let ds = one_column("surname", &["nowak", "haddad"]);
        let out = expand_features(
            &ds,
            &[Feature::base("surname")],
            &kb(),
            AggregatorFamily::Any,
            1.0,
        );
        let names: Vec<&str> = out.iter().map(Feature::name).collect();
        assert_eq!(names, ["countryOf(surname)"]);
    }

    #[test]
    fn relation_gives_one_feature_per_observed_object() {
        let ds = one_column("country", &["egypt"]);
        let out = expand_features(
            &ds,
            &[Feature::base("country")],
            &kb(),
            AggregatorFamily::Any,
            1.0,
        );
        let names: Vec<&str> = out.iter().map(Feature::name).collect();
        assert_eq!(
            names,
            [
                "any[libya]:borderOf(country)",
                "any[sudan]:borderOf(country)"
            ]
        );
    }

    #[test]
    fn nothing_applicable() {
        let ds = one_column("color", &["red"]);
        assert!(expand_features(
            &ds,
            &[Feature::base("color")],
            &kb(),
            AggregatorFamily::Majority,
            1.0
        )
        .is_empty());
    }
}

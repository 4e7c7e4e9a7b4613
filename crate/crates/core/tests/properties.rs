use std::collections::{BTreeMap, BTreeSet};

use kbfeat::expand::{any_aggregate, majority_aggregate};
use kbfeat::learners::{entropy, information_gain};
use kbfeat::{
    create_new_problem, expand_features, generate_features, materialize, AggregatorFamily, Column,
    Dataset, Example, Feature, FeatureKind, FeatureValue, GenerationConfig, KnowledgeBase, Label,
    LabelCounts, Relation, Value,
};
use proptest::prelude::*;

fn tok(prefix: &str, i: u8) -> Value {
    Value::from(format!("{prefix}{i}").as_str())
}

/// A knowledge base with one function `f: a -> b` and one relation `r: a -> c`
/// over small integer-named entities.
fn kb_strategy() -> impl Strategy<Value = KnowledgeBase> {
    (
        prop::collection::btree_map(0u8..8, 0u8..4, 0..8),
        prop::collection::btree_set((0u8..8, 0u8..5), 0..16),
    )
        .prop_map(|(f, r)| {
            let mut fr = Relation::new("f", "a", "b", true);
            for (s, o) in f {
                fr.insert(tok("a", s), tok("b", o)).unwrap();
            }
            let mut rr = Relation::new("r", "a", "c", false);
            for (s, o) in r {
                rr.insert(tok("a", s), tok("c", o)).unwrap();
            }
            let mut kb = KnowledgeBase::new();
            kb.add_relation(fr);
            kb.add_relation(rr);
            kb
        })
}

fn dataset_strategy() -> impl Strategy<Value = Dataset> {
    prop::collection::vec((0u8..8, any::<bool>()), 1..24).prop_map(|rows| {
        Dataset::new(
            vec![Column::new("x")],
            rows.into_iter()
                .enumerate()
                .map(|(i, (v, y))| {
                    Example::new(format!("e{i}"), Label::from_bool(y))
                        .with("x", FeatureValue::Atom(tok("a", v)))
                })
                .collect(),
        )
        .unwrap()
    })
}

proptest! {
    #[test]
    fn kb_tsv_round_trip(kb in kb_strategy()) {
        let back = KnowledgeBase::load(&kb.schema_tsv(), &kb.triples_tsv()).unwrap();
        prop_assert_eq!(back, kb);
    }

    #[test]
    fn lookups_cover_the_object_column(kb in kb_strategy()) {
        for rel in kb.relations() {
            let objects: BTreeSet<&Value> = rel.pairs().map(|(_, o)| o).collect();
            let mut union = BTreeSet::new();
            for s in rel.subjects() {
                let found = kb.lookup(rel.name(), s).unwrap();
                for o in &found {
                    prop_assert!(objects.contains(o));
                }
                union.extend(found);
            }
            prop_assert_eq!(union.iter().collect::<BTreeSet<_>>(), objects);
        }
    }

    #[test]
    fn full_coverage_means_every_value_is_a_subject(
        kb in kb_strategy(),
        values in prop::collection::btree_set(0u8..8, 1..6),
    ) {
        let values: Vec<Value> = values.into_iter().map(|v| tok("a", v)).collect();
        let got: Vec<&str> = kb.applicable_relations(&values, 1.0).iter().map(|r| r.name()).collect();
        let expected: Vec<&str> = kb
            .relations()
            .filter(|r| values.iter().all(|v| r.has_subject(v)))
            .map(|r| r.name())
            .collect();
        prop_assert_eq!(got, expected);
    }

    #[test]
    fn majority_fires_once_on_nonempty_multisets(ms in prop::collection::vec(0u8..5, 0..10)) {
        let domain: Vec<Value> = (0..5).map(|i| tok("v", i)).collect();
        let values: Vec<&Value> = ms.iter().map(|&i| &domain[i as usize]).collect();
        let fired = domain.iter().filter(|t| majority_aggregate(&values, t)).count();
        prop_assert_eq!(fired, usize::from(!ms.is_empty()));
    }

    #[test]
    fn any_is_monotone(x in prop::collection::vec(0u8..5, 0..8), y in prop::collection::vec(0u8..5, 0..8)) {
        let domain: Vec<Value> = (0..5).map(|i| tok("v", i)).collect();
        let xs: Vec<&Value> = x.iter().map(|&i| &domain[i as usize]).collect();
        let mut xy = xs.clone();
        xy.extend(y.iter().map(|&i| &domain[i as usize]));
        for t in &domain {
            prop_assert!(any_aggregate(&xy, t) >= any_aggregate(&xs, t));
        }
    }

    #[test]
    fn expansion_counts_observed_objects(kb in kb_strategy(), ds in dataset_strategy()) {
        for family in [AggregatorFamily::Majority, AggregatorFamily::Any] {
            let new = expand_features(&ds, &[Feature::base("x")], &kb, family, 0.0);
            let names: BTreeSet<&str> = new.iter().map(Feature::name).collect();
            prop_assert_eq!(names.len(), new.len());
            let observed: BTreeSet<&Value> = ds
                .examples()
                .iter()
                .flat_map(|e| e.value("x").members())
                .flat_map(|v| kb.relation("r").unwrap().objects(v).into_iter().flatten())
                .collect();
            let from_r = new.iter().filter(|f| f.name().contains(":r(")).count();
            prop_assert_eq!(from_r, observed.len());
        }
    }

    #[test]
    fn information_gain_is_bounded(
        labels in prop::collection::vec(any::<bool>(), 1..20),
        assign in prop::collection::vec(0usize..4, 20),
    ) {
        let ls: Vec<Label> = labels.iter().map(|&b| Label::from_bool(b)).collect();
        let mut groups: BTreeMap<usize, Vec<usize>> = BTreeMap::new();
        for (i, a) in assign.iter().take(ls.len()).enumerate() {
            groups.entry(*a).or_default().push(i);
        }
        let groups: Vec<Vec<usize>> = groups.into_values().collect();
        let h = entropy(ls.iter().copied().collect::<LabelCounts>());
        let ig = information_gain(&ls, &groups);
        prop_assert!((0.0..=h + 1e-12).contains(&ig));
        prop_assert_eq!(information_gain(&ls, &[(0..ls.len()).collect()]), 0.0);
    }

    #[test]
    fn materialization_is_repeatable(kb in kb_strategy(), ds in dataset_strategy()) {
        let mut features = vec![Feature::base("x")];
        features.extend(expand_features(&ds, &features, &kb, AggregatorFamily::Any, 0.0));
        let kb_before = kb.clone();
        let ds_before = ds.clone();
        prop_assert_eq!(materialize(&ds, &features, &kb), materialize(&ds, &features, &kb));
        prop_assert_eq!(kb, kb_before);
        prop_assert_eq!(ds, ds_before);
    }

    #[test]
    fn recursive_labels_are_majorities(kb in kb_strategy(), ds in dataset_strategy()) {
        let cfg = GenerationConfig { min_recursive_size: 1, coverage: 0.0, ..GenerationConfig::default() };
        for problem in create_new_problem(&Feature::base("x"), &ds, &kb, &cfg, 0).into_iter().flatten() {
            for (v, label) in &problem.objects {
                let (pos, neg) = ds.examples().iter().filter(|e| e.value("x") == &FeatureValue::Atom(v.clone()))
                    .fold((0, 0), |(p, n), e| if e.label.is_positive() { (p + 1, n) } else { (p, n + 1) });
                prop_assert_eq!(*label, Label::from_bool(pos > neg));
            }
        }
    }
}

/// Items with an attribute one hop away, where labels follow the attribute
/// with some exceptions.
fn item_task(seed: u64) -> (Dataset, KnowledgeBase) {
    let mut kb = KnowledgeBase::new();
    let mut kind = Relation::new("kindOf", "item", "kind", true);
    let mut link = Relation::new("linkedTo", "item", "hub", true);
    let mut group = Relation::new("groupOf", "hub", "group", true);
    for h in 0..6u64 {
        group
            .insert(
                format!("hub{h}").as_str().into(),
                format!("g{}", (h + seed) % 3).as_str().into(),
            )
            .unwrap();
    }
    let mut examples = Vec::new();
    for i in 0..40u64 {
        let item = format!("item{i}");
        let k = (i * 7 + seed) % 4;
        kind.insert(item.as_str().into(), format!("k{k}").as_str().into())
            .unwrap();
        link.insert(
            item.as_str().into(),
            format!("hub{}", (i + seed) % 6).as_str().into(),
        )
        .unwrap();
        let y = (k < 2) != (i % 11 == seed % 11);
        for copy in 0..1 + (i % 3) {
            examples.push(
                Example::new(format!("e{i}_{copy}"), Label::from_bool(y))
                    .with("item", FeatureValue::atom(item.as_str())),
            );
        }
    }
    kb.add_relation(kind);
    kb.add_relation(link);
    kb.add_relation(group);
    (
        Dataset::new(vec![Column::new("item")], examples).unwrap(),
        kb,
    )
}

/// Identifies a feature by the problems it was induced from, ignoring the
/// trained model.
fn shape(f: &Feature) -> String {
    match f.kind() {
        FeatureKind::Base { column } => column.clone(),
        FeatureKind::Relation {
            inner,
            relation,
            aggregator,
        } => {
            format!("{relation}({}){aggregator:?}", shape(inner))
        }
        FeatureKind::Classifier(c) => format!("cls[{:?}]({})", c.partition, shape(&c.inner)),
    }
}

fn serialized(features: &[Feature]) -> Vec<String> {
    features
        .iter()
        .map(|f| serde_json::to_string(f).unwrap())
        .collect()
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(24))]

    #[test]
    fn lowering_min_size_never_loses_features(seed in 0u64..50, lo in 1usize..20, gap in 0usize..30) {
        let (ds, kb) = item_task(seed);
        let base = [Feature::base("item")];
        let cfg = |min| GenerationConfig { min_recursive_size: min, ..GenerationConfig::default() };
        let emitted = |min| -> BTreeSet<String> {
            generate_features(&ds, &base, &kb, &cfg(min), 2).features.iter().map(shape).collect()
        };
        let strict = emitted(lo + gap);
        let loose = emitted(lo);
        prop_assert!(!loose.is_empty());
        prop_assert!(strict.is_subset(&loose));
    }

    #[test]
    fn generation_is_deterministic(seed in 0u64..50) {
        let (ds, kb) = item_task(seed);
        let base = [Feature::base("item")];
        let cfg = GenerationConfig::default();
        let a = generate_features(&ds, &base, &kb, &cfg, 2);
        let b = generate_features(&ds, &base, &kb, &cfg, 2);
        prop_assert_eq!(serialized(&a.features), serialized(&b.features));
        prop_assert_eq!(a.candidates, b.candidates);
    }
}

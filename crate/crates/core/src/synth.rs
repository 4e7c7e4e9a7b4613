//! Synthetic tasks with known target concepts.
//!
//! [`gen_disorder_scenario`] builds patients labeled positive when they are
//! women whose surname comes from a hot, dry country; surnames in the test
//! set never occur in training, so the concept can only be learned through
//! the knowledge base. [`gen_random_tasks`] builds small item-classification
//! tasks whose labels depend on an attribute one or two relation hops away
//! from the item.

use std::collections::BTreeSet;
use std::fs;
use std::io;
use std::path::Path;

use rand::seq::SliceRandom;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::dataset::{Column, Dataset, Example, FeatureValue, Label};
use crate::kb::{KnowledgeBase, Relation, Value};

#[derive(Copy, Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum TestVariant {
    /// Test surnames are new but come from the training countries.
    UnseenSurnames,
    /// Test surnames come from countries absent from training.
    UnseenCountries,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct ScenarioSpec {
    pub seed: u64,
    pub n_train: usize,
    pub n_test: usize,
    /// Size of each surname pool (training and test pools are disjoint).
    pub n_surnames: usize,
    pub n_countries: usize,
    pub desert_fraction: f64,
    pub female_fraction: f64,
    /// Probability of flipping each label.
    pub noise: f64,
    pub variant: TestVariant,
}

impl Default for ScenarioSpec {
    fn default() -> Self {
        ScenarioSpec {
            seed: 0,
            n_train: 300,
            n_test: 200,
            n_surnames: 128,
            n_countries: 16,
            desert_fraction: 0.5,
            female_fraction: 0.9,
            noise: 0.0,
            variant: TestVariant::UnseenSurnames,
        }
    }
}

#[derive(Debug, Error, PartialEq)]
pub enum ScenarioError {
    #[error("invalid scenario: {0}")]
    Invalid(String),
}

/// Smallest surname pool the scenario accepts: twice the default minimum
/// size of a recursive problem.
pub const MIN_SURNAMES: usize = 16;

impl ScenarioSpec {
    pub fn validate(&self) -> Result<(), ScenarioError> {
        let bad = |m: String| Err(ScenarioError::Invalid(m));
        if self.n_surnames < MIN_SURNAMES {
            return bad(format!(
                "n_surnames must be at least {MIN_SURNAMES}, got {}",
                self.n_surnames
            ));
        }
        if self.n_countries < 4 {
            return bad(format!(
                "n_countries must be at least 4, got {}",
                self.n_countries
            ));
        }
        if self.n_train == 0 || self.n_test == 0 {
            return bad("n_train and n_test must be positive".into());
        }
        for (name, p) in [
            ("desert_fraction", self.desert_fraction),
            ("female_fraction", self.female_fraction),
            ("noise", self.noise),
        ] {
            if !(0.0..=1.0).contains(&p) {
                return bad(format!("{name} must lie in [0, 1], got {p}"));
            }
        }
        Ok(())
    }

    pub fn desert_countries(&self) -> usize {
        (self.desert_fraction * self.n_countries as f64).round() as usize
    }

    /// Share of pool surnames that map to a desert country.
    pub fn desert_surname_fraction(&self) -> f64 {
        let deserts = self.desert_countries();
        let hits = (0..self.n_surnames)
            .filter(|i| i % self.n_countries < deserts)
            .count();
        hits as f64 / self.n_surnames as f64
    }

    /// Expected positive rate at zero noise.
    pub fn expected_positive_rate(&self) -> f64 {
        self.female_fraction * self.desert_surname_fraction()
    }
}

#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct Guard {
    pub column: String,
    pub value: Value,
}

#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct Condition {
    pub relation: String,
    pub accepted: BTreeSet<Value>,
}

/// A labeling rule: optionally require a column value, follow `path` from
/// the entity in `column`, and check every condition on the endpoint.
#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct Oracle {
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub guard: Option<Guard>,
    pub column: String,
    pub path: Vec<String>,
    pub conditions: Vec<Condition>,
}

impl Oracle {
    pub fn label(&self, example: &Example, kb: &KnowledgeBase) -> Label {
        if let Some(g) = &self.guard {
            if example.value(&g.column) != &FeatureValue::Atom(g.value.clone()) {
                return Label::Negative;
            }
        }
        let FeatureValue::Atom(start) = example.value(&self.column) else {
            return Label::Negative;
        };
        let mut at = start.clone();
        for r in &self.path {
            match kb.lookup(r, &at).ok().and_then(|s| s.into_iter().next()) {
                Some(next) => at = next,
                None => return Label::Negative,
            }
        }
        let holds = self.conditions.iter().all(|c| {
            kb.lookup(&c.relation, &at)
                .map(|objs| objs.iter().any(|o| c.accepted.contains(o)))
                .unwrap_or(false)
        });
        Label::from_bool(holds)
    }

    pub fn describe(&self) -> String {
        let mut s = String::new();
        if let Some(g) = &self.guard {
            s.push_str(&format!("{}={} and ", g.column, g.value));
        }
        let mut target = self.column.clone();
        for r in &self.path {
            target = format!("{r}({target})");
        }
        let conds: Vec<String> = self
            .conditions
            .iter()
            .map(|c| {
                let vals: Vec<&str> = c.accepted.iter().map(Value::as_str).collect();
                format!("{}({target}) in {{{}}}", c.relation, vals.join(","))
            })
            .collect();
        s.push_str(&conds.join(" and "));
        s
    }
}

#[derive(Clone, Debug, PartialEq)]
pub struct SynthTask {
    pub name: String,
    pub train: Dataset,
    pub test: Dataset,
    pub kb: KnowledgeBase,
    pub oracle: Oracle,
}

impl SynthTask {
    /// Writes `train.jsonl`, `test.jsonl`, `schema.tsv`, `triples.tsv` and
    /// `oracle.json` into `dir`.
    pub fn write_to(&self, dir: &Path) -> io::Result<()> {
        fs::create_dir_all(dir)?;
        fs::write(dir.join("train.jsonl"), self.train.to_jsonl())?;
        fs::write(dir.join("test.jsonl"), self.test.to_jsonl())?;
        fs::write(dir.join("schema.tsv"), self.kb.schema_tsv())?;
        fs::write(dir.join("triples.tsv"), self.kb.triples_tsv())?;
        let oracle = serde_json::json!({
            "name": self.name,
            "rule": self.oracle.describe(),
            "oracle": self.oracle,
        });
        fs::write(
            dir.join("oracle.json"),
            serde_json::to_string_pretty(&oracle).expect("oracle serializes") + "\n",
        )
    }
}

const CLIMATES: [(&str, &str); 8] = [
    ("hot", "mid"),
    ("temperate", "low"),
    ("hot", "high"),
    ("cold", "low"),
    ("temperate", "mid"),
    ("cold", "high"),
    ("temperate", "high"),
    ("cold", "mid"),
];

fn insert(kb: &mut KnowledgeBase, relation: &str, s: &str, o: &str) {
    kb.relation_mut(relation)
        .expect("relation declared")
        .insert(s.into(), o.into())
        .expect("synthetic relations are consistent");
}

/// Adds `count` countries named `{prefix}NN`; the first `deserts` are hot
/// and dry, the rest cycle through the other climates two at a time.
fn add_countries(
    kb: &mut KnowledgeBase,
    prefix: &str,
    count: usize,
    deserts: usize,
) -> Vec<String> {
    (0..count)
        .map(|i| {
            let name = format!("{prefix}{i:02}");
            let (t, p) = if i < deserts {
                ("hot", "low")
            } else {
                CLIMATES[((i - deserts) / 2) % CLIMATES.len()]
            };
            insert(kb, "avgTemperature", &name, t);
            insert(kb, "precipitation", &name, p);
            name
        })
        .collect()
}

fn add_surnames(
    kb: &mut KnowledgeBase,
    prefix: &str,
    count: usize,
    countries: &[String],
) -> Vec<String> {
    (0..count)
        .map(|i| {
            let name = format!("{prefix}{i:03}");
            insert(kb, "countryOf", &name, &countries[i % countries.len()]);
            name
        })
        .collect()
}

fn patients(
    rng: &mut ChaCha8Rng,
    prefix: &str,
    n: usize,
    surnames: &[String],
    spec: &ScenarioSpec,
    oracle: &Oracle,
    kb: &KnowledgeBase,
) -> Dataset {
    let examples = (0..n)
        .map(|i| {
            let gender = if rng.gen_bool(spec.female_fraction) {
                "f"
            } else {
                "m"
            };
            let surname = surnames.choose(rng).expect("surname pool is not empty");
            let mut ex = Example::new(format!("{prefix}{i:04}"), Label::Negative)
                .with("gender", FeatureValue::atom(gender))
                .with("surname", FeatureValue::atom(surname.as_str()));
            let mut label = oracle.label(&ex, kb);
            if spec.noise > 0.0 && rng.gen_bool(spec.noise) {
                label = Label::from_bool(!label.is_positive());
            }
            ex.label = label;
            ex
        })
        .collect();
    Dataset::new(
        vec![Column::new("gender"), Column::typed("surname", "surname")],
        examples,
    )
    .expect("ids are unique")
}

pub fn disorder_oracle() -> Oracle {
    Oracle {
        guard: Some(Guard {
            column: "gender".into(),
            value: "f".into(),
        }),
        column: "surname".into(),
        path: vec!["countryOf".into()],
        conditions: vec![
            Condition {
                relation: "avgTemperature".into(),
                accepted: ["hot".into()].into(),
            },
            Condition {
                relation: "precipitation".into(),
                accepted: ["low".into()].into(),
            },
        ],
    }
}

/// Patients, a surname/country/climate knowledge base, and the rule that
/// labeled them.
pub fn gen_disorder_scenario(spec: &ScenarioSpec) -> Result<SynthTask, ScenarioError> {
    spec.validate()?;
    let mut rng = ChaCha8Rng::seed_from_u64(spec.seed);
    let mut kb = KnowledgeBase::new();
    kb.add_relation(Relation::new("countryOf", "surname", "country", true));
    kb.add_relation(Relation::new(
        "avgTemperature",
        "country",
        "temperature",
        true,
    ));
    kb.add_relation(Relation::new(
        "precipitation",
        "country",
        "precipitation",
        true,
    ));

    let deserts = spec.desert_countries();
    let train_countries = add_countries(&mut kb, "country", spec.n_countries, deserts);
    let train_surnames = add_surnames(&mut kb, "s", spec.n_surnames, &train_countries);
    let test_countries = match spec.variant {
        TestVariant::UnseenSurnames => train_countries,
        TestVariant::UnseenCountries => {
            add_countries(&mut kb, "farland", spec.n_countries, deserts)
        }
    };
    let test_surnames = add_surnames(&mut kb, "t", spec.n_surnames, &test_countries);

    let oracle = disorder_oracle();
    let train = patients(
        &mut rng,
        "train",
        spec.n_train,
        &train_surnames,
        spec,
        &oracle,
        &kb,
    );
    let test = patients(
        &mut rng,
        "test",
        spec.n_test,
        &test_surnames,
        spec,
        &oracle,
        &kb,
    );
    Ok(SynthTask {
        name: format!("disorder-{}", spec.seed),
        train,
        test,
        kb,
        oracle,
    })
}

const TRAIN_ITEMS: usize = 60;
const TEST_ITEMS: usize = 40;
const HUBS: usize = 12;
const ATTRIBUTE_VALUES: usize = 4;
const TAGS: usize = 6;
const TRAIN_ROWS: usize = 180;
const TEST_ROWS: usize = 120;

/// `count` values of `prefix0..prefix{k-1}`, balanced, in random order.
fn balanced(rng: &mut ChaCha8Rng, prefix: &str, k: usize, count: usize) -> Vec<String> {
    let mut v: Vec<String> = (0..count).map(|i| format!("{prefix}{}", i % k)).collect();
    v.shuffle(rng);
    v
}

fn random_task(rng: &mut ChaCha8Rng, index: usize) -> SynthTask {
    loop {
        let mut kb = KnowledgeBase::new();
        kb.add_relation(Relation::new("linkedTo", "item", "hub", true));
        kb.add_relation(Relation::new("kindOf", "item", "kind", true));
        kb.add_relation(Relation::new("tagged", "item", "tag", false));
        kb.add_relation(Relation::new("groupOf", "hub", "group", true));

        let items: Vec<String> = (0..TRAIN_ITEMS + TEST_ITEMS)
            .map(|i| format!("item{i:03}"))
            .collect();
        let hubs: Vec<String> = (0..HUBS).map(|i| format!("hub{i:02}")).collect();
        let kinds = balanced(rng, "k", ATTRIBUTE_VALUES, items.len());
        for (hub, g) in hubs.iter().zip(balanced(rng, "g", ATTRIBUTE_VALUES, HUBS)) {
            insert(&mut kb, "groupOf", hub, &g);
        }
        // every hub is linked from training items and from test items
        let mut links = balanced(rng, "", HUBS, TRAIN_ITEMS);
        links.extend(balanced(rng, "", HUBS, TEST_ITEMS));
        for (i, item) in items.iter().enumerate() {
            let hub = &hubs[links[i].parse::<usize>().expect("numeric hub index")];
            insert(&mut kb, "linkedTo", item, hub);
            insert(&mut kb, "kindOf", item, &kinds[i]);
            for _ in 0..rng.gen_range(1..=2) {
                let tag = format!("tag{}", rng.gen_range(0..TAGS));
                insert(&mut kb, "tagged", item, &tag);
            }
        }

        let two_hop = rng.gen_bool(0.5);
        let (prefix, relation, path) = if two_hop {
            ("g", "groupOf", vec!["linkedTo".to_string()])
        } else {
            ("k", "kindOf", Vec::new())
        };
        let n_accepted = rng.gen_range(1..=2);
        let mut values: Vec<usize> = (0..ATTRIBUTE_VALUES).collect();
        values.shuffle(rng);
        let oracle = Oracle {
            guard: None,
            column: "item".into(),
            path,
            conditions: vec![Condition {
                relation: relation.into(),
                accepted: values[..n_accepted]
                    .iter()
                    .map(|v| Value::from(format!("{prefix}{v}").as_str()))
                    .collect(),
            }],
        };

        let mut rows = |id: &str, n: usize, pool: &[String]| {
            let examples = (0..n)
                .map(|i| {
                    let item = pool.choose(rng).expect("item pool is not empty");
                    let noise = format!("n{}", rng.gen_range(0..3));
                    let ex = Example::new(format!("{id}{i:04}"), Label::Negative)
                        .with("item", FeatureValue::atom(item.as_str()))
                        .with("noise", FeatureValue::atom(noise.as_str()));
                    Example {
                        label: oracle.label(&ex, &kb),
                        ..ex
                    }
                })
                .collect();
            Dataset::new(
                vec![Column::typed("item", "item"), Column::new("noise")],
                examples,
            )
            .expect("ids are unique")
        };
        let train = rows("train", TRAIN_ROWS, &items[..TRAIN_ITEMS]);
        let test = rows("test", TEST_ROWS, &items[TRAIN_ITEMS..]);
        let balanced_enough = |d: &Dataset| {
            let c = d.label_counts();
            let rate = c.positive as f64 / c.total() as f64;
            (0.3..=0.7).contains(&rate)
        };
        if balanced_enough(&train) && balanced_enough(&test) {
            return SynthTask {
                name: format!("task{index:02}-{}hop", if two_hop { 2 } else { 1 }),
                train,
                test,
                kb,
                oracle,
            };
        }
    }
}

/// `n_tasks` item-classification tasks whose concept is an attribute of the
/// item (one hop) or of the hub it links to (two hops).
pub fn gen_random_tasks(seed: u64, n_tasks: usize) -> Vec<SynthTask> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    (0..n_tasks).map(|i| random_task(&mut rng, i)).collect()
}

#[cfg(test)]
mod tests {
    use super::*;

    fn patient(gender: &str, surname: &str) -> Example {
        Example::new("p", Label::Negative)
            .with("gender", FeatureValue::atom(gender))
            .with("surname", FeatureValue::atom(surname))
    }

    #[test]
    fn oracle_rule() {
        let task = gen_disorder_scenario(&ScenarioSpec::default()).unwrap();
        let kb = &task.kb;
        // country00 is a desert, the last country is not
        assert_eq!(
            kb.lookup("countryOf", &"s000".into()).unwrap(),
            ["country00".into()].into()
        );
        assert_eq!(
            task.oracle.label(&patient("f", "s000"), kb),
            Label::Positive
        );
        assert_eq!(
            task.oracle.label(&patient("m", "s000"), kb),
            Label::Negative
        );
        assert_eq!(
            task.oracle.label(&patient("f", "s015"), kb),
            Label::Negative
        );
        assert_eq!(
            task.oracle.label(&patient("f", "nobody"), kb),
            Label::Negative
        );
    }

    #[test]
    fn labels_follow_oracle_and_pools_are_disjoint() {
        for variant in [TestVariant::UnseenSurnames, TestVariant::UnseenCountries] {
            let spec = ScenarioSpec {
                variant,
                seed: 5,
                ..ScenarioSpec::default()
            };
            let t = gen_disorder_scenario(&spec).unwrap();
            for ex in t.train.examples().iter().chain(t.test.examples()) {
                assert_eq!(t.oracle.label(ex, &t.kb), ex.label);
            }
            let train: BTreeSet<_> = t
                .train
                .examples()
                .iter()
                .map(|e| e.value("surname").clone())
                .collect();
            let test: BTreeSet<_> = t
                .test
                .examples()
                .iter()
                .map(|e| e.value("surname").clone())
                .collect();
            assert!(train.is_disjoint(&test));
            let countries = |d: &Dataset| -> BTreeSet<BTreeSet<Value>> {
                d.examples()
                    .iter()
                    .map(|e| {
                        let FeatureValue::Atom(s) = e.value("surname") else {
                            unreachable!()
                        };
                        t.kb.lookup("countryOf", s).unwrap()
                    })
                    .collect()
            };
            match variant {
                TestVariant::UnseenSurnames => {
                    assert!(countries(&t.test).is_subset(&countries(&t.train)))
                }
                TestVariant::UnseenCountries => {
                    assert!(countries(&t.test).is_disjoint(&countries(&t.train)))
                }
            }
        }
    }

    #[test]
    fn label_balance_matches_expectation() {
        let spec = ScenarioSpec {
            n_train: 4000,
            ..ScenarioSpec::default()
        };
        let p = spec.expected_positive_rate();
        let t = gen_disorder_scenario(&spec).unwrap();
        let desert_surnames = (0..spec.n_surnames)
            .filter(|i| {
                let country =
                    t.kb.lookup("countryOf", &format!("s{i:03}").as_str().into())
                        .unwrap();
                let c = country.iter().next().unwrap();
                t.kb.lookup("avgTemperature", c)
                    .unwrap()
                    .contains(&"hot".into())
                    && t.kb
                        .lookup("precipitation", c)
                        .unwrap()
                        .contains(&"low".into())
            })
            .count();
        assert_eq!(desert_surnames, 64);
        assert!((p - 0.9 * 64.0 / 128.0).abs() < 1e-12);
        let c = t.train.label_counts();
        let rate = c.positive as f64 / c.total() as f64;
        let sd = (p * (1.0 - p) / spec.n_train as f64).sqrt();
        assert!((rate - p).abs() < 4.0 * sd, "{rate} vs {p}");
    }

    #[test]
    fn invalid_specs() {
        let small = ScenarioSpec {
            n_surnames: 10,
            ..ScenarioSpec::default()
        };
        assert!(gen_disorder_scenario(&small).is_err());
        let few = ScenarioSpec {
            n_countries: 3,
            ..ScenarioSpec::default()
        };
        assert!(gen_disorder_scenario(&few).is_err());
        let odd = ScenarioSpec {
            noise: 1.5,
            ..ScenarioSpec::default()
        };
        assert!(gen_disorder_scenario(&odd).is_err());
    }

    #[test]
    fn noise_flips_labels() {
        let spec = ScenarioSpec {
            noise: 0.2,
            ..ScenarioSpec::default()
        };
        let t = gen_disorder_scenario(&spec).unwrap();
        let flips = t
            .train
            .examples()
            .iter()
            .filter(|e| t.oracle.label(e, &t.kb) != e.label)
            .count();
        assert!((30..=90).contains(&flips), "{flips}");
    }

    #[test]
    fn same_seed_same_scenario() {
        let a = gen_disorder_scenario(&ScenarioSpec::default()).unwrap();
        let b = gen_disorder_scenario(&ScenarioSpec::default()).unwrap();
        assert_eq!(a.train.to_jsonl(), b.train.to_jsonl());
        assert_eq!(a.kb.triples_tsv(), b.kb.triples_tsv());
    }

    #[test]
    fn random_tasks_are_consistent_and_balanced() {
        let tasks = gen_random_tasks(11, 6);
        assert_eq!(tasks.len(), 6);
        for t in &tasks {
            for d in [&t.train, &t.test] {
                let c = d.label_counts();
                assert!(c.positive > 0 && c.negative > 0);
                for ex in d.examples() {
                    assert_eq!(t.oracle.label(ex, &t.kb), ex.label);
                }
            }
            let train: BTreeSet<_> = t
                .train
                .examples()
                .iter()
                .map(|e| e.value("item").clone())
                .collect();
            assert!(t
                .test
                .examples()
                .iter()
                .all(|e| !train.contains(e.value("item"))));
        }
        let again = gen_random_tasks(11, 6);
        for (a, b) in tasks.iter().zip(&again) {
            assert_eq!(a.train.to_jsonl(), b.train.to_jsonl());
            assert_eq!(a.kb.triples_tsv(), b.kb.triples_tsv());
        }
    }
}

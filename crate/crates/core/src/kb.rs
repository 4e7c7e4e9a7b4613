//! In-memory store of typed binary relations.
//!
//! A [`KnowledgeBase`] is loaded once from a schema file and a triples file
//! and is immutable afterwards. Every relation keeps a forward index from
//! subject to the sorted set of its objects, so [`KnowledgeBase::lookup`] is a
//! map probe and all iteration happens in lexicographic order.

use std::collections::{BTreeMap, BTreeSet};
use std::fmt;

use serde::{Deserialize, Serialize};
use thiserror::Error;

/// An opaque, non-empty entity token such as `poland` or `hot`.
#[derive(Clone, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(try_from = "String", into = "String")]
pub struct Value(String);

#[derive(Debug, Error, PartialEq, Eq)]
#[error("values must be non-empty tokens")]
pub struct EmptyValue;

impl Value {
    pub fn new(token: impl Into<String>) -> Result<Self, EmptyValue> {
        let token = token.into();
        if token.is_empty() {
            return Err(EmptyValue);
        }
        Ok(Value(token))
    }

    pub fn as_str(&self) -> &str {
        &self.0
    }
}

impl TryFrom<String> for Value {
    type Error = EmptyValue;

    fn try_from(s: String) -> Result<Self, Self::Error> {
        Value::new(s)
    }
}

impl From<Value> for String {
    fn from(v: Value) -> String {
        v.0
    }
}

/// Panics on the empty string; meant for literals.
impl From<&str> for Value {
    fn from(s: &str) -> Self {
        Value::new(s).expect("empty value literal")
    }
}

impl fmt::Debug for Value {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{:?}", self.0)
    }
}

impl fmt::Display for Value {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(&self.0)
    }
}

#[derive(Debug, Error, PartialEq, Eq)]
pub enum KbError {
    #[error("{source_name} line {line}: {message}")]
    Malformed {
        source_name: &'static str,
        line: usize,
        message: String,
    },
    #[error("schema line {line}: relation `{name}` declared twice")]
    DuplicateRelation { name: String, line: usize },
    #[error("triples line {line}: undeclared relation `{name}`")]
    UndeclaredRelation { name: String, line: usize },
    #[error("triples line {line}: function `{relation}` maps `{subject}` to both `{first}` and `{second}`")]
    FunctionViolation {
        relation: String,
        subject: String,
        first: String,
        second: String,
        line: usize,
    },
    #[error("undeclared relation `{0}`")]
    UnknownRelation(String),
}

/// A named binary relation `departure_type x codomain_type`.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct Relation {
    name: String,
    departure_type: String,
    codomain_type: String,
    is_function: bool,
    index: BTreeMap<Value, BTreeSet<Value>>,
}

impl Relation {
    pub fn new(
        name: impl Into<String>,
        departure_type: impl Into<String>,
        codomain_type: impl Into<String>,
        is_function: bool,
    ) -> Self {
        Relation {
            name: name.into(),
            departure_type: departure_type.into(),
            codomain_type: codomain_type.into(),
            is_function,
            index: BTreeMap::new(),
        }
    }

    pub fn name(&self) -> &str {
        &self.name
    }

    pub fn departure_type(&self) -> &str {
        &self.departure_type
    }

    pub fn codomain_type(&self) -> &str {
        &self.codomain_type
    }

    pub fn is_function(&self) -> bool {
        self.is_function
    }

    /// Inserts a pair. Duplicates are absorbed. For a function relation a
    /// second, different object for the same subject is rejected and the
    /// existing object is returned as the error.
    pub fn insert(&mut self, subject: Value, object: Value) -> Result<(), Value> {
        let objects = self.index.entry(subject).or_default();
        if self.is_function {
            if let Some(existing) = objects.iter().next() {
                if *existing != object {
                    return Err(existing.clone());
                }
            }
        }
        objects.insert(object);
        Ok(())
    }

    pub fn objects(&self, subject: &Value) -> Option<&BTreeSet<Value>> {
        self.index.get(subject)
    }

    pub fn has_subject(&self, subject: &Value) -> bool {
        self.index.contains_key(subject)
    }

    pub fn subjects(&self) -> impl Iterator<Item = &Value> {
        self.index.keys()
    }

    /// All `(subject, object)` pairs in lexicographic order.
    pub fn pairs(&self) -> impl Iterator<Item = (&Value, &Value)> {
        self.index
            .iter()
            .flat_map(|(s, objs)| objs.iter().map(move |o| (s, o)))
    }

    pub fn len(&self) -> usize {
        self.index.values().map(BTreeSet::len).sum()
    }

    pub fn is_empty(&self) -> bool {
        self.index.is_empty()
    }
}

/// A set of relations addressed by unique name.
#[derive(Clone, Debug, Default, PartialEq, Eq)]
pub struct KnowledgeBase {
    relations: BTreeMap<String, Relation>,
}

fn malformed(source_name: &'static str, line: usize, message: impl Into<String>) -> KbError {
    KbError::Malformed {
        source_name,
        line,
        message: message.into(),
    }
}

/// Non-comment, non-blank lines with their 1-based line numbers.
fn content_lines(text: &str) -> impl Iterator<Item = (usize, &str)> {
    text.lines()
        .enumerate()
        .map(|(i, l)| (i + 1, l.trim_end_matches('\r')))
        .filter(|(_, l)| !l.trim().is_empty() && !l.starts_with('#'))
}

fn token(source_name: &'static str, line: usize, raw: &str) -> Result<Value, KbError> {
    Value::new(raw.trim()).map_err(|_| malformed(source_name, line, "empty field"))
}

impl KnowledgeBase {
    pub fn new() -> Self {
        Self::default()
    }

    /// Parses the tab-separated schema and triples formats.
    ///
    /// Schema lines are `name<TAB>departure_type<TAB>codomain_type<TAB>fn|rel`,
    /// triple lines are `relation<TAB>subject<TAB>object`. Lines starting with
    /// `#` and blank lines are skipped in both.
    pub fn load(schema: &str, triples: &str) -> Result<Self, KbError> {
        let mut kb = KnowledgeBase::new();
        for (line, text) in content_lines(schema) {
            let fields: Vec<&str> = text.split('\t').collect();
            if fields.len() != 4 {
                return Err(malformed(
                    "schema",
                    line,
                    format!("expected 4 tab-separated fields, found {}", fields.len()),
                ));
            }
            let is_function = match fields[3].trim() {
                "fn" => true,
                "rel" => false,
                other => {
                    return Err(malformed(
                        "schema",
                        line,
                        format!("expected `fn` or `rel`, found `{other}`"),
                    ))
                }
            };
            let name = fields[0].trim();
            if name.is_empty() || fields[1].trim().is_empty() || fields[2].trim().is_empty() {
                return Err(malformed("schema", line, "empty field"));
            }
            if kb.relations.contains_key(name) {
                return Err(KbError::DuplicateRelation {
                    name: name.to_string(),
                    line,
                });
            }
            kb.add_relation(Relation::new(
                name,
                fields[1].trim(),
                fields[2].trim(),
                is_function,
            ));
        }

        for (line, text) in content_lines(triples) {
            let fields: Vec<&str> = text.split('\t').collect();
            if fields.len() != 3 {
                return Err(malformed(
                    "triples",
                    line,
                    format!("expected 3 tab-separated fields, found {}", fields.len()),
                ));
            }
            let name = fields[0].trim();
            let subject = token("triples", line, fields[1])?;
            let object = token("triples", line, fields[2])?;
            let relation =
                kb.relations
                    .get_mut(name)
                    .ok_or_else(|| KbError::UndeclaredRelation {
                        name: name.to_string(),
                        line,
                    })?;
            if let Err(first) = relation.insert(subject.clone(), object.clone()) {
                return Err(KbError::FunctionViolation {
                    relation: name.to_string(),
                    subject: subject.to_string(),
                    first: first.to_string(),
                    second: object.to_string(),
                    line,
                });
            }
        }
        Ok(kb)
    }

    /// Adds or replaces a relation.
    pub fn add_relation(&mut self, relation: Relation) {
        self.relations.insert(relation.name.clone(), relation);
    }

    pub fn relation(&self, name: &str) -> Option<&Relation> {
        self.relations.get(name)
    }

    pub fn relation_mut(&mut self, name: &str) -> Option<&mut Relation> {
        self.relations.get_mut(name)
    }

    /// Relations in name order.
    pub fn relations(&self) -> impl Iterator<Item = &Relation> {
        self.relations.values()
    }

    /// Objects paired with `subject` under `relation`. An unknown subject
    /// yields the empty set.
    pub fn lookup(&self, relation: &str, subject: &Value) -> Result<BTreeSet<Value>, KbError> {
        let rel = self
            .relations
            .get(relation)
            .ok_or_else(|| KbError::UnknownRelation(relation.to_string()))?;
        Ok(rel.objects(subject).cloned().unwrap_or_default())
    }

    /// Relations whose subject set covers at least `coverage` of `values`,
    /// in name order.
    pub fn applicable_relations<'a, I>(&self, values: I, coverage: f64) -> Vec<&Relation>
    where
        I: IntoIterator<Item = &'a Value>,
        I::IntoIter: Clone,
    {
        let values = values.into_iter();
        let total = values.clone().count();
        if total == 0 {
            return Vec::new();
        }
        self.relations
            .values()
            .filter(|rel| {
                let covered = values.clone().filter(|v| rel.has_subject(v)).count();
                covered as f64 / total as f64 >= coverage
            })
            .collect()
    }

    /// True if `value` is a subject of some relation departing from `type_name`.
    pub fn has_type(&self, value: &Value, type_name: &str) -> bool {
        self.relations
            .values()
            .any(|r| r.departure_type == type_name && r.has_subject(value))
    }

    /// Distinct departure types, sorted.
    pub fn departure_types(&self) -> BTreeSet<&str> {
        self.relations
            .values()
            .map(|r| r.departure_type.as_str())
            .collect()
    }

    pub fn schema_tsv(&self) -> String {
        let mut out = String::new();
        for r in self.relations.values() {
            let kind = if r.is_function { "fn" } else { "rel" };
            out.push_str(&format!(
                "{}\t{}\t{}\t{}\n",
                r.name, r.departure_type, r.codomain_type, kind
            ));
        }
        out
    }

    pub fn triples_tsv(&self) -> String {
        let mut out = String::new();
        for r in self.relations.values() {
            for (s, o) in r.pairs() {
                out.push_str(&format!("{}\t{}\t{}\n", r.name, s, o));
            }
        }
        out
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    const SCHEMA: &str = "countryOf\tsurname\tcountry\tfn\nborderOf\tcountry\tcountry\trel\n";

    fn kb() -> KnowledgeBase {
        KnowledgeBase::load(
            SCHEMA,
            "# comment\ncountryOf\tnowak\tpoland\ncountryOf\thaddad\tegypt\n\
             borderOf\tegypt\tlibya\nborderOf\tegypt\tsudan\n",
        )
        .unwrap()
    }

    #[test]
    fn single_pair_read_back() {
        let kb = KnowledgeBase::load(
            "countryOf\tsurname\tcountry\tfn\n",
            "countryOf\tnowak\tpoland\n",
        )
        .unwrap();
        assert_eq!(kb.relations().count(), 1);
        let rel = kb.relation("countryOf").unwrap();
        assert_eq!(rel.len(), 1);
        assert!(rel.is_function());
        assert_eq!(
            kb.lookup("countryOf", &"nowak".into()).unwrap(),
            BTreeSet::from(["poland".into()])
        );
    }

    #[test]
    fn undeclared_relation_in_triples() {
        let err = KnowledgeBase::load(SCHEMA, "climate\tegypt\thot\n").unwrap_err();
        assert_eq!(
            err,
            KbError::UndeclaredRelation {
                name: "climate".into(),
                line: 1
            }
        );
        assert!(err.to_string().contains("undeclared relation"));
    }

    #[test]
    fn empty_triples_keeps_declared_relations() {
        let kb = KnowledgeBase::load(SCHEMA, "").unwrap();
        assert_eq!(kb.relations().count(), 2);
        assert!(kb.relations().all(Relation::is_empty));
    }

    #[test]
    fn load_errors_carry_line_numbers() {
        let err = KnowledgeBase::load("a\tx\ty\tfn\n\nb\tx\n", "").unwrap_err();
        assert!(matches!(err, KbError::Malformed { line: 3, .. }), "{err:?}");

        let err = KnowledgeBase::load("a\tx\ty\tfn\na\tx\tz\trel\n", "").unwrap_err();
        assert!(matches!(err, KbError::DuplicateRelation { line: 2, .. }));

        let err = KnowledgeBase::load(
            SCHEMA,
            "countryOf\tnowak\tpoland\ncountryOf\tnowak\tegypt\n",
        )
        .unwrap_err();
        assert!(matches!(err, KbError::FunctionViolation { line: 2, .. }));

        let err = KnowledgeBase::load("a\tx\ty\tmaybe\n", "").unwrap_err();
        assert!(matches!(err, KbError::Malformed { line: 1, .. }));

        let err = KnowledgeBase::load(SCHEMA, "countryOf\t\tpoland\n").unwrap_err();
        assert!(matches!(err, KbError::Malformed { line: 1, .. }));
    }

    #[test]
    fn repeated_function_pair_is_not_a_violation() {
        let kb = KnowledgeBase::load(
            SCHEMA,
            "countryOf\tnowak\tpoland\ncountryOf\tnowak\tpoland\n",
        )
        .unwrap();
        assert_eq!(kb.relation("countryOf").unwrap().len(), 1);
    }

    #[test]
    fn lookup_cases() {
        let kb = kb();
        assert_eq!(
            kb.lookup("countryOf", &"nowak".into()).unwrap(),
            BTreeSet::from(["poland".into()])
        );
        assert!(kb
            .lookup("countryOf", &"zzz-unseen".into())
            .unwrap()
            .is_empty());
        assert_eq!(
            kb.lookup("borderOf", &"egypt".into()).unwrap(),
            BTreeSet::from(["libya".into(), "sudan".into()])
        );
        assert_eq!(
            kb.lookup("nope", &"egypt".into()),
            Err(KbError::UnknownRelation("nope".into()))
        );
    }

    #[test]
    fn applicable_relations_respects_threshold() {
        let kb = kb();
        let names = |vals: &[Value], t: f64| -> Vec<String> {
            kb.applicable_relations(vals, t)
                .into_iter()
                .map(|r| r.name().to_string())
                .collect()
        };
        let both = ["nowak".into(), "haddad".into()];
        let half = ["nowak".into(), "unknown".into()];
        assert_eq!(names(&both, 1.0), ["countryOf"]);
        assert!(names(&half, 1.0).is_empty());
        assert_eq!(names(&half, 0.5), ["countryOf"]);
        assert!(names(&[], 0.0).is_empty());
    }

    #[test]
    fn types_come_from_departure_sets() {
        let kb = kb();
        assert!(kb.has_type(&"egypt".into(), "country"));
        assert!(!kb.has_type(&"egypt".into(), "surname"));
        assert_eq!(kb.departure_types(), BTreeSet::from(["country", "surname"]));
    }

    #[test]
    fn tsv_round_trip() {
        let kb = kb();
        let again = KnowledgeBase::load(&kb.schema_tsv(), &kb.triples_tsv()).unwrap();
        assert_eq!(kb, again);
    }

    #[test]
    fn empty_value_rejected() {
        assert_eq!(Value::new(""), Err(EmptyValue));
        assert!(serde_json::from_str::<Value>("\"\"").is_err());
    }
}
